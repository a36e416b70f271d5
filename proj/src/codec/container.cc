#include "adcgs/codec/container.h"

#include <cmath>
#include <cstring>

#include "adcgs/codec/octree.h"
#include "adcgs/codec/symbols.h"

namespace adcgs {

std::string section_name(std::uint8_t id) {
  switch (id) {
    case section::kPositions: return "positions";
    case section::kHyperprior: return "hyperprior";
    case section::kFv: return "f_v";
    case section::kCovariance: return "cov";
    case section::kColor: return "color";
    case section::kNetworks: return "networks";
    default: break;
  }
  if (id >= section::kFgFirst && id < section::kNetworks) {
    return "f_g." + std::to_string(id - section::kFgFirst + 1);
  }
  return "unknown." + std::to_string(id);
}

namespace {

constexpr char kMagic[4] = {'A', 'D', 'C', 'G'};
constexpr std::size_t kFixedHeader = 4 + 2 + 2 + 5 * 4 + 4 + 6 * 4 + 4;
constexpr std::size_t kTableEntry = 1 + 8 + 8 + 4;

std::uint64_t fnv1a(std::span<const float> v, std::uint64_t h = 1469598103934665603ull) {
  for (float f : v) {
    std::uint32_t b;
    std::memcpy(&b, &f, 4);
    for (int i = 0; i < 4; ++i) {
      h ^= (b >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::uint64_t params_hash(const Tensor<float>& mu, const Tensor<float>& sigma) {
  return fnv1a(sigma.values(), fnv1a(mu.values()));
}

std::uint32_t symbols_crc(const std::vector<std::int32_t>& q) {
  io::ByteWriter w;
  for (std::int32_t v : q) w.i32(v);
  return io::crc32(w.data());
}

std::int32_t lattice_index(float value, float step) {
  return static_cast<std::int32_t>(std::nearbyint(value / step));
}

// Feature payload: u32 count, u32 crc32 of the symbols, range-coded bytes.
std::vector<std::uint8_t> pack_symbols(const std::vector<std::int32_t>& q,
                                       const std::function<SymbolCdf(std::size_t)>& cdf,
                                       std::size_t* coded_bytes) {
  RangeEncoder enc;
  for (std::size_t i = 0; i < q.size(); ++i) cdf(i).encode(enc, q[i]);
  const auto coded = enc.finish();
  if (coded_bytes) *coded_bytes = coded.size();
  io::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(q.size()));
  w.u32(symbols_crc(q));
  w.bytes(coded);
  return w.take();
}

std::vector<std::int32_t> unpack_symbols(std::span<const std::uint8_t> payload, std::size_t expected,
                                         const std::function<SymbolCdf(std::size_t)>& cdf,
                                         const std::string& what) {
  io::ByteReader r(payload);
  const std::uint32_t count = r.u32();
  const std::uint32_t crc = r.u32();
  if (count != expected) {
    throw DecodeError(DecodeFailure::kCorrupt, what + ": symbol count " + std::to_string(count) +
                                                   " does not match " + std::to_string(expected));
  }
  RangeDecoder dec(r.bytes(r.remaining()));
  std::vector<std::int32_t> q(count);
  for (std::size_t i = 0; i < count; ++i) q[i] = cdf(i).decode(dec);
  if (symbols_crc(q) != crc) throw DecodeError(DecodeFailure::kChecksum, what + ": symbol checksum mismatch");
  return q;
}

SymbolCdf hyper_cdf(const EntropyModel<float>& em, std::size_t col) {
  const float scale = std::exp(em.hyper_log_scale[col]);
  return SymbolCdf::logistic(em.hyper_loc[col], scale);
}

struct StreamCoding {
  const Tensor<float>* mu;
  const Tensor<float>* sigma;
  const Tensor<float>* step;
  std::size_t col0 = 0, cols = 0;  // column window inside the full-width tensors
  SymbolCdf operator()(std::size_t i) const {
    const std::size_t r = i / cols, c = i % cols;
    const std::size_t full = step->cols();
    return SymbolCdf::gaussian(mu->values()[r * cols + c], sigma->values()[r * cols + c],
                               step->values()[r * full + col0 + c]);
  }
};

Tensor<float> dequantize(const std::vector<std::int32_t>& q, const Tensor<float>& step, std::size_t col0,
                         std::size_t cols) {
  const std::size_t rows = step.rows(), full = step.cols();
  Tensor<float> out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      out.at(r, c) = static_cast<float>(q[r * cols + c]) * step[r * full + col0 + c];
  return out;
}

double sum_cols(const Tensor<float>& bits, std::size_t col0, std::size_t cols) {
  double s = 0;
  for (std::size_t r = 0; r < bits.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) s += bits.at(r, col0 + c);
  return s;
}

Tensor<float> column_block(const Tensor<float>& t, std::size_t col0, std::size_t cols) {
  Tensor<float> out({t.rows(), cols});
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) = t.at(r, col0 + c);
  return out;
}

}  // namespace

EncodeResult encode_model(const Model& model) {
  EncodeResult res;
  res.quantized = model;
  Model& m = res.quantized;
  prepare_for_coding(m);
  const ModelConfig& cfg = m.config();
  const std::size_t A = m.anchor_count(), M = cfg.M, cw = cfg.chunk_width();
  if (A == 0) throw ContractError("cannot encode a model without anchors");
  AnchorTable<float>& a = m.canonical.anchors;

  std::vector<Vec3> pos(A);
  for (std::size_t i = 0; i < A; ++i)
    for (int c = 0; c < 3; ++c) pos[i][c] = a.position.at(i, c);
  const std::vector<VoxelKey> keys = keys_on_grid(pos, cfg.voxel_size);

  Tape<float> tape(false);
  auto q = quantize_anchors(tape, m.entropy, anchor_params(tape, a), M, QuantMode::kTest, nullptr);
  res.rate = rate_breakdown(q);

  std::vector<std::pair<std::uint8_t, std::vector<std::uint8_t>>> payloads;
  payloads.emplace_back(section::kPositions, encode_positions(keys));

  auto add_estimate = [&](std::uint8_t id, double bits, std::size_t n, std::size_t coded) {
    res.estimates.push_back({id, bits, n, coded});
  };

  {
    const Tensor<float>& eta = q.eta.value();
    std::vector<std::int32_t> sym(eta.size());
    for (std::size_t i = 0; i < sym.size(); ++i) sym[i] = static_cast<std::int32_t>(eta[i]);
    const std::size_t w = eta.cols();
    std::size_t coded = 0;
    payloads.emplace_back(section::kHyperprior,
                          pack_symbols(sym, [&](std::size_t i) { return hyper_cdf(m.entropy, i % w); }, &coded));
    add_estimate(section::kHyperprior, res.rate.hyperprior, sym.size(), coded);
  }

  auto code_stream = [&](std::uint8_t id, Stream s, const Tensor<float>& hat, const Tensor<float>& mu,
                         const Tensor<float>& sigma, std::size_t col0, std::size_t cols) {
    const auto si = static_cast<std::size_t>(s);
    const Tensor<float>& step = q.step[si].value();
    std::vector<std::int32_t> sym(hat.rows() * cols);
    for (std::size_t r = 0; r < hat.rows(); ++r)
      for (std::size_t c = 0; c < cols; ++c)
        sym[r * cols + c] = lattice_index(hat.at(r, col0 + c), step.at(r, col0 + c));
    std::size_t coded = 0;
    payloads.emplace_back(id, pack_symbols(sym, StreamCoding{&mu, &sigma, &step, col0, cols}, &coded));
    add_estimate(id, sum_cols(q.bits[si].value(), col0, cols), sym.size(), coded);
  };
  const auto& pv = q.params[static_cast<std::size_t>(Stream::kFv)];
  code_stream(section::kFv, Stream::kFv, q.f_v.value(), pv.mu.value(), pv.sigma.value(), 0, cfg.n_v);
  const auto& pc = q.params[static_cast<std::size_t>(Stream::kCov)];
  code_stream(section::kCovariance, Stream::kCov, q.covariance.value(), pc.mu.value(), pc.sigma.value(), 0, 6);
  const auto& pk = q.params[static_cast<std::size_t>(Stream::kColor)];
  code_stream(section::kColor, Stream::kColor, q.color.value(), pk.mu.value(), pk.sigma.value(), 0, 3);
  const auto& pg = q.params[static_cast<std::size_t>(Stream::kFg)];
  for (std::size_t ch = 0; ch < M; ++ch) {
    const Tensor<float> mu = column_block(pg.mu.value(), ch * cw, cw);
    const Tensor<float> sigma = column_block(pg.sigma.value(), ch * cw, cw);
    res.transcript.push_back(params_hash(mu, sigma));
    code_stream(static_cast<std::uint8_t>(section::kFgFirst + ch), Stream::kFg, q.f_g.value(), mu, sigma,
                ch * cw, cw);
  }

  a.f_v = q.f_v.value();
  a.f_g = q.f_g.value();
  a.covariance = q.covariance.value();
  a.color = q.color.value();

  {
    io::ByteWriter w;
    network_checkpoint(m, false).write(w);
    payloads.emplace_back(section::kNetworks, w.take());
  }

  io::ByteWriter w;
  w.bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.u16(kContainerVersion);
  w.u16(static_cast<std::uint16_t>((m.coarse ? 1 : 0) | (m.fine ? 2 : 0)));
  for (std::size_t v : {A, cfg.K, cfg.n_v, cfg.n_g, M}) w.u32(static_cast<std::uint32_t>(v));
  w.f32(static_cast<float>(cfg.voxel_size));
  for (double b : m.meta.bbox) w.f32(static_cast<float>(b));
  w.u32(static_cast<std::uint32_t>(payloads.size()));
  std::uint64_t offset = kFixedHeader + kTableEntry * payloads.size();
  for (const auto& [id, data] : payloads) {
    w.u8(id);
    w.u64(offset);
    w.u64(data.size());
    w.u32(io::crc32(data));
    offset += data.size();
  }
  for (const auto& [id, data] : payloads) w.bytes(data);
  res.bytes = w.take();
  return res;
}

ContainerHeader inspect_container(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  auto magic = r.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw DecodeError(DecodeFailure::kBadMagic, "not an ADCG file");
  ContainerHeader h;
  h.version = r.u16();
  if (h.version != kContainerVersion) {
    throw DecodeError(DecodeFailure::kBadVersion, "unsupported container version " + std::to_string(h.version));
  }
  h.flags = r.u16();
  h.anchors = r.u32();
  h.K = r.u32();
  h.n_v = r.u32();
  h.n_g = r.u32();
  h.M = r.u32();
  h.voxel_size = r.f32();
  for (float& b : h.bbox) b = r.f32();
  const std::uint32_t n = r.u32();
  if (n > 256) throw DecodeError(DecodeFailure::kCorrupt, "implausible section count");
  for (std::uint32_t i = 0; i < n; ++i) {
    SectionInfo s;
    s.id = r.u8();
    s.offset = r.u64();
    s.length = r.u64();
    s.crc = r.u32();
    h.sections.push_back(s);
  }
  h.header_bytes = r.position();
  for (const SectionInfo& s : h.sections) {
    if (s.offset > bytes.size() || s.length > bytes.size() - s.offset) {
      throw DecodeError(DecodeFailure::kTruncated, "section " + section_name(s.id) + " runs past the end of the file");
    }
    if (io::crc32(bytes.subspan(s.offset, s.length)) != s.crc) {
      throw DecodeError(DecodeFailure::kChecksum, "section " + section_name(s.id) + " fails its checksum");
    }
  }
  return h;
}

DecodeResult decode_model(std::span<const std::uint8_t> bytes) {
  DecodeResult res;
  res.header = inspect_container(bytes);
  const ContainerHeader& h = res.header;
  auto payload = [&](std::uint8_t id) {
    for (const SectionInfo& s : h.sections) {
      if (s.id == id) return bytes.subspan(s.offset, s.length);
    }
    throw DecodeError(DecodeFailure::kCorrupt, "missing section " + section_name(id));
  };

  {
    io::ByteReader r(payload(section::kNetworks));
    try {
      res.model = model_from_checkpoint(Checkpoint::read(r));
    } catch (const DecodeError&) {
      throw;
    } catch (const Error& e) {
      throw DecodeError(DecodeFailure::kCorrupt, std::string("network section: ") + e.what());
    }
  }
  Model& m = res.model;
  const ModelConfig& cfg = m.config();
  if (cfg.K != h.K || cfg.n_v != h.n_v || cfg.n_g != h.n_g || cfg.M != h.M) {
    throw DecodeError(DecodeFailure::kCorrupt, "header dimensions disagree with the network section");
  }
  m.coarse = (h.flags & 1) != 0;
  m.fine = (h.flags & 2) != 0;
  const std::size_t A = h.anchors, M = cfg.M, cw = cfg.chunk_width();

  const std::vector<VoxelKey> keys = decode_positions(payload(section::kPositions));
  if (keys.size() != A) throw DecodeError(DecodeFailure::kCorrupt, "position count disagrees with the header");
  AnchorTable<float> a(A, cfg);
  for (std::size_t i = 0; i < A; ++i) {
    const Vec3 c = voxel_center(keys[i], cfg.voxel_size);
    for (int k = 0; k < 3; ++k) a.position.at(i, k) = static_cast<float>(c[k]);
  }

  EntropyModel<float>& em = m.entropy;
  Tape<float> tape(false);
  const std::size_t hd = cfg.hyper_dim;
  const auto eta_sym = unpack_symbols(payload(section::kHyperprior), A * hd,
                                      [&](std::size_t i) { return hyper_cdf(em, i % hd); }, "hyperprior");
  Tensor<float> eta({A, hd});
  for (std::size_t i = 0; i < eta.size(); ++i) eta[i] = static_cast<float>(eta_sym[i]);
  Var<float> eta_v = tape.constant(eta);

  auto decode_stream = [&](std::uint8_t id, Stream s, Var<float> context, const GaussianParams<float>& p,
                           std::size_t cols) {
    Var<float> step = adaptive_step(tape, em, s, context);
    const auto sym = unpack_symbols(payload(id), A * cols,
                                    StreamCoding{&p.mu.value(), &p.sigma.value(), &step.value(), 0, cols},
                                    section_name(id));
    return dequantize(sym, step.value(), 0, cols);
  };
  a.f_v = decode_stream(section::kFv, Stream::kFv, eta_v, fv_params(tape, em, eta_v), cfg.n_v);
  Var<float> fv = tape.constant(a.f_v);
  a.covariance = decode_stream(section::kCovariance, Stream::kCov, fv, cov_params(tape, em, fv), 6);
  a.color = decode_stream(section::kColor, Stream::kColor, fv, color_params(tape, em, fv), 3);

  Var<float> step_g = adaptive_step(tape, em, Stream::kFg, fv);
  std::vector<Var<float>> chunks;
  for (std::size_t ch = 1; ch <= M; ++ch) {
    auto p = chunk_context_params(tape, em, fv, chunks, ch, M);
    res.transcript.push_back(params_hash(p.mu.value(), p.sigma.value()));
    const std::uint8_t id = static_cast<std::uint8_t>(section::kFgFirst + ch - 1);
    const auto sym = unpack_symbols(
        payload(id), A * cw, StreamCoding{&p.mu.value(), &p.sigma.value(), &step_g.value(), (ch - 1) * cw, cw},
        section_name(id));
    Tensor<float> chunk = dequantize(sym, step_g.value(), (ch - 1) * cw, cw);
    for (std::size_t r = 0; r < A; ++r)
      for (std::size_t c = 0; c < cw; ++c) a.f_g.at(r, (ch - 1) * cw + c) = chunk.at(r, c);
    chunks.push_back(tape.constant(std::move(chunk)));
  }
  m.canonical.anchors = std::move(a);
  return res;
}

}  // namespace adcgs
