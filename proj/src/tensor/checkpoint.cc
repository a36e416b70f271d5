#include "adcgs/tensor/checkpoint.h"

namespace adcgs {

const Checkpoint::Entry& Checkpoint::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw DataError("checkpoint has no tensor '" + name + "'");
  return it->second;
}

double Checkpoint::scalar(const std::string& name, std::size_t i) const {
  const Entry& e = entry(name);
  if (i >= e.values.size()) throw DataError("checkpoint tensor '" + name + "' too short");
  return e.values[i];
}

void Checkpoint::put_entry(const std::string& name, Entry e) {
  if (!entries_.count(name)) order_.push_back(name);
  entries_[name] = std::move(e);
}

void Checkpoint::write(io::ByteWriter& w) const {
  w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("ADCT"), 4));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(order_.size()));
  for (const std::string& name : order_) {
    const Entry& e = entries_.at(name);
    w.str(name);
    w.u8(static_cast<std::uint8_t>(e.dtype));
    w.u32(static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : e.values) {
      if (e.dtype == DType::kF32) {
        w.f32(static_cast<float>(v));
      } else {
        w.f64(v);
      }
    }
  }
}

Checkpoint Checkpoint::read(io::ByteReader& r) {
  auto magic = r.bytes(4);
  if (std::string(magic.begin(), magic.end()) != "ADCT") {
    throw DecodeError(DecodeFailure::kBadMagic, "not a checkpoint (magic mismatch)");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DecodeError(DecodeFailure::kBadVersion,
                      "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    Entry e;
    const std::uint8_t dt = r.u8();
    if (dt > 1) throw DecodeError(DecodeFailure::kCorrupt, "bad dtype in checkpoint");
    e.dtype = static_cast<DType>(dt);
    const std::uint32_t rank = r.u32();
    if (rank > 8) throw DecodeError(DecodeFailure::kCorrupt, "bad rank in checkpoint");
    for (std::uint32_t d = 0; d < rank; ++d) e.shape.push_back(r.u32());
    const std::size_t n = shape_size(e.shape);
    const std::size_t bytes = n * (e.dtype == DType::kF32 ? 4 : 8);
    if (bytes > r.remaining()) throw DecodeError(DecodeFailure::kTruncated, "checkpoint truncated");
    e.values.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      e.values[j] = e.dtype == DType::kF32 ? static_cast<double>(r.f32()) : r.f64();
    }
    c.put_entry(name, std::move(e));
  }
  return c;
}

}  // namespace adcgs
