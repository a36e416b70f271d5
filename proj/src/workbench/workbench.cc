#include "adcgs/workbench/workbench.h"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "adcgs/codec/container.h"
#include "adcgs/train/metrics.h"

namespace adcgs {

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "eval") return Split::kEval;
  throw ConfigError("unknown split '" + name + "' (expected train or eval)");
}

EvalReport evaluate(const Model& m, const SceneDataset& data, Split split) {
  const auto& cams = split == Split::kTrain ? data.train_cameras : data.eval_cameras;
  if (cams.empty()) throw DataError("dataset has no cameras in the requested split");
  EvalReport r;
  for (std::size_t f = 0; f < data.frames; ++f) {
    const auto prims = frame_primitives(m, data.frame_time(f));
    for (std::size_t c : cams) {
      const Image img = render(prims, data.cameras[c]).output.image;
      EvalRow row{c, f, psnr(img, data.images[c][f]), ssim(img, data.images[c][f])};
      r.mean_psnr += row.psnr;
      r.mean_ssim += row.ssim;
      r.rows.push_back(row);
    }
  }
  r.mean_psnr /= r.rows.size();
  r.mean_ssim /= r.rows.size();
  return r;
}

void write_eval_csv(const std::string& path, const EvalReport& r) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  char buf[128];
  out << "camera,frame,psnr,ssim\n";
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f,%.6f\n", row.camera, row.frame, row.psnr, row.ssim);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "mean,,%.6f,%.6f\n", r.mean_psnr, r.mean_ssim);
  out << buf;
}

namespace {

double deformation_fps(const Model& m, std::size_t frames) {
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t f = 0; f < frames; ++f) frame_primitives(m, m.meta.frame_time(f));
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s > 0 ? frames / s : 0.0;
}

char lambda_tag_buf[32];
std::string lambda_tag(double l) {
  std::snprintf(lambda_tag_buf, sizeof lambda_tag_buf, "%g", l);
  return lambda_tag_buf;
}

SweepRow sweep_point(const SceneDataset& data, double lambda, const TrainingConfig& base, const std::string& out_dir,
                     const SweepOptions& opts) {
  SweepRow row;
  row.lambda_e = lambda;
  try {
    TrainingConfig cfg = base;
    cfg.lambda_e = lambda;
    TrainResult tr = train(data, cfg);
    EncodeResult enc = encode_model(tr.model);
    row.size_bytes = enc.bytes.size();
    if (opts.keep_artifacts) {
      io::write_file((std::filesystem::path(out_dir) / ("lambda_" + lambda_tag(lambda) + ".adcg")).string(), enc.bytes);
    }
    DecodeResult dec = decode_model(enc.bytes);
    const Split split = data.eval_cameras.empty() ? Split::kTrain : Split::kEval;
    row.psnr = evaluate(dec.model, data, split).mean_psnr;
    row.fps_deform_eval = deformation_fps(dec.model, data.frames);
  } catch (const std::exception& e) {
    row.status = std::string("failed: ") + e.what();
  }
  return row;
}

}  // namespace

std::vector<SweepRow> rd_sweep(const SceneDataset& data, const std::vector<double>& lambdas,
                               const TrainingConfig& base, const std::string& out_dir, const SweepOptions& opts) {
  if (lambdas.size() < 2) throw ConfigError("an RD sweep needs at least two lambda values");
  for (double l : lambdas) {
    if (!(l > 0)) throw ConfigError("lambda values must be positive");
  }
  std::filesystem::create_directories(out_dir);
  std::vector<SweepRow> rows(lambdas.size());
  if (opts.parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < lambdas.size(); ++i) rows[i] = sweep_point(data, lambdas[i], base, out_dir, opts);
  } else {
    for (std::size_t i = 0; i < lambdas.size(); ++i) rows[i] = sweep_point(data, lambdas[i], base, out_dir, opts);
  }
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "lambda_e,size_bytes,psnr,fps_deform_eval,status\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g,%zu,%.6f,%.3f,", r.lambda_e, r.size_bytes, r.psnr, r.fps_deform_eval);
    std::string status = r.status;
    for (char& c : status) {
      if (c == ',' || c == '\n') c = ' ';
    }
    out << buf << status << '\n';
  }
}

Image plot_rd_curve(const std::vector<SweepRow>& rows, int width, int height) {
  Image img(width, height, 1.0);
  const int margin = 30;
  auto put = [&](int x, int y, Vec3 c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    for (int k = 0; k < 3; ++k) img.at(x, y, k) = c[k];
  };
  auto line = [&](double x0, double y0, double x1, double y1, Vec3 c) {
    const int n = static_cast<int>(std::max(std::abs(x1 - x0), std::abs(y1 - y0))) + 1;
    for (int i = 0; i <= n; ++i) {
      const double t = static_cast<double>(i) / n;
      put(static_cast<int>(std::lround(x0 + t * (x1 - x0))), static_cast<int>(std::lround(y0 + t * (y1 - y0))), c);
    }
  };
  const Vec3 axis{0.1, 0.1, 0.1}, curve{0.8, 0.2, 0.1}, grid{0.85, 0.85, 0.85};
  for (int i = 1; i < 5; ++i) {
    const double gx = margin + i * (width - 2.0 * margin) / 5, gy = margin + i * (height - 2.0 * margin) / 5;
    line(gx, margin, gx, height - margin, grid);
    line(margin, gy, width - margin, gy, grid);
  }
  line(margin, height - margin, width - margin, height - margin, axis);
  line(margin, margin, margin, height - margin, axis);
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) {
    if (r.status == "ok") pts.emplace_back(r.size_bytes / 1024.0, r.psnr);
  }
  if (pts.empty()) return img;
  std::sort(pts.begin(), pts.end());
  double x0 = pts.front().first, x1 = pts.back().first, y0 = pts.front().second, y1 = y0;
  for (const auto& p : pts) {
    y0 = std::min(y0, p.second);
    y1 = std::max(y1, p.second);
  }
  const double dx = std::max(x1 - x0, 1e-9), dy = std::max(y1 - y0, 1e-9);
  auto sx = [&](double x) { return margin + 10 + (x - x0) / dx * (width - 2.0 * margin - 20); };
  auto sy = [&](double y) { return height - margin - 10 - (y - y0) / dy * (height - 2.0 * margin - 20); };
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    line(sx(pts[i].first), sy(pts[i].second), sx(pts[i + 1].first), sy(pts[i + 1].second), curve);
  }
  for (const auto& p : pts) {
    const int cx = static_cast<int>(std::lround(sx(p.first))), cy = static_cast<int>(std::lround(sy(p.second)));
    for (int dy2 = -3; dy2 <= 3; ++dy2)
      for (int dx2 = -3; dx2 <= 3; ++dx2)
        if (dx2 * dx2 + dy2 * dy2 <= 9) put(cx + dx2, cy + dy2, curve);
  }
  return img;
}

DeformationBench bench_deformation(const Model& model, std::size_t frames, std::size_t repeats) {
  Model m = model;
  DeformationBench b;
  const std::size_t K = m.config().K;
  b.anchors = m.anchor_count();
  b.primitives = b.anchors * K;
  b.frames = frames;
  auto& fo = m.deform.f_omega;
  auto& fv = m.deform.f_varpi;
  auto timed = [&](auto&& fn) {
    double best = 1e300;
    for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  auto times = [&](std::size_t f) { return frames <= 1 ? 0.0 : static_cast<double>(f) / (frames - 1); };
  // Time embeddings are shared by both strategies and excluded from timing.
  std::vector<Tensor<float>> ft(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    Tape<float> tape(false);
    ft[f] = time_embedding(tape, m.deform.time, times(f)).value();
  }
  const Tensor<float>& f_v = m.canonical.anchors.f_v;
  fo.reset_evaluations();
  b.coarse_seconds = timed([&] {
    for (std::size_t f = 0; f < frames; ++f) {
      Tape<float> tape(false);
      coarse_deform(tape, fo, tape.constant(f_v), tape.constant(ft[f]));
    }
  });
  b.coarse_evals = fo.evaluations() / std::max<std::size_t>(repeats, 1);
  fo.reset_evaluations();
  b.baseline_seconds = timed([&] {
    for (std::size_t f = 0; f < frames; ++f) {
      Tape<float> tape(false);
      coarse_deform_per_primitive(tape, fo, tape.constant(f_v), tape.constant(ft[f]), K);
    }
  });
  b.baseline_coarse_evals = fo.evaluations() / std::max<std::size_t>(repeats, 1);
  Tensor<float> fp = positional_embedding_rows(m.canonical.anchors.position, m.config().pos_bands);
  fv.reset_evaluations();
  b.fine_seconds = timed([&] {
    for (std::size_t f = 0; f < frames; ++f) {
      Tape<float> tape(false);
      fine_deform(tape, fv, tape.constant(fp), tape.constant(ft[f]), K);
    }
  });
  b.fine_evals = fv.evaluations() / std::max<std::size_t>(repeats, 1);
  return b;
}

}  // namespace adcgs
