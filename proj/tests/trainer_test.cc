#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "adcgs/codec/container.h"
#include "adcgs/error.h"
#include "adcgs/train/metrics.h"
#include "adcgs/train/trainer.h"
#include "adcgs/workbench/workbench.h"
#include "model_fixture.h"

namespace fs = std::filesystem;
using namespace adcgs;

namespace {

SceneDataset tiny_scene() {
  SceneSpec s;
  s.name = "tiny";
  BlobSpec a;
  a.scale = {0.25, 0.2, 0.2};
  a.color = {0.9, 0.3, 0.1};
  a.translation = {{-0.3, 0, 0}, {0.6, 0, 0}};
  BlobSpec b;
  b.scale = {0.2, 0.2, 0.3};
  b.color = {0.1, 0.4, 0.9};
  b.translation = {{0.3, 0.1, 0}};
  s.blobs = {a, b};
  s.cameras.count = 3;
  s.cameras.eval_count = 1;
  s.cameras.focal = 30;
  s.frames = 3;
  s.width = s.height = 24;
  s.points_per_blob = 30;
  return generate_scene(s);
}

TrainingConfig tiny_training(std::size_t iterations) {
  TrainingConfig cfg;
  cfg.model = testing::tiny_config();
  cfg.iterations = iterations;
  cfg.refinement.interval = 5;
  return cfg;
}

std::vector<std::uint8_t> weights_of(const Model& m) {
  io::ByteWriter w;
  network_checkpoint(m, true).write(w);
  return w.take();
}

}  // namespace

TEST_CASE("image loss combines L1, SSIM and rate") {
  Image a(8, 8, 0.25), b(8, 8, 0.25);
  const LossTerms same = image_loss(a, b, 3.0, 0.2, 0.5);
  CHECK(same.l1 == 0.0);
  CHECK(same.ssim == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(same.total == doctest::Approx(1.5).epsilon(1e-12));
  b.rgb.assign(b.rgb.size(), 0.35);
  const LossTerms diff = image_loss(a, b, 0.0, 0.0, 1.0);
  CHECK(diff.l1 == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(diff.total == doctest::Approx(0.1).epsilon(1e-12));
  CHECK_THROWS_AS(image_loss(Image(4, 4), Image(4, 5), 0, 0.2, 0), Error);
}

TEST_CASE("image loss gradient matches central differences") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image a(7, 6), b(7, 6);
  for (double& v : a.rgb) v = u(rng);
  for (double& v : b.rgb) v = u(rng);
  Image grad;
  image_loss(a, b, 0.0, 0.2, 0.0, &grad);
  const double h = 1e-7;
  for (std::size_t i = 0; i < a.rgb.size(); i += 7) {
    Image p = a, m = a;
    p.rgb[i] += h;
    m.rgb[i] -= h;
    const double fd = (image_loss(p, b, 0, 0.2, 0).total - image_loss(m, b, 0, 0.2, 0).total) / (2 * h);
    CHECK(std::abs(fd - grad.rgb[i]) < 1e-6);
  }
}

TEST_CASE("training configs parse strictly") {
  TrainingConfig cfg = tiny_training(123);
  cfg.lambda_e = 0.004;
  cfg.coarse = false;
  const TrainingConfig back = TrainingConfig::from_json_text(cfg.to_json_text());
  CHECK(back.to_json_text() == cfg.to_json_text());
  CHECK(back.iterations == 123);
  CHECK(back.model.K == cfg.model.K);
  CHECK_THROWS_AS(TrainingConfig::from_json_text("{\"iterationz\": 5}"), ConfigError);
  CHECK_THROWS_AS(TrainingConfig::from_json_text("{\"model\": {\"K\": 4, \"bogus\": 1}}"), ConfigError);
  CHECK_THROWS_AS(TrainingConfig::from_json_text("not json"), ConfigError);
  CHECK_THROWS_AS(TrainingConfig::from_json_text("{\"refine_start\": 0.9, \"refine_end\": 0.5}"), ConfigError);
  CHECK_THROWS_AS(TrainingConfig::from_json_text("{\"lambda_ssim\": 1.5}"), ConfigError);
}

TEST_CASE("zero iterations return the initial model") {
  const SceneDataset d = tiny_scene();
  const TrainingConfig cfg = tiny_training(0);
  const TrainResult r = train(d, cfg);
  CHECK(r.log.empty());
  SceneMeta meta;
  meta.cameras = d.cameras;
  meta.frame_count = d.frames;
  meta.bbox = d.bbox;
  Rng rng(cfg.seed);
  Model init = init_model(d.init_points, cfg.model, cfg.quant, meta, rng);
  init.lambda_e = cfg.lambda_e;
  CHECK(weights_of(r.model) == weights_of(init));
}

TEST_CASE("training is bitwise reproducible and stages its loss terms") {
  const SceneDataset d = tiny_scene();
  const TrainingConfig cfg = tiny_training(40);
  const TrainResult a = train(d, cfg), b = train(d, cfg);
  CHECK(weights_of(a.model) == weights_of(b.model));
  REQUIRE(a.log.size() == 40);
  const std::size_t rd_it = static_cast<std::size_t>(std::llround(cfg.rd_start * 40));
  for (const auto& row : a.log) {
    CHECK(std::isfinite(row.total_loss));
    if (row.iteration <= rd_it) {
      CHECK(row.rate_bits == 0.0);
    } else {
      CHECK(row.rate_bits > 0.0);
    }
    CHECK(a.log[row.iteration - 1].total_loss == b.log[row.iteration - 1].total_loss);
  }
  CHECK_FALSE(a.refinements.empty());
  for (const auto& e : a.refinements) CHECK(e.anchors <= cfg.max_anchors);
}

TEST_CASE("training lowers the photometric loss") {
  const SceneDataset d = tiny_scene();
  TrainingConfig cfg = tiny_training(150);
  cfg.refine = false;
  const TrainResult r = train(d, cfg);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    first += r.log[i].l1;
    last += r.log[r.log.size() - 1 - i].l1;
  }
  CHECK(last < 0.7 * first);
}

TEST_CASE("decoded models evaluate like the quantized model") {
  const SceneDataset d = tiny_scene();
  const TrainResult r = train(d, tiny_training(30));
  const EncodeResult enc = encode_model(r.model);
  const DecodeResult dec = decode_model(enc.bytes);
  const double q = evaluate(enc.quantized, d, Split::kEval).mean_psnr;
  const double p = evaluate(dec.model, d, Split::kEval).mean_psnr;
  CHECK(std::abs(q - p) <= 0.05);
}

TEST_CASE("training csv columns") {
  const SceneDataset d = tiny_scene();
  const TrainResult r = train(d, tiny_training(3));
  const fs::path p = fs::temp_directory_path() / "adcgs_train_log.csv";
  write_training_csv(p.string(), r.log);
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  CHECK(header == "iteration,l1,ssim,rate_bits,total_loss,anchors,psnr_train");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("invalid datasets are rejected before training") {
  SceneDataset d = tiny_scene();
  d.images[0].pop_back();
  CHECK_THROWS_AS(train(d, tiny_training(2)), DataError);
}
