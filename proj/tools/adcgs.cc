// Command-line front end: generate, train, encode, decode, render, eval,
// inspect, rd-sweep and bench.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "adcgs/codec/container.h"
#include "adcgs/error.h"
#include "adcgs/io/bytes.h"
#include "adcgs/model/model.h"
#include "adcgs/train/trainer.h"
#include "adcgs/workbench/scene.h"
#include "adcgs/workbench/workbench.h"

namespace fs = std::filesystem;
using namespace adcgs;

namespace {

SceneSpec resolve_spec(const std::string& arg) {
  if (fs::exists(arg)) return SceneSpec::load(arg);
  for (const auto& name : builtin_scene_names()) {
    if (name == arg) return builtin_scene(name);
  }
  throw ConfigError("scene spec '" + arg + "' is neither a file nor a built-in scene");
}

TrainingConfig resolve_config(const std::string& path, long iterations) {
  TrainingConfig cfg = path.empty() ? TrainingConfig{} : TrainingConfig::load(path);
  if (iterations >= 0) cfg.iterations = static_cast<std::size_t>(iterations);
  cfg.validate();
  return cfg;
}

std::vector<double> parse_lambdas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("invalid lambda value '" + item + "'");
    }
  }
  return out;
}

void print_header(const ContainerHeader& h, std::size_t file_size) {
  std::printf("anchors %u  K %u  n_v %u  n_g %u  chunks %u  voxel %g  flags 0x%x\n", h.anchors, h.K, h.n_v, h.n_g,
              h.M, h.voxel_size, h.flags);
  std::printf("%-12s %12s %8s\n", "section", "bytes", "share");
  auto row = [&](const std::string& name, std::size_t bytes) {
    std::printf("%-12s %12zu %7.2f%%\n", name.c_str(), bytes, 100.0 * bytes / file_size);
  };
  row("header", h.header_bytes);
  for (const auto& s : h.sections) row(section_name(s.id), s.length);
  row("total", file_size);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anchor-driven deformable Gaussian splatting with learned compression"};
  app.require_subcommand(1);

  std::string spec_arg, out, data_dir, config_path, ckpt, in, lambda_tag, split = "eval", lambdas = "1e-2,1e-3,1e-4";
  long iterations = -1;
  std::size_t camera = 0, frame = 0, frames = 0, repeats = 3;
  bool parallel = false, quiet = false;

  auto* gen = app.add_subcommand("generate", "Render a synthetic dynamic scene dataset");
  gen->add_option("--spec", spec_arg, "Scene spec JSON or built-in scene name")->required();
  gen->add_option("--out", out, "Output dataset directory")->required();
  std::string spec_out;
  gen->add_option("--write-spec", spec_out, "Also write the resolved scene spec as JSON");

  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  tr->add_option("--data", data_dir, "Dataset directory")->required();
  tr->add_option("--config", config_path, "Training config JSON (defaults when omitted)");
  tr->add_option("--out", out, "Output checkpoint")->required();
  tr->add_option("--iterations", iterations, "Override the iteration count");
  tr->add_flag("--quiet", quiet, "Suppress progress output");

  auto* enc = app.add_subcommand("encode", "Compress a checkpoint into a container");
  enc->add_option("--ckpt", ckpt, "Input checkpoint")->required();
  enc->add_option("--lambda-tag", lambda_tag, "Label for the rate-distortion operating point");
  enc->add_option("--out", out, "Output container")->required();

  auto* dec = app.add_subcommand("decode", "Decode a container into a checkpoint");
  dec->add_option("--in", in, "Input container")->required();
  dec->add_option("--out", out, "Output checkpoint")->required();

  auto* ren = app.add_subcommand("render", "Render one frame from one camera");
  ren->add_option("--ckpt", ckpt, "Checkpoint or container (.adcg)")->required();
  ren->add_option("--camera", camera, "Camera index")->required();
  ren->add_option("--frame", frame, "Frame index")->required();
  ren->add_option("--out", out, "Output PPM")->required();

  auto* ev = app.add_subcommand("eval", "Evaluate PSNR and SSIM against a dataset");
  ev->add_option("--ckpt", ckpt, "Checkpoint or container (.adcg)")->required();
  ev->add_option("--data", data_dir, "Dataset directory")->required();
  ev->add_option("--split", split, "train or eval");
  ev->add_option("--out", out, "Metrics CSV")->required();

  auto* ins = app.add_subcommand("inspect", "Print the per-section byte breakdown of a container");
  ins->add_option("--in", in, "Container")->required();

  auto* rd = app.add_subcommand("rd-sweep", "Train and encode at several rate-distortion trade-offs");
  rd->add_option("--data", data_dir, "Dataset directory")->required();
  rd->add_option("--lambdas", lambdas, "Comma-separated lambda values");
  rd->add_option("--config", config_path, "Training config JSON");
  rd->add_option("--iterations", iterations, "Override the iteration count");
  rd->add_option("--out", out, "Output directory")->required();
  rd->add_flag("--parallel", parallel, "Run sweep points concurrently");

  auto* be = app.add_subcommand("bench", "Count and time deformation network evaluations");
  be->add_option("--ckpt", ckpt, "Checkpoint or container (.adcg)")->required();
  be->add_option("--frames", frames, "Frames to deform (defaults to the scene's frame count)");
  be->add_option("--repeats", repeats, "Timing repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto load_any = [](const std::string& path) {
    if (fs::path(path).extension() == ".adcg") return decode_model(io::read_file(path)).model;
    return load_model(path);
  };

  try {
    if (*gen) {
      const SceneSpec spec = resolve_spec(spec_arg);
      if (!spec_out.empty()) {
        const std::string text = spec.to_json_text();
        io::write_file(spec_out, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
      }
      const SceneDataset d = generate_scene(spec);
      save_dataset(d, out);
      std::printf("wrote %zu cameras x %zu frames to %s\n", d.cameras.size(), d.frames, out.c_str());
    } else if (*tr) {
      const TrainingConfig cfg = resolve_config(config_path, iterations);
      const SceneDataset d = load_dataset(data_dir);
      TrainProgress progress;
      if (!quiet) {
        progress = [](const TrainLogRow& r) {
          std::printf("iter %6zu  loss %.5f  l1 %.5f  ssim %.4f  rate %.0f bits  anchors %zu  psnr %.2f\n",
                      r.iteration, r.total_loss, r.l1, r.ssim, r.rate_bits, r.anchors, r.psnr_train);
          std::fflush(stdout);
        };
      }
      const TrainResult res = train(d, cfg, progress);
      save_model(out, res.model);
      write_training_csv(out + ".log.csv", res.log);
      write_refinement_csv(out + ".refine.csv", res.refinements);
      std::printf("saved %s (%zu anchors)\n", out.c_str(), res.model.anchor_count());
    } else if (*enc) {
      const Model m = load_model(ckpt);
      const EncodeResult r = encode_model(m);
      io::write_file(out, r.bytes);
      std::printf("%s%s: %zu bytes (%.0f estimated bits)\n", lambda_tag.empty() ? "" : ("[" + lambda_tag + "] ").c_str(),
                  out.c_str(), r.bytes.size(), r.rate.total());
    } else if (*dec) {
      const DecodeResult r = decode_model(io::read_file(in));
      save_model(out, r.model);
      std::printf("decoded %u anchors to %s\n", r.header.anchors, out.c_str());
    } else if (*ren) {
      const Model m = load_any(ckpt);
      if (camera >= m.meta.cameras.size()) throw DataError("camera index out of range");
      if (frame >= m.meta.frame_count) throw DataError("frame index out of range");
      write_ppm(out, render_frame(m, m.meta.cameras[camera], m.meta.frame_time(frame)));
    } else if (*ev) {
      const Model m = load_any(ckpt);
      const SceneDataset d = load_dataset(data_dir);
      const EvalReport r = evaluate(m, d, split_from_name(split));
      write_eval_csv(out, r);
      std::printf("mean psnr %.3f dB  ssim %.4f over %zu views\n", r.mean_psnr, r.mean_ssim, r.rows.size());
    } else if (*ins) {
      const auto bytes = io::read_file(in);
      print_header(inspect_container(bytes), bytes.size());
    } else if (*rd) {
      const TrainingConfig cfg = resolve_config(config_path, iterations);
      const std::vector<double> ls = parse_lambdas(lambdas);
      const SceneDataset d = load_dataset(data_dir);
      SweepOptions opts;
      opts.parallel = parallel;
      const auto rows = rd_sweep(d, ls, cfg, out, opts);
      write_sweep_csv((fs::path(out) / "rd.csv").string(), rows);
      write_ppm((fs::path(out) / "rd.ppm").string(), plot_rd_curve(rows));
      bool failed = false;
      for (const auto& r : rows) {
        std::printf("lambda %-8g size %8zu B  psnr %.3f dB  %s\n", r.lambda_e, r.size_bytes, r.psnr, r.status.c_str());
        failed = failed || r.status != "ok";
      }
      if (failed) return 4;
    } else if (*be) {
      const Model m = load_any(ckpt);
      const DeformationBench b = bench_deformation(m, frames ? frames : std::max<std::size_t>(m.meta.frame_count, 1), repeats);
      std::printf("anchors %zu  primitives %zu  frames %zu\n", b.anchors, b.primitives, b.frames);
      std::printf("coarse (anchor-driven)  %10llu evals  %.6f s\n", static_cast<unsigned long long>(b.coarse_evals),
                  b.coarse_seconds);
      std::printf("coarse (per-primitive)  %10llu evals  %.6f s\n",
                  static_cast<unsigned long long>(b.baseline_coarse_evals), b.baseline_seconds);
      std::printf("fine                    %10llu evals  %.6f s\n", static_cast<unsigned long long>(b.fine_evals),
                  b.fine_seconds);
      std::printf("coarse speedup %.2fx\n", b.speedup());
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
