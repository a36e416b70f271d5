#ifndef ADCGS_WORKBENCH_WORKBENCH_H_
#define ADCGS_WORKBENCH_WORKBENCH_H_

#include <string>
#include <vector>

#include "adcgs/model/model.h"
#include "adcgs/train/trainer.h"
#include "adcgs/workbench/scene.h"

namespace adcgs {

struct EvalRow {
  std::size_t camera = 0, frame = 0;
  double psnr = 0, ssim = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mean_psnr = 0, mean_ssim = 0;
};

enum class Split { kTrain, kEval };
Split split_from_name(const std::string& name);

EvalReport evaluate(const Model& m, const SceneDataset& data, Split split);
// camera,frame,psnr,ssim rows followed by a "mean" row.
void write_eval_csv(const std::string& path, const EvalReport& r);

struct SweepRow {
  double lambda_e = 0;
  std::size_t size_bytes = 0;
  double psnr = 0;
  double fps_deform_eval = 0;
  std::string status = "ok";
};

struct SweepOptions {
  bool parallel = false;  // independent sub-runs on separate threads
  bool keep_artifacts = true;  // write per-λ bitstreams next to the CSV
};

// Trains, encodes and evaluates once per λ. Needs at least two λ values
// (ConfigError otherwise). Failed runs yield rows with a failure status.
std::vector<SweepRow> rd_sweep(const SceneDataset& data, const std::vector<double>& lambdas,
                               const TrainingConfig& base, const std::string& out_dir,
                               const SweepOptions& opts = {});
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);
// Size (x, KB) against PSNR (y) as a line plot with markers.
Image plot_rd_curve(const std::vector<SweepRow>& rows, int width = 480, int height = 320);

struct DeformationBench {
  std::size_t anchors = 0, primitives = 0, frames = 0;
  std::uint64_t coarse_evals = 0;           // anchor-driven F_ω rows
  std::uint64_t fine_evals = 0;             // F_ϖ rows
  std::uint64_t baseline_coarse_evals = 0;  // per-primitive F_ω rows
  double coarse_seconds = 0, baseline_seconds = 0, fine_seconds = 0;
  double speedup() const { return coarse_seconds > 0 ? baseline_seconds / coarse_seconds : 0.0; }
};

// Times the coarse stage anchor-driven and per primitive over `frames`
// timestamps, repeating each measurement `repeats` times (best kept).
DeformationBench bench_deformation(const Model& m, std::size_t frames, std::size_t repeats = 3);

}  // namespace adcgs

#endif  // ADCGS_WORKBENCH_WORKBENCH_H_
