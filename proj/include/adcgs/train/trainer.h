#ifndef ADCGS_TRAIN_TRAINER_H_
#define ADCGS_TRAIN_TRAINER_H_

#include <functional>
#include <string>
#include <vector>

#include "adcgs/model/model.h"
#include "adcgs/model/refinement.h"
#include "adcgs/workbench/scene.h"

namespace adcgs {

struct TrainingConfig {
  double lambda_ssim = 0.2;
  double lambda_e = 1e-3;
  std::size_t iterations = 3000;
  // Milestones as fractions of `iterations`.
  double refine_start = 0.04;
  double refine_end = 0.83;
  double deform_start = 0.27;
  double rd_start = 0.33;
  // Deformation stages; switching them off gives the ablation baselines.
  bool coarse = true;
  bool fine = true;
  bool refine = true;

  ModelConfig model;
  QuantizerConfig quant;
  RefinementConfig refinement;
  std::size_t max_anchors = 3000;
  std::uint64_t seed = 7;

  // Adam learning rates per parameter group.
  double lr_features = 5e-3;
  double lr_covariance = 5e-3;
  double lr_color = 5e-3;
  double lr_f_theta = 2e-3;
  double lr_deformation = 1e-3;
  double lr_time_grid = 1e-2;
  double lr_entropy = 1e-3;
  double grad_clip = 10.0;

  // Checkpoint written before aborting on a non-finite loss; empty disables.
  std::string snapshot_path;

  // Throws ConfigError on unordered milestones or out-of-range weights.
  void validate() const;
  static TrainingConfig from_json_text(const std::string& text);
  static TrainingConfig load(const std::string& path);
  std::string to_json_text() const;
};

struct LossTerms {
  double l1 = 0, ssim = 1, rate = 0, total = 0;
};

// (1−λ_ssim)·L1 + λ_ssim·(1−SSIM) + λ_e·rate. When `grad` is given it receives
// ∂L/∂rendered. ContractError on a shape mismatch.
LossTerms image_loss(const Image& rendered, const Image& target, double rate, double lambda_ssim,
                     double lambda_e, Image* grad = nullptr);

struct TrainLogRow {
  std::size_t iteration = 0;
  double l1 = 0, ssim = 0, rate_bits = 0, total_loss = 0;
  std::size_t anchors = 0;
  double psnr_train = 0;
};

struct TrainResult {
  Model model;
  std::vector<TrainLogRow> log;
  std::vector<RefinementEvent> refinements;
};

using TrainProgress = std::function<void(const TrainLogRow&)>;

TrainResult train(const SceneDataset& data, const TrainingConfig& cfg, const TrainProgress& progress = {});

void write_training_csv(const std::string& path, const std::vector<TrainLogRow>& log);

}  // namespace adcgs

#endif  // ADCGS_TRAIN_TRAINER_H_
