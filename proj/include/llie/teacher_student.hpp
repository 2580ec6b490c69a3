#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "llie/backbone.hpp"
#include "llie/data.hpp"
#include "llie/losses.hpp"
#include "llie/optim.hpp"

namespace llie {

struct TrainConfig {
  double lr = 2e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int epochs = 500;
  int batch_size = 8;
  int crop = 256;  // 0 trains on full images
  double ema_mu = 0.999;
  std::uint64_t seed = 0;
  std::int64_t max_steps = 0;  // 0 runs all epochs
  std::int64_t checkpoint_every = 0;
  double grad_clip = 0;  // 0 disables clipping
  bool flip = true;
  int pairs = 0;  // 0 uses every training pair

  AdamParams adam() const { return {adam_beta1, adam_beta2, adam_eps}; }
  void validate() const;
};

template <typename Scalar>
struct TrainState {
  BackboneConfig model;
  TrainConfig train;
  LossConfig loss;
  ParameterSet<Scalar> encoder;  // shared by student and teacher
  ParameterSet<Scalar> decoder;
  ParameterSet<Scalar> teacher_decoder;
  AdamState<Scalar> adam;
  std::int64_t step = 0;
  std::string config_text;  // effective config, stored in checkpoints
};

/// Student initialized from train.seed; the teacher decoder is an exact copy
/// of the student decoder and the optimizer moments are zero.
template <typename Scalar>
TrainState<Scalar> init_state(const BackboneConfig& model, const TrainConfig& train, const LossConfig& loss);

/// teacher <- mu * teacher + (1 - mu) * student.
template <typename Scalar>
void ema_update(ParameterSet<Scalar>& teacher, const ParameterSet<Scalar>& student, double mu);

/// Teacher pyramid for `clean`: shared encoder + teacher decoder evaluated
/// without recording, then placed in `into` as constants.
template <typename Scalar>
std::vector<Var<Scalar>> teacher_pyramid(TrainState<Scalar>& state, const Tensor<Scalar>& clean, Graph<Scalar>& into);

/// Builds the training objective on `graph` (student forward recorded when the
/// graph records). Exposed for gradient checks.
template <typename Scalar>
TotalLoss<Scalar> training_loss(TrainState<Scalar>& state, const Tensor<Scalar>& low, const Tensor<Scalar>& clean,
                                Graph<Scalar>& graph);

struct StepResult {
  LossBreakdown loss;
  std::vector<double> teacher_feature_std;  // per pyramid level, mean over batch
};

/// Forward, loss, Adam step on the student, then EMA of the teacher decoder.
/// Throws NonFiniteLoss before touching the weights if the loss is not finite.
template <typename Scalar>
StepResult train_step(TrainState<Scalar>& state, const Tensor<Scalar>& low, const Tensor<Scalar>& clean, double lr);

struct StepRecord {
  std::int64_t step = 0;  // 1-based index of the completed step
  int epoch = 0;
  double lr = 0;
  LossBreakdown loss;
  std::vector<double> teacher_feature_std;
  std::vector<std::string> batch_ids;
};

struct TrainHooks {
  std::filesystem::path run_dir;  // empty: no log or checkpoints
  std::function<void(const TrainState<float>&, int epoch)> on_epoch_end;
  std::function<void(const StepRecord&)> on_step;
};

/// Steps per epoch for `n` samples.
int steps_per_epoch(int n, int batch_size);

/// Sample order for an epoch; a pure function of (seed, epoch, n).
std::vector<int> epoch_order(std::uint64_t seed, int epoch, int n);

/// Runs from state.step until train.max_steps (or all epochs). Data order and
/// augmentation depend only on (seed, step), so a state loaded from a
/// checkpoint continues exactly where the saved run would have.
std::vector<StepRecord> train(TrainState<float>& state, const std::vector<Sample>& samples,
                              const TrainHooks& hooks = {});

/// Student-only inference. Inputs are reflect-padded to a multiple of
/// 2^depth and the output is cropped back.
template <typename Scalar>
Tensor<Scalar> enhance(const BackboneConfig& model, ParameterSet<Scalar>& encoder, ParameterSet<Scalar>& decoder,
                       const Tensor<Scalar>& image);

template <typename Scalar>
Tensor<Scalar> reflect_pad(const Tensor<Scalar>& image, int pad_bottom, int pad_right);

std::string checkpoint_name(std::int64_t step);

}  // namespace llie
