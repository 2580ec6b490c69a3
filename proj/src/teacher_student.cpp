#include "llie/teacher_student.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "llie/checkpoint.hpp"

namespace llie {
namespace fs = std::filesystem;

void TrainConfig::validate() const {
  auto positive = [](double v, const char* key) {
    if (!(v > 0)) throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be positive");
  };
  positive(lr, "train.lr");
  positive(adam_eps, "train.adam_eps");
  positive(epochs, "train.epochs");
  positive(batch_size, "train.batch_size");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1)) throw Error(ErrorCode::InvalidConfig, "train.adam_beta1 must be in [0,1)");
  if (!(adam_beta2 >= 0 && adam_beta2 < 1)) throw Error(ErrorCode::InvalidConfig, "train.adam_beta2 must be in [0,1)");
  if (!(ema_mu >= 0 && ema_mu <= 1)) throw Error(ErrorCode::InvalidConfig, "train.ema_mu must be in [0,1]");
  if (crop < 0) throw Error(ErrorCode::InvalidConfig, "train.crop must be >= 0");
  if (max_steps < 0 || checkpoint_every < 0 || pairs < 0) {
    throw Error(ErrorCode::InvalidConfig, "train.max_steps, train.checkpoint_every and train.pairs must be >= 0");
  }
  if (!(grad_clip >= 0)) throw Error(ErrorCode::InvalidConfig, "train.grad_clip must be >= 0");
}

template <typename Scalar>
TrainState<Scalar> init_state(const BackboneConfig& model, const TrainConfig& train, const LossConfig& loss) {
  model.validate();
  train.validate();
  loss.ssim.validate();
  if (!(loss.lambda >= 0)) throw Error(ErrorCode::InvalidConfig, "loss.lambda must be >= 0");
  if (!(loss.beta >= 0)) throw Error(ErrorCode::NegativeBeta, "loss.iaml.beta must be >= 0");
  if (!(loss.eps > 0)) throw Error(ErrorCode::InvalidConfig, "loss.iaml.eps must be positive");
  resolve_levels(loss.levels, std::size_t(model.depth));

  TrainState<Scalar> state;
  state.model = model;
  state.train = train;
  state.loss = loss;
  std::mt19937_64 rng(train.seed);
  state.encoder = make_encoder_weights<Scalar>(model, rng);
  state.decoder = make_decoder_weights<Scalar>(model, rng);
  state.teacher_decoder = state.decoder;
  OptimizedSet<Scalar> opt(state.encoder, state.decoder);
  state.adam = make_adam_state(opt);
  return state;
}

template <typename Scalar>
void ema_update(ParameterSet<Scalar>& teacher, const ParameterSet<Scalar>& student, double mu) {
  if (!teacher.same_layout(student)) {
    throw Error(ErrorCode::ShapeMismatch, "teacher and student decoders have different layouts");
  }
  const Scalar m = Scalar(mu);
  const Scalar rest = Scalar(1.0 - mu);
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    teacher[i].value.array() = m * teacher[i].value.array() + rest * student[i].value.array();
  }
}

template <typename Scalar>
std::vector<Var<Scalar>> teacher_pyramid(TrainState<Scalar>& state, const Tensor<Scalar>& clean,
                                         Graph<Scalar>& into) {
  Graph<Scalar> frozen(false);
  const EncoderOutput<Scalar> enc = encode(state.model, state.encoder, frozen.constant(clean));
  const DecoderOutput<Scalar> dec = decode(state.model, state.teacher_decoder, enc);
  std::vector<Var<Scalar>> out;
  for (const auto& level : dec.pyramid) out.push_back(into.constant(level.value()));
  return out;
}

namespace {

template <typename Scalar>
TotalLoss<Scalar> build_loss(TrainState<Scalar>& state, const Tensor<Scalar>& low, const Tensor<Scalar>& clean,
                             Graph<Scalar>& graph, std::vector<Var<Scalar>>& teacher) {
  require_same_shape(low.shape(), clean.shape(), "training batch");
  const DecoderOutput<Scalar> student = forward(state.model, state.encoder, state.decoder, graph.constant(low));
  WeightMap<Scalar> weights;
  if (uses_mirror(state.loss.tag)) {
    teacher = teacher_pyramid(state, clean, graph);
    weights = illumination_weights(low, Scalar(state.loss.beta));
  }
  return total_loss(student.image, graph.constant(clean), student.pyramid, teacher, weights, state.loss);
}

std::string describe(const LossBreakdown& b) {
  std::ostringstream os;
  os << "mse=" << b.mse << " ssim_loss=" << b.ssim_loss << " mirror=" << b.mirror << " total=" << b.total;
  return os.str();
}

template <typename Scalar>
std::vector<double> feature_spread(const std::vector<Var<Scalar>>& pyramid) {
  std::vector<double> out;
  for (const auto& level : pyramid) {
    const Tensor<Scalar>& f = level.value();
    double acc = 0;
    for (int n = 0; n < f.batch(); ++n) {
      const auto s = f.sample(n).array().template cast<double>();
      acc += std::sqrt((s - s.mean()).square().mean());
    }
    out.push_back(acc / f.batch());
  }
  return out;
}

}  // namespace

template <typename Scalar>
TotalLoss<Scalar> training_loss(TrainState<Scalar>& state, const Tensor<Scalar>& low, const Tensor<Scalar>& clean,
                                Graph<Scalar>& graph) {
  std::vector<Var<Scalar>> teacher;
  return build_loss(state, low, clean, graph, teacher);
}

template <typename Scalar>
StepResult train_step(TrainState<Scalar>& state, const Tensor<Scalar>& low, const Tensor<Scalar>& clean, double lr) {
  state.encoder.zero_grad();
  state.decoder.zero_grad();
  Graph<Scalar> graph(true);
  std::vector<Var<Scalar>> teacher;
  const TotalLoss<Scalar> loss = build_loss(state, low, clean, graph, teacher);
  if (!std::isfinite(loss.breakdown.total)) {
    throw Error(ErrorCode::NonFiniteLoss, "step " + std::to_string(state.step + 1) + ": " + describe(loss.breakdown));
  }
  graph.backward(loss.total);
  OptimizedSet<Scalar> opt(state.encoder, state.decoder);
  for (std::size_t i = 0; i < opt.size(); ++i) {
    if (!all_finite(opt[i].grad)) {
      throw Error(ErrorCode::NonFiniteLoss,
                  "step " + std::to_string(state.step + 1) + ": non-finite gradient in " + opt[i].name);
    }
  }
  adam_step(opt, state.adam, lr, state.train.adam(), state.train.grad_clip);
  ema_update(state.teacher_decoder, state.decoder, state.train.ema_mu);
  state.step += 1;

  return {loss.breakdown, feature_spread(teacher)};
}

int steps_per_epoch(int n, int batch_size) { return (n + batch_size - 1) / batch_size; }

std::vector<int> epoch_order(std::uint64_t seed, int epoch, int n) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng = derive_rng(seed, {std::uint64_t(epoch), 0x5eedull});
  for (int i = n - 1; i > 0; --i) {
    const int j = int(std::uniform_int_distribution<std::int64_t>(0, i)(rng));
    std::swap(order[i], order[j]);
  }
  return order;
}

std::string checkpoint_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "step_%07lld.ckpt", static_cast<long long>(step));
  return buf;
}

std::vector<StepRecord> train(TrainState<float>& state, const std::vector<Sample>& samples, const TrainHooks& hooks) {
  const TrainConfig& cfg = state.train;
  cfg.validate();
  const int n = static_cast<int>(samples.size());
  if (n == 0) throw Error(ErrorCode::EmptySplit, "no training samples");
  const int per_epoch = steps_per_epoch(n, cfg.batch_size);
  const std::int64_t total = cfg.max_steps > 0 ? cfg.max_steps : std::int64_t(cfg.epochs) * per_epoch;

  std::ofstream log;
  if (!hooks.run_dir.empty()) {
    fs::create_directories(hooks.run_dir / "checkpoints");
    log.open(hooks.run_dir / "log.jsonl", std::ios::app);
    if (!log) throw Error(ErrorCode::IoError, "cannot open log in " + hooks.run_dir.string());
  }
  auto save = [&](const std::string& name) {
    if (!hooks.run_dir.empty()) save_checkpoint(hooks.run_dir / "checkpoints" / name, state);
  };

  const auto start = std::chrono::steady_clock::now();
  std::vector<StepRecord> records;
  std::vector<int> order;
  int order_epoch = -1;
  while (state.step < total) {
    const int epoch = static_cast<int>(state.step / per_epoch);
    const int slot = static_cast<int>(state.step % per_epoch);
    if (epoch != order_epoch) {
      order = epoch_order(cfg.seed, epoch, n);
      order_epoch = epoch;
    }
    StepRecord rec;
    std::vector<Tensor<float>> lows;
    std::vector<Tensor<float>> cleans;
    for (int k = slot * cfg.batch_size; k < std::min(n, (slot + 1) * cfg.batch_size); ++k) {
      const Sample& s = samples[order[k]];
      std::mt19937_64 rng = derive_rng(cfg.seed, {std::uint64_t(epoch), std::uint64_t(k)});
      ImagePair<float> pair{s.low, s.clean};
      if (cfg.crop > 0) pair = random_crop_pair(pair.first, pair.second, cfg.crop, rng);
      if (cfg.flip) pair = flip_augment(pair.first, pair.second, rng);
      lows.push_back(std::move(pair.first));
      cleans.push_back(std::move(pair.second));
      rec.batch_ids.push_back(s.pair_id);
    }
    rec.epoch = epoch;
    rec.lr = cosine_lr(cfg.lr, std::min(epoch, cfg.epochs), cfg.epochs);
    StepResult result = train_step(state, concat_batch(lows), concat_batch(cleans), rec.lr);
    rec.step = state.step;
    rec.loss = std::move(result.loss);
    rec.teacher_feature_std = std::move(result.teacher_feature_std);

    if (log.is_open()) {
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      nlohmann::json j = {{"step", rec.step},
                          {"epoch", rec.epoch},
                          {"lr", rec.lr},
                          {"config_tag", to_string(rec.loss.tag)},
                          {"mse", rec.loss.mse},
                          {"ssim_loss", rec.loss.ssim_loss},
                          {"mirror", rec.loss.mirror},
                          {"mirror_per_level", rec.loss.mirror_per_level},
                          {"total", rec.loss.total},
                          {"teacher_feature_std", rec.teacher_feature_std},
                          {"batch_ids", rec.batch_ids},
                          {"wall_s", wall}};
      log << j.dump() << '\n';
      log.flush();
    }
    if (hooks.on_step) hooks.on_step(rec);
    records.push_back(std::move(rec));

    if (cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0) save(checkpoint_name(state.step));
    if (slot == per_epoch - 1 && hooks.on_epoch_end) hooks.on_epoch_end(state, epoch);
  }
  save("last.ckpt");
  return records;
}

template <typename Scalar>
Tensor<Scalar> reflect_pad(const Tensor<Scalar>& image, int pad_bottom, int pad_right) {
  const int h = image.height();
  const int w = image.width();
  auto fold = [](int i, int size) {
    if (size == 1) return 0;
    const int period = 2 * (size - 1);
    i %= period;
    return i < size ? i : period - i;
  };
  Tensor<Scalar> out(image.batch(), image.channels(), h + pad_bottom, w + pad_right);
  for (int n = 0; n < image.batch(); ++n)
    for (int c = 0; c < image.channels(); ++c)
      for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) out(n, c, y, x) = image(n, c, fold(y, h), fold(x, w));
  return out;
}

template <typename Scalar>
Tensor<Scalar> enhance(const BackboneConfig& model, ParameterSet<Scalar>& encoder, ParameterSet<Scalar>& decoder,
                       const Tensor<Scalar>& image) {
  const int d = model.divisor();
  const int h = image.height();
  const int w = image.width();
  const int pad_h = (d - h % d) % d;
  const int pad_w = (d - w % d) % d;
  Graph<Scalar> graph(false);
  const Tensor<Scalar> input = (pad_h || pad_w) ? reflect_pad(image, pad_h, pad_w) : image;
  const Tensor<Scalar>& full = forward(model, encoder, decoder, graph.constant(input)).image.value();
  if (!pad_h && !pad_w) return full;
  Tensor<Scalar> out(image.batch(), full.channels(), h, w);
  for (int n = 0; n < out.batch(); ++n)
    for (int c = 0; c < out.channels(); ++c) out.plane(n, c) = full.plane(n, c).topLeftCorner(h, w);
  return out;
}

#define LLIE_INSTANTIATE_TS(S)                                                                                  \
  template TrainState<S> init_state(const BackboneConfig&, const TrainConfig&, const LossConfig&);              \
  template void ema_update(ParameterSet<S>&, const ParameterSet<S>&, double);                                   \
  template std::vector<Var<S>> teacher_pyramid(TrainState<S>&, const Tensor<S>&, Graph<S>&);                    \
  template TotalLoss<S> training_loss(TrainState<S>&, const Tensor<S>&, const Tensor<S>&, Graph<S>&);           \
  template StepResult train_step(TrainState<S>&, const Tensor<S>&, const Tensor<S>&, double);                   \
  template Tensor<S> reflect_pad(const Tensor<S>&, int, int);                                                   \
  template Tensor<S> enhance(const BackboneConfig&, ParameterSet<S>&, ParameterSet<S>&, const Tensor<S>&);

LLIE_INSTANTIATE_TS(float)
LLIE_INSTANTIATE_TS(double)

}  // namespace llie
