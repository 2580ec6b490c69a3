// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "gradcheck.hpp"
#include "llie/checkpoint.hpp"
#include "llie/commands.hpp"
#include "llie/losses.hpp"
#include "llie/metrics.hpp"
#include "llie/mirror_loss.hpp"
#include "llie/ops.hpp"
#include "llie/teacher_student.hpp"
#include "oracles.hpp"

using namespace llie;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances and budgets.
constexpr double kOracleTol = 1e-6;
constexpr double kOracleSeconds = 10;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradSeconds = 120;
constexpr double kEmaTol = 1e-7;
constexpr double kEmaMu = 0.999;
constexpr int kEmaSteps = 1000;
constexpr double kEmaSeconds = 5;
constexpr double kAffineTol = 1e-5;
constexpr double kOverfitGainDb = 6.0;
constexpr double kOverfitLossRatio = 0.5;
constexpr double kOverfitSeconds = 600;
constexpr double kMetricTol = 1e-6;
constexpr double kResumeTol = 1e-9;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

double max_abs_diff(const Tensor<double>& a, const Tensor<double>& b) {
  if (!(a.shape() == b.shape())) return INFINITY;
  return (a.array() - b.array()).abs().maxCoeff();
}

BackboneConfig tiny_model(int depth, int base) {
  BackboneConfig m;
  m.depth = depth;
  m.base_channels = base;
  m.cbam_reduction = 2;
  return m;
}

// Toy-scale setup for criteria 6, 7 and 9. Calibrated once on synthetic
// 32x32 pairs; the seed is part of the calibration.
TrainConfig toy_train(int steps) {
  TrainConfig t;
  t.lr = 3e-3;
  t.epochs = steps;
  t.batch_size = 2;
  t.crop = 0;
  t.max_steps = steps;
  t.seed = 2;
  return t;
}

BackboneConfig toy_model() { return tiny_model(2, 16); }

Outcome loss_math_oracles() {
  double worst = 0;
  bool bounds_ok = true;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Tensor<double> rgb = oracle::random_tensor(2, 3, 8, 8, seed);
    const Tensor<double> lum = luminance_map(rgb);
    worst = std::max(worst, max_abs_diff(lum, oracle::luminance(rgb)));
    const Tensor<double> norm = normalize_luminance(lum);
    worst = std::max(worst, max_abs_diff(norm, oracle::minmax(oracle::luminance(rgb))));
    const WeightMap<double> w = emphasis_weights(norm, 0.6);
    const Tensor<double> w_ref = oracle::weights(oracle::minmax(oracle::luminance(rgb)), 0.6);
    worst = std::max(worst, max_abs_diff(w.data, w_ref));
    bounds_ok = bounds_ok && w.data.array().minCoeff() >= 1.0 && w.data.array().maxCoeff() <= 1.6 + 1e-12;
    for (auto [h, wd] : {std::pair{4, 4}, {2, 2}, {1, 1}, {5, 3}, {8, 8}}) {
      worst = std::max(worst, max_abs_diff(resize_weights(w, h, wd).data, oracle::bilinear(w_ref, h, wd)));
    }

    const Tensor<double> fs = oracle::random_tensor(2, 4, 8, 8, seed + 100, -2, 2);
    const Tensor<double> ft = oracle::random_tensor(2, 4, 8, 8, seed + 200, -1, 3);
    worst = std::max(worst, max_abs_diff(standardize_features(fs, 1e-6), oracle::standardize(fs, 1e-6)));
    worst = std::max(worst, std::abs(iaml_level(fs, ft, w.data, 1e-6) - oracle::iaml_level(fs, ft, w_ref, 1e-6)));

    std::vector<Tensor<double>> ps;
    std::vector<Tensor<double>> pt;
    for (int s : {2, 4, 8}) {
      ps.push_back(oracle::random_tensor(2, 4, s, s, seed * 10 + s, -1, 1));
      pt.push_back(oracle::random_tensor(2, 4, s, s, seed * 20 + s, 0, 2));
    }
    worst = std::max(worst, std::abs(iaml_total(ps, pt, w, 1e-6).total - oracle::iaml_total(ps, pt, w_ref, 1e-6)));
  }
  return {worst <= kOracleTol && bounds_ok,
          "max abs error " + fmt("%.2e", worst) + (bounds_ok ? ", weights within [1, 1.6]" : ", weight bounds violated")};
}

Outcome gradient_correctness() {
  const BackboneConfig model = tiny_model(2, 4);
  TrainConfig train;
  train.seed = 3;
  LossConfig loss;  // IAML configuration
  TrainState<double> state = init_state<double>(model, train, loss);
  // A teacher that differs from the student makes the mirror term non-trivial.
  std::mt19937_64 rng(99);
  state.teacher_decoder = make_decoder_weights<double>(model, rng);
  const Tensor<double> low = oracle::random_tensor(1, 3, 16, 16, 5, 0.0, 0.3);
  const Tensor<double> clean = oracle::random_tensor(1, 3, 16, 16, 6, 0.2, 1.0);

  state.encoder.zero_grad();
  state.decoder.zero_grad();
  state.teacher_decoder.zero_grad();
  Graph<double> g(true);
  g.backward(training_loss(state, low, clean, g).total);
  const Eigen::Index ne = state.encoder.count();
  Eigen::VectorXd analytic(ne + state.decoder.count());
  analytic << state.encoder.flatten_grad(), state.decoder.flatten_grad();
  Eigen::VectorXd x(analytic.size());
  x << state.encoder.flatten(), state.decoder.flatten();
  const bool teacher_untouched = state.teacher_decoder.flatten_grad().cwiseAbs().maxCoeff() == 0.0;

  // The encoder is shared, so perturbing it also moves the teacher features.
  // Under stop-gradient those are constants: hold them at the base point.
  std::vector<Tensor<double>> frozen;
  {
    Graph<double> h(false);
    for (const auto& level : teacher_pyramid(state, clean, h)) frozen.push_back(level.value());
  }
  const WeightMap<double> w0 = illumination_weights(low, loss.beta);
  auto f = [&](const Eigen::VectorXd& v) {
    state.encoder.assign(v.head(ne));
    state.decoder.assign(v.tail(v.size() - ne));
    Graph<double> h(false);
    const DecoderOutput<double> o = forward(model, state.encoder, state.decoder, h.constant(low));
    std::vector<Var<double>> t;
    for (const auto& level : frozen) t.push_back(h.constant(level));
    return total_loss(o.image, h.constant(clean), o.pyramid, t, w0, loss).total.value().item();
  };
  const gradcheck::Result params = gradcheck::compare(f, x, analytic, 1e-5);
  f(x);

  // Gradient with respect to the prediction, and the teacher features.
  Graph<double> g2(true);
  const DecoderOutput<double> out = forward(model, state.encoder, state.decoder, g2.constant(low));
  const Var<double> pred = g2.leaf(out.image.value());
  std::vector<Var<double>> student;
  std::vector<Var<double>> teacher;
  for (const auto& level : out.pyramid) student.push_back(g2.leaf(level.value()));
  for (const auto& level : teacher_pyramid(state, clean, g2)) teacher.push_back(g2.leaf(level.value()));
  const WeightMap<double> w = illumination_weights(low, 0.6);
  g2.backward(total_loss(pred, g2.constant(clean), student, teacher, w, loss).total);
  double teacher_grad = 0;
  for (const auto& t : teacher) teacher_grad = std::max(teacher_grad, g2.grad(t).array().abs().maxCoeff());

  const Tensor<double> pred0 = pred.value();
  Eigen::VectorXd pflat = Eigen::Map<const Eigen::VectorXd>(pred0.data(), pred0.size());
  Eigen::VectorXd pgrad = Eigen::Map<const Eigen::VectorXd>(g2.grad(pred).data(), pred0.size());
  auto fp = [&](const Eigen::VectorXd& v) {
    Graph<double> h(false);
    Tensor<double> p(pred0.shape());
    p.array() = v.array();
    std::vector<Var<double>> s;
    std::vector<Var<double>> t;
    for (const auto& level : student) s.push_back(h.constant(level.value()));
    for (const auto& level : teacher) t.push_back(h.constant(level.value()));
    return total_loss(h.constant(p), h.constant(clean), s, t, w, loss).total.value().item();
  };
  const gradcheck::Result preds = gradcheck::compare(fp, pflat, pgrad);

  OptimizedSet<double> opt(state.encoder, state.decoder);
  const bool excluded = !opt.contains_any(state.teacher_decoder);
  const bool pass = params.max_rel <= kGradRelTol && preds.max_rel <= kGradRelTol && teacher_grad == 0.0 &&
                    teacher_untouched && excluded;
  return {pass, std::to_string(analytic.size()) + " params max rel " + fmt("%.2e", params.max_rel) +
                    ", pred max rel " + fmt("%.2e", preds.max_rel) + ", |d/d teacher features| " +
                    fmt("%.1e", teacher_grad) + (teacher_untouched && excluded ? ", teacher weights off the path" : ", teacher weights reached")};
}

Outcome ema_exactness() {
  const BackboneConfig model = tiny_model(2, 4);
  std::mt19937_64 rng(21);
  ParameterSet<double> student = make_decoder_weights<double>(model, rng);
  ParameterSet<double> teacher = make_decoder_weights<double>(model, rng);
  const double gap0 = (teacher.flatten() - student.flatten()).cwiseAbs().maxCoeff();
  double worst = 0;
  for (int k = 1; k <= kEmaSteps; ++k) {
    ema_update(teacher, student, kEmaMu);
    const double gap = (teacher.flatten() - student.flatten()).cwiseAbs().maxCoeff();
    worst = std::max(worst, std::abs(gap - std::pow(kEmaMu, k) * gap0));
  }
  return {worst <= kEmaTol, "max deviation from mu^k gap " + fmt("%.2e", worst) + " over " +
                                std::to_string(kEmaSteps) + " steps"};
}

Outcome teacher_isolation() {
  const BackboneConfig model = tiny_model(2, 4);
  TrainConfig train;
  train.seed = 8;
  LossConfig loss;
  TrainState<double> state = init_state<double>(model, train, loss);
  const Tensor<double> low = oracle::random_tensor(2, 3, 16, 16, 1, 0.0, 0.3);
  const Tensor<double> clean = oracle::random_tensor(2, 3, 16, 16, 2, 0.2, 1.0);
  const WeightMap<double> w = illumination_weights(low, 0.6);

  auto all_grads = [&] {
    double m = 0;
    for (const auto* set : {&state.encoder, &state.decoder, &state.teacher_decoder}) {
      m = std::max(m, set->flatten_grad().cwiseAbs().maxCoeff());
    }
    return m;
  };
  auto zero = [&] {
    state.encoder.zero_grad();
    state.decoder.zero_grad();
    state.teacher_decoder.zero_grad();
  };

  // Teacher-only objective: only the lambda-weighted mirror term, fed by the
  // teacher branch exactly as train_step builds it.
  zero();
  Graph<double> g(true);
  const std::vector<Var<double>> teacher = teacher_pyramid(state, clean, g);
  std::vector<Var<double>> other = teacher_pyramid(state, low, g);
  const Var<double> mirror = ops::affine(iaml_total(teacher, other, w).total, 0.8, 0.0);
  g.backward(mirror);
  const double teacher_path = all_grads();

  // Control: the student branch on the same graph type does produce gradient.
  zero();
  Graph<double> c(true);
  const DecoderOutput<double> student = forward(model, state.encoder, state.decoder, c.constant(low));
  c.backward(iaml_total(student.pyramid, teacher_pyramid(state, clean, c), w).total);
  const double control = all_grads();

  // A full step: the teacher moves exactly by the EMA formula.
  const VectorX<double> before = state.teacher_decoder.flatten();
  train_step(state, low, clean, 1e-3);
  const VectorX<double> expected = kEmaMu * before + (1 - kEmaMu) * state.decoder.flatten();
  const double ema_err = (state.teacher_decoder.flatten() - expected).cwiseAbs().maxCoeff();
  const double teacher_grad_after = state.teacher_decoder.flatten_grad().cwiseAbs().maxCoeff();

  OptimizedSet<double> opt(state.encoder, state.decoder);
  const bool excluded = !opt.contains_any(state.teacher_decoder) && opt.contains_any(state.encoder) &&
                        opt.size() == state.encoder.size() + state.decoder.size();
  const bool pass = teacher_path == 0.0 && control > 0 && teacher_grad_after == 0.0 && ema_err <= 1e-15 && excluded;
  return {pass, "teacher-path max |grad| " + fmt("%.1e", teacher_path) + " (student control " +
                    fmt("%.1e", control) + "), teacher update off EMA by " + fmt("%.1e", ema_err) +
                    (excluded ? ", optimizer set excludes teacher" : ", optimizer set includes teacher")};
}

Outcome affine_invariance() {
  double worst = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.5, 5.0);
    std::uniform_real_distribution<double> shift(-3.0, 3.0);
    const Tensor<double> image = oracle::random_tensor(2, 3, 8, 8, seed + 50);
    const WeightMap<double> w = illumination_weights(image, 0.6);
    std::vector<Tensor<double>> ps;
    std::vector<Tensor<double>> pt;
    for (int s : {2, 4, 8}) {
      ps.push_back(oracle::random_tensor(2, 4, s, s, seed * 7 + s, -2, 2));
      pt.push_back(oracle::random_tensor(2, 4, s, s, seed * 13 + s, -2, 2));
    }
    std::vector<Tensor<double>> moved = pt;
    for (auto& level : moved)
      for (int n = 0; n < level.batch(); ++n)
        for (int c = 0; c < level.channels(); ++c) {
          const double a = scale(rng);
          const double b = shift(rng);
          level.plane(n, c).array() = a * level.plane(n, c).array() + b;
        }
    worst = std::max(worst, std::abs(iaml_total(ps, pt, w).total - iaml_total(ps, moved, w).total));
    worst = std::max(worst, std::abs(iaml_level(ps[2], pt[2], w.data) - iaml_level(ps[2], moved[2], w.data)));
  }
  return {worst <= kAffineTol, "max change " + fmt("%.2e", worst)};
}

double mean_psnr(TrainState<float>& state, const std::vector<Sample>& samples) {
  return evaluate_samples(samples, [&](const Tensor<float>& img) {
           return enhance(state.model, state.encoder, state.decoder, img);
         }).mean_psnr;
}

Outcome overfit_smoke() {
  const std::filesystem::path root = fixtures::scratch_dir("overfit");
  fixtures::write_split(root, "train", {4, 32, 32, 7});
  const std::vector<Sample> samples = load_samples(discover_pairs(root, "train").pairs);
  TrainState<float> state = init_state<float>(toy_model(), toy_train(300), LossConfig{});
  const double before = mean_psnr(state, samples);
  const auto records = train(state, samples);
  const double after = mean_psnr(state, samples);
  const double l10 = records.at(9).loss.total;
  const double l300 = records.at(299).loss.total;
  std::filesystem::remove_all(root);
  const bool pass = records.size() == 300 && after - before >= kOverfitGainDb && l300 < kOverfitLossRatio * l10;
  return {pass, "PSNR " + fmt("%.2f", before) + " -> " + fmt("%.2f", after) + " dB, L_total(10) " +
                    fmt("%.4f", l10) + " L_total(300) " + fmt("%.4f", l300)};
}

Outcome ablation() {
  const std::filesystem::path root = fixtures::scratch_dir("ablation");
  fixtures::write_split(root, "train", {4, 32, 32, 7});
  RunConfig config;
  config.model = toy_model();
  config.train = toy_train(200);
  config.data.root = root.string();
  config.train.crop = 0;
  config.run_dir = (root / "run").string();
  std::ostringstream log;
  const AblationResult result = cmd_ablate(config, 200, 4, log);
  bool labels = result.rows.size() == 5;
  for (std::size_t i = 0; labels && i < 5; ++i) labels = result.rows[i].tag == kAllConfigTags[i];
  const bool table = std::filesystem::exists(root / "run" / "reports" / "ablation.csv");
  const double iaml = labels ? result.rows[4].metrics.ssim : 0;
  const double mse = labels ? result.rows[0].metrics.ssim : 0;
  std::filesystem::remove_all(root);
  const bool pass = labels && table && result.identical_data_order && iaml >= mse;
  return {pass, std::to_string(result.rows.size()) + " rows, identical data order " +
                    (result.identical_data_order ? "yes" : "no") + ", training SSIM IAML " + fmt("%.4f", iaml) +
                    " vs MSE-only " + fmt("%.4f", mse)};
}

Outcome metric_fidelity() {
  double worst = 0;
  const SsimParams p;
  for (auto [a, b] : {std::pair{0.2, 0.7}, {0.5, 0.5}, {0.0, 1.0}, {0.9, 0.35}}) {
    const Tensor<double> x = Tensor<double>::constant({1, 3, 16, 16}, a);
    const Tensor<double> y = Tensor<double>::constant({1, 3, 16, 16}, b);
    const double closed = (2 * a * b + p.c1()) / (a * a + b * b + p.c1());
    worst = std::max(worst, std::abs(ssim_index(x, y, p) - closed));
    worst = std::max(worst, std::abs(ssim_metric(x, y) - closed));
    const double diff_psnr = a == b ? kPsnrCap : 10 * std::log10(1.0 / ((a - b) * (a - b)));
    worst = std::max(worst, std::abs(psnr(x, y) - diff_psnr));
  }
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Tensor<double> x = oracle::random_tensor(1, 3, 24, 20, seed);
    const Tensor<double> y = oracle::random_tensor(1, 3, 24, 20, seed + 10);
    Tensor<double> z = x;
    z.array() = (x.array() + 0.1 * (y.array() - 0.5)).max(0.0).min(1.0);
    worst = std::max(worst, std::abs(ssim_metric(x, y) - oracle::ssim(x, y)));
    worst = std::max(worst, std::abs(ssim_metric(x, z) - oracle::ssim(x, z)));
    worst = std::max(worst, std::abs(psnr(x, y) - oracle::psnr(x, y)));
    worst = std::max(worst, std::abs(psnr(x, z) - oracle::psnr(x, z)));
  }
  const double twenty = psnr_from_mse(0.01);
  const std::string shown = fmt("%.3f", twenty);
  const bool pass = worst <= kMetricTol && shown == "20.000" && std::abs(twenty - 20.0) <= 1e-12;
  return {pass, "max error " + fmt("%.2e", worst) + ", PSNR(mse=0.01) = " + shown + " dB"};
}

Outcome resume_determinism() {
  const std::filesystem::path root = fixtures::scratch_dir("resume");
  const std::vector<Sample> samples = fixtures::synthetic_samples({4, 48, 48, 3});
  TrainConfig cfg = toy_train(50);
  cfg.batch_size = 2;
  cfg.crop = 32;
  cfg.epochs = 25;
  cfg.seed = 17;
  const BackboneConfig model = tiny_model(2, 4);

  TrainState<float> straight = init_state<float>(model, cfg, LossConfig{});
  const std::vector<StepRecord> full = train(straight, samples);

  TrainConfig first_half = cfg;
  first_half.max_steps = 25;
  TrainState<float> interrupted = init_state<float>(model, first_half, LossConfig{});
  TrainHooks hooks;
  hooks.run_dir = root;
  std::vector<StepRecord> resumed = train(interrupted, samples, hooks);
  TrainState<float> restored = load_checkpoint<float>(root / "checkpoints" / "last.ckpt", model);
  restored.train.max_steps = 50;
  for (auto& r : train(restored, samples)) resumed.push_back(std::move(r));

  double worst = full.size() == resumed.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(full.size(), resumed.size()); ++i) {
    worst = std::max(worst, std::abs(full[i].loss.total - resumed[i].loss.total));
    if (full[i].batch_ids != resumed[i].batch_ids) worst = INFINITY;
  }
  const double weights = (straight.decoder.flatten() - restored.decoder.flatten()).cwiseAbs().maxCoeff();
  std::filesystem::remove_all(root);
  return {worst <= kResumeTol && weights == 0.0 && restored.step == 50,
          std::to_string(resumed.size()) + " steps, max loss difference " + fmt("%.1e", worst) +
              ", final weight difference " + fmt("%.1e", weights)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0: no runtime bound
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments select criteria by number.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const std::vector<Criterion> criteria = {
      {1, "loss-math oracle suite", kOracleSeconds, loss_math_oracles},
      {2, "gradient correctness", kGradSeconds, gradient_correctness},
      {3, "EMA exactness", kEmaSeconds, ema_exactness},
      {4, "teacher-isolation audit", 0, teacher_isolation},
      {5, "affine invariance", 0, affine_invariance},
      {6, "overfit smoke test", kOverfitSeconds, overfit_smoke},
      {7, "ablation table", 0, ablation},
      {8, "metric fidelity", 0, metric_fidelity},
      {9, "resume determinism", 0, resume_determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    bool pass = o.pass;
    std::string timing = fmt("%.2f s", seconds);
    if (c.budget_s > 0) {
      timing += " of " + fmt("%.0f s", c.budget_s);
      pass = pass && seconds <= c.budget_s;
    }
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << c.id << " " << c.name << ": " << o.detail << " (" << timing
              << ")" << std::endl;
    failures += pass ? 0 : 1;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
