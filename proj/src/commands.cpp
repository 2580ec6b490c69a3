#include "llie/commands.hpp"

#include <json.hpp>

#include <fstream>
#include <ostream>

#include "llie/checkpoint.hpp"
#include "llie/image_io.hpp"

namespace llie {
namespace fs = std::filesystem;

namespace {

fs::path data_root(const RunConfig& config) {
  if (config.data.root.empty()) {
    throw Error(ErrorCode::MissingDirectory,
                std::string("data.root is not set (config, --set data.root=..., or $") + kDataRootEnv + ")");
  }
  return config.data.root;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "failed to write " + path.string());
}

std::unique_ptr<PerceptualModel> optional_lpips(const std::string& path) {
  if (path.empty()) return nullptr;
  try {
    return load_perceptual_model(path);
  } catch (const Error& e) {
    warn(std::string(e.what()) + "; LPIPS will be omitted");
    return nullptr;
  }
}

Enhancer student_enhancer(TrainState<float>& state) {
  return [&state](const Tensor<float>& image) { return enhance(state.model, state.encoder, state.decoder, image); };
}

}  // namespace

TrainState<float> cmd_train(const RunConfig& config, const std::optional<fs::path>& resume, std::ostream& out) {
  config.validate();
  const fs::path root = data_root(config);
  const PairListing listing = discover_pairs(root, config.data.train_split);
  const std::vector<Sample> samples = load_samples(listing.pairs, config.train.crop, config.train.pairs);
  std::vector<Sample> val;
  if (!config.data.val_split.empty()) val = load_samples(discover_pairs(root, config.data.val_split).pairs);

  TrainState<float> state;
  if (resume) {
    state = load_checkpoint<float>(*resume, config.model);
    state.train.max_steps = config.train.max_steps;
    state.train.checkpoint_every = config.train.checkpoint_every;
    out << "resuming " << resume->string() << " at step " << state.step << '\n';
  } else {
    state = init_state<float>(config.model, config.train, config.loss);
    state.config_text = config.echo();
  }
  const fs::path run_dir = config.run_dir;
  write_text(run_dir / "config.echo", state.config_text);

  TrainHooks hooks;
  hooks.run_dir = run_dir;
  hooks.on_step = [&out](const StepRecord& r) {
    if (r.step % 10 == 0 || r.step == 1) {
      out << "step " << r.step << " epoch " << r.epoch << " lr " << r.lr << " total " << r.loss.total << '\n';
    }
  };
  if (!val.empty()) {
    hooks.on_epoch_end = [&val, &run_dir](const TrainState<float>& live, int epoch) {
      TrainState<float> snapshot = live;
      const MetricsReport report = evaluate_samples(val, student_enhancer(snapshot));
      std::ofstream log(run_dir / "log.jsonl", std::ios::app);
      log << nlohmann::json{{"epoch", epoch}, {"val_ssim", report.mean_ssim}, {"val_psnr", report.mean_psnr}}.dump()
          << '\n';
    };
  }
  out << "training on " << samples.size() << " pairs, run directory " << run_dir.string() << '\n';
  const auto records = train(state, samples, hooks);
  if (!records.empty()) out << "finished at step " << state.step << ", last total " << records.back().loss.total << '\n';
  return state;
}

MetricsReport cmd_evaluate(const RunConfig& config, const fs::path& checkpoint, std::ostream& out) {
  TrainState<float> state = load_checkpoint<float>(checkpoint);
  const PairListing listing = discover_pairs(data_root(config), config.data.test_split);
  const std::vector<Sample> samples = load_samples(listing.pairs);
  const auto lpips = optional_lpips(config.lpips_model);
  MetricsReport report = evaluate_samples(samples, student_enhancer(state), lpips.get());
  report.dataset = (fs::path(config.data.root) / config.data.test_split).string();
  report.checkpoint = checkpoint.string();

  std::vector<SummaryRow> rows;
  for (const auto& m : report.images) rows.push_back({m.pair_id, m.ssim, m.psnr, m.lpips});
  rows.push_back({"mean", report.mean_ssim, report.mean_psnr, report.mean_lpips});
  const fs::path reports = fs::path(config.run_dir) / "reports";
  write_report(reports / "metrics.json", report);
  write_text(reports / "metrics.txt", render_table(rows, "Image"));
  write_text(reports / "metrics.csv", render_delimited(rows, ',', "pair_id"));
  out << render_table(rows, "Image");
  return report;
}

void cmd_enhance(const fs::path& checkpoint, const fs::path& input, const fs::path& output) {
  TrainState<float> state = load_checkpoint<float>(checkpoint);
  save_png(output, enhance(state.model, state.encoder, state.decoder, load_image(input)));
}

AblationResult run_ablation(const RunConfig& config, const std::vector<Sample>& samples, std::int64_t steps,
                            const fs::path& run_dir, std::ostream& out) {
  if (samples.empty()) throw Error(ErrorCode::EmptySplit, "no pairs to ablate on");
  if (steps < 1) throw Error(ErrorCode::RangeError, "ablation needs at least one step");
  const auto lpips = optional_lpips(config.lpips_model);
  const int per_epoch = steps_per_epoch(int(samples.size()), config.train.batch_size);

  AblationResult result;
  nlohmann::json doc = nlohmann::json::array();
  for (ConfigTag tag : kAllConfigTags) {
    RunConfig variant = config;
    variant.loss.tag = tag;
    variant.train.max_steps = steps;
    variant.train.epochs = int((steps + per_epoch - 1) / per_epoch);
    variant.train.checkpoint_every = 0;
    TrainState<float> state = init_state<float>(variant.model, variant.train, variant.loss);
    state.config_text = variant.echo();

    const fs::path dir = run_dir / "ablation" / std::string(to_string(tag));
    fs::remove_all(dir);
    write_text(dir / "config.echo", state.config_text);
    TrainHooks hooks;
    hooks.run_dir = dir;
    out << "ablation: " << display_name(tag) << " (" << steps << " steps)\n";
    const auto records = train(state, samples, hooks);

    AblationRow row;
    row.tag = tag;
    row.final_loss = records.back().loss.total;
    for (const auto& r : records) row.batch_ids.push_back(r.batch_ids);
    const MetricsReport report = evaluate_samples(samples, student_enhancer(state), lpips.get());
    row.metrics = {std::string(display_name(tag)), report.mean_ssim, report.mean_psnr, report.mean_lpips};
    doc.push_back({{"config_tag", to_string(tag)},
                   {"label", display_name(tag)},
                   {"report", report.to_json()},
                   {"final_loss", row.final_loss}});
    result.rows.push_back(std::move(row));
  }
  result.identical_data_order = true;
  for (const auto& row : result.rows) {
    result.identical_data_order = result.identical_data_order && row.batch_ids == result.rows.front().batch_ids;
  }

  std::vector<SummaryRow> table;
  for (const auto& row : result.rows) table.push_back(row.metrics);
  const fs::path reports = run_dir / "reports";
  write_text(reports / "ablation.txt", render_table(table, "Loss configuration"));
  write_text(reports / "ablation.csv", render_delimited(table, ',', "config"));
  write_text(reports / "ablation.json",
             nlohmann::json{{"steps", steps}, {"identical_data_order", result.identical_data_order}, {"rows", doc}}
                     .dump(2) +
                 "\n");
  out << render_table(table, "Loss configuration");
  if (!result.identical_data_order) warn("ablation rows saw different data orders");
  return result;
}

AblationResult cmd_ablate(const RunConfig& config, std::int64_t steps, int pairs, std::ostream& out) {
  config.validate();
  const PairListing listing = discover_pairs(data_root(config), config.data.train_split);
  const std::vector<Sample> samples = load_samples(listing.pairs, config.train.crop, pairs);
  write_text(fs::path(config.run_dir) / "config.echo", config.echo());
  return run_ablation(config, samples, steps, config.run_dir, out);
}

}  // namespace llie
