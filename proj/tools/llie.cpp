// Command-line front end: train, evaluate, enhance, ablate.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "llie/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Low-light image enhancement with an EMA teacher and illumination-aware feature mirroring"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string lpips_model;
  app.add_option("--config", config_path, "Configuration file (key = value lines)")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override one key, e.g. --set loss.lambda=0.5 (repeatable)");
  app.add_option("--seed", seed, "Shorthand for --set train.seed=N");
  app.add_option("--lpips-model", lpips_model, "Perceptual model file for the LPIPS column");

  std::string checkpoint;
  auto* train = app.add_subcommand("train", "Train a student/teacher pair");
  train->add_option("--checkpoint", checkpoint, "Resume from this checkpoint")->check(CLI::ExistingFile);

  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  evaluate->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required()->check(CLI::ExistingFile);

  std::string input;
  std::string output;
  auto* enhance = app.add_subcommand("enhance", "Enhance a single image");
  enhance->add_option("--checkpoint", checkpoint, "Checkpoint to use")->required()->check(CLI::ExistingFile);
  enhance->add_option("input", input, "Low-light image (PNG or JPEG)")->required()->check(CLI::ExistingFile);
  enhance->add_option("output", output, "Where to write the enhanced PNG")->required();

  std::int64_t steps = 200;
  int pairs = 4;
  auto* ablate = app.add_subcommand("ablate", "Train and compare the five loss configurations");
  ablate->add_option("--steps", steps, "Training steps per configuration")->check(CLI::PositiveNumber);
  ablate->add_option("--pairs", pairs, "Number of training pairs to use")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*enhance) {
      llie::cmd_enhance(checkpoint, input, output);
      std::cout << "wrote " << output << '\n';
      return 0;
    }
    if (seed) overrides.push_back("train.seed=" + std::to_string(*seed));
    if (!lpips_model.empty()) overrides.push_back("eval.lpips_model=" + lpips_model);
    std::optional<std::filesystem::path> file;
    if (!config_path.empty()) file = config_path;
    const llie::RunConfig config = llie::parse_config(file, overrides);

    if (*train) {
      std::optional<std::filesystem::path> resume;
      if (!checkpoint.empty()) resume = checkpoint;
      llie::cmd_train(config, resume, std::cout);
    } else if (*evaluate) {
      llie::cmd_evaluate(config, checkpoint, std::cout);
    } else if (*ablate) {
      llie::cmd_ablate(config, steps, pairs, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
