#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "llie/config.hpp"
#include "llie/metrics.hpp"

namespace llie {

/// Trains per `config`, writing config.echo, log.jsonl, checkpoints/ and
/// reports/ under config.run_dir. With `resume`, continues that checkpoint.
TrainState<float> cmd_train(const RunConfig& config, const std::optional<std::filesystem::path>& resume,
                            std::ostream& out);

/// Scores the student of `checkpoint` on the test split and writes
/// reports/metrics.{json,txt,csv}.
MetricsReport cmd_evaluate(const RunConfig& config, const std::filesystem::path& checkpoint, std::ostream& out);

/// Enhances one image with the student of `checkpoint` and writes a PNG.
void cmd_enhance(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
                 const std::filesystem::path& output);

struct AblationRow {
  ConfigTag tag = ConfigTag::MseOnly;
  SummaryRow metrics;  // on the training pairs
  double final_loss = 0;
  std::vector<std::vector<std::string>> batch_ids;  // per step
};

struct AblationResult {
  std::vector<AblationRow> rows;  // one per tag, in kAllConfigTags order
  bool identical_data_order = false;
};

/// Trains every loss configuration for `steps` steps on the first `pairs`
/// training pairs with identical seeds and data order, then scores each on
/// those pairs. Writes reports/ablation.{txt,csv,json}.
AblationResult cmd_ablate(const RunConfig& config, std::int64_t steps, int pairs, std::ostream& out);

/// Ablation on samples already in memory; cmd_ablate loads them and calls this.
AblationResult run_ablation(const RunConfig& config, const std::vector<Sample>& samples, std::int64_t steps,
                            const std::filesystem::path& run_dir, std::ostream& out);

}  // namespace llie
