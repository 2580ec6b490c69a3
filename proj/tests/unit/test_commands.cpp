#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "llie/commands.hpp"
#include "llie/config.hpp"
#include "llie/image_io.hpp"

using namespace llie;
namespace fs = std::filesystem;

namespace {

RunConfig toy(const fs::path& root) {
  RunConfig c;
  c.model.depth = 2;
  c.model.base_channels = 4;
  c.model.cbam_reduction = 2;
  c.train.batch_size = 2;
  c.train.crop = 12;
  c.train.epochs = 2;
  c.train.lr = 1e-3;
  c.data.root = root.string();
  c.run_dir = (root / "run").string();
  return c;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("train, resume, evaluate and enhance through the command layer") {
  const fs::path root = fixtures::scratch_dir("commands");
  fixtures::write_split(root, "train", {4, 16, 16, 1});
  fixtures::write_split(root, "test", {2, 16, 16, 2});
  RunConfig c = toy(root);
  c.data.val_split = "test";
  c.train.checkpoint_every = 2;
  std::ostringstream out;

  const TrainState<float> s = cmd_train(c, std::nullopt, out);
  CHECK(s.step == 4);
  const fs::path run = c.run_dir;
  CHECK(fs::exists(run / "config.echo"));
  CHECK(fs::exists(run / "checkpoints" / "step_0000002.ckpt"));
  CHECK(fs::exists(run / "checkpoints" / "last.ckpt"));
  const auto log = lines(run / "log.jsonl");
  int steps = 0;
  int validations = 0;
  for (const auto& l : log) {
    const auto j = nlohmann::json::parse(l);
    if (j.contains("total")) {
      ++steps;
      CHECK(j.at("config_tag") == "mse_ssim_iaml");
      CHECK(j.at("mirror_per_level").size() == 2);
    }
    if (j.contains("val_ssim")) ++validations;
  }
  CHECK(steps == 4);
  CHECK(validations == 2);

  RunConfig more = c;
  more.train.max_steps = 6;
  const TrainState<float> resumed = cmd_train(more, run / "checkpoints" / "last.ckpt", out);
  CHECK(resumed.step == 6);

  const MetricsReport report = cmd_evaluate(c, run / "checkpoints" / "last.ckpt", out);
  CHECK(report.images.size() == 2);
  CHECK_FALSE(report.mean_lpips.has_value());
  CHECK(fs::exists(run / "reports" / "metrics.json"));
  CHECK(fs::exists(run / "reports" / "metrics.csv"));

  cmd_enhance(run / "checkpoints" / "last.ckpt", root / "test" / "low" / "pair_000.png", root / "out.png");
  CHECK(read_image_size(root / "out.png") == ImageSize{16, 16});
  fs::remove_all(root);
}

TEST_CASE("ablation runs every configuration on the same batches") {
  const fs::path root = fixtures::scratch_dir("ablate");
  fixtures::write_split(root, "train", {4, 16, 16, 1});
  std::ostringstream out;
  const AblationResult r = cmd_ablate(toy(root), 3, 4, out);
  REQUIRE(r.rows.size() == 5);
  CHECK(r.identical_data_order);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(r.rows[i].tag == kAllConfigTags[i]);
    CHECK(r.rows[i].batch_ids.size() == 3);
    CHECK(r.rows[i].metrics.label == display_name(kAllConfigTags[i]));
  }
  const auto table = lines(fs::path(toy(root).run_dir) / "reports" / "ablation.csv");
  CHECK(table.size() == 6);
  fs::remove_all(root);
}
