#include "llie/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>

namespace llie {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

[[noreturn]] void type_error(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::TypeError, key + ": expected " + expected + ", got '" + value + "'");
}

[[noreturn]] void range_error(const std::string& key, const std::string& why) {
  throw Error(ErrorCode::RangeError, key + ": " + why);
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& value) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec == std::errc::result_out_of_range) range_error(key, "value out of range");
  if (ec != std::errc() || ptr != value.data() + value.size()) type_error(key, value, "an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  double out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec == std::errc::result_out_of_range) range_error(key, "value out of range");
  if (ec != std::errc() || ptr != value.data() + value.size()) type_error(key, value, "a number");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  type_error(key, value, "a boolean");
}

std::string format_real(double v) {
  char buf[40];
  const auto end = std::to_chars(buf, buf + sizeof(buf), v).ptr;
  return std::string(buf, end);
}

int at_least(const std::string& key, const std::string& value, int lo) {
  const int v = parse_integer<int>(key, value);
  if (v < lo) range_error(key, "must be >= " + std::to_string(lo));
  return v;
}

double real_in(const std::string& key, const std::string& value, double lo, double hi, bool open_hi = false) {
  const double v = parse_real(key, value);
  if (!(v >= lo) || (open_hi ? !(v < hi) : !(v <= hi))) {
    range_error(key, "must be in [" + format_real(lo) + ", " + format_real(hi) + (open_hi ? ")" : "]"));
  }
  return v;
}

double positive(const std::string& key, const std::string& value) {
  const double v = parse_real(key, value);
  if (!(v > 0) || !std::isfinite(v)) range_error(key, "must be positive");
  return v;
}

struct Entry {
  const char* key;
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Entry>& entries() {
  using R = RunConfig;
  using S = const std::string&;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  static const std::vector<Entry> table = {
      {"model.depth", [](R& c, S k, S v) { c.model.depth = at_least(k, v, 1); },
       [](const R& c) { return std::to_string(c.model.depth); }},
      {"model.base_channels", [](R& c, S k, S v) { c.model.base_channels = at_least(k, v, 1); },
       [](const R& c) { return std::to_string(c.model.base_channels); }},
      {"model.cbam_reduction", [](R& c, S k, S v) { c.model.cbam_reduction = at_least(k, v, 1); },
       [](const R& c) { return std::to_string(c.model.cbam_reduction); }},
      {"model.cbam_spatial_kernel",
       [](R& c, S k, S v) {
         const int kernel = at_least(k, v, 1);
         if (kernel % 2 == 0) range_error(k, "must be odd");
         c.model.cbam_spatial_kernel = kernel;
       },
       [](const R& c) { return std::to_string(c.model.cbam_spatial_kernel); }},

      {"train.lr", [](R& c, S k, S v) { c.train.lr = positive(k, v); },
       [](const R& c) { return format_real(c.train.lr); }},
      {"train.adam_beta1", [](R& c, S k, S v) { c.train.adam_beta1 = real_in(k, v, 0, 1, true); },
       [](const R& c) { return format_real(c.train.adam_beta1); }},
      {"train.adam_beta2", [](R& c, S k, S v) { c.train.adam_beta2 = real_in(k, v, 0, 1, true); },
       [](const R& c) { return format_real(c.train.adam_beta2); }},
      {"train.adam_eps", [](R& c, S k, S v) { c.train.adam_eps = positive(k, v); },
       [](const R& c) { return format_real(c.train.adam_eps); }},
      {"train.epochs", [](R& c, S k, S v) { c.train.epochs = at_least(k, v, 1); },
       [](const R& c) { return std::to_string(c.train.epochs); }},
      {"train.batch_size", [](R& c, S k, S v) { c.train.batch_size = at_least(k, v, 1); },
       [](const R& c) { return std::to_string(c.train.batch_size); }},
      {"train.crop", [](R& c, S k, S v) { c.train.crop = at_least(k, v, 0); },
       [](const R& c) { return std::to_string(c.train.crop); }},
      {"train.ema_mu", [](R& c, S k, S v) { c.train.ema_mu = real_in(k, v, 0, 1); },
       [](const R& c) { return format_real(c.train.ema_mu); }},
      {"train.seed", [](R& c, S k, S v) { c.train.seed = parse_integer<std::uint64_t>(k, v); },
       [](const R& c) { return std::to_string(c.train.seed); }},
      {"train.max_steps",
       [](R& c, S k, S v) {
         c.train.max_steps = parse_integer<std::int64_t>(k, v);
         if (c.train.max_steps < 0) range_error(k, "must be >= 0");
       },
       [](const R& c) { return std::to_string(c.train.max_steps); }},
      {"train.checkpoint_every",
       [](R& c, S k, S v) {
         c.train.checkpoint_every = parse_integer<std::int64_t>(k, v);
         if (c.train.checkpoint_every < 0) range_error(k, "must be >= 0");
       },
       [](const R& c) { return std::to_string(c.train.checkpoint_every); }},
      {"train.grad_clip", [](R& c, S k, S v) { c.train.grad_clip = real_in(k, v, 0, kInf); },
       [](const R& c) { return format_real(c.train.grad_clip); }},
      {"train.flip", [](R& c, S k, S v) { c.train.flip = parse_bool(k, v); },
       [](const R& c) { return std::string(c.train.flip ? "true" : "false"); }},
      {"train.pairs", [](R& c, S k, S v) { c.train.pairs = at_least(k, v, 0); },
       [](const R& c) { return std::to_string(c.train.pairs); }},

      {"loss.config_tag", [](R& c, S, S v) { c.loss.tag = parse_config_tag(v); },
       [](const R& c) { return std::string(to_string(c.loss.tag)); }},
      {"loss.lambda", [](R& c, S k, S v) { c.loss.lambda = real_in(k, v, 0, kInf); },
       [](const R& c) { return format_real(c.loss.lambda); }},
      {"loss.iaml.beta",
       [](R& c, S k, S v) {
         const double beta = parse_real(k, v);
         if (beta < 0) throw Error(ErrorCode::NegativeBeta, k + ": must be >= 0");
         if (!std::isfinite(beta)) range_error(k, "must be finite");
         c.loss.beta = beta;
       },
       [](const R& c) { return format_real(c.loss.beta); }},
      {"loss.iaml.eps", [](R& c, S k, S v) { c.loss.eps = positive(k, v); },
       [](const R& c) { return format_real(c.loss.eps); }},
      {"loss.iaml.levels",
       [](R& c, S k, S v) {
         c.loss.levels.clear();
         if (v == "all" || v.empty()) return;
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) {
           const int level = parse_integer<int>(k, trim(item));
           if (level < 1) range_error(k, "levels are 1-based");
           c.loss.levels.push_back(level);
         }
       },
       [](const R& c) {
         if (c.loss.levels.empty()) return std::string("all");
         std::string out;
         for (std::size_t i = 0; i < c.loss.levels.size(); ++i) {
           out += (i ? "," : "") + std::to_string(c.loss.levels[i]);
         }
         return out;
       }},
      {"loss.ssim.window",
       [](R& c, S k, S v) {
         const int w = at_least(k, v, 1);
         if (w % 2 == 0) range_error(k, "must be odd");
         c.loss.ssim.window_size = w;
       },
       [](const R& c) { return std::to_string(c.loss.ssim.window_size); }},
      {"loss.ssim.sigma", [](R& c, S k, S v) { c.loss.ssim.gaussian_sigma = positive(k, v); },
       [](const R& c) { return format_real(c.loss.ssim.gaussian_sigma); }},

      {"data.root", [](R& c, S, S v) { c.data.root = v; }, [](const R& c) { return c.data.root; }},
      {"data.train_split", [](R& c, S, S v) { c.data.train_split = v; },
       [](const R& c) { return c.data.train_split; }},
      {"data.test_split", [](R& c, S, S v) { c.data.test_split = v; },
       [](const R& c) { return c.data.test_split; }},
      {"data.val_split", [](R& c, S, S v) { c.data.val_split = v; }, [](const R& c) { return c.data.val_split; }},
      {"eval.lpips_model", [](R& c, S, S v) { c.lpips_model = v; }, [](const R& c) { return c.lpips_model; }},
      {"output.run_dir", [](R& c, S, S v) { c.run_dir = v; }, [](const R& c) { return c.run_dir; }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  loss.ssim.validate();
  resolve_levels(loss.levels, std::size_t(model.depth));
  if (train.crop > 0 && train.crop % model.divisor() != 0) {
    throw Error(ErrorCode::RangeError, "train.crop: must be a multiple of 2^model.depth = " +
                                           std::to_string(model.divisor()));
  }
  if (train.crop > 0 && uses_ssim(loss.tag) && train.crop < loss.ssim.window_size) {
    throw Error(ErrorCode::RangeError, "train.crop: must be at least loss.ssim.window = " +
                                           std::to_string(loss.ssim.window_size));
  }
}

std::string RunConfig::echo() const {
  std::string out;
  for (const auto& e : entries()) {
    const std::string v = e.get(*this);
    out += std::string(e.key) + " = " + (v.empty() || v.find_first_of(" #") != std::string::npos ? "\"" + v + "\"" : v) + "\n";
  }
  return out;
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (key == e.key) {
      e.set(config, key, value);
      return;
    }
  }
  throw Error(ErrorCode::UnknownKey, "unknown configuration key '" + key + "'");
}

void apply_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw Error(ErrorCode::TypeError, origin + ":" + std::to_string(number) + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::TypeError, origin + ":" + std::to_string(number) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    apply_setting(config, key, unquote(trim(line.substr(eq + 1))));
  }
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
  RunConfig config;
  if (const char* env = std::getenv(kDataRootEnv)) config.data.root = env;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(config, buf.str(), file->string());
  }
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::TypeError, "override '" + item + "' is not key=value");
    apply_setting(config, trim(item.substr(0, eq)), unquote(trim(item.substr(eq + 1))));
  }
  config.validate();
  return config;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& e : entries()) keys.emplace_back(e.key);
  return keys;
}

}  // namespace llie
