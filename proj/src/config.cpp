#include "vbgp/config.hpp"

#include <cstdlib>
#include <fstream>
#include <limits>

#include "vbgp/errors.hpp"

namespace vbgp {

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("config field '" + field + "' " + why);
  };
  if (!(lambda > 0.0)) fail("lambda", "must be > 0");
  if (!(sigma2_k > 0.0)) fail("sigma2_k", "must be > 0");
  if (!(sigma2_y >= 0.0)) fail("sigma2_y", "must be >= 0");
  if (n_obs < 1) fail("n_obs", "must be >= 1");
  if (!(span_end > span_start)) fail("span_end", "must exceed span_start");
  if (grid_steps < 1) fail("grid_steps", "must be >= 1");
  if (epochs < 0) fail("epochs", "must be >= 0");
  if (!(learning_rate >= 0.0)) fail("learning_rate", "must be >= 0");
  if (mc_samples < 1) fail("mc_samples", "must be >= 1");
  if (out_dir.empty()) fail("out_dir", "must be non-empty");
  if (hidden_size < 1) fail("hidden_size", "must be >= 1");
  if (n_paths < 2) fail("n_paths", "must be >= 2");
  if (n_permutations < 100) fail("n_permutations", "must be >= 100");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha", "must be in (0, 1)");
  if (checkpoint_every < 0) fail("checkpoint_every", "must be >= 0");
  if (!(clip_norm > 0.0)) fail("clip_norm", "must be > 0");
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig nonlinear_config() {
  ExperimentConfig c;
  c.likelihood = Likelihood::Square;
  c.span_start = 18.0;
  c.span_end = 30.0;
  c.n_obs = 12;
  // Pointwise interval quantiles are read off the emitted bundle, so this
  // study emits a larger one to keep the 2.5/97.5 percentiles stable.
  c.n_paths = 100;
  return c;
}

namespace {

double parse_real(const std::string& key, const std::string& value) {
  const char* s = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw ConfigError("config field '" + key + "': not a number: '" + value +
                      "'");
  return v;
}

long parse_integer(const std::string& key, const std::string& value) {
  const char* s = value.c_str();
  char* end = nullptr;
  const long v = std::strtol(s, &end, 10);
  if (end == s || *end != '\0')
    throw ConfigError("config field '" + key + "': not an integer: '" +
                      value + "'");
  return v;
}

std::string trimmed(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

}  // namespace

void apply_config_entry(ExperimentConfig& config, const std::string& key,
                        const std::string& value) {
  if (key == "kernel") {
    try {
      config.kernel = kernel_kind_from_string(value);
    } catch (const Error& e) {
      throw ConfigError(std::string("config field 'kernel': ") + e.what());
    }
  } else if (key == "lambda") {
    config.lambda = parse_real(key, value);
  } else if (key == "sigma2_k") {
    config.sigma2_k = parse_real(key, value);
  } else if (key == "sigma2_y") {
    config.sigma2_y = parse_real(key, value);
  } else if (key == "n_obs") {
    config.n_obs = static_cast<int>(parse_integer(key, value));
  } else if (key == "span_start") {
    config.span_start = parse_real(key, value);
  } else if (key == "span_end") {
    config.span_end = parse_real(key, value);
  } else if (key == "grid_steps") {
    config.grid_steps = static_cast<int>(parse_integer(key, value));
  } else if (key == "epochs") {
    config.epochs = static_cast<int>(parse_integer(key, value));
  } else if (key == "learning_rate") {
    config.learning_rate = parse_real(key, value);
  } else if (key == "learning_rate_final") {
    config.learning_rate_final = parse_real(key, value);
  } else if (key == "mc_samples") {
    config.mc_samples = static_cast<int>(parse_integer(key, value));
  } else if (key == "likelihood") {
    config.likelihood = likelihood_from_string(value);
  } else if (key == "seed") {
    const long v = parse_integer(key, value);
    if (v < 0) throw ConfigError("config field 'seed': must be >= 0");
    config.seed = static_cast<std::uint64_t>(v);
  } else if (key == "out_dir") {
    config.out_dir = value;
  } else if (key == "hidden_size") {
    config.hidden_size = static_cast<int>(parse_integer(key, value));
  } else if (key == "n_paths") {
    config.n_paths = static_cast<int>(parse_integer(key, value));
  } else if (key == "n_permutations") {
    config.n_permutations = static_cast<int>(parse_integer(key, value));
  } else if (key == "alpha") {
    config.alpha = parse_real(key, value);
  } else if (key == "checkpoint_every") {
    config.checkpoint_every = static_cast<int>(parse_integer(key, value));
  } else if (key == "clip_norm") {
    config.clip_norm = parse_real(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config_file(const std::string& path,
                                   const ExperimentConfig& base) {
  std::ifstream file(path);
  if (!file) throw IoError("cannot open config: " + path);
  ExperimentConfig config = base;
  std::string line;
  int line_no = 0;
  while (std::getline(file, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config " + path + " line " +
                        std::to_string(line_no) + ": expected key = value");
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config " + path + " line " +
                        std::to_string(line_no) + ": empty key");
    apply_config_entry(config, key, value);
  }
  return config;
}

}  // namespace vbgp
