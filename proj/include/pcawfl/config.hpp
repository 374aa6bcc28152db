#pragma once

// Flat key=value experiment configuration. Strict by design: unknown keys,
// duplicate keys, malformed values, and cross-field inconsistencies are all
// errors that name the offending key. The full schema is documented in the
// repository README.

#include <charconv>
#include <climits>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcawfl::harness {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Optimizer { kWfl, kAwfl, kAdam, kEf, kEfAdam };
enum class DatasetKind { kSynth, kIdx };
enum class SplitPolicy { kContiguous, kByClass };

inline bool uses_channel(Optimizer opt) {
  return opt == Optimizer::kWfl || opt == Optimizer::kAwfl ||
         opt == Optimizer::kAdam;
}

inline const char* optimizer_name(Optimizer opt) {
  switch (opt) {
    case Optimizer::kWfl: return "wfl";
    case Optimizer::kAwfl: return "awfl";
    case Optimizer::kAdam: return "adam";
    case Optimizer::kEf: return "ef";
    case Optimizer::kEfAdam: return "ef-adam";
  }
  return "?";
}

struct SimConfig {
  int num_workers = 0;
  long num_frames = 0;
  double stepsize = 0.0;
  double momentum = 0.9;
  double h0 = 0.0;
  double p0 = 0.0;                 // mW
  double pathloss_exponent = 0.0;
  double noise_variance = 0.0;     // sigma^2 in mW, resolved from the triple if given
  std::vector<double> distances;   // meters, one per worker
  int raw_dim = 0;                 // d0
  int reduced_dim = 0;             // dhat0
  int samples_per_worker = 0;
  std::vector<int> hidden_dims;
  Optimizer optimizer = Optimizer::kWfl;
  std::uint64_t seed = 0;
  long mc_draws = 100000;
  int mc_dim = 64;                 // gradient dimension used by verify-stats

  DatasetKind dataset = DatasetKind::kSynth;
  int classes = 3;
  double separation = 3.0;
  int test_samples = 200;
  SplitPolicy split = SplitPolicy::kContiguous;
  std::string idx_images, idx_labels, idx_test_images, idx_test_labels;
  bool pca_center = false;
  long eval_every = 0;             // 0 means max(1, num_frames / 200)
  int lipschitz_trials = 8;

  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void bad_value(const std::string& key, std::string_view value) {
  throw ConfigError("config: invalid value for '" + key + "': '" +
                    std::string(value) + "'");
}

inline double to_double(const std::string& key, std::string_view value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end || !std::isfinite(out))
    bad_value(key, value);
  return out;
}

inline long to_long(const std::string& key, std::string_view value) {
  long out = 0;
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, value);
  return out;
}

inline std::uint64_t to_u64(const std::string& key, std::string_view value) {
  std::uint64_t out = 0;
  const char* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) bad_value(key, value);
  return out;
}

inline int to_int(const std::string& key, std::string_view value) {
  const long v = to_long(key, value);
  if (v < INT_MIN || v > INT_MAX) bad_value(key, value);
  return static_cast<int>(v);
}

inline bool to_bool(const std::string& key, std::string_view value) {
  if (value == "true" || value == "on" || value == "1") return true;
  if (value == "false" || value == "off" || value == "0") return false;
  bad_value(key, value);
}

template <class T, class Fn>
std::vector<T> to_list(const std::string& key, std::string_view value, Fn item) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const std::size_t comma = value.find(',', start);
    const std::string_view piece =
        trim(value.substr(start, comma == std::string_view::npos
                                     ? std::string_view::npos
                                     : comma - start));
    if (piece.empty()) bad_value(key, value);
    out.push_back(item(key, piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline SimConfig parse_config(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not of the form key = value");
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (key.empty())
      throw ConfigError("config: line " + std::to_string(line_no) + " has no key");
    if (!kv.emplace(key, value).second)
      throw ConfigError("config: duplicate key '" + key + "'");
  }

  SimConfig cfg;
  bool have_triple_psd = false, have_triple_bw = false, have_triple_nf = false;
  bool have_variance = false;
  double psd = 0.0, bandwidth = 0.0, nf_db = 0.0;

  for (const auto& [key, value] : kv) {
    using namespace detail;
    if (key == "num_workers") cfg.num_workers = to_int(key, value);
    else if (key == "num_frames") cfg.num_frames = to_long(key, value);
    else if (key == "stepsize") cfg.stepsize = to_double(key, value);
    else if (key == "momentum") cfg.momentum = to_double(key, value);
    else if (key == "h0") cfg.h0 = to_double(key, value);
    else if (key == "p0") cfg.p0 = to_double(key, value);
    else if (key == "pathloss_exponent") cfg.pathloss_exponent = to_double(key, value);
    else if (key == "noise_variance") { cfg.noise_variance = to_double(key, value); have_variance = true; }
    else if (key == "noise_psd") { psd = to_double(key, value); have_triple_psd = true; }
    else if (key == "bandwidth") { bandwidth = to_double(key, value); have_triple_bw = true; }
    else if (key == "noise_figure_db") { nf_db = to_double(key, value); have_triple_nf = true; }
    else if (key == "distances") cfg.distances = to_list<double>(key, value, to_double);
    else if (key == "raw_dim") cfg.raw_dim = to_int(key, value);
    else if (key == "reduced_dim") cfg.reduced_dim = to_int(key, value);
    else if (key == "samples_per_worker") cfg.samples_per_worker = to_int(key, value);
    else if (key == "hidden_dims") cfg.hidden_dims = to_list<int>(key, value, to_int);
    else if (key == "optimizer") {
      if (value == "wfl") cfg.optimizer = Optimizer::kWfl;
      else if (value == "awfl") cfg.optimizer = Optimizer::kAwfl;
      else if (value == "adam") cfg.optimizer = Optimizer::kAdam;
      else if (value == "ef") cfg.optimizer = Optimizer::kEf;
      else if (value == "ef-adam") cfg.optimizer = Optimizer::kEfAdam;
      else bad_value(key, value);
    }
    else if (key == "seed") cfg.seed = to_u64(key, value);
    else if (key == "mc_draws") cfg.mc_draws = to_long(key, value);
    else if (key == "mc_dim") cfg.mc_dim = to_int(key, value);
    else if (key == "dataset") {
      if (value == "synth") cfg.dataset = DatasetKind::kSynth;
      else if (value == "idx") cfg.dataset = DatasetKind::kIdx;
      else bad_value(key, value);
    }
    else if (key == "classes") cfg.classes = to_int(key, value);
    else if (key == "separation") cfg.separation = to_double(key, value);
    else if (key == "test_samples") cfg.test_samples = to_int(key, value);
    else if (key == "split") {
      if (value == "contiguous") cfg.split = SplitPolicy::kContiguous;
      else if (value == "by_class") cfg.split = SplitPolicy::kByClass;
      else bad_value(key, value);
    }
    else if (key == "idx_images") cfg.idx_images = value;
    else if (key == "idx_labels") cfg.idx_labels = value;
    else if (key == "idx_test_images") cfg.idx_test_images = value;
    else if (key == "idx_test_labels") cfg.idx_test_labels = value;
    else if (key == "pca_center") cfg.pca_center = to_bool(key, value);
    else if (key == "eval_every") cfg.eval_every = to_long(key, value);
    else if (key == "lipschitz_trials") cfg.lipschitz_trials = to_int(key, value);
    else if (key == "adam_beta1") cfg.adam_beta1 = to_double(key, value);
    else if (key == "adam_beta2") cfg.adam_beta2 = to_double(key, value);
    else if (key == "adam_epsilon") cfg.adam_epsilon = to_double(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
  }

  const auto require = [&](bool present, const char* name) {
    if (!present) throw ConfigError(std::string("config: missing required key '") + name + "'");
  };
  require(kv.count("num_workers") > 0, "num_workers");
  require(kv.count("num_frames") > 0, "num_frames");
  require(kv.count("stepsize") > 0, "stepsize");
  require(kv.count("h0") > 0, "h0");
  require(kv.count("p0") > 0, "p0");
  require(kv.count("pathloss_exponent") > 0, "pathloss_exponent");
  require(kv.count("distances") > 0, "distances");
  require(kv.count("raw_dim") > 0, "raw_dim");
  require(kv.count("reduced_dim") > 0, "reduced_dim");
  require(kv.count("samples_per_worker") > 0, "samples_per_worker");
  require(kv.count("optimizer") > 0, "optimizer");
  require(kv.count("seed") > 0, "seed");

  const bool any_triple = have_triple_psd || have_triple_bw || have_triple_nf;
  if (have_variance && any_triple)
    throw ConfigError("config: give either 'noise_variance' or the "
                      "(noise_psd, bandwidth, noise_figure_db) triple, not both");
  if (!have_variance) {
    if (!(have_triple_psd && have_triple_bw && have_triple_nf))
      throw ConfigError("config: noise model incomplete; need 'noise_variance' "
                        "or all of noise_psd, bandwidth, noise_figure_db");
    if (psd < 0.0 || bandwidth <= 0.0) throw ConfigError("config: invalid noise triple");
    cfg.noise_variance = psd * bandwidth * std::pow(10.0, nf_db / 10.0);
  }

  if (cfg.num_workers < 1) throw ConfigError("config: 'num_workers' must be >= 1");
  if (cfg.num_frames < 1) throw ConfigError("config: 'num_frames' must be >= 1");
  if (!(cfg.stepsize > 0.0)) throw ConfigError("config: 'stepsize' must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw ConfigError("config: 'momentum' must be in [0, 1)");
  if (cfg.h0 < 0.0) throw ConfigError("config: 'h0' must be >= 0");
  if (uses_channel(cfg.optimizer) && !(cfg.h0 > 0.0))
    throw ConfigError("config: 'h0' must be > 0 when the channel is in use");
  if (!(cfg.p0 > 0.0)) throw ConfigError("config: 'p0' must be > 0");
  if (!(cfg.pathloss_exponent > 0.0))
    throw ConfigError("config: 'pathloss_exponent' must be > 0");
  if (cfg.noise_variance < 0.0)
    throw ConfigError("config: 'noise_variance' must be >= 0");
  if (cfg.distances.size() != static_cast<std::size_t>(cfg.num_workers))
    throw ConfigError("config: 'distances' must list exactly num_workers entries");
  for (double d : cfg.distances)
    if (!(d > 0.0)) throw ConfigError("config: 'distances' entries must be > 0");
  if (cfg.raw_dim < 1) throw ConfigError("config: 'raw_dim' must be >= 1");
  if (cfg.reduced_dim < 1 || cfg.reduced_dim > cfg.raw_dim)
    throw ConfigError("config: 'reduced_dim' must be in [1, raw_dim]");
  if (cfg.samples_per_worker < 1)
    throw ConfigError("config: 'samples_per_worker' must be >= 1");
  for (int h : cfg.hidden_dims)
    if (h < 1) throw ConfigError("config: 'hidden_dims' entries must be >= 1");
  if (cfg.mc_draws < 1) throw ConfigError("config: 'mc_draws' must be >= 1");
  if (cfg.mc_dim < 1) throw ConfigError("config: 'mc_dim' must be >= 1");
  if (cfg.classes < 2) throw ConfigError("config: 'classes' must be >= 2");
  if (cfg.separation < 0.0) throw ConfigError("config: 'separation' must be >= 0");
  if (cfg.test_samples < 0) throw ConfigError("config: 'test_samples' must be >= 0");
  if (cfg.dataset == DatasetKind::kIdx &&
      (cfg.idx_images.empty() || cfg.idx_labels.empty()))
    throw ConfigError("config: dataset = idx requires 'idx_images' and 'idx_labels'");
  if (cfg.eval_every < 0) throw ConfigError("config: 'eval_every' must be >= 0");
  if (cfg.lipschitz_trials < 1)
    throw ConfigError("config: 'lipschitz_trials' must be >= 1");

  return cfg;
}

inline SimConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

}  // namespace pcawfl::harness
