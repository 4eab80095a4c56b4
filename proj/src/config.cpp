#include "bayman/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "bayman/errors.hpp"
#include "bayman/rng.hpp"

namespace bayman {
namespace {

std::string trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return std::string(s.substr(begin, end - begin + 1));
}

class KeyValues {
 public:
  void set(std::string key, std::string value) { values_[std::move(key)] = std::move(value); }

  std::optional<std::string> take(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = it->second;
    values_.erase(it);
    return v;
  }

  void require_empty() const {
    if (values_.empty()) return;
    std::string keys;
    for (const auto& [k, v] : values_) {
      if (!keys.empty()) keys += ", ";
      keys += k;
    }
    throw ConfigError("unknown config keys: " + keys);
  }

 private:
  std::map<std::string, std::string> values_;
};

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key " + key + ": expected a number, got '" + value + "'");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& value) {
  long long out = 0;
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key " + key + ": expected an integer, got '" + value + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), last, out);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("config key " + key + ": expected an unsigned integer, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("config key " + key + ": expected a boolean, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<int>(parse_int(key, trim(item))));
  }
  if (out.empty()) throw ConfigError("config key " + key + ": empty list");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError("config line " + std::to_string(line_no) +
                                             ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    kv.set(section.empty() ? key : section + "." + key, trim(t.substr(eq + 1)));
  }

  ExperimentConfig cfg;
  if (auto v = kv.take("paths.input")) cfg.input_path = *v;
  if (auto v = kv.take("paths.out_dir")) cfg.out_dir = *v;

  if (auto v = kv.take("model.d")) cfg.model.d = static_cast<int>(parse_int("model.d", *v));
  if (auto v = kv.take("model.epsilon")) cfg.model.epsilon = parse_double("model.epsilon", *v);
  if (auto v = kv.take("model.delta_d_km")) {
    cfg.model.delta_d_km = parse_double("model.delta_d_km", *v);
  }
  if (auto v = kv.take("model.learning_rate")) {
    cfg.model.learning_rate = parse_double("model.learning_rate", *v);
  }
  if (auto v = kv.take("model.lambda_theta")) {
    cfg.model.lambda_theta = parse_double("model.lambda_theta", *v);
  }
  if (auto v = kv.take("model.max_seq_len")) {
    cfg.model.max_seq_len = static_cast<int>(parse_int("model.max_seq_len", *v));
  }
  if (auto v = kv.take("model.epochs")) {
    cfg.model.epochs = static_cast<int>(parse_int("model.epochs", *v));
  }
  if (auto v = kv.take("model.batch_size")) {
    cfg.model.batch_size = static_cast<int>(parse_int("model.batch_size", *v));
  }
  if (auto v = kv.take("model.tau_hours")) {
    cfg.model.tau_hours = parse_double("model.tau_hours", *v);
  }
  if (auto v = kv.take("model.ablation")) cfg.model.ablation = ablation_from_name(*v);
  if (auto v = kv.take("model.seed")) cfg.model.seed = parse_u64("model.seed", *v);

  if (auto v = kv.take("split.train_frac")) cfg.train_frac = parse_double("split.train_frac", *v);

  if (auto v = kv.take("perturb.mode")) {
    try {
      cfg.perturb_mode = perturb_mode_from_string(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto v = kv.take("perturb.ratio")) cfg.perturb_ratio = parse_double("perturb.ratio", *v);
  if (auto v = kv.take("perturb.k")) {
    cfg.perturb_k = static_cast<int>(parse_int("perturb.k", *v));
  }
  if (auto v = kv.take("perturb.per_user")) {
    cfg.perturb_per_user = parse_bool("perturb.per_user", *v);
  }
  if (auto v = kv.take("perturb.train_only")) {
    cfg.perturb_train_only = parse_bool("perturb.train_only", *v);
  }
  if (auto v = kv.take("perturb.seed")) cfg.perturb_seed = parse_u64("perturb.seed", *v);

  if (auto v = kv.take("eval.k_list")) cfg.k_list = parse_int_list("eval.k_list", *v);
  if (auto v = kv.take("eval.baseline_popularity")) {
    cfg.baseline_popularity = parse_bool("eval.baseline_popularity", *v);
  }
  if (auto v = kv.take("eval.baseline_markov")) {
    cfg.baseline_markov = parse_bool("eval.baseline_markov", *v);
  }

  kv.require_empty();
  return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

std::string ExperimentConfig::to_string() const {
  std::ostringstream out;
  out << "[paths]\n";
  out << "input = " << input_path << "\n";
  out << "out_dir = " << out_dir << "\n";
  out << "\n[model]\n";
  out << "d = " << model.d << "\n";
  out << "epsilon = " << format_double(model.epsilon) << "\n";
  out << "delta_d_km = " << format_double(model.delta_d_km) << "\n";
  out << "learning_rate = " << format_double(model.learning_rate) << "\n";
  out << "lambda_theta = " << format_double(model.lambda_theta) << "\n";
  out << "max_seq_len = " << model.max_seq_len << "\n";
  out << "epochs = " << model.epochs << "\n";
  out << "batch_size = " << model.batch_size << "\n";
  out << "tau_hours = " << format_double(model.tau_hours) << "\n";
  out << "ablation = " << ablation_name(model.ablation) << "\n";
  out << "seed = " << model.seed << "\n";
  out << "\n[split]\n";
  out << "train_frac = " << format_double(train_frac) << "\n";
  out << "\n[perturb]\n";
  out << "mode = " << bayman::to_string(perturb_mode) << "\n";
  out << "ratio = " << format_double(perturb_ratio) << "\n";
  out << "k = " << perturb_k << "\n";
  out << "per_user = " << (perturb_per_user ? "true" : "false") << "\n";
  out << "train_only = " << (perturb_train_only ? "true" : "false") << "\n";
  if (perturb_seed) out << "seed = " << *perturb_seed << "\n";
  out << "\n[eval]\n";
  out << "k_list = ";
  for (std::size_t i = 0; i < k_list.size(); ++i) {
    if (i) out << ",";
    out << k_list[i];
  }
  out << "\n";
  out << "baseline_popularity = " << (baseline_popularity ? "true" : "false") << "\n";
  out << "baseline_markov = " << (baseline_markov ? "true" : "false") << "\n";
  return out.str();
}

void ExperimentConfig::validate() const {
  model.validate();
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw ConfigError("split.train_frac must be in (0, 1)");
  }
  if (perturb_ratio < 0.0 || perturb_ratio > 1.0) {
    throw ConfigError("perturb.ratio must be in [0, 1]");
  }
  if (perturb_k < 1) throw ConfigError("perturb.k must be >= 1");
  if (k_list.empty()) throw ConfigError("eval.k_list must be nonempty");
  for (int k : k_list) {
    if (k < 1) throw ConfigError("eval.k_list entries must be >= 1");
  }
  if (!std::is_sorted(k_list.begin(), k_list.end()) ||
      std::adjacent_find(k_list.begin(), k_list.end()) != k_list.end()) {
    throw ConfigError("eval.k_list must be strictly increasing");
  }
}

PerturbationSpec ExperimentConfig::perturbation() const {
  PerturbationSpec spec;
  spec.mode = perturb_mode;
  spec.ratio = perturb_ratio;
  spec.neighbor_count = perturb_k;
  spec.per_user = perturb_per_user;
  spec.seed = perturb_seed ? *perturb_seed : derive_seed(model.seed, "perturb");
  return spec;
}

}  // namespace bayman
