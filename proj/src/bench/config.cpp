#include "bench/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "bench/seeding.hpp"
#include "metrics/coverage.hpp"

namespace covbench::bench {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// strips an unquoted trailing comment
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

bool looks_like_int(const std::string& t) {
  if (t.empty()) return false;
  size_t i = (t[0] == '-' || t[0] == '+') ? 1 : 0;
  if (i == t.size()) return false;
  for (; i < t.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(t[i])) && t[i] != '_') return false;
  return true;
}

TomlValue parse_scalar(const std::string& raw, int line_no) {
  const std::string t = trim(raw);
  if (t.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"')
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    return t.substr(1, t.size() - 2);
  }
  if (t == "true") return true;
  if (t == "false") return false;
  std::string digits = t;
  digits.erase(std::remove(digits.begin(), digits.end(), '_'), digits.end());
  if (looks_like_int(t)) return static_cast<int64_t>(std::stoll(digits));
  try {
    size_t used = 0;
    const double v = std::stod(digits, &used);
    if (used == digits.size()) return v;
  } catch (...) {
  }
  throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value `" + t + "`");
}

TomlValue parse_value(const std::string& raw, int line_no) {
  const std::string t = trim(raw);
  if (t.empty() || t.front() != '[') return parse_scalar(t, line_no);
  if (t.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated array");
  const std::string inner = t.substr(1, t.size() - 2);
  std::vector<std::string> parts;
  std::string cur;
  bool in_str = false;
  for (char c : inner) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!trim(cur).empty()) parts.push_back(cur);
  std::vector<std::string> strs;
  std::vector<int64_t> ints;
  std::vector<double> reals;
  bool any_string = false, any_real = false;
  std::vector<TomlValue> scalars;
  for (const auto& p : parts) {
    scalars.push_back(parse_scalar(p, line_no));
    if (std::holds_alternative<std::string>(scalars.back())) any_string = true;
    if (std::holds_alternative<double>(scalars.back())) any_real = true;
  }
  if (any_string) {
    for (auto& s : scalars) {
      if (!std::holds_alternative<std::string>(s))
        throw ConfigError("line " + std::to_string(line_no) + ": mixed array types");
      strs.push_back(std::get<std::string>(s));
    }
    return strs;
  }
  if (any_real) {
    for (auto& s : scalars)
      reals.push_back(std::holds_alternative<double>(s) ? std::get<double>(s)
                                                        : static_cast<double>(std::get<int64_t>(s)));
    return reals;
  }
  for (auto& s : scalars) {
    if (!std::holds_alternative<int64_t>(s))
      throw ConfigError("line " + std::to_string(line_no) + ": mixed array types");
    ints.push_back(std::get<int64_t>(s));
  }
  return ints;
}

}  // namespace

std::map<std::string, TomlValue> parse_toml(const std::string& text) {
  std::map<std::string, TomlValue> out;
  std::istringstream is(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " + full);
    out.emplace(full, parse_value(line.substr(eq + 1), line_no));
  }
  return out;
}

std::map<std::string, TomlValue> parse_toml_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_toml(ss.str());
}

std::string algorithm_to_string(Algorithm a) {
  switch (a) {
    case Algorithm::NPE: return "npe";
    case Algorithm::NLE: return "nle";
    case Algorithm::NRE: return "nre";
    case Algorithm::ABC: return "abc";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "npe") return Algorithm::NPE;
  if (s == "nle") return Algorithm::NLE;
  if (s == "nre") return Algorithm::NRE;
  if (s == "abc") return Algorithm::ABC;
  throw ConfigError("unknown algorithm: " + s);
}

std::string variant_to_string(Variant v) { return v == Variant::Plain ? "plain" : "sam"; }

namespace {

class Reader {
 public:
  explicit Reader(std::map<std::string, TomlValue> kv) : kv_(std::move(kv)) {}

  template <typename T>
  void get(const std::string& key, T& out) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    used_.insert(key);
    if constexpr (std::is_same_v<T, int> || std::is_same_v<T, int64_t> || std::is_same_v<T, uint64_t>) {
      if (!std::holds_alternative<int64_t>(it->second)) throw ConfigError(key + ": expected integer");
      out = static_cast<T>(std::get<int64_t>(it->second));
    } else if constexpr (std::is_same_v<T, double>) {
      if (std::holds_alternative<int64_t>(it->second))
        out = static_cast<double>(std::get<int64_t>(it->second));
      else if (std::holds_alternative<double>(it->second))
        out = std::get<double>(it->second);
      else
        throw ConfigError(key + ": expected number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!std::holds_alternative<bool>(it->second)) throw ConfigError(key + ": expected boolean");
      out = std::get<bool>(it->second);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!std::holds_alternative<std::string>(it->second)) throw ConfigError(key + ": expected string");
      out = std::get<std::string>(it->second);
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!std::holds_alternative<std::vector<std::string>>(it->second))
        throw ConfigError(key + ": expected string array");
      out = std::get<std::vector<std::string>>(it->second);
    } else if constexpr (std::is_same_v<T, std::vector<int64_t>>) {
      if (!std::holds_alternative<std::vector<int64_t>>(it->second))
        throw ConfigError(key + ": expected integer array");
      out = std::get<std::vector<int64_t>>(it->second);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (std::holds_alternative<std::vector<int64_t>>(it->second)) {
        out.clear();
        for (int64_t v : std::get<std::vector<int64_t>>(it->second)) out.push_back(static_cast<double>(v));
      } else if (std::holds_alternative<std::vector<double>>(it->second)) {
        out = std::get<std::vector<double>>(it->second);
      } else {
        throw ConfigError(key + ": expected numeric array");
      }
    }
  }

  void check_all_used() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) throw ConfigError("unknown config key: " + k);
  }

 private:
  std::map<std::string, TomlValue> kv_;
  std::set<std::string> used_;
};

}  // namespace

BenchConfig BenchConfig::from_toml_text(const std::string& text) {
  Reader r(parse_toml(text));
  BenchConfig c;

  std::vector<std::string> tasks_s, algs_s, variants_s;
  r.get("tasks", tasks_s);
  if (!tasks_s.empty()) {
    c.task_names.clear();
    for (const auto& s : tasks_s) c.task_names.push_back(tasks::task_from_string(s));
  }
  r.get("algorithms", algs_s);
  if (!algs_s.empty()) {
    c.algorithms.clear();
    for (const auto& s : algs_s) c.algorithms.push_back(algorithm_from_string(s));
  }
  r.get("variants", variants_s);
  if (!variants_s.empty()) {
    c.variants.clear();
    for (const auto& s : variants_s) {
      if (s == "plain")
        c.variants.push_back(Variant::Plain);
      else if (s == "sam")
        c.variants.push_back(Variant::Sam);
      else
        throw ConfigError("unknown variant: " + s);
    }
  }
  std::vector<int64_t> nt, sig;
  r.get("n_train", nt);
  if (!nt.empty()) c.n_train = nt;
  r.get("sigmas", sig);
  if (!sig.empty()) {
    c.sigmas.clear();
    for (int64_t s : sig) c.sigmas.push_back(static_cast<int>(s));
  }
  r.get("n_obs", c.n_obs);
  r.get("n_seeds", c.n_seeds);
  r.get("master_seed", c.master_seed);
  r.get("workers", c.workers);

  r.get("metrics.alpha_grid", c.alpha_grid);
  r.get("metrics.m_ref", c.m_ref);
  r.get("metrics.k_density", c.k_density);
  r.get("metrics.bootstrap_resamples", c.bootstrap_resamples);
  r.get("metrics.n_ref_cache", c.n_ref_cache);

  r.get("train.batch_size", c.batch_size);
  r.get("train.validation_fraction", c.validation_fraction);
  r.get("train.patience", c.patience);
  r.get("train.max_epochs", c.max_epochs);
  r.get("train.learning_rate", c.learning_rate);
  r.get("train.weight_decay", c.weight_decay);
  r.get("train.sam_rho", c.sam_rho);
  r.get("train.sam_same_batch", c.sam_same_batch);

  r.get("flow.layers", c.flow_layers);
  r.get("flow.bins", c.flow_bins);
  r.get("flow.bound", c.flow_bound);
  r.get("flow.hidden", c.flow_hidden);
  r.get("nre.hidden", c.nre_hidden);
  r.get("nre.hidden_layers", c.nre_hidden_layers);

  r.get("mcmc.chains", c.mcmc_chains);
  r.get("mcmc.keep", c.mcmc_keep);
  r.get("mcmc.rhat_threshold", c.rhat_threshold);
  r.get("oracle.chains", c.oracle_chains);
  r.get("oracle.keep", c.oracle_keep);

  r.get("abc.n_total", c.abc_n_total);
  r.get("abc.acceptance_rate", c.abc_acceptance_rate);

  r.get("ensemble.normalize", c.ensemble_normalize);
  r.get("ensemble.is_draws", c.ensemble_is_draws);

  r.check_all_used();
  c.validate();
  return c;
}

BenchConfig BenchConfig::from_toml_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return from_toml_text(ss.str());
}

void BenchConfig::validate() const {
  if (task_names.empty() || algorithms.empty() || variants.empty() || n_train.empty() || sigmas.empty())
    throw ConfigError("tasks, algorithms, variants, n_train and sigmas must be non-empty");
  for (int s : sigmas)
    if (s < 0 || s > 4) throw ConfigError("sigma levels must lie in 0..4");
  if (n_obs < 1) throw ConfigError("n_obs must be >= 1");
  if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
  if (m_ref < 1 || k_density < 100) throw ConfigError("m_ref >= 1 and k_density >= 100 required");
  if (!(abc_acceptance_rate > 0.0 && abc_acceptance_rate <= 1.0))
    throw ConfigError("abc.acceptance_rate must lie in (0,1]");
  if (abc_n_total < 100) throw ConfigError("abc.n_total must be >= 100");
  for (double a : alpha_grid)
    if (!(a > 0.0 && a < 1.0)) throw ConfigError("alpha levels must lie inside (0,1)");
  const bool has_sam = std::find(variants.begin(), variants.end(), Variant::Sam) != variants.end();
  const bool only_abc = algorithms.size() == 1 && algorithms[0] == Algorithm::ABC;
  if (has_sam && only_abc) throw ConfigError("the sam variant applies to neural algorithms only");
}

est::FlowConfig BenchConfig::flow_config() const {
  est::FlowConfig f;
  f.layers = flow_layers;
  f.bins = flow_bins;
  f.bound = flow_bound;
  f.hidden = flow_hidden;
  return f;
}

est::NreConfig BenchConfig::nre_config() const {
  est::NreConfig n;
  n.hidden = nre_hidden;
  n.hidden_layers = nre_hidden_layers;
  return n;
}

std::vector<double> BenchConfig::alpha_levels() const {
  return alpha_grid.empty() ? metrics::default_alpha_grid() : alpha_grid;
}

uint64_t BenchConfig::result_hash() const {
  std::vector<SeedLabel> labels;
  auto add_i = [&](int64_t v) { labels.emplace_back(v); };
  auto add_d = [&](double v) {
    uint64_t bits;
    static_assert(sizeof(bits) == sizeof(v));
    std::memcpy(&bits, &v, sizeof(bits));
    labels.emplace_back(static_cast<int64_t>(bits));
  };
  labels.emplace_back(std::string("covbench-config-v1"));
  for (auto t : task_names) labels.emplace_back(tasks::task_to_string(t));
  for (auto a : algorithms) labels.emplace_back(algorithm_to_string(a));
  for (auto v : variants) labels.emplace_back(variant_to_string(v));
  for (auto n : n_train) add_i(n);
  for (auto s : sigmas) add_i(s);
  add_i(n_obs);
  add_i(n_seeds);
  add_i(static_cast<int64_t>(master_seed));
  for (double a : alpha_levels()) add_d(a);
  add_i(m_ref);
  add_i(k_density);
  add_i(bootstrap_resamples);
  add_i(n_ref_cache);
  add_i(batch_size);
  add_d(validation_fraction);
  add_i(patience);
  add_i(max_epochs);
  add_d(learning_rate);
  add_d(weight_decay);
  add_d(sam_rho);
  add_i(sam_same_batch ? 1 : 0);
  add_i(flow_layers);
  add_i(flow_bins);
  add_d(flow_bound);
  add_i(flow_hidden);
  add_i(nre_hidden);
  add_i(nre_hidden_layers);
  add_i(mcmc_chains);
  add_i(mcmc_keep);
  add_d(rhat_threshold);
  add_i(oracle_chains);
  add_i(oracle_keep);
  add_i(abc_n_total);
  add_d(abc_acceptance_rate);
  add_i(ensemble_normalize ? 1 : 0);
  add_i(ensemble_is_draws);
  return derive_seed(0x636f766265ull, labels);
}

}  // namespace covbench::bench
