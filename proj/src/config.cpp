#include "cabeval/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace cabeval {

namespace pt = boost::property_tree;

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Online: return "online";
    case Mode::Offline: return "offline";
    default: return "ingest";
  }
}

std::string to_string(Family family) {
  return family == Family::Parabola ? "parabola" : "bimodal";
}

Mode parse_mode(const std::string& text) {
  if (text == "online") return Mode::Online;
  if (text == "offline") return Mode::Offline;
  if (text == "ingest") return Mode::Ingest;
  throw ConfigError("experiment.mode: expected online|offline|ingest, got '" + text + "'");
}

std::vector<PolicySpec> default_policies(Mode mode) {
  EpsilonFirstParams ef;
  ef.exploration_length = mode == Mode::Ingest ? 100 : 2000;
  return {{"UR", UniformRandomParams{}},
          {"EF", ef},
          {"TBL", ThompsonParams{}},
          {"LiF", LockInParams{}}};
}

ExperimentConfig default_config(Mode mode) {
  ExperimentConfig cfg;
  cfg.mode = mode;
  cfg.policies = default_policies(mode);
  return cfg;
}

void ExperimentConfig::validate() const {
  if (!(range.lo < range.hi)) throw ConfigError("experiment.range_lo: must be below range_hi");
  if (!(noise_var >= 0.0)) throw ConfigError("experiment.noise_var: must be >= 0");
  if (!(parabola_scale > 0.0)) throw ConfigError("experiment.parabola_scale: must be > 0");
  if (repetitions < 1) throw ConfigError("experiment.repetitions: must be >= 1");
  if (length < 1) throw ConfigError("experiment.length: must be >= 1");
  if (t_eval < 1) throw ConfigError("experiment.t_eval: must be >= 1");
  if (workers < 1) throw ConfigError("experiment.workers: must be >= 1");
  if (policies.empty()) throw ConfigError("experiment.policies: at least one policy required");
  std::set<std::string> labels;
  for (const auto& p : policies) {
    if (!labels.insert(p.label).second) {
      throw ConfigError("experiment.policies: duplicate policy '" + p.label + "'");
    }
  }
  if (mode != Mode::Online) {
    if (deltas.empty()) throw ConfigError("experiment.deltas: required in " + to_string(mode) + " mode");
    for (double d : deltas) {
      if (!(d > 0.0)) throw ConfigError("experiment.deltas: each delta must be > 0");
      if (!(d < range.width())) {
        throw ConfigError("experiment.deltas: each delta must be below the range width");
      }
    }
  }
  if (mode == Mode::Ingest) {
    if (stream_path.empty()) throw ConfigError("experiment.stream: required in ingest mode");
    if (realized_regret) {
      throw ConfigError("experiment.realized_regret: regret is unavailable in ingest mode");
    }
  }
}

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& what) {
  throw ConfigError(key + ": " + what);
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size() || !std::isfinite(v)) {
    bad_value(key, "expected a number, got '" + text + "'");
  }
  return v;
}

template <class Int>
Int to_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  Int v{};
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    bad_value(key, "expected an integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  bad_value(key, "expected true|false, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
  return out;
}

Eigen::Vector3d to_vec3(const std::string& key, const std::string& text) {
  const auto v = to_doubles(key, text);
  if (v.size() != 3) bad_value(key, "expected 3 comma-separated numbers");
  return {v[0], v[1], v[2]};
}

PolicyParams default_params(const std::string& kind, Mode mode) {
  for (auto& spec : default_policies(mode)) {
    if (spec.label == kind) return spec.params;
  }
  throw ConfigError("experiment.policies: unknown policy '" + kind + "' (expected UR|EF|TBL|LiF)");
}

void apply_policy_section(PolicyParams& params, const std::string& section, const pt::ptree& body) {
  for (const auto& [raw_key, node] : body) {
    const std::string key = section + "." + raw_key;
    const std::string value = node.get_value<std::string>();
    bool known = true;
    if (auto* ef = std::get_if<EpsilonFirstParams>(&params)) {
      if (raw_key == "exploration_length") {
        ef->exploration_length = to_int<std::int64_t>(key, value);
        if (ef->exploration_length < 1) bad_value(key, "must be >= 1");
      } else if (raw_key == "unclamped_vertex") {
        ef->unclamped_vertex = to_bool(key, value);
      } else {
        known = false;
      }
    } else if (auto* tbl = std::get_if<ThompsonParams>(&params)) {
      if (raw_key == "prior_j") {
        tbl->prior_j = to_vec3(key, value);
      } else if (raw_key == "prior_p_diag") {
        tbl->prior_p_diag = to_vec3(key, value);
        if (!(tbl->prior_p_diag.array() > 0.0).all()) bad_value(key, "entries must be > 0");
      } else if (raw_key == "sigma2") {
        tbl->sigma2 = to_double(key, value);
        if (!(tbl->sigma2 > 0.0)) bad_value(key, "must be > 0");
      } else if (raw_key == "unclamped_vertex") {
        tbl->unclamped_vertex = to_bool(key, value);
      } else {
        known = false;
      }
    } else if (auto* lif = std::get_if<LockInParams>(&params)) {
      if (raw_key == "a0") {
        if (trim(value) == "random") {
          lif->a0.reset();
        } else {
          lif->a0 = to_double(key, value);
        }
      } else if (raw_key == "amplitude") {
        lif->amplitude = to_double(key, value);
        if (!(lif->amplitude > 0.0)) bad_value(key, "must be > 0");
      } else if (raw_key == "window") {
        lif->window = to_int<std::int64_t>(key, value);
        if (lif->window < 1) bad_value(key, "must be >= 1");
      } else if (raw_key == "gamma") {
        lif->gamma = to_double(key, value);
        if (!(lif->gamma > 0.0)) bad_value(key, "must be > 0");
      } else if (raw_key == "omega") {
        lif->omega = to_double(key, value);
        if (!(lif->omega > 0.0)) bad_value(key, "must be > 0");
      } else {
        known = false;
      }
    } else {
      known = false;
    }
    if (!known) throw ConfigError(key + ": unknown key");
  }
}

ExperimentConfig from_tree(const pt::ptree& tree, std::optional<Mode> mode_override) {
  static const std::set<std::string> kPolicySections{"UR", "EF", "TBL", "LiF"};
  for (const auto& [name, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(name + ": keys must appear inside a section");
    }
    if (name != "experiment" && !kPolicySections.count(name)) {
      throw ConfigError("[" + name + "]: unknown section");
    }
  }

  const pt::ptree empty;
  const auto exp_opt = tree.get_child_optional("experiment");
  const pt::ptree& exp = exp_opt ? *exp_opt : empty;

  Mode mode = Mode::Online;
  if (auto m = exp.get_optional<std::string>("mode")) mode = parse_mode(trim(*m));
  if (mode_override) mode = *mode_override;

  ExperimentConfig cfg = default_config(mode);
  std::optional<std::vector<std::string>> policy_names;
  double lo = cfg.range.lo, hi = cfg.range.hi;

  for (const auto& [k, node] : exp) {
    const std::string key = "experiment." + k;
    const std::string v = node.get_value<std::string>();
    if (k == "mode") {
      parse_mode(trim(v));
    } else if (k == "family") {
      const std::string f = trim(v);
      if (f == "parabola") cfg.family = Family::Parabola;
      else if (f == "bimodal") cfg.family = Family::Bimodal;
      else bad_value(key, "expected parabola|bimodal, got '" + v + "'");
    } else if (k == "range_lo") {
      lo = to_double(key, v);
    } else if (k == "range_hi") {
      hi = to_double(key, v);
    } else if (k == "noise_var") {
      cfg.noise_var = to_double(key, v);
      if (!(cfg.noise_var >= 0.0)) bad_value(key, "must be >= 0");
    } else if (k == "parabola_scale") {
      cfg.parabola_scale = to_double(key, v);
    } else if (k == "policies") {
      policy_names = split_list(v);
    } else if (k == "repetitions") {
      cfg.repetitions = to_int<std::int64_t>(key, v);
      if (cfg.repetitions < 1) bad_value(key, "must be >= 1");
    } else if (k == "length") {
      cfg.length = to_int<std::int64_t>(key, v);
      if (cfg.length < 1) bad_value(key, "must be >= 1");
    } else if (k == "deltas") {
      cfg.deltas = to_doubles(key, v);
      for (double d : cfg.deltas) {
        if (!(d > 0.0)) bad_value(key, "each delta must be > 0");
      }
    } else if (k == "seed") {
      cfg.master_seed = to_int<std::uint64_t>(key, v);
    } else if (k == "t_eval") {
      cfg.t_eval = to_int<std::int64_t>(key, v);
      if (cfg.t_eval < 1) bad_value(key, "must be >= 1");
    } else if (k == "output") {
      cfg.output_dir = trim(v);
    } else if (k == "stream") {
      cfg.stream_path = trim(v);
    } else if (k == "realized_regret") {
      cfg.realized_regret = to_bool(key, v);
    } else if (k == "workers") {
      cfg.workers = to_int<int>(key, v);
      if (cfg.workers < 1) bad_value(key, "must be >= 1");
    } else {
      throw ConfigError(key + ": unknown key");
    }
  }
  if (!(lo < hi)) throw ConfigError("experiment.range_lo: must be below range_hi");
  cfg.range = ActionRange(lo, hi);

  if (policy_names) {
    cfg.policies.clear();
    for (const auto& name : *policy_names) {
      cfg.policies.push_back({name, default_params(name, mode)});
    }
  }
  for (const auto& [name, body] : tree) {
    if (name == "experiment") continue;
    auto it = std::find_if(cfg.policies.begin(), cfg.policies.end(),
                           [&](const PolicySpec& p) { return p.label == name; });
    if (it == cfg.policies.end()) {
      throw ConfigError("[" + name + "]: policy is not listed in experiment.policies");
    }
    apply_policy_section(it->params, name, body);
  }

  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, std::optional<Mode> mode_override) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }
  return from_tree(tree, mode_override);
}

ExperimentConfig parse_config(const std::filesystem::path& path, std::optional<Mode> mode_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str(), mode_override);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace cabeval
