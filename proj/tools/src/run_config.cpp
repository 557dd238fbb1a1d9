#include "cmil_cli/run_config.hpp"

#include <charconv>
#include <limits>

#include "cmil/errors.hpp"
#include "cmil/text_io.hpp"

namespace cmil::cli {

namespace {

// Visits every key in rendering order.
template <class Cfg, class F>
void for_each_field(Cfg& c, F&& f) {
  f("seed", c.seed);
  f("env", c.env);
  f("n_particles", c.n_particles);
  f("resample_each_step", c.resample_each_step);
  f("m_train", c.m_train);
  f("m_val", c.m_val);
  f("m_test", c.m_test);
  f("horizon", c.horizon);
  f("intervene_agent", c.intervene_agent);
  f("intervene_factor", c.intervene_factor);
  f("out", c.out);
  f("train_data", c.train_data);
  f("val_data", c.val_data);
  f("test_data", c.test_data);
  f("policy", c.policy);
  f("swap_policy", c.swap_policy);
  f("copula", c.copula);
  f("components", c.components);
  f("hidden", c.hidden);
  f("lr", c.lr);
  f("l2", c.l2);
  f("epochs", c.epochs);
  f("batch_size", c.batch_size);
  f("tolerance", c.tolerance);
  f("patience", c.patience);
  f("copula_components", c.copula_components);
  f("copula_hidden", c.copula_hidden);
  f("copula_lr", c.copula_lr);
  f("copula_l2", c.copula_l2);
  f("copula_epochs", c.copula_epochs);
  f("kde_max_support", c.kde_max_support);
  f("action_dim", c.action_dim);
  f("metrics", c.metrics);
  f("repetitions", c.repetitions);
  f("n_samples", c.n_samples);
  f("rollouts", c.rollouts);
  f("pairs", c.pairs);
  f("resolution", c.resolution);
  f("state", c.state);
}

std::string render_value(const std::optional<std::uint64_t>& v) { return v ? std::to_string(*v) : ""; }
std::string render_value(const std::string& v) { return v; }
std::string render_value(int v) { return std::to_string(v); }
std::string render_value(double v) { return text::format_double(v); }
std::string render_value(bool v) { return v ? "true" : "false"; }

void assign(std::optional<std::uint64_t>& dst, std::string_view v) {
  if (v.empty()) {
    dst.reset();
    return;
  }
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("not an unsigned integer: '" + std::string(v) + "'");
  dst = out;
}
void assign(std::string& dst, std::string_view v) { dst = std::string(v); }
void assign(int& dst, std::string_view v) {
  const long long x = text::parse_int(v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError("integer out of range: '" + std::string(v) + "'");
  }
  dst = static_cast<int>(x);
}
void assign(double& dst, std::string_view v) { dst = text::parse_double(v); }
void assign(bool& dst, std::string_view v) {
  if (v == "true" || v == "1") {
    dst = true;
  } else if (v == "false" || v == "0") {
    dst = false;
  } else {
    throw ConfigError("not a boolean: '" + std::string(v) + "'");
  }
}

}  // namespace

void set_key(RunConfig& cfg, std::string_view key, std::string_view value) {
  bool found = false;
  for_each_field(cfg, [&](std::string_view name, auto& field) {
    if (name != key) return;
    found = true;
    try {
      assign(field, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + std::string(key) + "': " + e.what());
    } catch (const Error& e) {
      throw ConfigError("config key '" + std::string(key) + "': " + e.what());
    }
  });
  if (!found) throw ConfigError("unknown config key '" + std::string(key) + "'");
}

RunConfig parse_run_config(std::string_view text) {
  RunConfig cfg;
  int line_no = 0;
  for (auto raw : text::split(text, '\n')) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    set_key(cfg, text::trim(line.substr(0, eq)), text::trim(line.substr(eq + 1)));
  }
  return cfg;
}

std::string render_run_config(const RunConfig& cfg) {
  std::string out;
  for_each_field(cfg, [&](std::string_view name, const auto& field) {
    out += name;
    out += " = ";
    out += render_value(field);
    out += '\n';
  });
  return out;
}

void RunConfig::validate() const {
  if (!seed) throw ConfigError("config: 'seed' is required");
  if (env != "physim" && env != "driving") throw ConfigError("config: env must be physim or driving");
  parse_copula_kind(copula);
  if (components < 1) throw ConfigError("config: components (K) must be >= 1");
  if (copula_components < 1) throw ConfigError("config: copula_components (G) must be >= 1");
  if (hidden < 1 || copula_hidden < 1) throw ConfigError("config: hidden widths must be >= 1");
  if (n_particles < 2) throw ConfigError("config: n_particles must be >= 2");
  if (m_train < 1 || m_val < 0 || m_test < 0 || horizon < 1) throw ConfigError("config: bad split sizes or horizon");
  if (!(lr > 0.0) || !(copula_lr > 0.0)) throw ConfigError("config: learning rates must be positive");
  if (l2 < 0.0 || copula_l2 < 0.0) throw ConfigError("config: L2 weights must be nonnegative");
  if (epochs < 0 || copula_epochs < 0 || batch_size < 1 || patience < 1) throw ConfigError("config: bad epoch settings");
  if (kde_max_support < 2) throw ConfigError("config: kde_max_support must be >= 2");
  if (repetitions < 1 || n_samples < 1 || rollouts < 1 || resolution < 1) {
    throw ConfigError("config: repetitions, n_samples, rollouts and resolution must be >= 1");
  }
  if (action_dim < 0) throw ConfigError("config: action_dim must be >= 0");
}

EnvConfig make_env_config(const RunConfig& cfg) {
  if (!cfg.seed) throw ConfigError("config: 'seed' is required");
  if (cfg.env == "physim") {
    PhySimConfig p = physim_config(*cfg.seed, cfg.n_particles);
    p.resample_each_step = cfg.resample_each_step;
    if (cfg.intervene_agent >= 0) {
      if (cfg.intervene_agent >= cfg.n_particles) throw ConfigError("config: intervene_agent out of range");
      p.agent_scale[cfg.intervene_agent] = cfg.intervene_factor;
    }
    return p;
  }
  if (cfg.env == "driving") {
    DrivingConfig d;
    d.episode_length = cfg.horizon;
    if (cfg.intervene_agent >= 0) {
      if (cfg.intervene_agent >= 2) throw ConfigError("config: intervene_agent out of range");
      d.agent_scale[cfg.intervene_agent] = cfg.intervene_factor;
    }
    return d;
  }
  throw ConfigError("config: env must be physim or driving");
}

PolicyTrainConfig make_train_config(const RunConfig& cfg) {
  PolicyTrainConfig t;
  t.copula = parse_copula_kind(cfg.copula);
  t.components = cfg.components;
  t.hidden = cfg.hidden;
  t.marginal.max_epochs = cfg.epochs;
  t.marginal.batch_size = cfg.batch_size;
  t.marginal.learning_rate = cfg.lr;
  t.marginal.l2 = cfg.l2;
  t.marginal.tolerance = cfg.tolerance;
  t.marginal.patience = cfg.patience;
  t.copula_components = cfg.copula_components;
  t.copula_hidden = cfg.copula_hidden;
  t.copula_train.max_epochs = cfg.copula_epochs;
  t.copula_train.batch_size = cfg.batch_size;
  t.copula_train.learning_rate = cfg.copula_lr;
  t.copula_train.l2 = cfg.copula_l2;
  t.copula_train.tolerance = cfg.tolerance;
  t.copula_train.patience = cfg.patience;
  t.kde.max_support = cfg.kde_max_support;
  t.seed = cfg.seed.value_or(0);
  return t;
}

std::vector<std::pair<int, int>> parse_pairs(std::string_view text) {
  std::vector<std::pair<int, int>> out;
  for (auto item : text::split(text, ',')) {
    item = text::trim(item);
    if (item.empty()) continue;
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw ConfigError("pairs: expected a:b, got '" + std::string(item) + "'");
    out.emplace_back(static_cast<int>(text::parse_int(item.substr(0, colon))),
                     static_cast<int>(text::parse_int(item.substr(colon + 1))));
  }
  if (out.empty()) throw ConfigError("pairs: at least one a:b pair required");
  return out;
}

}  // namespace cmil::cli
