#include "cmil/dataset.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

#include "cmil/errors.hpp"
#include "cmil/text_io.hpp"

namespace cmil {

namespace {

constexpr const char* kFormatTag = "cmil-dataset";
constexpr int kFormatVersion = 1;

Eigen::VectorXd forward_map(const Eigen::VectorXd& x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() == 0) return x;
  if (x.size() != lo.size()) throw ShapeError("normalization: dimension mismatch");
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double span = hi[i] - lo[i];
    const double scale = span > 0.0 ? 2.0 / span : 1.0;
    out[i] = (x[i] - lo[i]) * scale - 1.0;
  }
  return out;
}

Eigen::VectorXd inverse_map(const Eigen::VectorXd& y, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (lo.size() == 0) return y;
  if (y.size() != lo.size()) throw ShapeError("normalization: dimension mismatch");
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double span = hi[i] - lo[i];
    const double scale = span > 0.0 ? 2.0 / span : 1.0;
    out[i] = (y[i] + 1.0) / scale + lo[i];
  }
  return out;
}

nlohmann::json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

bool same(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

}  // namespace

Eigen::VectorXd Normalization::normalize_state(const Eigen::VectorXd& s) const {
  return forward_map(s, state_min, state_max);
}
Eigen::VectorXd Normalization::denormalize_state(const Eigen::VectorXd& s) const {
  return inverse_map(s, state_min, state_max);
}
Eigen::VectorXd Normalization::normalize_action(const Eigen::VectorXd& a) const {
  return forward_map(a, action_min, action_max);
}
Eigen::VectorXd Normalization::denormalize_action(const Eigen::VectorXd& a) const {
  return inverse_map(a, action_min, action_max);
}

bool Normalization::operator==(const Normalization& o) const {
  return same(state_min, o.state_min) && same(state_max, o.state_max) && same(action_min, o.action_min) &&
         same(action_max, o.action_max);
}

std::size_t Dataset::total_steps() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.length();
  return n;
}

void Dataset::validate() const {
  if (meta.state_dim < 1 || meta.action_dim < 1) throw ShapeError("dataset: dimensions must be >= 1");
  if (static_cast<int>(meta.agent_of_coord.size()) != meta.action_dim) {
    throw ShapeError("dataset: agent map must have one entry per action coordinate");
  }
  for (int a : meta.agent_of_coord) {
    if (a < 0 || a >= meta.n_agents) throw ShapeError("dataset: agent map entry out of range");
  }
  const auto& n = meta.normalization;
  if (!n.empty() && (n.state_min.size() != meta.state_dim || n.state_max.size() != meta.state_dim ||
                     n.action_min.size() != meta.action_dim || n.action_max.size() != meta.action_dim)) {
    throw ShapeError("dataset: normalization ranges do not match dimensions");
  }
  for (std::size_t j = 0; j < trajectories.size(); ++j) {
    for (const auto& st : trajectories[j].steps) {
      if (st.state.size() != meta.state_dim || st.action.size() != meta.action_dim) {
        throw ShapeError("dataset: trajectory " + std::to_string(j) + " has inconsistent step dimensions");
      }
      if (!st.state.allFinite() || !st.action.allFinite()) {
        throw DomainError("dataset: trajectory " + std::to_string(j) + " contains non-finite values");
      }
    }
  }
}

Normalization fit_normalization(const Dataset& ds) {
  Normalization n;
  n.state_min = Eigen::VectorXd::Constant(ds.meta.state_dim, std::numeric_limits<double>::infinity());
  n.state_max = Eigen::VectorXd::Constant(ds.meta.state_dim, -std::numeric_limits<double>::infinity());
  n.action_min = Eigen::VectorXd::Constant(ds.meta.action_dim, std::numeric_limits<double>::infinity());
  n.action_max = Eigen::VectorXd::Constant(ds.meta.action_dim, -std::numeric_limits<double>::infinity());
  bool any = false;
  for (const auto& t : ds.trajectories) {
    for (const auto& st : t.steps) {
      n.state_min = n.state_min.cwiseMin(st.state);
      n.state_max = n.state_max.cwiseMax(st.state);
      n.action_min = n.action_min.cwiseMin(st.action);
      n.action_max = n.action_max.cwiseMax(st.action);
      any = true;
    }
  }
  if (!any) throw NotEnoughData("fit_normalization: dataset has no steps");
  return n;
}

SampleSet to_samples(const Dataset& ds, bool normalized) {
  const auto n = static_cast<Eigen::Index>(ds.total_steps());
  SampleSet out;
  out.states.resize(ds.meta.state_dim, n);
  out.actions.resize(ds.meta.action_dim, n);
  Eigen::Index col = 0;
  const auto& norm = ds.meta.normalization;
  for (const auto& t : ds.trajectories) {
    for (const auto& st : t.steps) {
      if (normalized) {
        out.states.col(col) = norm.normalize_state(st.state);
        out.actions.col(col) = norm.normalize_action(st.action);
      } else {
        out.states.col(col) = st.state;
        out.actions.col(col) = st.action;
      }
      ++col;
    }
  }
  return out;
}

Dataset scale_agent_actions(const Dataset& ds, int agent, double factor) {
  if (agent < 0 || agent >= ds.meta.n_agents) {
    throw DomainError("scale_agent_actions: agent index " + std::to_string(agent) + " out of range");
  }
  Dataset out = ds;
  if (factor == 1.0) return out;
  for (auto& t : out.trajectories) {
    for (auto& st : t.steps) {
      for (int d = 0; d < out.meta.action_dim; ++d) {
        if (out.meta.agent_of_coord[static_cast<std::size_t>(d)] == agent) st.action[d] *= factor;
      }
    }
  }
  return out;
}

std::string render_metadata(const Dataset& ds) {
  nlohmann::ordered_json j;
  j["format"] = kFormatTag;
  j["version"] = kFormatVersion;
  j["env"] = ds.meta.env;
  j["split"] = ds.meta.split;
  j["n_agents"] = ds.meta.n_agents;
  j["state_dim"] = ds.meta.state_dim;
  j["action_dim"] = ds.meta.action_dim;
  j["trajectories"] = ds.count();
  j["horizon"] = ds.meta.horizon;
  j["seed"] = ds.meta.seed;
  j["agent_of_coord"] = ds.meta.agent_of_coord;
  const auto& n = ds.meta.normalization;
  nlohmann::ordered_json nj;
  nj["state_min"] = to_json(n.state_min);
  nj["state_max"] = to_json(n.state_max);
  nj["action_min"] = to_json(n.action_min);
  nj["action_max"] = to_json(n.action_max);
  j["normalization"] = nj;
  return j.dump(2) + "\n";
}

std::string render_records(const Dataset& ds) {
  std::string out = "# traj,step";
  for (int i = 0; i < ds.meta.state_dim; ++i) out += ",s" + std::to_string(i);
  for (int i = 0; i < ds.meta.action_dim; ++i) out += ",a" + std::to_string(i);
  out += "\n";
  for (std::size_t j = 0; j < ds.trajectories.size(); ++j) {
    const auto& steps = ds.trajectories[j].steps;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      out += std::to_string(j);
      out += ',';
      out += std::to_string(t);
      for (Eigen::Index i = 0; i < steps[t].state.size(); ++i) {
        out += ',';
        out += text::format_double(steps[t].state[i]);
      }
      for (Eigen::Index i = 0; i < steps[t].action.size(); ++i) {
        out += ',';
        out += text::format_double(steps[t].action[i]);
      }
      out += '\n';
    }
  }
  return out;
}

Dataset parse_dataset(std::string_view metadata, std::string_view records) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(metadata);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("dataset metadata is not valid JSON: ") + e.what());
  }
  Dataset ds;
  std::size_t expected_count = 0;
  try {
    if (j.at("format").get<std::string>() != kFormatTag) throw IoError("dataset metadata: wrong format tag");
    if (j.at("version").get<int>() != kFormatVersion) throw IoError("dataset metadata: unsupported version");
    ds.meta.env = j.at("env").get<std::string>();
    ds.meta.split = j.value("split", std::string("train"));
    ds.meta.n_agents = j.at("n_agents").get<int>();
    ds.meta.state_dim = j.at("state_dim").get<int>();
    ds.meta.action_dim = j.at("action_dim").get<int>();
    ds.meta.horizon = j.value("horizon", 0);
    ds.meta.seed = j.value("seed", std::uint64_t{0});
    expected_count = j.at("trajectories").get<std::size_t>();
    if (j.contains("agent_of_coord")) {
      ds.meta.agent_of_coord = j.at("agent_of_coord").get<std::vector<int>>();
    } else {
      // One agent per coordinate when an importer does not say otherwise.
      for (int d = 0; d < ds.meta.action_dim; ++d) ds.meta.agent_of_coord.push_back(d);
    }
    if (j.contains("normalization")) {
      const auto& nj = j.at("normalization");
      ds.meta.normalization.state_min = from_json(nj.at("state_min"));
      ds.meta.normalization.state_max = from_json(nj.at("state_max"));
      ds.meta.normalization.action_min = from_json(nj.at("action_min"));
      ds.meta.normalization.action_max = from_json(nj.at("action_max"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("dataset metadata: ") + e.what());
  }

  const auto width = static_cast<std::size_t>(2 + ds.meta.state_dim + ds.meta.action_dim);
  std::size_t line_no = 0;
  for (auto line : text::split(records, '\n')) {
    ++line_no;
    line = text::trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto fields = text::split(line, ',');
    if (fields.size() != width) {
      throw IoError("dataset records line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                    " fields, got " + std::to_string(fields.size()));
    }
    const auto traj = static_cast<std::size_t>(text::parse_int(fields[0]));
    const auto step = static_cast<std::size_t>(text::parse_int(fields[1]));
    if (traj > ds.trajectories.size()) {
      throw IoError("dataset records line " + std::to_string(line_no) + ": trajectory index skips ahead");
    }
    if (traj == ds.trajectories.size()) ds.trajectories.emplace_back();
    if (traj + 1 != ds.trajectories.size()) {
      throw IoError("dataset records line " + std::to_string(line_no) + ": trajectories must be contiguous");
    }
    auto& steps = ds.trajectories[traj].steps;
    if (step != steps.size()) {
      throw IoError("dataset records line " + std::to_string(line_no) + ": step index out of order");
    }
    Step st;
    st.state.resize(ds.meta.state_dim);
    st.action.resize(ds.meta.action_dim);
    for (int i = 0; i < ds.meta.state_dim; ++i) st.state[i] = text::parse_double(fields[2 + i]);
    for (int i = 0; i < ds.meta.action_dim; ++i) {
      st.action[i] = text::parse_double(fields[2 + static_cast<std::size_t>(ds.meta.state_dim) + i]);
    }
    steps.push_back(std::move(st));
  }
  if (ds.trajectories.size() != expected_count) {
    throw IoError("dataset: metadata declares " + std::to_string(expected_count) + " trajectories, records hold " +
                  std::to_string(ds.trajectories.size()));
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& prefix) {
  text::write_file(prefix + ".json", render_metadata(ds));
  text::write_file(prefix + ".csv", render_records(ds));
}

Dataset load_dataset(const std::string& prefix) {
  return parse_dataset(text::read_file(prefix + ".json"), text::read_file(prefix + ".csv"));
}

}  // namespace cmil
