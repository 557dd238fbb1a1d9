#include "cmil/policy.hpp"

#include <cmath>

#include "cmil/errors.hpp"
#include "cmil/text_io.hpp"

namespace cmil {

namespace {

constexpr const char* kBundleTag = "cmil-policy 1";

std::string vec_line(std::string_view tag, const Eigen::VectorXd& v) {
  std::string out(tag);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += ' ';
    out += text::format_double(v[i]);
  }
  return out + "\n";
}

Eigen::VectorXd parse_vec(std::string_view rest) {
  const auto values = text::split_doubles(rest);
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

void CopulaPolicy::validate() const {
  marginals.validate();
  if (const auto* kc = std::get_if<KdeCopula>(&copula); kc && kc->size() == 0) {
    throw NotFitted("policy: KDE copula has no support points");
  }
  if (copula_dim(copula) != marginals.coords) {
    throw ShapeError("policy: copula dimension " + std::to_string(copula_dim(copula)) + " != marginal coordinates " +
                     std::to_string(marginals.coords));
  }
  if (const auto* gc = std::get_if<GaussianMixtureCopula>(&copula); gc && gc->net.layout.input != marginals.state_dim()) {
    throw ShapeError("policy: mixture copula state dimension differs from the marginals");
  }
}

double joint_log_likelihood(const CopulaPolicy& p, const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
  if (a.size() != p.coords()) throw ShapeError("joint_log_likelihood: action size != D");
  const auto gms = marginal_forward(p.marginals, s);
  double ll = 0.0;
  for (int d = 0; d < p.coords(); ++d) ll += gm_logpdf(gms[static_cast<std::size_t>(d)], a[d]);
  return ll + copula_logdensity(p.copula, CopulaPoint(pit(gms, a)), &s);
}

Eigen::VectorXd transform_to_actions(const CopulaPolicy& p, const Eigen::VectorXd& s, const CopulaPoint& u) {
  if (u.dim() != p.coords()) throw ShapeError("transform_to_actions: copula point size != D");
  const auto gms = marginal_forward(p.marginals, s);
  Eigen::VectorXd a(p.coords());
  for (int d = 0; d < p.coords(); ++d) a[d] = gm_quantile(gms[static_cast<std::size_t>(d)], u[d]);
  return a;
}

Eigen::VectorXd predict_action(const CopulaPolicy& p, const Eigen::VectorXd& s, int n_samples, Rng& rng) {
  if (n_samples < 1) throw DomainError("predict_action: n_samples must be >= 1");
  const auto gms = marginal_forward(p.marginals, s);
  const Eigen::MatrixXd u = copula_sample_n(p.copula, n_samples, rng, &s);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p.coords());
  for (int j = 0; j < n_samples; ++j) {
    for (int d = 0; d < p.coords(); ++d) sum[d] += gm_quantile(gms[static_cast<std::size_t>(d)], u(d, j));
  }
  return sum / static_cast<double>(n_samples);
}

CopulaKind parse_copula_kind(std::string_view name) {
  if (name == "uniform") return CopulaKind::uniform;
  if (name == "kde") return CopulaKind::kde;
  if (name == "gmm") return CopulaKind::gmm;
  throw ConfigError("unknown copula kind '" + std::string(name) + "' (expected uniform, kde or gmm)");
}

std::string to_string(CopulaKind kind) {
  switch (kind) {
    case CopulaKind::uniform:
      return "uniform";
    case CopulaKind::kde:
      return "kde";
    case CopulaKind::gmm:
      return "gmm";
  }
  return "unknown";
}

std::string TrainingLog::render() const {
  std::string out;
  const auto& tn = marginal.train_nll;
  for (std::size_t e = 0; e < tn.size(); ++e) {
    out += "stage=marginal epoch=" + std::to_string(e) + " train_nll=" + text::format_double(tn[e]);
    if (e < marginal.val_nll.size()) out += " val_nll=" + text::format_double(marginal.val_nll[e]);
    out += "\n";
  }
  out += "stage=marginal done epochs=" + std::to_string(marginal.epochs_run) +
         " best_epoch=" + std::to_string(marginal.best_epoch) + " converged=" + (marginal.converged ? "1" : "0") + "\n";
  if (copula_stage_skipped) {
    out += "stage=copula kind=" + copula_kind + " skipped\n";
    return out;
  }
  for (std::size_t e = 0; e < copula_train_nll.size(); ++e) {
    out += "stage=copula kind=" + copula_kind + " epoch=" + std::to_string(e) +
           " train_nll=" + text::format_double(copula_train_nll[e]);
    if (e < copula_val_nll.size()) out += " val_nll=" + text::format_double(copula_val_nll[e]);
    out += "\n";
  }
  out += "stage=copula kind=" + copula_kind + " done epochs=" + std::to_string(copula_epochs) + "\n";
  return out;
}

TrainedPolicy train_policy(const Dataset& train, const PolicyTrainConfig& cfg, const Dataset* validation) {
  train.validate();
  if (train.total_steps() == 0) throw NotEnoughData("train_policy: empty training set");
  Dataset normalized_train = train;
  if (normalized_train.meta.normalization.empty()) normalized_train.meta.normalization = fit_normalization(train);
  const Normalization& norm = normalized_train.meta.normalization;

  const SampleSet samples = to_samples(normalized_train, true);
  std::optional<SampleSet> val_samples;
  if (validation) {
    validation->validate();
    if (validation->meta.state_dim != train.meta.state_dim || validation->meta.action_dim != train.meta.action_dim) {
      throw ShapeError("train_policy: validation dimensions differ from training data");
    }
    Dataset v = *validation;
    v.meta.normalization = norm;
    val_samples = to_samples(v, true);
  }

  TrainedPolicy out;
  MarginalModel init = marginal_init(train.meta.state_dim, train.meta.action_dim, train.meta.agent_of_coord,
                                     cfg.components, cfg.hidden, derive_seed(cfg.seed, 1));
  init.normalization = norm;
  MarginalTrainConfig mcfg = cfg.marginal;
  mcfg.seed = derive_seed(cfg.seed, 2);
  MarginalFit mfit = marginal_train(std::move(init), samples, mcfg, val_samples ? &*val_samples : nullptr);
  out.log.marginal = mfit.curve;
  out.policy.marginals = std::move(mfit.model);
  out.log.copula_kind = to_string(cfg.copula);

  const int D = train.meta.action_dim;
  switch (cfg.copula) {
    case CopulaKind::uniform:
      out.policy.copula = IndependenceCopula{D};
      out.log.copula_stage_skipped = true;
      break;
    case CopulaKind::kde: {
      const Eigen::MatrixXd u = pit_batch(out.policy.marginals, samples.states, samples.actions);
      KdeOptions kopts = cfg.kde;
      kopts.seed = derive_seed(cfg.seed, 3);
      out.policy.copula = kde_fit(u, kopts);
      break;
    }
    case CopulaKind::gmm: {
      const Eigen::MatrixXd u = pit_batch(out.policy.marginals, samples.states, samples.actions);
      Eigen::MatrixXd val_u;
      if (val_samples) val_u = pit_batch(out.policy.marginals, val_samples->states, val_samples->actions);
      GaussianMixtureCopula c =
          gmc_init(train.meta.state_dim, D, cfg.copula_components, cfg.copula_hidden, derive_seed(cfg.seed, 4));
      CopulaTrainConfig ccfg = cfg.copula_train;
      ccfg.seed = derive_seed(cfg.seed, 5);
      CopulaFit cfit = gmc_train(std::move(c), samples.states, u, ccfg, val_samples ? &val_samples->states : nullptr,
                                 val_samples ? &val_u : nullptr);
      out.log.copula_train_nll = cfit.train_nll;
      out.log.copula_val_nll = cfit.val_nll;
      out.log.copula_epochs = cfit.epochs_run;
      out.policy.copula = std::move(cfit.copula);
      break;
    }
  }
  out.policy.validate();
  return out;
}

CopulaPolicy compose_policy(const CopulaPolicy& marginal_source, const CopulaPolicy& copula_source) {
  if (marginal_source.coords() != copula_source.coords()) {
    throw ShapeError("compose_policy: incompatible coordinate counts");
  }
  CopulaPolicy p{marginal_source.marginals, copula_source.copula};
  p.validate();
  return p;
}

std::string serialize_policy(const CopulaPolicy& p) {
  p.validate();
  const std::string marg = serialize_marginal(p.marginals);
  const std::string cop = serialize_copula(p.copula);
  const auto* gc = std::get_if<GaussianMixtureCopula>(&p.copula);
  std::string out = std::string(kBundleTag) + "\n";
  out += "copula " + copula_kind(p.copula) + "\n";
  out += "coords " + std::to_string(p.coords()) + "\n";
  out += "state_dim " + std::to_string(p.marginals.state_dim()) + "\n";
  out += "components " + std::to_string(p.marginals.components) + "\n";
  out += "copula_components " + std::to_string(gc ? gc->components : 0) + "\n";
  out += vec_line("state_min", p.normalization().state_min);
  out += vec_line("state_max", p.normalization().state_max);
  out += vec_line("action_min", p.normalization().action_min);
  out += vec_line("action_max", p.normalization().action_max);
  out += "section marginal " + std::to_string(marg.size()) + "\n" + marg;
  out += "section copula " + std::to_string(cop.size()) + "\n" + cop;
  return out;
}

CopulaPolicy parse_policy(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw IoError("policy bundle truncated");
    const auto line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  auto field = [&](std::string_view tag) {
    const auto line = next_line();
    const auto sp = line.find(' ');
    if (line.substr(0, sp) != tag) throw IoError("policy bundle: expected '" + std::string(tag) + "'");
    return sp == std::string_view::npos ? std::string_view() : line.substr(sp + 1);
  };
  auto section = [&](std::string_view name) {
    const auto rest = field("section");
    const auto parts = text::split(rest, ' ');
    if (parts.size() != 2 || parts[0] != name) throw IoError("policy bundle: expected section '" + std::string(name) + "'");
    const auto len = static_cast<std::size_t>(text::parse_int(parts[1]));
    if (pos + len > bytes.size()) throw IoError("policy bundle: section '" + std::string(name) + "' truncated");
    const auto body = bytes.substr(pos, len);
    pos += len;
    return body;
  };

  if (next_line() != kBundleTag) throw IoError("not a cmil-policy version 1 bundle");
  const std::string kind(field("copula"));
  const auto coords = text::parse_int(field("coords"));
  const auto state_dim = text::parse_int(field("state_dim"));
  const auto components = text::parse_int(field("components"));
  const auto copula_components = text::parse_int(field("copula_components"));
  Normalization norm;
  norm.state_min = parse_vec(field("state_min"));
  norm.state_max = parse_vec(field("state_max"));
  norm.action_min = parse_vec(field("action_min"));
  norm.action_max = parse_vec(field("action_max"));

  CopulaPolicy p;
  p.marginals = parse_marginal(section("marginal"));
  p.copula = parse_copula(kind, section("copula"));
  if (pos != bytes.size()) throw IoError("policy bundle: trailing bytes");
  if (p.marginals.coords != coords || p.marginals.state_dim() != state_dim || p.marginals.components != components ||
      !(p.marginals.normalization == norm)) {
    throw IoError("policy bundle: manifest disagrees with the embedded marginal model");
  }
  const auto* gc = std::get_if<GaussianMixtureCopula>(&p.copula);
  if ((gc ? gc->components : 0) != copula_components) {
    throw IoError("policy bundle: manifest disagrees with the embedded copula");
  }
  p.validate();
  return p;
}

void save_policy(const CopulaPolicy& p, const std::string& path) { text::write_file(path, serialize_policy(p)); }

CopulaPolicy load_policy(const std::string& path) { return parse_policy(text::read_file(path)); }

}  // namespace cmil
