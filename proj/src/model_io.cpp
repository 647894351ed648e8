#include "crsvm/model_io.hpp"

#include <fstream>
#include <sstream>

#include "crsvm/error.hpp"

namespace crsvm {

using nlohmann::json;

Prediction Model::predict(const Matrix& X_raw) const {
  if (static_cast<std::size_t>(X_raw.cols()) != p())
    throw ShapeError("model expects " + std::to_string(p()) + " features, got " +
                     std::to_string(X_raw.cols()));
  if (scaling.empty()) return crsvm::predict(beta, beta0, X_raw);
  return crsvm::predict(beta, beta0, scaling.apply(X_raw));
}

Model make_model(const FitResult& fit, const Scaling& scaling,
                 std::vector<std::string> feature_names, std::size_t n_train) {
  Model m;
  m.config = fit.config;
  m.beta = fit.beta;
  m.beta0 = fit.beta0;
  m.scaling = scaling;
  m.groups = fit.groups;
  m.feature_names = std::move(feature_names);
  m.info.n_train = n_train;
  m.info.iterations = fit.iterations;
  m.info.phase_switch_iteration = fit.phase_switch_iteration;
  m.info.converged = fit.converged;
  m.info.final_mu = fit.final_mu;
  m.info.objective = fit.objective;
  return m;
}

namespace {

json vec_json(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector vec_from(const json& a) {
  if (!a.is_array()) throw ParseError("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json groups_json(const GroupPartition& g) {
  json a = json::array();
  for (std::size_t i = 0; i < g.num_groups(); ++i) {
    json e;
    e["name"] = i < g.names().size() ? g.names()[i] : "g" + std::to_string(i + 1);
    e["start"] = g.blocks()[i].start;
    e["size"] = g.blocks()[i].size;
    a.push_back(e);
  }
  return a;
}

GroupPartition groups_from(const json& a) {
  std::vector<GroupPartition::Block> blocks;
  std::vector<std::string> names;
  for (const auto& e : a) {
    blocks.push_back({e.at("start").get<std::size_t>(), e.at("size").get<std::size_t>()});
    names.push_back(e.value("name", std::string()));
  }
  return GroupPartition(std::move(blocks), std::move(names));
}

template <class T>
void take(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

}  // namespace

json config_to_json(const ModelConfig& c) {
  json j;
  j["loss"] = to_string(c.loss.type);
  j["tau"] = c.loss.tau;
  j["delta"] = c.loss.delta;
  j["sparse"] = to_string(c.sparse.type);
  j["a"] = c.sparse.a;
  j["structure"] = to_string(c.structure.type);
  j["lambda1"] = c.lambda1;
  j["lambda2"] = c.lambda2;
  j["mu0"] = c.mu0;
  j["nu"] = c.nu;
  j["K"] = c.K;
  j["max_iter"] = c.max_iter;
  j["eps_abs"] = c.eps_abs;
  j["eps_rel"] = c.eps_rel;
  j["adaptive_mu"] = c.adaptive_mu;
  j["mu_freeze_iter"] = c.mu_freeze_iter;
  j["mu_rule"] = to_string(c.mu_rule);
  j["gamma"] = c.gamma;
  j["seed"] = c.seed;
  j["solver"] = to_string(c.strategy.type);
  return j;
}

void config_from_json(const json& j, ModelConfig& c) {
  try {
    if (j.contains("loss")) c.loss.type = parse_loss_type(j.at("loss").get<std::string>());
    take(j, "tau", c.loss.tau);
    take(j, "delta", c.loss.delta);
    if (j.contains("sparse"))
      c.sparse.type = parse_sparse_type(j.at("sparse").get<std::string>());
    take(j, "a", c.sparse.a);
    if (j.contains("structure"))
      c.structure.type = parse_structure_type(j.at("structure").get<std::string>());
    take(j, "lambda1", c.lambda1);
    take(j, "lambda2", c.lambda2);
    take(j, "mu0", c.mu0);
    take(j, "nu", c.nu);
    take(j, "K", c.K);
    take(j, "max_iter", c.max_iter);
    take(j, "eps_abs", c.eps_abs);
    take(j, "eps_rel", c.eps_rel);
    take(j, "adaptive_mu", c.adaptive_mu);
    take(j, "mu_freeze_iter", c.mu_freeze_iter);
    if (j.contains("mu_rule")) c.mu_rule = parse_mu_rule(j.at("mu_rule").get<std::string>());
    take(j, "gamma", c.gamma);
    take(j, "seed", c.seed);
    if (j.contains("solver")) {
      const auto s = j.at("solver").get<std::string>();
      if (s == "auto") c.strategy.type = SolveStrategyType::Auto;
      else if (s == "direct") c.strategy.type = SolveStrategyType::DirectInverse;
      else if (s == "woodbury") c.strategy.type = SolveStrategyType::Woodbury;
      else if (s == "cg") c.strategy.type = SolveStrategyType::ConjugateGradient;
      else throw ConfigError("unknown solver '" + s + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

json model_to_json(const Model& m) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["config"] = config_to_json(m.config);
  if (m.scaling.empty()) {
    j["standardization"] = nullptr;
  } else {
    j["standardization"] = {{"mean", vec_json(m.scaling.mean)},
                            {"scale", vec_json(m.scaling.scale)}};
  }
  j["p"] = m.p();
  json beta = json::array();
  for (Eigen::Index i = 0; i < m.beta.size(); ++i)
    if (m.beta[i] != 0.0) beta.push_back(json::array({i, m.beta[i]}));
  j["beta"] = beta;
  j["beta0"] = m.beta0;
  j["groups"] = m.groups ? groups_json(*m.groups) : json(nullptr);
  j["feature_names"] = m.feature_names;
  j["training"] = {{"n_train", m.info.n_train},
                   {"iterations", m.info.iterations},
                   {"phase_switch_iteration", m.info.phase_switch_iteration},
                   {"converged", m.info.converged},
                   {"final_mu", m.info.final_mu},
                   {"objective", m.info.objective}};
  return j;
}

Model model_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw ParseError("unsupported model format version");
    Model m;
    config_from_json(j.at("config"), m.config);
    const auto p = j.at("p").get<std::size_t>();
    m.beta = Vector::Zero(static_cast<Eigen::Index>(p));
    for (const auto& e : j.at("beta")) {
      const auto idx = e.at(0).get<std::size_t>();
      if (idx >= p) throw ParseError("coefficient index out of range");
      m.beta[static_cast<Eigen::Index>(idx)] = e.at(1).get<double>();
    }
    m.beta0 = j.at("beta0").get<double>();
    const auto& s = j.at("standardization");
    if (!s.is_null()) {
      m.scaling.mean = vec_from(s.at("mean"));
      m.scaling.scale = vec_from(s.at("scale"));
      if (static_cast<std::size_t>(m.scaling.mean.size()) != p ||
          m.scaling.scale.size() != m.scaling.mean.size())
        throw ParseError("standardization record has wrong length");
    }
    if (!j.at("groups").is_null()) {
      m.groups = groups_from(j.at("groups"));
      m.groups->validate(p);
      m.config.structure.groups = *m.groups;
    }
    m.feature_names = j.value("feature_names", std::vector<std::string>{});
    if (j.contains("training")) {
      const auto& t = j.at("training");
      take(t, "n_train", m.info.n_train);
      take(t, "iterations", m.info.iterations);
      take(t, "phase_switch_iteration", m.info.phase_switch_iteration);
      take(t, "converged", m.info.converged);
      take(t, "final_mu", m.info.final_mu);
      take(t, "objective", m.info.objective);
    }
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out) throw IoError("write to '" + path + "' failed");
}

void write_model(const std::string& path, const Model& m) {
  write_text_file(path, model_to_json(m).dump(2) + "\n");
}

Model read_model(const std::string& path) { return model_from_json(read_json_file(path)); }

double sparsity(const Vector& beta) {
  if (beta.size() == 0) return 0.0;
  Eigen::Index zeros = 0;
  for (Eigen::Index i = 0; i < beta.size(); ++i) zeros += beta[i] == 0.0 ? 1 : 0;
  return static_cast<double>(zeros) / static_cast<double>(beta.size());
}

std::size_t ntsf(const std::vector<std::size_t>& support) {
  std::size_t c = 0;
  for (auto j : support) c += j < kSignalFeatures ? 1 : 0;
  return c;
}

double accuracy(const Vector& predicted, const Vector& truth) {
  if (predicted.size() != truth.size() || truth.size() == 0)
    throw ShapeError("accuracy: length mismatch");
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

MetricsReport make_metrics(const FitResult& fit) {
  MetricsReport m;
  m.ct = fit.seconds;
  m.ni = fit.iterations;
  m.sparsity = sparsity(fit.beta);
  if (fit.groups) {
    for (std::size_t i = 0; i < fit.groups->num_groups(); ++i)
      m.group_names.push_back(i < fit.groups->names().size() ? fit.groups->names()[i]
                                                             : "g" + std::to_string(i + 1));
    m.group_norms = fit.group_norms;
  }
  m.converged = fit.converged;
  if (!fit.primal_trace.empty()) {
    m.final_primal = fit.primal_trace.back();
    m.final_dual = fit.dual_trace.back();
  }
  m.final_mu = fit.final_mu;
  m.phase_switch_iteration = fit.phase_switch_iteration;
  m.objective = fit.objective;
  return m;
}

json metrics_to_json(const MetricsReport& m) {
  json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["car"] = m.car ? json(*m.car) : json(nullptr);
  j["ct"] = m.ct;
  j["ni"] = m.ni;
  j["ntsf"] = m.ntsf ? json(*m.ntsf) : json(nullptr);
  j["sparsity"] = m.sparsity;
  json g = json::array();
  for (std::size_t i = 0; i < m.group_norms.size(); ++i)
    g.push_back({{"name", i < m.group_names.size() ? m.group_names[i] : ""},
                 {"norm", m.group_norms[i]}});
  j["group_norms"] = g;
  j["residuals"] = {{"converged", m.converged},
                    {"final_primal", m.final_primal},
                    {"final_dual", m.final_dual},
                    {"final_mu", m.final_mu},
                    {"phase_switch_iteration", m.phase_switch_iteration}};
  j["objective"] = m.objective;
  return j;
}

MetricsReport metrics_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kMetricsSchemaVersion)
      throw ParseError("unsupported metrics schema version");
    MetricsReport m;
    if (!j.at("car").is_null()) m.car = j.at("car").get<double>();
    m.ct = j.at("ct").get<double>();
    m.ni = j.at("ni").get<std::size_t>();
    if (!j.at("ntsf").is_null()) m.ntsf = j.at("ntsf").get<std::size_t>();
    m.sparsity = j.at("sparsity").get<double>();
    for (const auto& g : j.at("group_norms")) {
      m.group_names.push_back(g.at("name").get<std::string>());
      m.group_norms.push_back(g.at("norm").get<double>());
    }
    const auto& r = j.at("residuals");
    m.converged = r.at("converged").get<bool>();
    m.final_primal = r.at("final_primal").get<double>();
    m.final_dual = r.at("final_dual").get<double>();
    m.final_mu = r.at("final_mu").get<double>();
    m.phase_switch_iteration = r.at("phase_switch_iteration").get<std::size_t>();
    m.objective = j.at("objective").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed metrics: ") + e.what());
  }
}

}  // namespace crsvm
