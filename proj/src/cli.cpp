#include "crsvm/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "crsvm/coordinator.hpp"
#include "crsvm/data_shard.hpp"
#include "crsvm/error.hpp"
#include "crsvm/model_io.hpp"
#include "crsvm/model_select.hpp"

namespace crsvm::cli {

using nlohmann::json;

namespace {

// Model flags shared by train, tune and bench. Values are applied on top of
// the defaults and any --config file, and only when given explicitly.
struct ModelFlags {
  std::string loss = "hinge", sparse = "l1", structure = "en", solver = "auto", mu_rule = "balance";
  double lambda1 = 0.1, lambda2 = 0.1, mu0 = 0.01, nu = 0.9, a = 3.7, tau = 0.5,
         delta = 1.0, gamma = 0.5, eps_abs = 1e-4, eps_rel = 1e-3;
  std::size_t K = 1, max_iter = 5000, mu_freeze = 100;
  bool adaptive_mu = true;
  std::uint64_t seed = 0;
  std::string config_path;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* app) {
    opts["loss"] = app->add_option("--loss", loss, "hinge|ls|sqhinge|hhinge|pinball|hpinball");
    opts["sparse"] = app->add_option("--sparse", sparse, "l1|scad|mcp");
    opts["structure"] = app->add_option("--structure", structure, "en|sfl|sgl");
    opts["lambda1"] = app->add_option("--lambda1", lambda1);
    opts["lambda2"] = app->add_option("--lambda2", lambda2);
    opts["mu0"] = app->add_option("--mu0", mu0);
    opts["nu"] = app->add_option("--nu", nu);
    opts["K"] = app->add_option("--K", K, "number of workers (shards)");
    opts["a"] = app->add_option("--a", a, "SCAD/MCP concavity");
    opts["tau"] = app->add_option("--tau", tau);
    opts["delta"] = app->add_option("--delta", delta);
    opts["gamma"] = app->add_option("--gamma", gamma, "SVMIC weight");
    opts["seed"] = app->add_option("--seed", seed);
    opts["max_iter"] = app->add_option("--max-iter", max_iter);
    opts["eps_abs"] = app->add_option("--eps-abs", eps_abs);
    opts["eps_rel"] = app->add_option("--eps-rel", eps_rel);
    opts["mu_freeze_iter"] = app->add_option("--mu-freeze", mu_freeze);
    opts["adaptive_mu"] = app->add_option("--adaptive-mu", adaptive_mu);
    opts["mu_rule"] = app->add_option("--mu-rule", mu_rule, "balance|as_written");
    opts["solver"] = app->add_option("--solver", solver, "auto|direct|woodbury|cg");
    app->add_option("--config", config_path, "JSON file with model settings and grids");
  }

  bool given(const std::string& k) const {
    auto it = opts.find(k);
    return it != opts.end() && it->second->count() > 0;
  }

  ModelConfig build(const json* file) const {
    ModelConfig c;
    if (file) config_from_json(*file, c);
    json j;
    if (given("loss")) j["loss"] = loss;
    if (given("sparse")) j["sparse"] = sparse;
    if (given("structure")) j["structure"] = structure;
    if (given("solver")) j["solver"] = solver;
    if (given("lambda1")) j["lambda1"] = lambda1;
    if (given("lambda2")) j["lambda2"] = lambda2;
    if (given("mu0")) j["mu0"] = mu0;
    if (given("nu")) j["nu"] = nu;
    if (given("K")) j["K"] = K;
    if (given("a")) j["a"] = a;
    if (given("tau")) j["tau"] = tau;
    if (given("delta")) j["delta"] = delta;
    if (given("gamma")) j["gamma"] = gamma;
    if (given("seed")) j["seed"] = seed;
    if (given("max_iter")) j["max_iter"] = max_iter;
    if (given("eps_abs")) j["eps_abs"] = eps_abs;
    if (given("eps_rel")) j["eps_rel"] = eps_rel;
    if (given("mu_freeze_iter")) j["mu_freeze_iter"] = mu_freeze;
    if (given("adaptive_mu")) j["adaptive_mu"] = adaptive_mu;
    if (given("mu_rule")) j["mu_rule"] = mu_rule;
    config_from_json(j, c);
    return c;
  }
};

struct DataFlags {
  std::string data, groups, label_col, pos_label = "1", neg_label;
  bool standardize = true;

  void attach(CLI::App* app, bool required) {
    auto* d = app->add_option("--data", data, "delimited data file");
    if (required) d->required();
    app->add_option("--groups", groups, "JSON group map");
    app->add_option("--label-col", label_col, "label column name (default: first)");
    app->add_option("--pos-label", pos_label, "token of the positive class");
    app->add_option("--neg-label", neg_label, "token of the negative class");
    app->add_option("--standardize", standardize, "centre and scale features (default true)");
  }

  TableOptions table() const { return {label_col, pos_label, neg_label}; }

  Dataset load() const {
    Dataset d = groups.empty() ? load_table(data, table())
                               : load_grouped_table(data, groups, table());
    d.validate(true);
    return d;
  }
};

std::string manifest_path(const std::string& data) { return data + ".manifest.json"; }

bool is_synthetic(const std::string& data) {
  return !data.empty() && std::filesystem::exists(manifest_path(data));
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

// Training pipeline shared by train and tune.
struct Prepared {
  Dataset data;
  Scaling scaling;
  ModelConfig config;
  std::vector<DataShard> shards;
};

Prepared prepare(const DataFlags& df, const ModelFlags& mf, const json* file) {
  Prepared p;
  p.config = mf.build(file);
  if (p.config.structure.type == StructureType::Group && df.groups.empty())
    throw ConfigError("structure sgl needs a group map (--groups)");
  p.data = df.load();
  if (p.config.structure.type == StructureType::Group)
    p.config.structure.groups = *p.data.groups;
  if (df.standardize) {
    auto [d, s] = standardize(p.data);
    p.data = std::move(d);
    p.scaling = std::move(s);
  }
  p.config.validate(p.data.p());
  p.shards = shard(p.data, p.config.K, p.config.seed);
  return p;
}

MetricsReport report_for(const FitResult& r, const Dataset& eval, bool synthetic) {
  MetricsReport m = make_metrics(r);
  m.car = accuracy(predict(r, eval.X).labels, eval.y);
  if (synthetic) m.ntsf = ntsf(r.support);
  return m;
}

std::string csv_header() { return "K,car,ct,ni,ntsf,sparsity"; }

std::string csv_row(std::size_t K, const MetricsReport& m) {
  std::ostringstream ss;
  ss << K << ',' << (m.car ? fmt(*m.car) : "") << ',' << fmt(m.ct) << ',' << m.ni << ','
     << (m.ntsf ? std::to_string(*m.ntsf) : "") << ',' << fmt(m.sparsity);
  return ss.str();
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad list value '" + item + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_datagen(const SyntheticSpec& spec, const std::string& out_path, std::ostream& out) {
  const Dataset d = generate_synthetic(spec);
  write_table(out_path, d);
  json m;
  m["generator"] = "synthetic";
  m["n"] = spec.n;
  m["p"] = spec.p;
  m["rho"] = spec.rho;
  m["alpha"] = spec.alpha;
  m["seed"] = spec.seed;
  m["signal_features"] = kSignalFeatures;
  write_text_file(manifest_path(out_path), m.dump(2) + "\n");
  out << "wrote " << d.n() << " rows x " << d.p() << " features to " << out_path << "\n";
  return 0;
}

int cmd_train(const DataFlags& df, const ModelFlags& mf, const std::string& model_out,
              const std::string& metrics_out, const std::string& test_data, bool csv,
              std::size_t threads, std::ostream& out) {
  json file;
  const bool has_file = !mf.config_path.empty();
  if (has_file) file = read_json_file(mf.config_path);
  Prepared p = prepare(df, mf, has_file ? &file : nullptr);

  FitOptions fo;
  fo.threads = threads;
  const FitResult r = fit(p.shards, p.config, fo);
  const Model model = make_model(r, p.scaling, p.data.feature_names, p.data.n());
  if (!model_out.empty()) write_model(model_out, model);

  const bool synthetic = is_synthetic(df.data);
  MetricsReport m = report_for(r, p.data, synthetic);
  if (!test_data.empty()) {
    Dataset t = df.groups.empty() ? load_table(test_data, df.table())
                                  : load_grouped_table(test_data, df.groups, df.table());
    m.car = accuracy(model.predict(t.X).labels, t.y);
  }
  const std::string js = metrics_to_json(m).dump(2) + "\n";
  if (!metrics_out.empty()) write_text_file(metrics_out, js);
  if (csv)
    out << csv_header() << "\n" << csv_row(p.config.K, m) << "\n";
  else
    out << js;
  return 0;
}

int cmd_predict(const std::string& model_in, const DataFlags& df, const std::string& out_path,
                const std::string& metrics_out, std::ostream& out) {
  const Model model = read_model(model_in);
  const RawTable head = read_delimited(df.data);
  const std::string label = df.label_col.empty() ? "label" : df.label_col;
  const bool labelled =
      std::find(head.header.begin(), head.header.end(), label) != head.header.end();

  Matrix X;
  std::optional<Vector> y;
  std::vector<std::string> names;
  if (labelled) {
    TableOptions t = df.table();
    t.label_col = label;
    Dataset d = load_table(df.data, t);
    X = std::move(d.X);
    y = std::move(d.y);
    names = std::move(d.feature_names);
  } else {
    X = load_unlabeled(df.data, &names);
  }

  // Replay the training column order by name when both sides have names.
  if (!model.feature_names.empty() && names != model.feature_names &&
      names.size() == model.feature_names.size()) {
    std::map<std::string, Eigen::Index> at;
    for (std::size_t j = 0; j < names.size(); ++j) at[names[j]] = static_cast<Eigen::Index>(j);
    Matrix R(X.rows(), X.cols());
    for (std::size_t j = 0; j < model.feature_names.size(); ++j) {
      auto it = at.find(model.feature_names[j]);
      if (it == at.end())
        throw ShapeError("input lacks feature '" + model.feature_names[j] + "'");
      R.col(static_cast<Eigen::Index>(j)) = X.col(it->second);
    }
    X = std::move(R);
  }

  const Prediction pr = model.predict(X);
  std::ostringstream body;
  body << "score,label\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < pr.scores.size(); ++i)
    body << pr.scores[i] << ',' << (pr.labels[i] > 0 ? 1 : -1) << '\n';
  if (out_path.empty())
    out << body.str();
  else
    write_text_file(out_path, body.str());

  if (y) {
    json m;
    m["schema_version"] = kMetricsSchemaVersion;
    m["car"] = accuracy(pr.labels, *y);
    m["n"] = y->size();
    if (!metrics_out.empty()) write_text_file(metrics_out, m.dump(2) + "\n");
    if (!out_path.empty()) out << "car " << fmt(m["car"].get<double>()) << "\n";
  }
  return 0;
}

int cmd_tune(const DataFlags& df, const ModelFlags& mf, const std::string& l1s,
             const std::string& l2s, const std::string& mus, const std::string& model_out,
             const std::string& report_out, std::size_t threads, std::ostream& out) {
  json file;
  const bool has_file = !mf.config_path.empty();
  if (has_file) file = read_json_file(mf.config_path);
  Prepared p = prepare(df, mf, has_file ? &file : nullptr);

  SvmicParams sp;
  sp.gamma = p.config.gamma;
  if (has_file && file.contains("grid")) {
    const auto& g = file["grid"];
    sp.lambda1_grid = g.value("lambda1", std::vector<double>{});
    sp.lambda2_grid = g.value("lambda2", std::vector<double>{});
    if (g.contains("mu")) sp.mu_grid = g["mu"].get<std::vector<double>>();
  }
  if (!l1s.empty()) sp.lambda1_grid = parse_list(l1s);
  if (!l2s.empty()) sp.lambda2_grid = parse_list(l2s);
  if (!mus.empty()) sp.mu_grid = parse_list(mus);
  if (sp.lambda1_grid.empty()) sp.lambda1_grid = {p.config.lambda1};
  if (sp.lambda2_grid.empty()) sp.lambda2_grid = {p.config.lambda2};

  const GridSearchResult g = grid_search(p.shards, p.config, sp, threads);
  if (!model_out.empty())
    write_model(model_out, make_model(g.best_fit, p.scaling, p.data.feature_names, p.data.n()));

  json rep;
  rep["schema_version"] = kMetricsSchemaVersion;
  rep["best_index"] = g.best_index;
  json rows = json::array();
  for (const auto& c : g.cells) {
    json r = {{"lambda1", c.lambda1}, {"lambda2", c.lambda2}, {"mu0", c.mu0},
              {"ok", c.ok}, {"svmic", c.ok ? json(c.svmic) : json(nullptr)},
              {"support", c.support}, {"iterations", c.iterations}};
    if (!c.ok) r["error"] = c.error;
    rows.push_back(r);
  }
  rep["cells"] = rows;
  rep["best"] = config_to_json(g.best_config);
  const std::string js = rep.dump(2) + "\n";
  if (!report_out.empty()) write_text_file(report_out, js);
  out << js;
  return 0;
}

struct BenchFlags {
  std::size_t n = 2000, p = 100, n_test = 10000, reps = 1;
  double rho = 0.5, alpha = 0.2;
  std::string ks = "1";
};

int cmd_bench(const BenchFlags& bf, const DataFlags& df, const ModelFlags& mf,
              const std::string& metrics_out, bool csv, std::size_t threads,
              std::ostream& out) {
  json file;
  const bool has_file = !mf.config_path.empty();
  if (has_file) file = read_json_file(mf.config_path);
  const ModelConfig base = mf.build(has_file ? &file : nullptr);
  std::vector<std::size_t> ks;
  for (double k : parse_list(bf.ks)) {
    if (k < 1 || k != std::floor(k)) throw ConfigError("K list needs positive integers");
    ks.push_back(static_cast<std::size_t>(k));
  }
  if (ks.empty()) throw ConfigError("empty K list");
  if (bf.reps < 1) throw ConfigError("--reps must be at least 1");

  json rows = json::array();
  if (csv) out << "K,car_mean,car_sd,ct_mean,ct_sd,ni_mean,ni_sd,ntsf_mean,ntsf_sd\n";
  for (std::size_t K : ks) {
    std::vector<double> car, ct, ni, nt;
    for (std::size_t r = 0; r < bf.reps; ++r) {
      const std::uint64_t seed = base.seed + r;
      Dataset train, test;
      bool synthetic = df.data.empty();
      if (synthetic) {
        train = generate_synthetic({bf.n, bf.p, bf.rho, bf.alpha, seed});
        test = generate_synthetic({bf.n_test, bf.p, bf.rho, 0.0, seed + 1000003});
      } else {
        train = df.load();
        synthetic = is_synthetic(df.data);
      }
      ModelConfig cfg = base;
      cfg.K = K;
      cfg.seed = seed;
      if (cfg.structure.type == StructureType::Group) {
        if (!train.groups) throw ConfigError("structure sgl needs a group map (--groups)");
        cfg.structure.groups = *train.groups;
      }
      Scaling sc;
      if (df.standardize) {
        auto [d, s] = standardize(train);
        train = std::move(d);
        sc = std::move(s);
      }
      cfg.validate(train.p());
      FitOptions fo;
      fo.threads = threads;
      const FitResult fr = fit(shard(train, K, seed), cfg, fo);
      const Dataset& eval = test.n() ? test : train;
      const Matrix Xe = sc.empty() || !test.n() ? eval.X : sc.apply(eval.X);
      car.push_back(accuracy(predict(fr, Xe).labels, eval.y));
      ct.push_back(fr.seconds);
      ni.push_back(static_cast<double>(fr.iterations));
      if (synthetic) nt.push_back(static_cast<double>(ntsf(fr.support)));
    }
    auto stats = [](const std::vector<double>& v) -> std::pair<double, double> {
      if (v.empty()) return {NAN, NAN};
      double m = 0;
      for (double x : v) m += x;
      m /= static_cast<double>(v.size());
      double s = 0;
      for (double x : v) s += (x - m) * (x - m);
      s = v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
      return {m, s};
    };
    json row;
    row["K"] = K;
    row["reps"] = bf.reps;
    for (auto [name, v] : std::vector<std::pair<std::string, std::vector<double>*>>{
             {"car", &car}, {"ct", &ct}, {"ni", &ni}, {"ntsf", &nt}}) {
      auto [m, s] = stats(*v);
      row[name] = v->empty() ? json(nullptr) : json({{"mean", m}, {"sd", s}});
      if (csv) {
        if (name == "car") out << K;
        out << ',' << (v->empty() ? "" : fmt(m)) << ',' << (v->empty() ? "" : fmt(s));
        if (name == "ntsf") out << '\n';
      }
    }
    rows.push_back(row);
  }
  json rep;
  rep["schema_version"] = kMetricsSchemaVersion;
  rep["rows"] = rows;
  const std::string js = rep.dump(2) + "\n";
  if (!metrics_out.empty()) write_text_file(metrics_out, js);
  if (!csv) out << js;
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Consensus ADMM solver for combined-regularized SVMs"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads = 0;
  app.add_option("--threads", threads, "worker threads (0: min(K, cores))");

  // datagen
  auto* gen = app.add_subcommand("datagen", "write a synthetic two-class data set");
  SyntheticSpec spec;
  spec.alpha = 0.2;
  std::string gen_out;
  gen->add_option("--n", spec.n)->required();
  gen->add_option("--p", spec.p)->required();
  gen->add_option("--rho", spec.rho);
  gen->add_option("--alpha", spec.alpha, "label-noise fraction (default 0.2)");
  gen->add_option("--seed", spec.seed);
  gen->add_option("--out", gen_out)->required();

  // train
  auto* train = app.add_subcommand("train", "fit a model");
  DataFlags train_df;
  ModelFlags train_mf;
  std::string model_out, metrics_out, test_data;
  bool csv = false;
  train_df.attach(train, true);
  train_mf.attach(train);
  train->add_option("--model-out", model_out);
  train->add_option("--metrics-out", metrics_out);
  train->add_option("--test-data", test_data, "labelled file for CAR");
  train->add_flag("--csv", csv, "print a CSV metrics row");

  // predict
  auto* pred = app.add_subcommand("predict", "score a data file with a saved model");
  DataFlags pred_df;
  std::string model_in, pred_out, pred_metrics;
  pred_df.attach(pred, true);
  pred->add_option("--model-in", model_in)->required();
  pred->add_option("--out", pred_out, "predictions file (default stdout)");
  pred->add_option("--metrics-out", pred_metrics);

  // tune
  auto* tune = app.add_subcommand("tune", "grid search by SVMIC");
  DataFlags tune_df;
  ModelFlags tune_mf;
  std::string l1s, l2s, mus, tune_model, tune_report;
  tune_df.attach(tune, true);
  tune_mf.attach(tune);
  tune->add_option("--lambda1-grid", l1s, "comma separated");
  tune->add_option("--lambda2-grid", l2s, "comma separated");
  tune->add_option("--mu-grid", mus, "comma separated (default 0.01,0.1,1)");
  tune->add_option("--model-out", tune_model);
  tune->add_option("--metrics-out", tune_report, "grid report");

  // bench
  auto* bench = app.add_subcommand("bench", "accuracy/time table over worker counts");
  BenchFlags bf;
  DataFlags bench_df;
  ModelFlags bench_mf;
  std::string bench_metrics;
  bool bench_csv = false;
  bench_df.attach(bench, false);
  bench_mf.attach(bench);
  bench->add_option("--n", bf.n);
  bench->add_option("--p", bf.p);
  bench->add_option("--n-test", bf.n_test);
  bench->add_option("--rho", bf.rho);
  bench->add_option("--alpha", bf.alpha);
  bench->add_option("--K-list", bf.ks, "comma separated worker counts");
  bench->add_option("--reps", bf.reps);
  bench->add_option("--metrics-out", bench_metrics);
  bench->add_flag("--csv", bench_csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (auto& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error: usage: " << msg << "\n";
    return 2;
  }

  try {
    if (*gen) return cmd_datagen(spec, gen_out, out);
    if (*train)
      return cmd_train(train_df, train_mf, model_out, metrics_out, test_data, csv, threads, out);
    if (*pred) return cmd_predict(model_in, pred_df, pred_out, pred_metrics, out);
    if (*tune)
      return cmd_tune(tune_df, tune_mf, l1s, l2s, mus, tune_model, tune_report, threads, out);
    if (*bench) return cmd_bench(bf, bench_df, bench_mf, bench_metrics, bench_csv, threads, out);
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace crsvm::cli
