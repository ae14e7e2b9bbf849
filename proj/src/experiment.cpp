#include "stgdl/experiment.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stgdl/agd.hpp"
#include "stgdl/errors.hpp"
#include "stgdl/io.hpp"

namespace stgdl::experiment {

using nlohmann::ordered_json;

// ---- config -------------------------------------------------------------------

namespace {

const std::set<std::string> kConfigKeys = {
    "data",      "synthetic", "seeds",      "variants", "states", "tau",     "parallel", "learning_rate",
    "batch_size", "max_epochs", "patience", "k",        "window", "hidden",  "weights"};
const std::set<std::string> kSyntheticKeys = {"nodes",     "factors", "steps", "features", "edge_prob", "cross_prob",
                                              "noise_std", "rho",     "burn_in", "seed"};
const std::set<std::string> kWeightKeys = {"completeness", "independence", "residual", "prediction"};

void reject_unknown(const ordered_json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParseError("experiment config", 0, where + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ParseError("experiment config", 0, "unknown key '" + key + "' in " + where);
}

template <typename T>
void read_opt(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ordered_json metric_json(const metrics::MetricSet& m) {
  ordered_json j;
  j["mae"] = m.mae;
  j["mape_percent"] = m.mape_percent ? ordered_json(*m.mape_percent) : ordered_json(nullptr);
  j["rmse"] = m.rmse;
  return j;
}

metrics::MetricSet metric_from(const ordered_json& j) {
  metrics::MetricSet m;
  m.mae = j.at("mae").get<double>();
  if (!j.at("mape_percent").is_null()) m.mape_percent = j.at("mape_percent").get<double>();
  m.rmse = j.at("rmse").get<double>();
  return m;
}

ordered_json improvement_json(const std::optional<metrics::Improvement>& imp) {
  if (!imp) return nullptr;
  ordered_json j;
  j["mae"] = imp->mae;
  j["mape_percent"] = imp->mape_percent ? ordered_json(*imp->mape_percent) : ordered_json(nullptr);
  j["rmse"] = imp->rmse;
  return j;
}

std::optional<metrics::Improvement> improvement_from(const ordered_json& j) {
  if (j.is_null()) return std::nullopt;
  metrics::Improvement imp;
  imp.mae = j.at("mae").get<double>();
  if (!j.at("mape_percent").is_null()) imp.mape_percent = j.at("mape_percent").get<double>();
  imp.rmse = j.at("rmse").get<double>();
  return imp;
}

ordered_json bounds_json(const theory::FactorBounds& b) {
  return ordered_json{{"entropy", b.entropy},   {"pi_max", b.pi_max}, {"error_rate", b.error_rate},
                      {"variance", b.variance}, {"elbo", b.elbo},     {"bin_lo", b.bins.lo},
                      {"bin_hi", b.bins.hi},    {"bin_count", b.bins.m}};
}

theory::FactorBounds bounds_from(const ordered_json& j) {
  theory::FactorBounds b;
  b.entropy = j.at("entropy").get<double>();
  b.pi_max = j.at("pi_max").get<double>();
  b.error_rate = j.at("error_rate").get<double>();
  b.variance = j.at("variance").get<double>();
  b.elbo = j.at("elbo").get<double>();
  b.bins.lo = j.at("bin_lo").get<double>();
  b.bins.hi = j.at("bin_hi").get<double>();
  b.bins.m = j.at("bin_count").get<int>();
  return b;
}

ordered_json config_json(const ExperimentConfig& c) {
  ordered_json j;
  if (c.data_dir) j["data"] = *c.data_dir;
  const auto& s = c.synthetic;
  j["synthetic"] = ordered_json{{"nodes", s.nodes},         {"factors", s.factors},     {"steps", s.steps},
                                {"features", s.features},   {"edge_prob", s.edge_prob}, {"cross_prob", s.cross_prob}, {"noise_std", s.noise_std},
                                {"rho", s.rho},             {"burn_in", s.burn_in},     {"seed", s.seed}};
  j["seeds"] = c.seeds;
  j["variants"] = ordered_json::array();
  for (auto v : c.variants) j["variants"].push_back(dln::to_string(v));
  j["states"] = c.states;
  j["tau"] = c.tau;
  j["parallel"] = c.parallel;
  const auto& t = c.train;
  j["learning_rate"] = t.learning_rate;
  j["batch_size"] = t.batch_size;
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["k"] = t.k;
  j["window"] = t.window;
  j["hidden"] = t.hidden;
  j["weights"] = ordered_json{{"completeness", t.weights.completeness},
                              {"independence", t.weights.independence},
                              {"residual", t.weights.residual},
                              {"prediction", t.weights.prediction}};
  return j;
}

ExperimentConfig config_from(const ordered_json& j) {
  reject_unknown(j, kConfigKeys, "experiment config");
  ExperimentConfig c;
  if (j.contains("data")) c.data_dir = j.at("data").get<std::string>();
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    reject_unknown(s, kSyntheticKeys, "synthetic");
    read_opt(s, "nodes", c.synthetic.nodes);
    read_opt(s, "factors", c.synthetic.factors);
    read_opt(s, "steps", c.synthetic.steps);
    read_opt(s, "features", c.synthetic.features);
    read_opt(s, "edge_prob", c.synthetic.edge_prob);
    read_opt(s, "cross_prob", c.synthetic.cross_prob);
    read_opt(s, "noise_std", c.synthetic.noise_std);
    read_opt(s, "rho", c.synthetic.rho);
    read_opt(s, "burn_in", c.synthetic.burn_in);
    read_opt(s, "seed", c.synthetic.seed);
  }
  read_opt(j, "seeds", c.seeds);
  if (j.contains("variants")) {
    c.variants.clear();
    for (const auto& v : j.at("variants")) c.variants.push_back(dln::variant_from_string(v.get<std::string>()));
  }
  read_opt(j, "states", c.states);
  read_opt(j, "tau", c.tau);
  read_opt(j, "parallel", c.parallel);
  auto& t = c.train;
  read_opt(j, "learning_rate", t.learning_rate);
  read_opt(j, "batch_size", t.batch_size);
  read_opt(j, "max_epochs", t.max_epochs);
  read_opt(j, "patience", t.patience);
  read_opt(j, "k", t.k);
  read_opt(j, "window", t.window);
  read_opt(j, "hidden", t.hidden);
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    reject_unknown(w, kWeightKeys, "weights");
    read_opt(w, "completeness", t.weights.completeness);
    read_opt(w, "independence", t.weights.independence);
    read_opt(w, "residual", t.weights.residual);
    read_opt(w, "prediction", t.weights.prediction);
  }
  c.synthetic.window = t.window;
  if (c.seeds.empty()) throw DomainError("experiment config: seed list is empty");
  if (c.variants.empty()) throw DomainError("experiment config: variant list is empty");
  if (c.states < 2) throw DomainError("experiment config: states must be >= 2");
  if (!(c.tau > 0.0 && c.tau < 1.0)) throw DomainError("experiment config: tau must lie in (0, 1)");
  t.validate();
  return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  try {
    return config_from(ordered_json::parse(text));
  } catch (const ordered_json::exception& e) {
    throw ParseError("experiment config", 0, e.what());
  }
}

std::string ExperimentConfig::to_json() const { return config_json(*this).dump(2); }

// ---- diagnostics ----------------------------------------------------------------

theory::TheoryReport dataset_theory(const data::Dataset& dataset, int states) {
  if (dataset.ground_truth) {
    std::vector<std::vector<double>> factors;
    for (std::size_t k = 0; k < dataset.ground_truth->factor_signals.size(); ++k)
      factors.push_back(dataset.flat_series(k));
    return theory::bounds_report(factors, states);
  }
  theory::TheoryReport r;
  r.states = states;
  const std::vector<double> mix = dataset.flat_series();
  r.mixture = theory::series_bounds(mix, states);
  r.e_o = theory::elbo_single(r.mixture.error_rate, r.mixture.variance);
  r.variance_gap = r.mixture.variance;
  return r;
}

DecompositionDiagnostics diagnose(const graph::Decomposition& d, const graph::Graph& g) {
  DecompositionDiagnostics diag;
  diag.edges = g.edge_count();
  diag.completeness_misses = graph::check_completeness(d, g);
  diag.overlaps = graph::check_independence(d);
  for (std::size_t k = 0; k < d.k_factors(); ++k) {
    diag.factor_edges.push_back(d.edge_count(k));
    diag.factor_nodes.push_back(d.node_count(k));
  }
  return diag;
}

// ---- harness --------------------------------------------------------------------

namespace {

CellResult run_cell(const data::Dataset& ds, const data::Splits& splits, const ExperimentConfig& cfg,
                    dln::Variant variant, std::uint64_t seed) {
  CellResult cell;
  cell.variant = variant;
  cell.seed = seed;
  try {
    training::TrainConfig tc = cfg.train;
    tc.variant = variant;
    tc.seed = seed;
    training::TrainResult r = training::train(ds, splits, tc);
    cell.test = training::evaluate(r.model, splits.test);
    cell.epochs = r.history.epochs.size();
    cell.best_epoch = r.history.best_epoch;
    cell.initial_residual = r.history.initial.residual;
    cell.final_residual = training::evaluate_losses(r.model, splits.train, tc.weights).residual;
    if (variant == dln::Variant::stgdl)
      cell.decomposition = diagnose(agd::harden(r.model.mask_set, cfg.tau), ds.graph);
    else if (variant == dln::Variant::ted)
      cell.decomposition = diagnose(graph::Decomposition{r.model.fixed_subgraphs, graph::Origin::ted}, ds.graph);
    cell.ok = true;
  } catch (const DivergenceError& e) {
    cell.ok = false;
    cell.error = std::string("diverged: ") + e.what();
  } catch (const std::exception& e) {
    cell.ok = false;
    cell.error = e.what();
  }
  return cell;
}

VariantSummary summarize(dln::Variant v, const std::vector<CellResult>& cells) {
  VariantSummary s;
  s.variant = v;
  std::vector<const metrics::MetricSet*> ms;
  for (const auto& c : cells)
    if (c.variant == v && c.ok) ms.push_back(&c.test);
  s.cells = ms.size();
  if (ms.empty()) return s;
  const double n = static_cast<double>(ms.size());
  auto mean_sd = [&](auto get, double& mean, double& sd) {
    mean = 0.0;
    for (auto* m : ms) mean += get(*m);
    mean /= n;
    double sq = 0.0;
    for (auto* m : ms) sq += (get(*m) - mean) * (get(*m) - mean);
    sd = std::sqrt(sq / n);
  };
  mean_sd([](const metrics::MetricSet& m) { return m.mae; }, s.mean.mae, s.stddev.mae);
  mean_sd([](const metrics::MetricSet& m) { return m.rmse; }, s.mean.rmse, s.stddev.rmse);
  bool all_mape = true;
  for (auto* m : ms) all_mape = all_mape && m->mape_percent.has_value();
  if (all_mape) {
    double mean = 0.0, sd = 0.0;
    mean_sd([](const metrics::MetricSet& m) { return *m.mape_percent; }, mean, sd);
    s.mean.mape_percent = mean;
    s.stddev.mape_percent = sd;
  }
  return s;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  if (cfg.data_dir) return run_experiment(cfg, data::load_dataset(*cfg.data_dir));
  data::SyntheticConfig sc = cfg.synthetic;
  sc.window = cfg.train.window;
  return run_experiment(cfg, data::generate_synthetic(sc));
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const data::Dataset& dataset) {
  cfg.train.validate();
  const data::Splits splits = data::split(data::sliding_windows(dataset.signals, cfg.train.window));

  ExperimentReport report;
  report.config = cfg;
  const std::size_t nv = cfg.variants.size(), ns = cfg.seeds.size();
  report.cells.resize(nv * ns);
  const auto total = static_cast<std::int64_t>(nv * ns);
#pragma omp parallel for schedule(dynamic, 1) if (cfg.parallel)
  for (std::int64_t c = 0; c < total; ++c) {
    const auto i = static_cast<std::size_t>(c);
    report.cells[i] = run_cell(dataset, splits, cfg, cfg.variants[i / ns], cfg.seeds[i % ns]);
  }

  for (auto v : cfg.variants) report.summaries.push_back(summarize(v, report.cells));
  const VariantSummary* st = report.summary(dln::Variant::stgdl);
  auto compare = [&](dln::Variant base) -> std::optional<metrics::Improvement> {
    const VariantSummary* b = report.summary(base);
    if (!st || !b || !st->cells || !b->cells || !(b->mean.mae > 0.0) || !(b->mean.rmse > 0.0)) return std::nullopt;
    return metrics::improvement(b->mean, st->mean);
  };
  report.vs_monolithic = compare(dln::Variant::monolithic);
  report.vs_ted = compare(dln::Variant::ted);
  report.theory = dataset_theory(dataset, cfg.states);
  return report;
}

// ---- report -------------------------------------------------------------------

const CellResult* ExperimentReport::cell(dln::Variant v, std::uint64_t seed) const {
  for (const auto& c : cells)
    if (c.variant == v && c.seed == seed) return &c;
  return nullptr;
}

const VariantSummary* ExperimentReport::summary(dln::Variant v) const {
  for (const auto& s : summaries)
    if (s.variant == v) return &s;
  return nullptr;
}

namespace {

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::string opt_fixed(const std::optional<double>& v, int digits = 2) { return v ? fixed(*v, digits) : "n/a"; }

std::string signed_pct(double v) { return (v >= 0 ? "+" : "") + fixed(v, 2) + "%"; }

}  // namespace

std::string ExperimentReport::to_text() const {
  std::ostringstream os;
  os << "variant      cells  MAE (mean ± std)      MAPE% (mean ± std)    RMSE (mean ± std)\n";
  for (const auto& s : summaries) {
    os << std::left << std::setw(12) << dln::to_string(s.variant) << ' ' << std::setw(6) << s.cells << ' '
       << std::setw(21) << (fixed(s.mean.mae) + " ± " + fixed(s.stddev.mae)) << ' ' << std::setw(21)
       << (opt_fixed(s.mean.mape_percent) + " ± " + opt_fixed(s.stddev.mape_percent)) << ' '
       << fixed(s.mean.rmse) + " ± " + fixed(s.stddev.rmse) << '\n';
  }
  auto imp_line = [&](const char* label, const std::optional<metrics::Improvement>& imp) {
    os << "improvement over " << label << ": ";
    if (!imp) {
      os << "n/a\n";
      return;
    }
    os << "MAE " << signed_pct(imp->mae) << ", MAPE "
       << (imp->mape_percent ? signed_pct(*imp->mape_percent) : std::string("n/a")) << ", RMSE "
       << signed_pct(imp->rmse) << '\n';
  };
  imp_line("monolithic", vs_monolithic);
  imp_line("ted", vs_ted);
  os << "MAPE excludes entries with |truth| <= 1e-8.\n\n";

  os << "per cell:\n";
  for (const auto& c : cells) {
    os << "  " << dln::to_string(c.variant) << " seed " << c.seed << ": ";
    if (!c.ok) {
      os << "FAILED (" << c.error << ")\n";
      continue;
    }
    os << "MAE " << fixed(c.test.mae) << ", epochs " << c.epochs << " (best " << c.best_epoch << "), L_r "
       << fixed(c.initial_residual, 3) << " -> " << fixed(c.final_residual, 3);
    if (c.decomposition) {
      const auto& d = *c.decomposition;
      os << ", misses " << d.completeness_misses << "/" << d.edges << ", overlaps " << d.overlaps << ", B_P [";
      for (std::size_t k = 0; k < d.factor_nodes.size(); ++k) os << (k ? " " : "") << d.factor_nodes[k];
      os << "]";
    }
    os << '\n';
  }
  os << "\ntheory (M = " << theory.states << "):\n" << theory.to_key_value(false);
  return os.str();
}

std::string ExperimentReport::to_csv() const {
  std::ostringstream os;
  os << "variant,seed,ok,mae,mape_percent,rmse,epochs,best_epoch,initial_L_r,final_L_r,completeness_misses,"
        "overlaps,factor_nodes,error\n";
  for (const auto& c : cells) {
    os << dln::to_string(c.variant) << ',' << c.seed << ',' << (c.ok ? 1 : 0) << ',';
    if (c.ok) {
      os << io::format_real(c.test.mae) << ',' << (c.test.mape_percent ? io::format_real(*c.test.mape_percent) : "")
         << ',' << io::format_real(c.test.rmse) << ',' << c.epochs << ',' << c.best_epoch << ','
         << io::format_real(c.initial_residual) << ',' << io::format_real(c.final_residual) << ',';
    } else {
      os << ",,,,,,,";
    }
    if (c.decomposition) {
      os << c.decomposition->completeness_misses << ',' << c.decomposition->overlaps << ',';
      for (std::size_t k = 0; k < c.decomposition->factor_nodes.size(); ++k)
        os << (k ? ";" : "") << c.decomposition->factor_nodes[k];
    } else {
      os << ",,";
    }
    std::string err = c.error;
    for (char& ch : err)
      if (ch == ',' || ch == '\n') ch = ' ';
    os << ',' << err << '\n';
  }
  return os.str();
}

std::string ExperimentReport::to_json() const {
  ordered_json j;
  j["config"] = config_json(config);
  j["cells"] = ordered_json::array();
  for (const auto& c : cells) {
    ordered_json e;
    e["variant"] = dln::to_string(c.variant);
    e["seed"] = c.seed;
    e["ok"] = c.ok;
    e["error"] = c.error;
    e["test"] = metric_json(c.test);
    e["epochs"] = c.epochs;
    e["best_epoch"] = c.best_epoch;
    e["initial_residual"] = c.initial_residual;
    e["final_residual"] = c.final_residual;
    if (c.decomposition) {
      const auto& d = *c.decomposition;
      e["decomposition"] = ordered_json{{"edges", d.edges},
                                        {"completeness_misses", d.completeness_misses},
                                        {"overlaps", d.overlaps},
                                        {"factor_edges", d.factor_edges},
                                        {"factor_nodes", d.factor_nodes}};
    } else {
      e["decomposition"] = nullptr;
    }
    j["cells"].push_back(std::move(e));
  }
  j["summaries"] = ordered_json::array();
  for (const auto& s : summaries)
    j["summaries"].push_back(ordered_json{{"variant", dln::to_string(s.variant)},
                                          {"cells", s.cells},
                                          {"mean", metric_json(s.mean)},
                                          {"stddev", metric_json(s.stddev)}});
  j["improvement_vs_monolithic"] = improvement_json(vs_monolithic);
  j["improvement_vs_ted"] = improvement_json(vs_ted);
  ordered_json t;
  t["states"] = theory.states;
  t["factors"] = ordered_json::array();
  for (const auto& f : theory.factors) t["factors"].push_back(bounds_json(f));
  t["mixture"] = bounds_json(theory.mixture);
  t["sum_factor_variance"] = theory.sum_factor_variance;
  t["variance_gap"] = theory.variance_gap;
  t["E_d"] = theory.e_d;
  t["E_o"] = theory.e_o;
  j["theory"] = std::move(t);
  return j.dump(2);
}

ExperimentReport ExperimentReport::from_json(const std::string& text) {
  try {
    const ordered_json j = ordered_json::parse(text);
    ExperimentReport r;
    r.config = config_from(j.at("config"));
    for (const auto& e : j.at("cells")) {
      CellResult c;
      c.variant = dln::variant_from_string(e.at("variant").get<std::string>());
      c.seed = e.at("seed").get<std::uint64_t>();
      c.ok = e.at("ok").get<bool>();
      c.error = e.at("error").get<std::string>();
      c.test = metric_from(e.at("test"));
      c.epochs = e.at("epochs").get<std::size_t>();
      c.best_epoch = e.at("best_epoch").get<std::size_t>();
      c.initial_residual = e.at("initial_residual").get<double>();
      c.final_residual = e.at("final_residual").get<double>();
      if (!e.at("decomposition").is_null()) {
        const auto& d = e.at("decomposition");
        DecompositionDiagnostics diag;
        diag.edges = d.at("edges").get<std::size_t>();
        diag.completeness_misses = d.at("completeness_misses").get<std::size_t>();
        diag.overlaps = d.at("overlaps").get<std::size_t>();
        diag.factor_edges = d.at("factor_edges").get<std::vector<std::size_t>>();
        diag.factor_nodes = d.at("factor_nodes").get<std::vector<std::size_t>>();
        c.decomposition = std::move(diag);
      }
      r.cells.push_back(std::move(c));
    }
    for (const auto& e : j.at("summaries")) {
      VariantSummary s;
      s.variant = dln::variant_from_string(e.at("variant").get<std::string>());
      s.cells = e.at("cells").get<std::size_t>();
      s.mean = metric_from(e.at("mean"));
      s.stddev = metric_from(e.at("stddev"));
      r.summaries.push_back(s);
    }
    r.vs_monolithic = improvement_from(j.at("improvement_vs_monolithic"));
    r.vs_ted = improvement_from(j.at("improvement_vs_ted"));
    const auto& t = j.at("theory");
    r.theory.states = t.at("states").get<int>();
    for (const auto& f : t.at("factors")) r.theory.factors.push_back(bounds_from(f));
    r.theory.mixture = bounds_from(t.at("mixture"));
    r.theory.sum_factor_variance = t.at("sum_factor_variance").get<double>();
    r.theory.variance_gap = t.at("variance_gap").get<double>();
    r.theory.e_d = t.at("E_d").get<double>();
    r.theory.e_o = t.at("E_o").get<double>();
    return r;
  } catch (const ordered_json::exception& e) {
    throw ParseError("experiment report", 0, e.what());
  }
}

}  // namespace stgdl::experiment
