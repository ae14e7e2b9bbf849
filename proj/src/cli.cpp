#include "stgdl/cli.hpp"

#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "stgdl/agd.hpp"
#include "stgdl/checkpoint.hpp"
#include "stgdl/data.hpp"
#include "stgdl/errors.hpp"
#include "stgdl/experiment.hpp"
#include "stgdl/io.hpp"
#include "stgdl/theory.hpp"
#include "stgdl/training.hpp"

namespace stgdl::cli {

namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string metrics_text(const metrics::MetricSet& m) {
  std::ostringstream os;
  os << std::setprecision(6) << "MAE " << m.mae << "  MAPE "
     << (m.mape_percent ? std::to_string(*m.mape_percent) + "%" : std::string("n/a")) << "  RMSE " << m.rmse;
  return os.str();
}

// ---- generate -------------------------------------------------------------------

struct GenerateOpts {
  std::string out;
  data::SyntheticConfig cfg;
};

int do_generate(const GenerateOpts& o, std::ostream& out) {
  data::Dataset ds = data::generate_synthetic(o.cfg);
  data::save_dataset(ds, o.out);
  out << "wrote " << o.out << ": N=" << ds.graph.n_nodes() << " |E|=" << ds.graph.edge_count()
      << " K=" << o.cfg.factors << " steps=" << ds.signals.dim(0) << '\n';
  return kOk;
}

// ---- train ----------------------------------------------------------------------

struct TrainOpts {
  std::string data_dir, out, history, variant = "stgdl";
  training::TrainConfig cfg;
  std::vector<std::size_t> k_sweep;
};

int do_train(TrainOpts o, std::ostream& out, std::ostream& err) {
  o.cfg.variant = dln::variant_from_string(o.variant);
  const data::Dataset ds = data::load_dataset(o.data_dir);
  const data::Splits splits = data::split(data::sliding_windows(ds.signals, o.cfg.window));

  std::vector<std::size_t> ks = o.k_sweep.empty() ? std::vector<std::size_t>{o.cfg.k} : o.k_sweep;
  std::optional<training::TrainResult> best;
  std::size_t best_k = 0;
  for (std::size_t k : ks) {
    training::TrainConfig cfg = o.cfg;
    cfg.k = k;
    if (!cfg.k_in_search_range() && cfg.variant != dln::Variant::monolithic)
      err << "note: K=" << k << " is outside the usual search range " << training::TrainConfig::kMinSearchK << ".."
          << training::TrainConfig::kMaxSearchK << '\n';
    training::TrainResult r = training::train(ds, splits, cfg, [&](const training::EpochRecord& e) {
      out << "K=" << k << " epoch " << e.epoch << "  L_joint " << e.train.joint << "  val MAE " << e.val_mae << '\n';
    });
    if (ks.size() > 1) out << "K=" << k << " best val MAE " << r.history.best_val_mae << '\n';
    if (!best || r.history.best_val_mae < best->history.best_val_mae) {
      best = std::move(r);
      best_k = k;
    }
  }

  checkpoint::save(best->model, o.out);
  const std::string history = o.history.empty() ? o.out + ".history.csv" : o.history;
  io::write_text(history, best->history.to_csv());
  out << "best epoch " << best->history.best_epoch << " (K=" << best_k << "), val MAE " << best->history.best_val_mae
      << "\ntest " << metrics_text(training::evaluate(best->model, splits.test)) << "\nwrote " << o.out << " and "
      << history << '\n';
  return kOk;
}

// ---- evaluate -------------------------------------------------------------------

int do_evaluate(const std::string& data_dir, const std::string& model_path, const std::string& split_name,
                std::ostream& out) {
  dln::DlnModel model = checkpoint::load(model_path);
  const data::Dataset ds = data::load_dataset(data_dir);
  if (ds.graph.n_nodes() != model.config.nodes || ds.signals.dim(2) != model.config.block.features)
    throw DomainError("dataset does not match the model (nodes or features differ)");
  const data::Splits splits = data::split(data::sliding_windows(ds.signals, model.config.block.window));
  const data::SplitTag tag = data::split_from_string(split_name);
  const data::SampleSet& samples = tag == data::SplitTag::train ? splits.train
                                   : tag == data::SplitTag::val ? splits.val
                                                                 : splits.test;
  const metrics::MetricSet m = training::evaluate(model, samples);
  out << "split,samples,mae,mape_percent,rmse\n"
      << split_name << ',' << samples.size() << ',' << io::format_real(m.mae) << ','
      << (m.mape_percent ? io::format_real(*m.mape_percent) : "") << ',' << io::format_real(m.rmse) << '\n';
  return kOk;
}

// ---- theory-report ----------------------------------------------------------------

int do_theory(const std::string& data_dir, int states, bool per_factor, const std::string& csv, std::ostream& out) {
  const data::Dataset ds = data::load_dataset(data_dir);
  const theory::TheoryReport r = experiment::dataset_theory(ds, states);
  out << r.to_key_value(per_factor);
  if (!csv.empty()) io::write_text(csv, r.to_csv());
  return kOk;
}

// ---- experiment -----------------------------------------------------------------

int do_experiment(const std::string& config_path, const std::string& out_dir, std::ostream& out) {
  const experiment::ExperimentConfig cfg = experiment::ExperimentConfig::from_json(io::read_text(config_path));
  const experiment::ExperimentReport report = experiment::run_experiment(cfg);
  const fs::path dir(out_dir);
  io::write_text(dir / "report.txt", report.to_text());
  io::write_text(dir / "report.csv", report.to_csv());
  io::write_text(dir / "report.json", report.to_json());
  out << report.to_text() << "wrote " << (dir / "report.{txt,csv,json}").string() << '\n';
  for (const auto& c : report.cells)
    if (!c.ok && c.error.find("diverged") != std::string::npos) return kDivergence;
  return kOk;
}

// ---- decompose ------------------------------------------------------------------

int do_decompose(const std::string& model_path, double tau, const std::string& out_dir, std::ostream& out) {
  dln::DlnModel model = checkpoint::load(model_path);
  const fs::path dir(out_dir);
  graph::Decomposition hard;
  switch (model.config.variant) {
    case dln::Variant::stgdl: {
      hard = agd::harden(model.mask_set, tau);
      const auto soft = agd::soft_subgraphs(model.mask_set);
      for (std::size_t k = 0; k < soft.size(); ++k)
        io::write_matrix_csv(dir / ("soft_" + std::to_string(k) + ".csv"), soft[k]);
      break;
    }
    case dln::Variant::ted:
      hard = graph::Decomposition{model.fixed_subgraphs, graph::Origin::ted};
      break;
    case dln::Variant::monolithic:
      throw UsageError("a monolithic model has no decomposition");
  }
  for (std::size_t k = 0; k < hard.k_factors(); ++k)
    io::write_matrix_csv(dir / ("hard_" + std::to_string(k) + ".csv"), hard.subgraphs[k]);

  const graph::Graph g(model.mask_set.base);
  std::ostringstream summary;
  summary << "factor,edges,nodes\n";
  for (std::size_t k = 0; k < hard.k_factors(); ++k)
    summary << k << ',' << hard.edge_count(k) << ',' << hard.node_count(k) << '\n';
  summary << "# origin=" << graph::to_string(hard.origin) << " edges=" << g.edge_count()
          << " completeness_misses=" << graph::check_completeness(hard, g)
          << " overlaps=" << graph::check_independence(hard) << '\n';
  io::write_text(dir / "summary.csv", summary.str());
  out << summary.str();
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-decomposed spatio-temporal forecasting toolkit", "stgdl"};
  app.require_subcommand(1);

  GenerateOpts gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic multi-factor dataset");
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--nodes", gen.cfg.nodes, "Node count N")->capture_default_str();
  generate->add_option("--factors", gen.cfg.factors, "Latent factor count K")->capture_default_str();
  generate->add_option("--steps", gen.cfg.steps, "Time steps")->capture_default_str();
  generate->add_option("--noise", gen.cfg.noise_std, "Noise standard deviation")->capture_default_str();
  generate->add_option("--seed", gen.cfg.seed, "Generator seed")->capture_default_str();
  generate->add_option("--features", gen.cfg.features, "Features per node")->capture_default_str();
  generate->add_option("--edge-prob", gen.cfg.edge_prob, "Edge probability inside a community")->capture_default_str();
  generate->add_option("--cross-prob", gen.cfg.cross_prob, "Edge probability between communities")->capture_default_str();

  TrainOpts tr;
  auto* train = app.add_subcommand("train", "Train one model variant");
  train->add_option("--data", tr.data_dir, "Dataset directory")->required();
  train->add_option("--k", tr.cfg.k, "Subgraph count K")->capture_default_str();
  train->add_option("--window", tr.cfg.window, "Input window T")->capture_default_str();
  train->add_option("--hidden", tr.cfg.hidden, "Hidden width")->capture_default_str();
  train->add_option("--lr", tr.cfg.learning_rate, "Learning rate")->capture_default_str();
  train->add_option("--batch", tr.cfg.batch_size, "Batch size")->capture_default_str();
  train->add_option("--epochs", tr.cfg.max_epochs, "Maximum epochs")->capture_default_str();
  train->add_option("--patience", tr.cfg.patience, "Early-stopping patience")->capture_default_str();
  train->add_option("--seed", tr.cfg.seed, "Seed")->capture_default_str();
  train->add_option("--variant", tr.variant, "stgdl, monolithic or ted")
      ->check(CLI::IsMember({"stgdl", "monolithic", "ted"}))
      ->capture_default_str();
  train->add_option("--out", tr.out, "Checkpoint file")->required();
  train->add_option("--history", tr.history, "History CSV (default <out>.history.csv)");
  train->add_option("--k-sweep", tr.k_sweep, "Train each K and keep the best validation MAE")->expected(1, -1);

  std::string ev_data, ev_model, ev_split = "test";
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a split");
  evaluate->add_option("--data", ev_data, "Dataset directory")->required();
  evaluate->add_option("--model", ev_model, "Checkpoint file")->required();
  evaluate->add_option("--split", ev_split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();

  std::string th_data, th_csv;
  int th_states = 8;
  bool th_per_factor = false;
  auto* theory_cmd = app.add_subcommand("theory-report", "Predictability and error-bound report");
  theory_cmd->add_option("--data", th_data, "Dataset directory")->required();
  theory_cmd->add_option("--states", th_states, "Quantization levels M")->check(CLI::Range(2, 1 << 20))->capture_default_str();
  theory_cmd->add_flag("--per-factor", th_per_factor, "Include per-factor bounds");
  theory_cmd->add_option("--csv", th_csv, "Also write the bounds as CSV");

  std::string ex_config, ex_out;
  auto* exp_cmd = app.add_subcommand("experiment", "Multi-seed comparison of all variants");
  exp_cmd->add_option("--config", ex_config, "JSON config")->required();
  exp_cmd->add_option("--out", ex_out, "Output directory")->required();

  std::string de_model, de_out;
  double de_tau = 0.5;
  auto* dec_cmd = app.add_subcommand("decompose", "Export hardened subgraphs of a checkpoint");
  dec_cmd->add_option("--model", de_model, "Checkpoint file")->required();
  dec_cmd->add_option("--tau", de_tau, "Hardening threshold")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  dec_cmd->add_option("--out", de_out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
    return kUsage;
  }

  try {
    if (*generate) return do_generate(gen, out);
    if (*train) return do_train(tr, out, err);
    if (*evaluate) return do_evaluate(ev_data, ev_model, ev_split, out);
    if (*theory_cmd) return do_theory(th_data, th_states, th_per_factor, th_csv, out);
    if (*exp_cmd) return do_experiment(ex_config, ex_out, out);
    if (*dec_cmd) return do_decompose(de_model, de_tau, de_out, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DivergenceError& e) {
    err << "diverged: " << e.what() << '\n';
    return kDivergence;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace stgdl::cli
