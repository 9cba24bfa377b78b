#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "acclens/analysis.hpp"
#include "acclens/baselines.hpp"
#include "acclens/dataset_io.hpp"
#include "acclens/expr.hpp"
#include "acclens/gp.hpp"
#include "acclens/metrics.hpp"
#include "acclens/parallel.hpp"
#include "acclens/probe.hpp"
#include "acclens/stats.hpp"
#include "acclens/synth.hpp"

namespace {

using namespace acclens;
using json = nlohmann::ordered_json;

struct Globals {
  std::uint64_t seed = 0;
  int threads = default_thread_count();
  bool quiet = false;
};

void write_json(const json& doc, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Expr formula_arg(const std::string& text) {
  if (!text.empty() && text.front() == '@') return parse_sexpr(read_text(text.substr(1)));
  return parse_sexpr(text);
}

std::vector<Stat> stat_list(const std::string& text) {
  std::vector<Stat> out;
  if (text.empty()) {
    for (std::size_t j = 0; j < kNumStats; ++j) out.push_back(static_cast<Stat>(j));
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto s = stat_from_name(item);
    if (!s) throw DataError("unknown statistic: " + item);
    out.push_back(*s);
  }
  return out;
}

CalibrationMode calib_arg(const std::string& text) {
  if (text == "fit") return CalibrationMode::fit_on_train();
  if (text == "oracle") return CalibrationMode::oracle();
  if (text.rfind("fixed:", 0) == 0) {
    const std::string rest = text.substr(6);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw DataError("--calib fixed expects fixed:A,B");
    try {
      std::size_t used_a = 0, used_b = 0;
      const std::string a_text = rest.substr(0, comma);
      const std::string b_text = rest.substr(comma + 1);
      Calibration c{std::stod(a_text, &used_a), std::stod(b_text, &used_b)};
      if (used_a != a_text.size() || used_b != b_text.size()) throw std::invalid_argument(text);
      return CalibrationMode::with(c);
    } catch (const std::logic_error&) {
      throw DataError("--calib fixed expects fixed:A,B, got " + text);
    }
  }
  throw DataError("--calib must be fit, oracle or fixed:A,B");
}

json report_json(const EvalReport& r) {
  return json{{"pearson_r", r.pearson_r}, {"p_value", r.p_value}, {"r2", r.r2},
              {"calib_a", r.calibration.a}, {"calib_b", r.calibration.b}, {"n", r.n}};
}

json names_json(std::span<const Stat> stats) {
  json out = json::array();
  for (Stat s : stats) out.push_back(std::string(name_of(s)));
  return out;
}

json probe_json(const ProbeResult& r) {
  return json{{"best_accuracy", r.best_accuracy},
              {"best_epoch", r.best_epoch},
              {"accuracy_curve", r.accuracy_curve},
              {"loss_curve", r.loss_curve}};
}

void say(const Globals& g, const std::string& text) {
  if (!g.quiet) std::cout << text << '\n';
}

void probe_options(CLI::App* sub, ProbeConfig& cfg, const std::string& prefix) {
  sub->add_option("--" + prefix + "epochs", cfg.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--" + prefix + "batch", cfg.batch_size, "Mini-batch size")->capture_default_str();
  sub->add_option("--" + prefix + "lr", cfg.learning_rate, "Adam learning rate")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acclens: dataset statistics, linear probes and symbolic accuracy formulas"};
  app.require_subcommand(1);
  app.fallthrough();
  app.failure_message(CLI::FailureMessage::help);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate synthetic datasets and their meta-dataset");
  std::string grid_path, write_grid_path, out_root, synth_out;
  ProbeConfig synth_probe;
  synth->add_option("--grid", grid_path, "JSON array of generator configs (default grid when omitted)");
  synth->add_option("--write-grid", write_grid_path, "Also write the grid that was used");
  synth->add_option("--out-root", out_root, "Directory receiving one dataset directory per config");
  probe_options(synth, synth_probe, "probe-");
  synth->add_option("--out", synth_out, "Meta CSV output")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Compute the 19 statistics of one dataset");
  std::string stats_data, stats_out;
  stats->add_option("--data", stats_data, "Dataset directory")->required();
  stats->add_option("--out", stats_out, "Stats CSV output")->required();

  // probe
  auto* probe = app.add_subcommand("probe", "Train a linear probe and report its best test accuracy");
  std::string probe_data, probe_out;
  ProbeConfig probe_cfg;
  probe->add_option("--data", probe_data, "Dataset directory")->required();
  probe_options(probe, probe_cfg, "");
  probe->add_option("--out", probe_out, "Result JSON output")->required();

  // build-meta
  auto* build = app.add_subcommand("build-meta", "Statistics and probe accuracy for many datasets");
  std::vector<std::string> build_dirs;
  std::string build_root, build_out;
  ProbeConfig build_probe;
  build->add_option("--data", build_dirs, "Dataset directories");
  build->add_option("--data-root", build_root, "Use every subdirectory of this directory");
  probe_options(build, build_probe, "probe-");
  build->add_option("--out", build_out, "Meta CSV output")->required();

  // split
  auto* split = app.add_subcommand("split", "Seeded train/test partition of a meta-dataset");
  std::string split_in, split_train = "meta_train.csv", split_test = "meta_test.csv";
  double ratio = 0.75;
  split->add_option("--meta", split_in, "Meta CSV")->required();
  split->add_option("--ratio", ratio, "Train fraction")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  split->add_option("--train-out", split_train, "Train meta CSV output")->capture_default_str();
  split->add_option("--test-out", split_test, "Test meta CSV output")->capture_default_str();

  // gp
  auto* gp = app.add_subcommand("gp", "Search accuracy formulas with genetic programming");
  std::string gp_train, gp_test, gp_out, gp_fitness = "min-subset";
  int gp_runs = 1;
  GpConfig gp_cfg;
  bool no_timing = false;
  gp->add_option("--train", gp_train, "Train meta CSV")->required();
  gp->add_option("--test", gp_test, "Test meta CSV")->required();
  gp->add_option("--runs", gp_runs, "Independent runs (seeds seed..seed+runs-1)")->capture_default_str();
  gp->add_option("--pop", gp_cfg.population, "Population size")->capture_default_str();
  gp->add_option("--gens", gp_cfg.generations, "Generations, the initial one included")->capture_default_str();
  gp->add_option("--tournament", gp_cfg.tournament_k, "Tournament size")->capture_default_str();
  gp->add_option("--fitness", gp_fitness, "min-subset | pearson | r2")->capture_default_str();
  gp->add_option("--parsimony", gp_cfg.parsimony_coef, "Per-node fitness penalty")->capture_default_str();
  gp->add_flag("--elitism", gp_cfg.elitism, "Carry the best individual into the next generation");
  gp->add_flag("--constants", gp_cfg.ephemeral_constants, "Allow ephemeral constants in [-1, 1]");
  gp->add_flag("--no-timing", no_timing, "Record duration_s as 0 for byte-reproducible logs");
  gp->add_option("--out", gp_out, "Run log JSONL output (overwritten)")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Score a formula on a train/test split");
  std::string eval_formula, eval_train, eval_test, eval_calib = "fit", eval_out;
  eval->add_option("--formula", eval_formula, "S-expression, or @file")->required();
  eval->add_option("--train", eval_train, "Train meta CSV")->required();
  eval->add_option("--test", eval_test, "Test meta CSV")->required();
  eval->add_option("--calib", eval_calib, "fit | fixed:A,B | oracle")->capture_default_str();
  eval->add_option("--out", eval_out, "Report JSON output")->required();

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Mean-freeze each statistic and rescore a formula");
  std::string ab_formula, ab_train, ab_test, ab_out;
  bool no_refit = false;
  ablate->add_option("--formula", ab_formula, "S-expression, or @file")->required();
  ablate->add_option("--train", ab_train, "Train meta CSV")->required();
  ablate->add_option("--test", ab_test, "Test meta CSV")->required();
  ablate->add_flag("--no-refit", no_refit, "Keep the unfrozen train calibration");
  ablate->add_option("--out", ab_out, "Ablation CSV output")->required();

  // baseline
  auto* baseline = app.add_subcommand("baseline", "Linear regression and signed-sum baselines");
  baseline->require_subcommand(1);
  std::string bl_train, bl_test, bl_vars, bl_out;
  bool bl_log = false;
  GaConfig ga_cfg;
  auto* ols = baseline->add_subcommand("ols", "Least-squares regression on selected statistics");
  auto* ga = baseline->add_subcommand("ga", "Genetic search over {-1, 0, 1} coefficient sums");
  for (auto* sub : {ols, ga}) {
    sub->add_option("--train", bl_train, "Train meta CSV")->required();
    sub->add_option("--test", bl_test, "Test meta CSV")->required();
    sub->add_option("--vars", bl_vars, "Comma-separated statistics (default: all)");
    sub->add_flag("--log", bl_log, "Log-transform the statistics");
    sub->add_option("--out", bl_out, "Model and report JSON output")->required();
  }
  ga->add_option("--pop", ga_cfg.population, "Population size")->capture_default_str();
  ga->add_option("--iters", ga_cfg.iterations, "Iterations")->capture_default_str();
  ga->add_option("--mutation", ga_cfg.mutation_rate, "Per-gene resample rate")->capture_default_str();
  ga->add_option("--crossover", ga_cfg.crossover_rate, "Uniform crossover rate")->capture_default_str();
  ga->add_option("--tournament", ga_cfg.tournament_k, "Tournament size")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Tables derived from run logs and meta-datasets");
  report->require_subcommand(1);
  std::string rp_runs, rp_meta, rp_out;
  auto* freq = report->add_subcommand("freq", "Per-statistic count of runs using it");
  auto* complexity = report->add_subcommand("complexity", "Node count against test scores per run");
  auto* best = report->add_subcommand("best", "Run with the highest test r2 (selection on test)");
  auto* statcorr = report->add_subcommand("statcorr", "|pearson| of each statistic with accuracy");
  for (auto* sub : {freq, complexity, best}) {
    sub->add_option("--runs", rp_runs, "Run log JSONL")->required();
    sub->add_option("--out", rp_out, "Output file")->required();
  }
  statcorr->add_option("--meta", rp_meta, "Meta CSV")->required();
  statcorr->add_option("--out", rp_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      const auto grid = grid_path.empty() ? default_grid(g.seed) : load_grid(grid_path);
      if (!write_grid_path.empty()) save_grid(grid, write_grid_path);
      synth_probe.seed = g.seed;
      const std::optional<fs::path> root = out_root.empty() ? std::nullopt : std::optional<fs::path>(out_root);
      const MetaDataset meta = gen_meta(grid, synth_probe, g.threads, root);
      save_meta(meta, synth_out);
      say(g, "wrote " + std::to_string(meta.size()) + " records to " + synth_out);
    } else if (*stats) {
      const auto ds = load_embedding_dataset(stats_data);
      save_stats_rows({stats_record(ds, g.seed)}, stats_out);
      say(g, "wrote " + stats_out);
    } else if (*probe) {
      const auto ds = load_embedding_dataset(probe_data);
      probe_cfg.seed = g.seed;
      const ProbeResult r = train_linear_probe(ds, probe_cfg);
      write_json(probe_json(r), probe_out);
      say(g, "best accuracy " + format_real(r.best_accuracy) + " at epoch " + std::to_string(r.best_epoch));
    } else if (*build) {
      std::vector<fs::path> dirs(build_dirs.begin(), build_dirs.end());
      if (!build_root.empty()) {
        std::vector<fs::path> found;
        for (const auto& entry : fs::directory_iterator(build_root))
          if (entry.is_directory()) found.push_back(entry.path());
        std::sort(found.begin(), found.end());
        dirs.insert(dirs.end(), found.begin(), found.end());
      }
      if (dirs.empty()) throw DataError("build-meta: no dataset directories given");
      build_probe.seed = g.seed;
      MetaDataset meta;
      meta.records.resize(dirs.size());
      parallel_for(dirs.size(), g.threads, [&](std::size_t i) {
        const auto ds = load_embedding_dataset(dirs[i]);
        MetaRecord rec = stats_record(ds, g.seed);
        rec.accuracy = train_linear_probe(ds, build_probe).best_accuracy;
        meta.records[i] = std::move(rec);
      });
      save_meta(meta, build_out);
      say(g, "wrote " + std::to_string(meta.size()) + " records to " + build_out);
    } else if (*split) {
      const auto [train, test] = split_meta(load_meta(split_in), ratio, g.seed);
      save_meta(train, split_train);
      save_meta(test, split_test);
      say(g, "train " + std::to_string(train.size()) + ", test " + std::to_string(test.size()));
    } else if (*gp) {
      gp_cfg.fitness_mode = parse_fitness_mode(gp_fitness);
      gp_cfg.seed = g.seed;
      gp_cfg.threads = g.threads;
      if (gp_runs < 1) throw DataError("--runs must be >= 1");
      const MetaDataset train = load_meta(gp_train);
      const MetaDataset test = load_meta(gp_test);
      if (fs::exists(gp_out)) fs::remove(gp_out);
      if (fs::path(gp_out).has_parent_path()) fs::create_directories(fs::path(gp_out).parent_path());
      const auto runs = multi_run(train, test, gp_cfg, gp_runs, fs::path(gp_out), !no_timing);
      for (const auto& e : runs)
        say(g, "run " + std::to_string(e.record.run_id) + " fitness " + format_real(e.record.train_fitness) +
                   " test r " + format_real(e.record.test_pearson) + "  " + e.record.sexpr);
    } else if (*eval) {
      const Expr expr = formula_arg(eval_formula);
      const EvalReport r = evaluate_formula(expr, load_meta(eval_train), load_meta(eval_test), calib_arg(eval_calib));
      json doc = {{"formula", render_sexpr(expr)}, {"calibration", eval_calib}};
      doc.update(report_json(r));
      write_json(doc, eval_out);
      say(g, "pearson " + format_real(r.pearson_r) + ", r2 " + format_real(r.r2));
    } else if (*ablate) {
      const Expr expr = formula_arg(ab_formula);
      const MetaDataset train = load_meta(ab_train);
      const MetaDataset test = load_meta(ab_test);
      Vector train_pred = evaluate_batch(expr, train);
      Vector test_pred = evaluate_batch(expr, test);
      const EvalReport baseline_report = evaluate_predictions_lenient(train_pred, train.accuracies(), test_pred,
                                                                      test.accuracies(), CalibrationMode::fit_on_train());
      save_ablation_table(baseline_report, ablation_table(expr, train, test, !no_refit, g.threads), ab_out);
      say(g, "wrote " + ab_out);
    } else if (*baseline) {
      const MetaDataset train = load_meta(bl_train);
      const MetaDataset test = load_meta(bl_test);
      const auto vars = stat_list(bl_vars);
      json doc;
      LinearModel model;
      if (*ols) {
        model = fit_ols(train, vars, bl_log);
        doc["kind"] = "ols";
        doc["intercept"] = model.intercept;
        doc["coefficients"] = model.coefficients;
      } else {
        ga_cfg.seed = g.seed;
        ga_cfg.threads = g.threads;
        const GaResult r = ga_sum_search(train, vars, bl_log, ga_cfg);
        model = r.as_linear_model();
        doc["kind"] = "ga";
        doc["formula"] = r.render();
        doc["coefficients"] = r.coefficients;
        doc["train_fitness"] = r.train_fitness;
        doc["train_pearson"] = r.train_pearson;
      }
      doc["variables"] = names_json(model.variables);
      doc["log_transformed"] = model.log_transformed;
      doc["dropped"] = names_json(model.dropped);
      const EvalReport r = evaluate_predictions(model.predict(train), train.accuracies(), model.predict(test),
                                                test.accuracies(), CalibrationMode::fit_on_train());
      doc["report"] = report_json(r);
      write_json(doc, bl_out);
      if (!model.dropped.empty()) say(g, "dropped non-positive variables: " + names_json(model.dropped).dump());
      say(g, "test pearson " + format_real(r.pearson_r) + ", r2 " + format_real(r.r2));
    } else if (*report) {
      if (*statcorr) {
        const MetaDataset meta = load_meta(rp_meta);
        save_stat_corr(stat_accuracy_corr(meta), subset_indicator_corr(meta), rp_out);
      } else {
        const auto runs = load_run_log(rp_runs);
        if (*freq) {
          if (runs.empty()) throw DataError(rp_runs + ": no runs");
          save_frequency(variable_frequency(runs), rp_out);
        } else if (*complexity) {
          save_complexity(complexity_vs_score(runs), rp_out);
        } else {
          const RunRecord& r = runs[best_run_by_test_r2(runs)];
          write_json({{"selection", "selection-on-test"},
                      {"run_id", r.run_id},
                      {"seed", r.seed},
                      {"sexpr", r.sexpr},
                      {"node_count", r.node_count},
                      {"test_pearson", r.test_pearson},
                      {"test_r2", r.test_r2}},
                     rp_out);
        }
      }
      say(g, "wrote " + rp_out);
    }
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
