// heterloss: command-line front end for synthesis, training, evaluation,
// single-link prediction and prediction-interval heatmaps.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "heterloss/baselines.hpp"
#include "heterloss/dataset.hpp"
#include "heterloss/errors.hpp"
#include "heterloss/heatmap.hpp"
#include "heterloss/metrics.hpp"
#include "heterloss/model_io.hpp"
#include "heterloss/synthetic.hpp"
#include "heterloss/terrain.hpp"
#include "heterloss/training.hpp"

namespace fs = std::filesystem;
using namespace heterloss;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw InputError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct SchemaFlags {
  CsvSchema schema;
  void add(CLI::App* cmd) {
    cmd->add_option("--col-freq", schema.frequency, "Frequency column (MHz)")->capture_default_str();
    cmd->add_option("--col-dist", schema.distance, "Link distance column (m)")->capture_default_str();
    cmd->add_option("--col-obs", schema.obstruction, "Total obstruction depth column (m)")->capture_default_str();
    cmd->add_option("--col-group", schema.group, "Group (drive test) column")->capture_default_str();
    cmd->add_option("--col-pl", schema.path_loss, "Path loss column (dB)")->capture_default_str();
  }
};

Dataset load_reporting(const fs::path& path, const CsvSchema& schema) {
  auto loaded = load_csv(path, schema);
  for (const auto& r : loaded.rejected) std::cerr << path.string() << ':' << r.line << ": rejected: " << r.reason << '\n';
  if (loaded.dataset.size() == 0) throw InputError(path.string() + ": no valid rows");
  return std::move(loaded.dataset);
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  std::string spec_file;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::size_t samples = 0;
  bool oracle = false;
  bool noiseless = false;
  std::string demo_map_dir;
};

int run_synth(const SynthArgs& a) {
  if (!a.demo_map_dir.empty()) {
    fs::create_directories(a.demo_map_dir);
    const auto map = generate_demo_map(a.seed_set ? a.seed : 7);
    write_ascii_grid(map.dtm, fs::path(a.demo_map_dir) / "demo_dtm.asc");
    write_ascii_grid(map.dsm, fs::path(a.demo_map_dir) / "demo_dsm.asc");
    std::cerr << "wrote demo map to " << a.demo_map_dir << '\n';
    if (a.out.empty()) return kExitOk;
  }
  if (a.out.empty()) throw ConfigError("synth: --out is required");
  SyntheticSpec spec = a.spec_file.empty() ? SyntheticSpec::defaults() : synthetic_spec_from_json(read_file(a.spec_file));
  if (a.seed_set) spec.seed = a.seed;
  if (a.samples > 0) spec.samples_per_frequency = a.samples;
  if (a.noiseless) spec.noise = false;
  const auto data = generate_synthetic(spec);
  write_csv(data, a.out, CsvSchema{}, a.oracle);
  std::cerr << "wrote " << data.size() << " rows to " << a.out << '\n';
  return kExitOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::string out = "results";
  std::vector<std::string> arch{"all"};
  std::vector<std::string> baselines;
  std::vector<std::string> holdouts;
  std::string folds = "logo";
  std::string pairing = "all_runs";
  std::size_t workers = 0;
  TrainConfig config;
  UmaParams uma;
  SchemaFlags schema;
};

int run_train(TrainArgs& a) {
  if (a.folds != "logo") throw ConfigError("train: only --folds logo is supported");
  ExperimentOptions opt;
  opt.contenders.clear();
  for (const auto& name : a.arch) {
    if (name == "all") {
      for (auto c : {Contender::Shared, Contender::Partial, Contender::Independent}) opt.contenders.push_back(c);
    } else {
      opt.contenders.push_back(to_contender(architecture_from_string(name)));
    }
  }
  for (const auto& name : a.baselines) {
    const auto c = contender_from_string(name);
    if (is_heteroscedastic(c)) throw ConfigError("--baseline accepts mse or uma");
    opt.contenders.push_back(c);
  }
  opt.train = a.config;
  opt.uma = a.uma;
  opt.holdouts = a.holdouts;
  opt.pairing = a.pairing == "fold_means" ? Pairing::FoldMeans : Pairing::AllRuns;
  opt.workers = a.workers;

  const Dataset data = load_reporting(a.data, a.schema.schema);
  const auto result = run_experiment(data, opt);
  write_experiment(result, a.out);

  std::cout << "architecture,runs,failed,rmse_mean,rmse_sd,picp_mean,picp_sd,mpiw_mean,mpiw_sd\n";
  for (const auto& s : result.report.summaries) {
    std::cout << to_string(s.contender) << ',' << s.runs << ',' << s.failed << ',' << fmt(s.rmse.mean) << ','
              << fmt(s.rmse.sd) << ',' << fmt(s.picp.mean) << ',' << fmt(s.picp.sd) << ',' << fmt(s.mpiw.mean)
              << ',' << fmt(s.mpiw.sd) << '\n';
  }
  std::size_t failed = 0;
  for (const auto& r : result.runs) failed += r.failed ? 1 : 0;
  if (failed > 0) std::cerr << failed << " run(s) diverged; see report.json\n";
  return kExitOk;
}

// --- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string data;
  std::string model;
  bool uma_baseline = false;
  std::vector<std::string> groups;
  double confidence = 0.95;
  UmaParams uma;
  SchemaFlags schema;
};

int run_evaluate(const EvaluateArgs& a) {
  if (a.model.empty() == !a.uma_baseline) throw ConfigError("evaluate: give exactly one of --model or --uma");
  const Dataset data = load_reporting(a.data, a.schema.schema);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (a.groups.empty() || std::find(a.groups.begin(), a.groups.end(), data.records[i].group) != a.groups.end()) {
      rows.push_back(i);
    }
  }
  if (rows.empty()) throw InputError("evaluate: no rows match the selected groups");

  PredictionSet p;
  if (a.uma_baseline) {
    std::size_t outside = 0;
    p = to_prediction_set(a.uma, data, rows, &outside);
    if (outside > 0) std::cerr << outside << " link(s) outside the UMa validity range\n";
  } else {
    const auto model = load_model(a.model);
    Matrix raw(rows.size(), kFeatureCount);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto f = raw_features(data.records[rows[k]]);
      std::copy(f.begin(), f.end(), raw.row(k).begin());
    }
    const auto preds = predict_links(model, raw);
    p.truth = data.targets(rows);
    for (const auto& g : preds) {
      p.mean.push_back(g.mean);
      p.sd.push_back(g.sd);
    }
  }
  const auto m = evaluate(p, a.confidence);
  std::cout << "n,rmse,nll,picp,mpiw,kurtosis,skewness\n"
            << rows.size() << ',' << fmt(m.rmse) << ',' << fmt(m.nll) << ',' << fmt(m.picp) << ',' << fmt(m.mpiw)
            << ',' << fmt(m.kurtosis) << ',' << fmt(m.skewness) << '\n';
  return kExitOk;
}

// --- predict ---------------------------------------------------------------

struct PredictArgs {
  std::string model;
  double freq = 0.0;
  double dist = 0.0;
  double obs = 0.0;
  double confidence = 0.95;
  bool header = false;
};

int run_predict(const PredictArgs& a) {
  LinkRecord link{a.freq, a.dist, a.obs, "cli", 0.0};
  if (auto why = validate(link)) throw ConfigError("predict: " + *why);
  const auto model = load_model(a.model);
  Matrix raw(1, kFeatureCount, {a.freq, a.dist, a.obs});
  const auto g = predict_links(model, raw).front();
  const double z = z_critical(a.confidence);
  if (a.header) std::cout << "mean_db,sd_db,lower_db,upper_db\n";
  std::cout << fmt(g.mean) << ',' << fmt(g.sd) << ',' << fmt(g.mean - z * g.sd) << ',' << fmt(g.mean + z * g.sd)
            << '\n';
  return kExitOk;
}

// --- heatmap ---------------------------------------------------------------

struct HeatmapArgs {
  std::string model;
  std::string surface;
  std::string ground;
  long tx_col = -1;
  long tx_row = -1;
  double tx_height = 20.0;
  double rx_height = 1.5;
  double freq = 3500.0;
  double confidence = 0.95;
  double building_threshold = 2.0;
  bool no_curvature = false;
  bool pgm = false;
  std::string out = "heatmap";
};

int run_heatmap(const HeatmapArgs& a) {
  HeatmapJob job;
  job.surface = read_ascii_grid(a.surface);
  if (!a.ground.empty()) job.ground = read_ascii_grid(a.ground);
  job.tx = {a.tx_col >= 0 ? a.tx_col : static_cast<long>(job.surface.ncols / 2),
            a.tx_row >= 0 ? a.tx_row : static_cast<long>(job.surface.nrows / 2)};
  job.tx_height_agl = a.tx_height;
  job.rx_height_agl = a.rx_height;
  job.frequency_mhz = a.freq;
  job.confidence = a.confidence;
  job.building_threshold_m = a.building_threshold;
  job.earth_curvature = !a.no_curvature;
  job.validate();
  const auto model = load_model(a.model);
  const auto result = render_heatmap(job, model);

  write_ascii_grid(result.width, a.out + "_width.asc");
  write_ascii_grid(result.mean, a.out + "_mean.asc");
  write_ascii_grid(result.sd, a.out + "_sd.asc");
  if (a.pgm) write_pgm(result.width, a.out + "_width.pgm");

  double lo = 1e300, hi = -1e300;
  for (double v : result.width.values) {
    if (result.width.is_nodata(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::cerr << "predicted " << result.predicted << " pixels, " << result.masked << " nodata; width range "
            << fmt(lo) << " .. " << fmt(hi) << " dB\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterloss: heteroscedastic path loss models with link-specific prediction intervals"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML-style config file; [subcommand] sections set that command's flags");
  app.set_version_flag("--version", std::string(kModelFormatVersion));

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic drive-test dataset with known mean and SD");
  c_synth->add_option("--spec", synth.spec_file, "JSON generator spec (defaults if omitted)")->check(CLI::ExistingFile);
  c_synth->add_option("--out", synth.out, "Output CSV");
  c_synth->add_option("--seed", synth.seed, "Generator seed (overrides the spec)")
      ->envname("HETERLOSS_SEED")
      ->each([&](const std::string&) { synth.seed_set = true; });
  c_synth->add_option("--samples-per-frequency", synth.samples, "Rows per (group, frequency)");
  c_synth->add_flag("--oracle-columns", synth.oracle, "Append true_mu,true_sigma columns");
  c_synth->add_flag("--noiseless", synth.noiseless, "Targets equal the true mean");
  c_synth->add_option("--demo-map", synth.demo_map_dir, "Also write the procedural demo height map to this directory");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Leave-one-group-out training and architecture comparison");
  c_train->add_option("--data", train.data, "Input CSV")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "Results directory")->capture_default_str();
  c_train->add_option("--arch", train.arch, "shared, partial, independent or all (repeatable)")
      ->check(CLI::IsMember({"shared", "partial", "independent", "all"}))
      ->capture_default_str();
  c_train->add_option("--baseline", train.baselines, "Homoscedastic baselines: mse, uma (repeatable)")
      ->check(CLI::IsMember({"mse", "uma"}));
  c_train->add_option("--folds", train.folds, "Fold scheme")->check(CLI::IsMember({"logo"}))->capture_default_str();
  c_train->add_option("--holdout", train.holdouts, "Only run folds holding out these groups");
  c_train->add_option("--repeats", train.config.repeats, "Runs per fold")->capture_default_str();
  c_train->add_option("--max-epochs", train.config.max_epochs, "Epoch cap")->capture_default_str();
  c_train->add_option("--patience", train.config.patience, "Early-stopping patience (epochs)")->capture_default_str();
  c_train->add_option("--min-delta", train.config.min_delta, "Minimum validation improvement")->capture_default_str();
  c_train->add_option("--batch-size", train.config.batch_size, "Mini-batch size")->capture_default_str();
  c_train->add_option("--lr", train.config.learning_rate, "Adam learning rate")->capture_default_str();
  c_train->add_option("--dropout", train.config.dropout, "Dropout after each hidden layer")->capture_default_str();
  c_train->add_option("--val-fraction", train.config.val_fraction, "Validation share of the training groups")
      ->capture_default_str();
  c_train->add_option("--confidence", train.config.confidence, "Prediction interval level")->capture_default_str();
  c_train->add_option("--warmup-epochs", train.config.warmup_epochs, "Epochs with damped log-variance gradient")
      ->capture_default_str();
  c_train->add_option("--warmup-scale", train.config.warmup_scale, "Log-variance gradient factor during warm-up")
      ->capture_default_str();
  c_train->add_option("--seed", train.config.seed, "Experiment seed")->envname("HETERLOSS_SEED")->capture_default_str();
  c_train->add_option("--pairing", train.pairing, "t-test pairing: all_runs or fold_means")
      ->check(CLI::IsMember({"all_runs", "fold_means"}))
      ->capture_default_str();
  c_train->add_option("--workers", train.workers, "Parallel runs (0 = all cores)")->capture_default_str();
  c_train->add_option("--uma-hbs", train.uma.base_station_height_m, "UMa base station height (m)")->capture_default_str();
  c_train->add_option("--uma-hut", train.uma.terminal_height_m, "UMa terminal height (m)")->capture_default_str();
  c_train->add_option("--uma-sd-nlos", train.uma.sd_nlos_db, "UMa NLOS SD (dB)")->capture_default_str();
  c_train->add_option("--uma-sd-los", train.uma.sd_los_db, "UMa LOS SD (dB)")->capture_default_str();
  c_train->add_flag("--uma-los-proxy", train.uma.los_from_obstruction, "Treat o = 0 links as LOS in the UMa baseline");
  train.schema.add(c_train);

  EvaluateArgs eval;
  auto* c_eval = app.add_subcommand("evaluate", "Score a saved model (or the UMa baseline) on a CSV");
  c_eval->add_option("--data", eval.data, "Input CSV")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--model", eval.model, "Model JSON")->check(CLI::ExistingFile);
  c_eval->add_flag("--uma", eval.uma_baseline, "Evaluate the UMa NLOS baseline instead of a model");
  c_eval->add_option("--group", eval.groups, "Only rows of these groups");
  c_eval->add_option("--confidence", eval.confidence, "Prediction interval level")->capture_default_str();
  c_eval->add_option("--uma-hbs", eval.uma.base_station_height_m, "UMa base station height (m)")->capture_default_str();
  c_eval->add_option("--uma-hut", eval.uma.terminal_height_m, "UMa terminal height (m)")->capture_default_str();
  c_eval->add_option("--uma-sd-nlos", eval.uma.sd_nlos_db, "UMa NLOS SD (dB)")->capture_default_str();
  c_eval->add_option("--uma-sd-los", eval.uma.sd_los_db, "UMa LOS SD (dB)")->capture_default_str();
  c_eval->add_flag("--uma-los-proxy", eval.uma.los_from_obstruction, "Treat o = 0 links as LOS");
  eval.schema.add(c_eval);

  PredictArgs pred;
  auto* c_pred = app.add_subcommand("predict", "Mean, SD and interval for one link (CSV line)");
  c_pred->add_option("--model", pred.model, "Model JSON")->required();
  c_pred->add_option("--freq,-f", pred.freq, "Frequency (MHz)")->required();
  c_pred->add_option("--dist,-d", pred.dist, "Link distance (m)")->required();
  c_pred->add_option("--obs,-o", pred.obs, "Total obstruction depth (m)")->required();
  c_pred->add_option("--confidence", pred.confidence, "Prediction interval level")->capture_default_str();
  c_pred->add_flag("--header", pred.header, "Print a header line first");

  HeatmapArgs heat;
  auto* c_heat = app.add_subcommand("heatmap", "Prediction-interval width raster around one transmitter");
  c_heat->add_option("--model", heat.model, "Model JSON")->required();
  c_heat->add_option("--surface", heat.surface, "Terrain+clutter ESRI ASCII grid")->required();
  c_heat->add_option("--ground", heat.ground, "Bare-terrain grid; enables the building mask");
  c_heat->add_option("--tx-col", heat.tx_col, "Transmitter column (default: centre)");
  c_heat->add_option("--tx-row", heat.tx_row, "Transmitter row (default: centre)");
  c_heat->add_option("--tx-height", heat.tx_height, "Transmitter height above ground (m)")->capture_default_str();
  c_heat->add_option("--rx-height", heat.rx_height, "Receiver height above ground (m)")->capture_default_str();
  c_heat->add_option("--freq", heat.freq, "Frequency (MHz)")->capture_default_str();
  c_heat->add_option("--confidence", heat.confidence, "Prediction interval level")->capture_default_str();
  c_heat->add_option("--building-threshold", heat.building_threshold, "Clutter height marking indoor pixels (m)")
      ->capture_default_str();
  c_heat->add_flag("--no-curvature", heat.no_curvature, "Skip the effective-Earth bulge");
  c_heat->add_flag("--pgm", heat.pgm, "Also write a PGM preview of the width raster");
  c_heat->add_option("--out", heat.out, "Output prefix")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_train) return run_train(train);
    if (*c_eval) return run_evaluate(eval);
    if (*c_pred) return run_predict(pred);
    if (*c_heat) return run_heatmap(heat);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
