#include "heterloss/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <numeric>

#include "fit_loop.hpp"
#include "heterloss/errors.hpp"
#include "json.hpp"
#include "text_util.hpp"

#ifdef HETERLOSS_HAVE_OPENMP
#include <omp.h>
#endif

namespace heterloss {

std::string to_string(Contender c) {
  switch (c) {
    case Contender::Shared:
      return "shared";
    case Contender::Partial:
      return "partial";
    case Contender::Independent:
      return "independent";
    case Contender::MseBaseline:
      return "mse";
    case Contender::UmaNlos:
      return "uma";
  }
  return "unknown";
}

Contender contender_from_string(const std::string& s) {
  if (s == "mse") return Contender::MseBaseline;
  if (s == "uma") return Contender::UmaNlos;
  return to_contender(architecture_from_string(s));
}

Contender to_contender(ArchitectureKind k) {
  switch (k) {
    case ArchitectureKind::Shared:
      return Contender::Shared;
    case ArchitectureKind::Partial:
      return Contender::Partial;
    case ArchitectureKind::Independent:
      return Contender::Independent;
  }
  return Contender::Shared;
}

bool is_heteroscedastic(Contender c) {
  return c == Contender::Shared || c == Contender::Partial || c == Contender::Independent;
}

namespace {

ArchitectureKind to_kind(Contender c) {
  switch (c) {
    case Contender::Partial:
      return ArchitectureKind::Partial;
    case Contender::Independent:
      return ArchitectureKind::Independent;
    default:
      return ArchitectureKind::Shared;
  }
}

}  // namespace

std::vector<Fold> logo_folds(const Dataset& data) {
  const auto groups = data.group_rows();
  if (groups.size() < 2) throw ConfigError("leave-one-group-out needs at least two groups");
  std::vector<Fold> folds;
  for (const auto& [holdout, rows] : groups) {
    Fold f;
    f.holdout = holdout;
    f.holdout_rows = rows;
    for (const auto& [name, other] : groups) {
      if (name == holdout) continue;
      f.train_groups.push_back(name);
      f.train_rows.insert(f.train_rows.end(), other.begin(), other.end());
    }
    std::sort(f.train_rows.begin(), f.train_rows.end());
    folds.push_back(std::move(f));
  }
  return folds;
}

std::uint64_t run_seed(std::uint64_t experiment_seed, std::size_t fold_index, std::size_t run) {
  return Rng(experiment_seed).split(fold_index).split(run).seed();
}

FoldResult train_one(Contender contender, const Dataset& data, const Fold& fold, const TrainConfig& config,
                     std::uint64_t seed, std::size_t run, const UmaParams& uma, RowAccessLog* log) {
  config.validate();
  if (fold.train_rows.size() < 2) throw InputError("fold '" + fold.holdout + "' has too few training rows");
  if (fold.holdout_rows.empty()) throw InputError("fold '" + fold.holdout + "' has no holdout rows");

  FoldResult result;
  result.contender = contender;
  result.fold = fold.holdout;
  result.run = run;
  result.test_size = fold.holdout_rows.size();

  if (contender == Contender::UmaNlos) {
    result.loss_name.clear();
    if (log) {
      log->test = fold.holdout_rows;
      log->finalize();
    }
    result.test = evaluate(to_prediction_set(uma, data, fold.holdout_rows), config.confidence);
    return result;
  }

  const Rng root(seed);
  Rng split_rng = root.split("split");
  const auto split = detail::split_rows(fold.train_rows, config.val_fraction, split_rng);

  try {
    if (contender == Contender::MseBaseline) {
      result.loss_name = "mse";
      auto fit = train_mse(data, split.train, split.validation, config, seed, log);
      result.train_curve = std::move(fit.train_loss);
      result.val_curve = std::move(fit.val_loss);
      result.best_epoch = fit.best_epoch;
      if (log) log->test = fold.holdout_rows;
      result.test = evaluate(to_prediction_set(fit.model, data, fold.holdout_rows), config.confidence);
      result.model = std::move(fit.model);
    } else {
      HeteroModel model = build_default(to_kind(contender), kFeatureCount, seed, config.dropout);
      model.normalizer = fit_normalizer(data, split.train);
      if (log) log->normalization.insert(log->normalization.end(), split.train.begin(), split.train.end());
      const Matrix x_train = apply(model.normalizer, data, split.train);
      const Matrix x_val = apply(model.normalizer, data, split.validation);
      const auto y_train = data.targets(split.train);
      const auto y_val = data.targets(split.validation);

      const double n = static_cast<double>(y_train.size());
      const double y_mean = std::accumulate(y_train.begin(), y_train.end(), 0.0) / n;
      double y_var = 0.0;
      for (double y : y_train) y_var += (y - y_mean) * (y - y_mean);
      model.set_output_prior(y_mean, std::max(y_var / n, 1e-6));

      auto optimizers = make_optimizers(model, AdamConfig{config.learning_rate});
      Rng dropout_rng = root.split("dropout");
      Rng shuffle_rng = root.split("shuffle");
      std::vector<double> yb;
      auto step = [&](std::size_t epoch, std::span<const std::size_t> batch) {
        const Matrix xb = x_train.gather_rows(batch);
        if (log)
          for (std::size_t pos : batch) log->training.push_back(split.train[pos]);
        yb.resize(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) yb[i] = y_train[batch[i]];
        NllOptions opts;
        opts.log_variance_grad_scale = epoch <= config.warmup_epochs ? config.warmup_scale : 1.0;
        auto res = nll_gradients(model, xb, yb, &dropout_rng, opts);
        if (std::isfinite(res.loss)) adam_step(model, res.gradients, optimizers);
        return res.loss;
      };
      auto validate = [&] {
        if (log) log->validation.insert(log->validation.end(), split.validation.begin(), split.validation.end());
        return nll_loss(model, x_val, y_val);
      };
      auto trace = detail::fit(model, split.train.size(), config, shuffle_rng, step, validate);
      result.train_curve = std::move(trace.train_loss);
      result.val_curve = std::move(trace.val_loss);
      result.best_epoch = trace.best_epoch;

      if (log) log->test = fold.holdout_rows;
      const auto preds = predict(model, apply(model.normalizer, data, fold.holdout_rows));
      PredictionSet p;
      p.truth = data.targets(fold.holdout_rows);
      p.mean.reserve(preds.size());
      p.sd.reserve(preds.size());
      for (const auto& g : preds) {
        p.mean.push_back(g.mean);
        p.sd.push_back(g.sd);
      }
      result.test = evaluate(p, config.confidence);
      result.model = std::move(model);
    }
    result.best_train_loss = result.train_curve.at(result.best_epoch - 1);
    result.best_val_loss = result.val_curve.at(result.best_epoch - 1);
  } catch (const TrainingDivergence& e) {
    result.failed = true;
    result.failure = e.what();
    result.model.reset();
  }
  if (log) log->finalize();
  return result;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.count = values.size();
  if (values.empty()) return a;
  const auto n = static_cast<double>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.sd = std::sqrt(ss / n);
  a.max = *std::max_element(values.begin(), values.end());
  return a;
}

namespace {

double metric_of(const FoldResult& r, const std::string& metric) {
  if (metric == "rmse") return r.test.rmse;
  if (metric == "picp") return r.test.picp;
  if (metric == "mpiw") return r.test.mpiw;
  throw ConfigError("unknown metric " + metric);
}

// Paired samples of `metric` for two contenders.
std::pair<std::vector<double>, std::vector<double>> paired_values(std::span<const FoldResult> runs, Contender a,
                                                                  Contender b, const std::string& metric,
                                                                  Pairing pairing) {
  std::map<std::pair<std::string, std::size_t>, double> va, vb;
  for (const auto& r : runs) {
    if (r.failed) continue;
    if (r.contender == a) va[{r.fold, r.run}] = metric_of(r, metric);
    if (r.contender == b) vb[{r.fold, r.run}] = metric_of(r, metric);
  }
  std::vector<double> xa, xb;
  if (pairing == Pairing::AllRuns) {
    for (const auto& [key, v] : va) {
      auto it = vb.find(key);
      if (it == vb.end()) continue;
      xa.push_back(v);
      xb.push_back(it->second);
    }
    return {xa, xb};
  }
  std::map<std::string, std::pair<double, double>> sa, sb;
  std::map<std::string, std::size_t> count;
  for (const auto& [key, v] : va) {
    auto it = vb.find(key);
    if (it == vb.end()) continue;
    sa[key.first].first += v;
    sb[key.first].first += it->second;
    ++count[key.first];
  }
  for (const auto& [fold, c] : count) {
    xa.push_back(sa[fold].first / static_cast<double>(c));
    xb.push_back(sb[fold].first / static_cast<double>(c));
  }
  return {xa, xb};
}

}  // namespace

ComparisonReport summarize(std::span<const FoldResult> runs, std::span<const Contender> contenders, double alpha,
                           Pairing pairing, double confidence) {
  ComparisonReport report;
  report.alpha = alpha;
  report.pairing = pairing;
  report.confidence = confidence;
  for (Contender c : contenders) {
    ContenderSummary s;
    s.contender = c;
    std::vector<double> tl, vl, rm, nl, pc, mw, ku, sk;
    for (const auto& r : runs) {
      if (r.contender != c) continue;
      ++s.runs;
      if (r.failed) {
        ++s.failed;
        continue;
      }
      if (r.best_epoch > 0) {
        tl.push_back(r.best_train_loss);
        vl.push_back(r.best_val_loss);
      }
      rm.push_back(r.test.rmse);
      nl.push_back(r.test.nll);
      pc.push_back(r.test.picp);
      mw.push_back(r.test.mpiw);
      ku.push_back(std::fabs(r.test.kurtosis));
      sk.push_back(std::fabs(r.test.skewness));
    }
    s.train_loss = aggregate(tl);
    s.val_loss = aggregate(vl);
    s.rmse = aggregate(rm);
    s.nll = aggregate(nl);
    s.picp = aggregate(pc);
    s.mpiw = aggregate(mw);
    s.abs_kurtosis = aggregate(ku);
    s.abs_skewness = aggregate(sk);
    report.summaries.push_back(s);
  }

  // Rank heteroscedastic architectures by mean RMSE; test adjacent pairs.
  std::vector<const ContenderSummary*> ranked;
  for (const auto& s : report.summaries)
    if (is_heteroscedastic(s.contender) && s.rmse.count > 0) ranked.push_back(&s);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto* a, const auto* b) { return a->rmse.mean < b->rmse.mean; });
  report.comparisons = ranked.size() > 1 ? ranked.size() - 1 : 0;
  report.corrected_alpha = report.comparisons > 0 ? bonferroni(alpha, report.comparisons) : alpha;
  for (std::size_t i = 0; i + 1 < ranked.size(); ++i) {
    for (const std::string metric : {"rmse", "picp", "mpiw"}) {
      auto [a, b] = paired_values(runs, ranked[i]->contender, ranked[i + 1]->contender, metric, pairing);
      if (a.size() < 2) continue;
      PairwiseTest t;
      t.metric = metric;
      t.better = ranked[i]->contender;
      t.worse = ranked[i + 1]->contender;
      t.result = paired_t_test(a, b);
      t.significant = !t.result.degenerate && t.result.p < report.corrected_alpha;
      report.tests.push_back(t);
    }
  }
  return report;
}

ExperimentResult run_experiment(const Dataset& data, const ExperimentOptions& options) {
  options.train.validate();
  if (options.contenders.empty()) throw ConfigError("no contenders selected");
  auto folds = logo_folds(data);
  std::vector<std::size_t> fold_index;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    if (options.holdouts.empty() ||
        std::find(options.holdouts.begin(), options.holdouts.end(), folds[i].holdout) != options.holdouts.end()) {
      fold_index.push_back(i);
    }
  }
  for (const auto& h : options.holdouts) {
    if (std::none_of(folds.begin(), folds.end(), [&](const Fold& f) { return f.holdout == h; })) {
      throw ConfigError("holdout group '" + h + "' not in dataset");
    }
  }

  struct Job {
    Contender contender;
    std::size_t fold;
    std::size_t run;
  };
  std::vector<Job> jobs;
  for (Contender c : options.contenders) {
    const std::size_t repeats = c == Contender::UmaNlos ? 1 : options.train.repeats;
    for (std::size_t f : fold_index)
      for (std::size_t r = 0; r < repeats; ++r) jobs.push_back({c, f, r});
  }

  std::vector<FoldResult> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  const auto n_jobs = static_cast<std::int64_t>(jobs.size());
#ifdef HETERLOSS_HAVE_OPENMP
  const int workers = options.workers > 0 ? static_cast<int>(options.workers) : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(workers)
#endif
  for (std::int64_t j = 0; j < n_jobs; ++j) {
    const auto& job = jobs[static_cast<std::size_t>(j)];
    try {
      auto r = train_one(job.contender, data, folds[job.fold], options.train,
                         run_seed(options.train.seed, job.fold, job.run), job.run, options.uma);
      if (!options.keep_models) r.model.reset();
      results[static_cast<std::size_t>(j)] = std::move(r);
    } catch (...) {
      errors[static_cast<std::size_t>(j)] = std::current_exception();
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  ExperimentResult out;
  out.runs = std::move(results);
  out.report = summarize(out.runs, options.contenders, options.alpha, options.pairing, options.train.confidence);
  return out;
}

CurveSummary mean_sd_curves(std::span<const FoldResult> runs) {
  std::vector<const FoldResult*> used;
  for (const auto& r : runs)
    if (!r.failed && !r.val_curve.empty()) used.push_back(&r);
  if (used.empty()) throw InputError("mean_sd_curves: no trained runs");
  std::size_t epochs = 0;
  for (const auto* r : used) epochs = std::max(epochs, r->val_curve.size());

  CurveSummary s;
  const auto n = static_cast<double>(used.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    double tm = 0.0, vm = 0.0;
    std::size_t active = 0;
    std::vector<double> tv, vv;
    for (const auto* r : used) {
      const std::size_t k = std::min(e, r->val_curve.size() - 1);
      if (e < r->val_curve.size()) ++active;
      tv.push_back(r->train_curve[k]);
      vv.push_back(r->val_curve[k]);
      tm += r->train_curve[k];
      vm += r->val_curve[k];
    }
    tm /= n;
    vm /= n;
    double ts = 0.0, vs = 0.0;
    for (std::size_t i = 0; i < tv.size(); ++i) {
      ts += (tv[i] - tm) * (tv[i] - tm);
      vs += (vv[i] - vm) * (vv[i] - vm);
    }
    s.train_mean.push_back(tm);
    s.val_mean.push_back(vm);
    s.train_sd.push_back(std::sqrt(ts / n));
    s.val_sd.push_back(std::sqrt(vs / n));
    s.active.push_back(active);
  }
  return s;
}

namespace {

using text::format_double;

std::string pairing_name(Pairing p) { return p == Pairing::AllRuns ? "all_runs" : "fold_means"; }

nlohmann::json aggregate_json(const Aggregate& a) {
  return {{"mean", a.mean}, {"sd", a.sd}, {"max", a.max}, {"count", a.count}};
}

std::string model_filename(const FoldResult& r) {
  std::string fold = r.fold;
  for (char& c : fold)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  return to_string(r.contender) + "_" + fold + "_run" + std::to_string(r.run) + ".json";
}

}  // namespace

void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "models");
  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw InputError("cannot write " + (dir / name).string());
    return out;
  };

  {
    auto out = open("runs.csv");
    out << "architecture,fold,run,rmse,nll,picp,mpiw,kurtosis,skewness\n";
    for (const auto& r : result.runs) {
      if (r.failed) continue;
      out << to_string(r.contender) << ',' << r.fold << ',' << r.run << ',' << format_double(r.test.rmse) << ','
          << format_double(r.test.nll) << ',' << format_double(r.test.picp) << ',' << format_double(r.test.mpiw)
          << ',' << format_double(r.test.kurtosis) << ',' << format_double(r.test.skewness) << '\n';
    }
  }
  {
    auto out = open("curves.csv");
    out << "architecture,fold,run,loss,epoch,train_nll,val_nll\n";
    for (const auto& r : result.runs) {
      for (std::size_t e = 0; e < r.val_curve.size(); ++e) {
        out << to_string(r.contender) << ',' << r.fold << ',' << r.run << ',' << r.loss_name << ',' << e + 1 << ','
            << format_double(r.train_curve[e]) << ',' << format_double(r.val_curve[e]) << '\n';
      }
    }
  }
  {
    auto out = open("curves_summary.csv");
    out << "architecture,epoch,train_mean,train_sd,val_mean,val_sd,active_runs,padded_runs\n";
    for (const auto& s : result.report.summaries) {
      std::vector<FoldResult> mine;
      for (const auto& r : result.runs)
        if (r.contender == s.contender && !r.failed && !r.val_curve.empty()) mine.push_back(r);
      if (mine.empty()) continue;
      const auto c = mean_sd_curves(mine);
      for (std::size_t e = 0; e < c.val_mean.size(); ++e) {
        out << to_string(s.contender) << ',' << e + 1 << ',' << format_double(c.train_mean[e]) << ','
            << format_double(c.train_sd[e]) << ',' << format_double(c.val_mean[e]) << ','
            << format_double(c.val_sd[e]) << ',' << c.active[e] << ',' << mine.size() - c.active[e] << '\n';
      }
    }
  }
  {
    auto out = open("aggregate.csv");
    out << "architecture,runs,failed,train_loss_mean,train_loss_sd,val_loss_mean,val_loss_sd,rmse_mean,rmse_sd,"
           "picp_mean,picp_sd,mpiw_mean,mpiw_sd,nll_mean,nll_sd,abs_kurtosis_mean,abs_kurtosis_sd,"
           "abs_kurtosis_max,abs_skewness_mean,abs_skewness_sd,abs_skewness_max\n";
    for (const auto& s : result.report.summaries) {
      out << to_string(s.contender) << ',' << s.runs << ',' << s.failed;
      for (const Aggregate* a : {&s.train_loss, &s.val_loss, &s.rmse, &s.picp, &s.mpiw, &s.nll})
        out << ',' << format_double(a->mean) << ',' << format_double(a->sd);
      for (const Aggregate* a : {&s.abs_kurtosis, &s.abs_skewness})
        out << ',' << format_double(a->mean) << ',' << format_double(a->sd) << ',' << format_double(a->max);
      out << '\n';
    }
  }
  {
    nlohmann::json j;
    const auto& rep = result.report;
    j["confidence"] = rep.confidence;
    j["alpha"] = rep.alpha;
    j["comparisons"] = rep.comparisons;
    j["corrected_alpha"] = rep.corrected_alpha;
    j["pairing"] = pairing_name(rep.pairing);
    for (const auto& s : rep.summaries) {
      j["summaries"].push_back({{"architecture", to_string(s.contender)},
                                {"runs", s.runs},
                                {"failed", s.failed},
                                {"train_loss", aggregate_json(s.train_loss)},
                                {"val_loss", aggregate_json(s.val_loss)},
                                {"rmse", aggregate_json(s.rmse)},
                                {"nll", aggregate_json(s.nll)},
                                {"picp", aggregate_json(s.picp)},
                                {"mpiw", aggregate_json(s.mpiw)},
                                {"abs_kurtosis", aggregate_json(s.abs_kurtosis)},
                                {"abs_skewness", aggregate_json(s.abs_skewness)}});
    }
    j["tests"] = nlohmann::json::array();
    for (const auto& t : rep.tests) {
      j["tests"].push_back({{"metric", t.metric},
                            {"better", to_string(t.better)},
                            {"worse", to_string(t.worse)},
                            {"t", t.result.degenerate ? nlohmann::json(nullptr) : nlohmann::json(t.result.t)},
                            {"p", t.result.p},
                            {"dof", t.result.dof},
                            {"mean_difference", t.result.mean_difference},
                            {"degenerate", t.result.degenerate},
                            {"significant", t.significant}});
    }
    j["runs"] = nlohmann::json::array();
    for (const auto& r : result.runs) {
      nlohmann::json rj = {{"architecture", to_string(r.contender)},
                           {"fold", r.fold},
                           {"run", r.run},
                           {"failed", r.failed},
                           {"test_size", r.test_size}};
      if (r.failed) {
        rj["failure"] = r.failure;
      } else {
        rj["best_epoch"] = r.best_epoch;
        rj["epochs"] = r.val_curve.size();
        rj["metrics"] = {{"rmse", r.test.rmse}, {"nll", r.test.nll},           {"picp", r.test.picp},
                         {"mpiw", r.test.mpiw}, {"kurtosis", r.test.kurtosis}, {"skewness", r.test.skewness}};
        if (r.model) rj["model"] = "models/" + model_filename(r);
      }
      j["runs"].push_back(std::move(rj));
    }
    auto out = open("report.json");
    out << j.dump(2) << '\n';
  }
  for (const auto& r : result.runs)
    if (r.model) save_model(*r.model, dir / "models" / model_filename(r));
}

}  // namespace heterloss
