#include "cdnn/cli/app.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cdnn/betafit.hpp"
#include "cdnn/checkpoint.hpp"
#include "cdnn/cli/config.hpp"
#include "cdnn/density.hpp"
#include "cdnn/entropy.hpp"
#include "cdnn/error.hpp"
#include "cdnn/lab.hpp"

namespace cdnn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::uint64_t seed = 0;
  std::string output_dir = "cdnn-output";
  std::string config;
  unsigned threads = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
  CLI::Option* config_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  c.seed_opt = sub->add_option("--seed", c.seed, "Random seed");
  sub->add_option("--output-dir", c.output_dir, "Directory for results.csv, summary.json and manifest.json")
      ->capture_default_str();
  c.config_opt = sub->add_option("--config", c.config, "JSON config file; flags override its keys");
  c.threads_opt = sub->add_option("--threads", c.threads, "Worker threads (0 = available cores)");
}

// Everything one subcommand produced.
struct Run {
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<TrialRecord> records;
  json summary = json::object();
  std::optional<Checkpoint> model;
  std::string primary;
  int exit_code = kExitOk;
};

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

void write_manifest(const fs::path& dir, const std::string& subcommand, const std::vector<std::string>& args,
                    const Run& run, const std::string& error) {
  json manifest = {{"artifact", "cdnn"},
                   {"version", CDNN_VERSION},
                   {"subcommand", subcommand},
                   {"arguments", args},
                   {"seed", run.seed},
                   {"config", run.config},
                   {"status", error.empty() ? "ok" : "error"},
                   {"timestamp", utc_timestamp()}};
  if (!error.empty()) manifest["error"] = error;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

void write_outputs(const fs::path& dir, const Run& run) {
  std::ostringstream csv;
  write_records_csv(csv, run.records);
  write_text(dir / "results.csv", csv.str());
  write_text(dir / "summary.json", run.summary.dump(2) + "\n");
  if (run.model) save_checkpoint(dir / "model.json", *run.model);
}

CovarianceMatrix load_covariance(const std::string& path, bool is_covariance, bool header) {
  DataMatrix d = read_data_csv(path, header);
  if (!is_covariance) return sample_covariance(d);
  if (d.n_samples() != d.dim()) {
    throw Error(ErrorCode::shape, path + ": a covariance must be square, got " + std::to_string(d.n_samples()) +
                                      "x" + std::to_string(d.dim()));
  }
  return CovarianceMatrix(d.values());
}

TrialRecord single_record(const std::string& name, std::uint64_t seed) {
  TrialRecord r;
  r.experiment = name;
  r.seed = seed;
  return r;
}

// ---- entropy / density / fit-beta ----------------------------------------

struct InputOpts {
  std::string input;
  bool is_covariance = false;
  bool header = false;
};

void add_input(CLI::App* sub, InputOpts& o, bool required) {
  auto* opt = sub->add_option("--input", o.input, "CSV file: data matrix (rows = observations) or covariance");
  if (required) opt->required();
  sub->add_flag("--input-is-covariance", o.is_covariance, "Treat --input as a precomputed covariance matrix");
  sub->add_flag("--header", o.header, "Skip the first CSV line");
}

Run run_entropy(const InputOpts& in, double beta, const std::string& unit, const Common& c) {
  const CovarianceMatrix cov = load_covariance(in.input, in.is_covariance, in.header);
  const EntropyReport e = cvne(cov, beta);
  Run run;
  run.seed = c.seed;
  run.config = {{"input", in.input}, {"input_is_covariance", in.is_covariance}, {"beta", beta}, {"unit", unit}};
  TrialRecord r = single_record("entropy", c.seed);
  r.params = {{"beta", format_double(beta)}, {"unit", unit}};
  r.metrics = {{"entropy_nats", e.entropy_nats},
               {"entropy_bits", e.entropy_bits},
               {"gibbs_form_nats", e.gibbs_form_nats},
               {"naive_entropy_bits", naive_entropy(cov)},
               {"dim", static_cast<double>(e.source_dim)},
               {"rank_estimate", static_cast<double>(e.source_rank_estimate)}};
  run.records.push_back(r);
  run.summary = {{"entropy", unit == "bits" ? e.entropy_bits : e.entropy_nats},
                 {"unit", unit},
                 {"beta", beta},
                 {"dim", e.source_dim},
                 {"rank_estimate", e.source_rank_estimate}};
  run.primary = fixed6(unit == "bits" ? e.entropy_bits : e.entropy_nats);
  return run;
}

Run run_density(const InputOpts& in, double beta, const Common& c) {
  const CovarianceMatrix cov = load_covariance(in.input, in.is_covariance, in.header);
  const DensityOperator rho = density_operator(cov, beta);
  Run run;
  run.seed = c.seed;
  run.config = {{"input", in.input}, {"input_is_covariance", in.is_covariance}, {"beta", beta}};
  for (Eigen::Index i = 0; i < rho.dim(); ++i) {
    TrialRecord r = single_record("density", c.seed);
    r.trial = i;
    r.params = {{"beta", format_double(beta)}, {"index", std::to_string(i)}};
    r.metrics = {{"source_eigenvalue", rho.source_spectrum()(i)},
                 {"density_eigenvalue", rho.density_eigenvalues()(i)},
                 {"log_density_eigenvalue", rho.log_density_eigenvalues()(i)}};
    run.records.push_back(std::move(r));
  }
  const Matrix dense = rho.dense();
  run.summary = {{"beta", beta},
                 {"dim", rho.dim()},
                 {"partition_function", rho.partition_function()},
                 {"log_partition_function", rho.log_partition_function()},
                 {"trace", dense.trace()},
                 {"mean_energy", rho.mean_energy()},
                 {"density", matrix_to_json(dense)}};
  std::ostringstream out;
  for (Eigen::Index i = 0; i < dense.rows(); ++i) {
    for (Eigen::Index j = 0; j < dense.cols(); ++j) out << (j ? "," : "") << format_double(dense(i, j));
    if (i + 1 < dense.rows()) out << '\n';
  }
  run.primary = out.str();
  return run;
}

Run run_fit_beta(const InputOpts& in, std::vector<double> spectrum, std::vector<double> target, const Common& c) {
  Vector lambda;
  if (!in.input.empty()) {
    if (!spectrum.empty()) throw UsageError("give either --spectrum or --input, not both");
    lambda = eigh(load_covariance(in.input, in.is_covariance, in.header).matrix()).eigenvalues();
  } else {
    if (spectrum.empty()) throw UsageError("--spectrum or --input is required");
    lambda = Eigen::Map<const Vector>(spectrum.data(), static_cast<Eigen::Index>(spectrum.size()));
  }
  Vector p = Eigen::Map<const Vector>(target.data(), static_cast<Eigen::Index>(target.size()));
  // Accept targets rounded to a few digits; anything further off is rejected.
  if (p.allFinite() && std::abs(p.sum() - 1.0) <= 1e-3 && (p.array() >= 0.0).all()) p /= p.sum();
  const BetaFitResult fit = fit_beta(lambda, p);
  Run run;
  run.seed = c.seed;
  run.config = {{"spectrum", std::vector<double>(lambda.data(), lambda.data() + lambda.size())},
                {"target", target},
                {"input", in.input}};
  TrialRecord r = single_record("fit_beta", c.seed);
  r.params = {{"dim", std::to_string(lambda.size())}};
  r.metrics = {{"beta_star", fit.beta_star},
               {"objective", fit.objective_value},
               {"gradient", fit.gradient_at_solution},
               {"curvature", fit.curvature_at_solution},
               {"iterations", static_cast<double>(fit.iterations)},
               {"kl", kl_divergence(p, gibbs_distribution(lambda, fit.beta_star))},
               {"degenerate", fit.degenerate ? 1.0 : 0.0}};
  run.records.push_back(r);
  run.summary = {{"beta_star", fit.beta_star},
                 {"converged", fit.converged},
                 {"degenerate", fit.degenerate},
                 {"gradient", fit.gradient_at_solution},
                 {"curvature", fit.curvature_at_solution},
                 {"iterations", fit.iterations}};
  run.primary = fixed6(fit.beta_star);
  return run;
}

// ---- lab experiments -------------------------------------------------------

struct LabOpts {
  std::vector<double> betas;
  std::vector<double> noise_levels;
  std::vector<Eigen::Index> sample_sizes;
  int trials = 0;
  Eigen::Index dim = 0;
  Eigen::Index n_samples = 0;
  double beta = 0.0;
  Eigen::Index window = 0;
  CLI::Option* betas_opt = nullptr;
  CLI::Option* noise_opt = nullptr;
  CLI::Option* sizes_opt = nullptr;
  CLI::Option* trials_opt = nullptr;
  CLI::Option* dim_opt = nullptr;
  CLI::Option* n_opt = nullptr;
  CLI::Option* beta_opt = nullptr;
  CLI::Option* window_opt = nullptr;
};

void add_lab(CLI::App* sub, LabOpts& o, Experiment e) {
  if (e == Experiment::discrimination) {
    o.beta_opt = sub->add_option("--beta", o.beta, "Inverse temperature for the CVNE score");
    o.window_opt = sub->add_option("--window", o.window, "Samples per window")->check(CLI::PositiveNumber);
    o.trials_opt = sub->add_option("--trials", o.trials, "Windows per regime")->check(CLI::PositiveNumber);
    return;
  }
  o.betas_opt = sub->add_option("--betas", o.betas, "Comma-separated inverse temperatures")->delimiter(',');
  o.trials_opt = sub->add_option("--trials", o.trials, "Number of seeded trials")->check(CLI::PositiveNumber);
  o.dim_opt = sub->add_option("--dim", o.dim, "Matrix dimension")->check(CLI::PositiveNumber);
  if (e == Experiment::stability || e == Experiment::regression) {
    o.noise_opt = sub->add_option("--noise-levels", o.noise_levels, "Comma-separated noise levels")->delimiter(',');
  }
  if (e == Experiment::surrogate || e == Experiment::regression) {
    o.sizes_opt = sub->add_option("--sample-sizes", o.sample_sizes, "Comma-separated sample sizes")->delimiter(',');
  }
  if (e == Experiment::stability || e == Experiment::entropy_curve) {
    o.n_opt = sub->add_option("--n-samples", o.n_samples, "Samples per covariance")->check(CLI::PositiveNumber);
  }
}

Run run_lab(Experiment e, const LabOpts& o, const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? default_experiment_config(e)
                                          : experiment_config_from_json(load_json_file(c.config), e);
  auto given = [](const CLI::Option* opt) { return opt && opt->count() > 0; };
  if (given(c.seed_opt)) cfg.seed = c.seed;
  if (given(c.threads_opt)) cfg.threads = c.threads;
  if (given(o.betas_opt)) cfg.betas = o.betas;
  if (given(o.noise_opt)) cfg.noise_levels = o.noise_levels;
  if (given(o.sizes_opt)) cfg.sample_sizes = o.sample_sizes;
  if (given(o.trials_opt)) cfg.trials = o.trials;
  if (given(o.dim_opt)) cfg.dim = o.dim;
  if (given(o.n_opt)) cfg.n_samples = o.n_samples;
  if (given(o.beta_opt)) cfg.betas = {o.beta};
  if (given(o.window_opt)) cfg.window = o.window;
  cfg.validate();

  ExperimentResult res = run_experiment(cfg);
  Run run;
  run.seed = cfg.seed;
  run.config = config_to_json(cfg);
  run.config["threads"] = cfg.threads;
  run.records = std::move(res.records);
  run.summary = std::move(res.summary);
  run.primary = run.summary["checks"].dump();
  return run;
}

// ---- train / predict -------------------------------------------------------

std::vector<int> read_labels(const std::string& path, bool header, Eigen::Index expected) {
  const DataMatrix d = read_data_csv(path, header);
  if (d.dim() != 1) throw Error(ErrorCode::shape, path + ": labels must be a single column");
  if (d.n_samples() != expected) {
    throw Error(ErrorCode::dimension_mismatch, path + ": " + std::to_string(d.n_samples()) + " labels for " +
                                                   std::to_string(expected) + " samples");
  }
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < d.n_samples(); ++i) {
    const double v = d.values()(i, 0);
    if (v < 0.0 || v != std::floor(v) || v > 1e6) {
      throw Error(ErrorCode::parse, path + ": label on line " + std::to_string(i + 1) + " is not a class index");
    }
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

// Rolling windows over a panel (rows = time, columns = nodes): sample k uses
// rows k - T .. k - 1 as its signal and row k as its target. k = n gives the
// forecast window, which has no target.
Dataset panel_windows(const Matrix& x, Eigen::Index horizon, bool include_forecast) {
  Dataset out;
  const Eigen::Index n = x.rows();
  for (Eigen::Index k = horizon; k <= n; ++k) {
    if (k == n && !include_forecast) break;
    Sample s;
    s.signal = x.middleRows(k - horizon, horizon).transpose();
    if (k < n) s.target = x.row(k).transpose();
    out.push_back(std::move(s));
  }
  return out;
}

// Each row holds one sample, node-major: value (i, t) at column i * T + t.
Dataset row_samples(const Matrix& x, Eigen::Index horizon) {
  if (x.cols() % horizon != 0) {
    throw Error(ErrorCode::shape, "row length " + std::to_string(x.cols()) + " is not a multiple of --horizon " +
                                      std::to_string(horizon));
  }
  const Eigen::Index m = x.cols() / horizon;
  Dataset out;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Sample s;
    s.signal.resize(m, horizon);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index t = 0; t < horizon; ++t) s.signal(i, t) = x(r, i * horizon + t);
    out.push_back(std::move(s));
  }
  return out;
}

struct Prepared {
  Dataset train, val;
  Matrix covariance_rows;  ///< observations the fixed covariance is computed from
  Eigen::Index output_dim = 0;
};

Prepared prepare_regression(const Matrix& x, Eigen::Index horizon, double val_fraction) {
  Dataset all = panel_windows(x, horizon, false);
  if (all.size() < 2) {
    throw Error(ErrorCode::insufficient_data, "need at least horizon + 2 rows, got " + std::to_string(x.rows()));
  }
  auto n_train = static_cast<std::size_t>(std::floor((1.0 - val_fraction) * static_cast<double>(all.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, all.size());
  Prepared p;
  p.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  p.val.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  // Only rows seen by the training windows (signals and targets).
  p.covariance_rows = x.topRows(static_cast<Eigen::Index>(n_train) + horizon);
  p.output_dim = x.cols();
  return p;
}

Prepared prepare_classification(const Matrix& x, const std::vector<int>& labels, Eigen::Index horizon,
                                double val_fraction, std::uint64_t seed) {
  Dataset all = row_samples(x, horizon);
  for (std::size_t i = 0; i < all.size(); ++i) all[i].label = labels[i];
  Rng rng = make_rng(seed, 0x73706c6974ULL);
  std::shuffle(all.begin(), all.end(), rng);
  auto n_train = static_cast<std::size_t>(std::floor((1.0 - val_fraction) * static_cast<double>(all.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, all.size());
  Prepared p;
  p.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  p.val.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  const Eigen::Index m = all.front().signal.rows();
  p.covariance_rows.resize(static_cast<Eigen::Index>(n_train) * horizon, m);
  for (std::size_t s = 0; s < n_train; ++s) {
    p.covariance_rows.middleRows(static_cast<Eigen::Index>(s) * horizon, horizon) = p.train[s].signal.transpose();
  }
  p.output_dim = *std::max_element(labels.begin(), labels.end()) + 1;
  if (p.output_dim < 2) throw Error(ErrorCode::insufficient_data, "classification needs at least two classes");
  return p;
}

struct TrainOpts {
  std::string input;
  std::string labels;
  bool header = false;
  Eigen::Index horizon = 1;
  std::vector<double> betas;
  CLI::Option* horizon_opt = nullptr;
  CLI::Option* betas_opt = nullptr;
};

Run run_train(const TrainOpts& o, const Common& c) {
  const Task task = o.labels.empty() ? Task::regression : Task::classification;
  TrainSettings s = train_settings_from_json(c.config.empty() ? json::object() : load_json_file(c.config), task);
  if (c.seed_opt->count()) s.train.seed = c.seed;
  if (o.horizon_opt->count()) s.horizon = o.horizon;
  if (o.betas_opt->count()) s.model.betas = o.betas;
  if (s.model.betas.empty()) throw UsageError("--betas must not be empty");

  const DataMatrix data = read_data_csv(o.input, o.header);
  Prepared p = task == Task::regression
                   ? prepare_regression(data.values(), s.horizon, s.val_fraction)
                   : prepare_classification(data.values(), read_labels(o.labels, o.header, data.n_samples()),
                                            s.horizon, s.val_fraction, s.train.seed);
  const CovarianceMatrix cov = sample_covariance(DataMatrix(p.covariance_rows));
  const SpectralDecomposition basis = eigh(cov.matrix());
  const Eigen::Index m = cov.dim();
  const ModelParams init = init_model(s.model, m, s.horizon, p.output_dim, s.train.seed);
  const TrainResult result = train(init, basis, p.train, p.val, s.train);

  Run run;
  run.seed = s.train.seed;
  run.config = train_settings_to_json(s);
  run.config["input"] = o.input;
  run.config["labels"] = o.labels;
  for (std::size_t e = 0; e < result.train_loss.size(); ++e) {
    TrialRecord r = single_record("train", s.train.seed);
    r.trial = static_cast<std::int64_t>(e + 1);
    r.params = {{"epoch", std::to_string(e + 1)}};
    r.metrics = {{"train_loss", result.train_loss[e]}, {"val_loss", result.val_loss[e]}};
    run.records.push_back(std::move(r));
  }
  json betas = json::array();
  for (const auto& layer : result.best.layers) betas.push_back(layer.betas);
  run.summary = {{"task", to_string(task)},
                 {"n_train", p.train.size()},
                 {"n_val", p.val.size()},
                 {"dim", m},
                 {"horizon", s.horizon},
                 {"epochs_completed", result.train_loss.size()},
                 {"best_epoch", result.best_epoch},
                 {"best_val_loss", result.val_loss.empty() ? json(nullptr) : json(result.val_loss[static_cast<std::size_t>(std::max(result.best_epoch, 1) - 1)])},
                 {"diverged", result.diverged},
                 {"diagnostic", result.diagnostic},
                 {"betas", betas}};
  if (task == Task::classification) {
    run.summary["train_accuracy"] = evaluate_accuracy(result.best, basis, p.train);
    if (!p.val.empty()) run.summary["val_accuracy"] = evaluate_accuracy(result.best, basis, p.val);
  }
  Checkpoint ck;
  ck.model = result.best;
  ck.covariance = cov.matrix();
  ck.metadata = {{"horizon", s.horizon},
                 {"layout", task == Task::regression ? "panel" : "rows"},
                 {"best_epoch", result.best_epoch}};
  run.model = std::move(ck);
  if (result.diverged) {
    run.exit_code = kExitRuntime;
    run.primary.clear();
  } else {
    run.primary = run.summary["best_val_loss"].is_null() ? "" : fixed6(run.summary["best_val_loss"].get<double>());
  }
  return run;
}

struct PredictOpts {
  std::string model;
  std::string input;
  std::string labels;
  bool header = false;
  Eigen::Index horizon = 0;
  CLI::Option* horizon_opt = nullptr;
};

Run run_predict(const PredictOpts& o, const Common& c) {
  const Checkpoint ck = load_checkpoint(o.model);
  const ModelParams& m = ck.model;
  if (o.horizon_opt->count() && o.horizon != m.time_steps) {
    throw Error(ErrorCode::dimension_mismatch, "--horizon " + std::to_string(o.horizon) +
                                                   " differs from the model's " + std::to_string(m.time_steps));
  }
  const SpectralDecomposition basis = eigh(ck.covariance);
  const DataMatrix data = read_data_csv(o.input, o.header);
  Run run;
  run.seed = c.seed;
  run.config = {{"model", o.model}, {"input", o.input}, {"labels", o.labels}};

  if (m.task == Task::regression) {
    if (!o.labels.empty()) throw UsageError("--labels applies to classification models only");
    if (data.dim() != m.dim) {
      throw Error(ErrorCode::dimension_mismatch, "input has " + std::to_string(data.dim()) +
                                                     " columns, model expects " + std::to_string(m.dim));
    }
    const Dataset windows = panel_windows(data.values(), m.time_steps, true);
    if (windows.empty()) throw Error(ErrorCode::insufficient_data, "input is shorter than the model horizon");
    double abs_sum = 0.0;
    Eigen::Index counted = 0;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const Vector pred = model_forward(m, basis, windows[k].signal);
      TrialRecord r = single_record("predict", c.seed);
      r.trial = static_cast<std::int64_t>(k) + m.time_steps;
      r.params = {{"row", std::to_string(r.trial)}};
      for (Eigen::Index j = 0; j < pred.size(); ++j) r.metrics.emplace_back("prediction_" + std::to_string(j), pred(j));
      if (windows[k].target.size()) {
        const double err = (pred - windows[k].target).cwiseAbs().mean();
        r.metrics.emplace_back("abs_error", err);
        abs_sum += (pred - windows[k].target).cwiseAbs().sum();
        counted += pred.size();
      }
      run.records.push_back(std::move(r));
    }
    const double mae = counted ? abs_sum / static_cast<double>(counted) : 0.0;
    run.summary = {{"task", "regression"}, {"predictions", windows.size()}, {"mae", counted ? json(mae) : json(nullptr)}};
    run.primary = counted ? fixed6(mae) : std::to_string(windows.size());
    return run;
  }

  Dataset samples = row_samples(data.values(), m.time_steps);
  if (samples.front().signal.rows() != m.dim) {
    throw Error(ErrorCode::dimension_mismatch, "rows hold " + std::to_string(samples.front().signal.rows()) +
                                                   " nodes, model expects " + std::to_string(m.dim));
  }
  std::vector<int> labels;
  if (!o.labels.empty()) labels = read_labels(o.labels, o.header, data.n_samples());
  std::size_t correct = 0;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const Vector logits = model_forward(m, basis, samples[k].signal);
    Eigen::Index cls = 0;
    logits.maxCoeff(&cls);
    TrialRecord r = single_record("predict", c.seed);
    r.trial = static_cast<std::int64_t>(k);
    r.params = {{"row", std::to_string(k)}};
    r.metrics.emplace_back("predicted_class", static_cast<double>(cls));
    if (!labels.empty()) {
      r.metrics.emplace_back("label", labels[k]);
      correct += cls == labels[k];
    }
    run.records.push_back(std::move(r));
  }
  run.summary = {{"task", "classification"}, {"predictions", samples.size()}};
  if (!labels.empty()) {
    const double acc = static_cast<double>(correct) / static_cast<double>(samples.size());
    run.summary["accuracy"] = acc;
    run.primary = fixed6(acc);
  } else {
    run.primary = std::to_string(samples.size());
  }
  return run;
}

}  // namespace

int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Covariance density operators, filters, entropy and lab experiments", "cdnn"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(CDNN_VERSION));

  Common common;
  InputOpts input;
  double beta = 1.0;
  std::string unit = "nats";
  std::vector<double> spectrum, target;

  auto* entropy = app.add_subcommand("entropy", "Multiscale von Neumann entropy of a covariance");
  add_input(entropy, input, true);
  entropy->add_option("--beta", beta, "Inverse temperature")->capture_default_str();
  entropy->add_option("--unit", unit, "nats or bits")->check(CLI::IsMember({"nats", "bits"}))->capture_default_str();
  add_common(entropy, common);

  auto* fit = app.add_subcommand("fit-beta", "Fit beta so the Gibbs mean energy matches a target distribution");
  add_input(fit, input, false);
  fit->add_option("--spectrum", spectrum, "Comma-separated eigenvalues")->delimiter(',');
  fit->add_option("--target", target, "Comma-separated target probabilities")->delimiter(',')->required();
  add_common(fit, common);

  auto* density = app.add_subcommand("density", "Density operator exp(-beta C) / Z");
  add_input(density, input, true);
  density->add_option("--beta", beta, "Inverse temperature")->capture_default_str();
  add_common(density, common);

  const std::vector<std::pair<std::string, Experiment>> labs = {
      {"stability", Experiment::stability},          {"lipschitz", Experiment::lipschitz},
      {"surrogate", Experiment::surrogate},          {"regression", Experiment::regression},
      {"entropy-curve", Experiment::entropy_curve},  {"discriminate", Experiment::discrimination}};
  std::vector<LabOpts> lab_opts(labs.size());
  std::vector<CLI::App*> lab_apps;
  for (std::size_t i = 0; i < labs.size(); ++i) {
    auto* sub = app.add_subcommand(labs[i].first, "Run the " + std::string(to_string(labs[i].second)) + " experiment");
    add_lab(sub, lab_opts[i], labs[i].second);
    add_common(sub, common);
    lab_apps.push_back(sub);
  }

  TrainOpts train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train a CDNN on a data panel or labelled samples");
  train_cmd->add_option("--input", train_opts.input, "CSV data")->required();
  train_cmd->add_option("--labels", train_opts.labels, "CSV of class indices, one per input row (classification)");
  train_cmd->add_flag("--header", train_opts.header, "Skip the first CSV line");
  train_opts.horizon_opt = train_cmd->add_option("--horizon", train_opts.horizon, "Time points per sample")
                               ->check(CLI::PositiveNumber);
  train_opts.betas_opt = train_cmd->add_option("--betas", train_opts.betas, "Comma-separated scale betas")->delimiter(',');
  add_common(train_cmd, common);

  PredictOpts predict_opts;
  auto* predict = app.add_subcommand("predict", "Apply a trained model.json to new data");
  predict->add_option("--model", predict_opts.model, "model.json written by train")->required();
  predict->add_option("--input", predict_opts.input, "CSV data")->required();
  predict->add_option("--labels", predict_opts.labels, "CSV of class indices for accuracy");
  predict->add_flag("--header", predict_opts.header, "Skip the first CSV line");
  predict_opts.horizon_opt = predict->add_option("--horizon", predict_opts.horizon, "Must match the model")
                                 ->check(CLI::PositiveNumber);
  add_common(predict, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    const CLI::App* failed = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << failed->help();
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  std::vector<std::string> args(argv + 1, argv + argc);
  Run run;
  run.seed = common.seed;
  const fs::path dir = common.output_dir;
  try {
    if (sub == entropy) {
      run = run_entropy(input, beta, unit, common);
    } else if (sub == fit) {
      run = run_fit_beta(input, spectrum, target, common);
    } else if (sub == density) {
      run = run_density(input, beta, common);
    } else if (sub == train_cmd) {
      run = run_train(train_opts, common);
    } else if (sub == predict) {
      run = run_predict(predict_opts, common);
    } else {
      for (std::size_t i = 0; i < lab_apps.size(); ++i) {
        if (sub == lab_apps[i]) run = run_lab(labs[i].second, lab_opts[i], common);
      }
    }
    fs::create_directories(dir);
    write_outputs(dir, run);
    write_manifest(dir, name, args, run, run.exit_code == kExitOk ? "" : run.summary.value("diagnostic", "failed"));
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << sub->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    const auto* ce = dynamic_cast<const Error*>(&e);
    const bool usage = ce && ce->code() == ErrorCode::invalid_config;
    err << "error: " << (ce ? std::string(to_string(ce->code())) + ": " : std::string()) << e.what() << "\n";
    try {
      fs::create_directories(dir);
      write_manifest(dir, name, args, run, e.what());
    } catch (const std::exception&) {
      // the original failure is the one worth reporting
    }
    return usage ? kExitUsage : kExitRuntime;
  }
  if (run.exit_code != kExitOk) {
    err << "error: " << run.summary.value("diagnostic", "failed") << "\n";
    return run.exit_code;
  }
  if (!run.primary.empty()) out << run.primary << "\n";
  return kExitOk;
}

}  // namespace cdnn::cli
