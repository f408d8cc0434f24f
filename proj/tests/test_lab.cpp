#include <doctest.h>

#include <cmath>
#include <sstream>

#include "cdnn/error.hpp"
#include "cdnn/lab.hpp"
#include "support.hpp"

using namespace cdnn;

namespace {

ExperimentConfig small(Experiment e) {
  auto cfg = default_experiment_config(e);
  cfg.trials = std::min(cfg.trials, 10);
  cfg.seed = 5;
  return cfg;
}

double mean_of(const std::vector<TrialRecord>& rs, std::string_view metric, auto&& keep) {
  double total = 0.0;
  int n = 0;
  for (const auto& r : rs) {
    if (!keep(r)) continue;
    total += r.metric(metric);
    ++n;
  }
  REQUIRE(n > 0);
  return total / n;
}

}  // namespace

TEST_CASE("experiment names") {
  CHECK(parse_experiment("entropy-curve") == Experiment::entropy_curve);
  CHECK(parse_experiment("entropy_curve") == Experiment::entropy_curve);
  CHECK(parse_experiment("discriminate") == Experiment::discrimination);
  CHECK(to_string(Experiment::betafit_demo) == "betafit_demo");
  CHECK_THROWS_AS(parse_experiment("nope"), Error);
}

TEST_CASE("config validation") {
  for (auto e : {Experiment::stability, Experiment::lipschitz, Experiment::surrogate, Experiment::regression,
                 Experiment::entropy_curve, Experiment::discrimination, Experiment::betafit_demo}) {
    CHECK_NOTHROW(default_experiment_config(e).validate());
  }
  auto cfg = default_experiment_config(Experiment::stability);
  cfg.trials = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = default_experiment_config(Experiment::stability);
  cfg.noise_levels = {-1.0};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = default_experiment_config(Experiment::regression);
  cfg.informative = cfg.dim + 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = default_experiment_config(Experiment::discrimination);
  cfg.betas = {1.0, 2.0};
  try {
    cfg.validate();
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_config);
  }
}

TEST_CASE("lipschitz_ratio") {
  const FilterSpec f{{0.5, 1.0, -2.0}, 1.5};
  CHECK_FALSE(lipschitz_ratio(f, 2.0, 2.0, 3.0).has_value());
  CHECK(*lipschitz_ratio({{4.0}, 1.5}, 1.0, 2.0, 3.0) == 0.0);
  CHECK(*lipschitz_ratio({{0.0, 1.0}, 0.0}, 1.0, 2.0, 3.0) == 0.0);
  const auto r = lipschitz_ratio(f, 0.5, 2.0, 4.0);
  REQUIRE(r.has_value());
  CHECK(*r >= 0.0);
  CHECK(*r <= 1.0);
}

TEST_CASE("surrogate_alignment") {
  Rng rng = make_rng(1);
  const Matrix lap = erdos_renyi_laplacian(6, 0.6, rng);
  const auto d = eigh(lap);
  const std::vector<double> g{1.0, 0.5};
  // the population covariance aligns perfectly (up to ties)
  const Vector pop = (1.0 + 0.5 * d.eigenvalues().array()).square();
  const auto exact = surrogate_alignment(d.compose(pop), lap, g);
  REQUIRE(exact.mean_alignment.has_value());
  CHECK(*exact.mean_alignment == doctest::Approx(1.0).epsilon(1e-9));

  // decreasing g reverses the matching
  const std::vector<double> dec{3.0, -0.1};
  const Vector pop_dec = (3.0 - 0.1 * d.eigenvalues().array()).square();
  CHECK(*surrogate_alignment(d.compose(pop_dec), lap, dec).mean_alignment == doctest::Approx(1.0).epsilon(1e-9));

  const std::vector<double> k0{1.0};
  const auto flat = surrogate_alignment(Matrix::Identity(6, 6), lap, k0);
  CHECK(flat.degenerate);
  CHECK_FALSE(flat.mean_alignment.has_value());
}

TEST_CASE("stability") {
  auto cfg = small(Experiment::stability);
  cfg.dim = 6;
  cfg.n_samples = 40;
  cfg.noise_levels = {0.0, 0.1};
  cfg.betas = {-1.0, 0.0, 1.0};
  const auto res = run_stability(cfg);
  CHECK(res.records.size() == 10 * 2 * 4);
  for (const auto& r : res.records) {
    if (r.param("noise") == "0") {
      CHECK(r.metric("delta_c_norm") == 0.0);
      CHECK(r.metric("delta_rho_norm") == 0.0);
    }
    if (r.param("beta") == "0") CHECK(r.metric("delta_rho_norm") == doctest::Approx(0.0).epsilon(1e-15));
    if (r.param("method") == "density" && r.param("beta") == "1") CHECK(r.metric("bound_holds") == 1.0);
  }
  CHECK(res.summary["experiment"] == "stability");
  CHECK(res.summary["checks"].contains("monotone_in_abs_beta"));
}

TEST_CASE("stability trends at default scale") {
  auto cfg = default_experiment_config(Experiment::stability);
  cfg.seed = 1;
  const auto res = run_stability(cfg);
  const auto& checks = res.summary["checks"];
  CHECK(checks["monotone_in_abs_beta"]["passed"] == true);
  CHECK(checks["negative_dominates_positive"]["passed"] == true);
  CHECK(checks["bound_dominates_positive_beta"]["passed"] == true);
}

TEST_CASE("lipschitz experiment") {
  auto cfg = small(Experiment::lipschitz);
  const auto res = run_lipschitz(cfg);
  CHECK(res.records.size() == 10);
  for (const auto& r : res.records) CHECK(r.metric("max_ratio") <= 1.0 + 1e-9);
  CHECK(res.summary["checks"]["max_ratio_at_most_one"]["passed"] == true);
}

TEST_CASE("surrogate experiment") {
  auto cfg = small(Experiment::surrogate);
  cfg.sample_sizes = {100, 10000};
  const auto res = run_surrogate(cfg);
  CHECK(res.records.size() == 20);
  const double lo = mean_of(res.records, "alignment", [](const TrialRecord& r) { return r.param("n") == "100"; });
  const double hi = mean_of(res.records, "alignment", [](const TrialRecord& r) { return r.param("n") == "10000"; });
  CHECK(hi >= lo);
  CHECK(hi >= 0.9);
  CHECK(res.summary["checks"]["largest_n_beats_smallest"]["passed"] == true);

  cfg.sample_sizes = {100000};
  cfg.trials = 3;
  const auto big = run_surrogate(cfg);
  CHECK(mean_of(big.records, "alignment", [](const TrialRecord&) { return true; }) >= 0.95);

  cfg.filter_coeffs = {1.0};
  cfg.sample_sizes = {50};
  const auto deg = run_surrogate(cfg);
  for (const auto& r : deg.records) {
    CHECK(r.metric("degenerate") == 1.0);
    CHECK_FALSE(r.has_metric("alignment"));
  }
}

TEST_CASE("regression experiment") {
  auto cfg = small(Experiment::regression);
  cfg.sample_sizes = {100, 1000};
  cfg.noise_levels = {0.0};
  cfg.betas = {1.0};
  const auto res = run_regression(cfg);
  CHECK(res.records.size() == 10 * 2 * 2);
  for (const auto& r : res.records) CHECK(std::isfinite(r.metric("mae")));

  cfg.informative = 0;
  const auto zero = run_regression(cfg);
  for (const auto& r : zero.records) {
    CHECK(r.metric("mae") == doctest::Approx(r.metric("baseline_mae")).epsilon(1e-9));
  }
}

TEST_CASE("entropy curve") {
  auto cfg = small(Experiment::entropy_curve);
  const auto res = run_entropy_curve(cfg);
  const double ln_m = std::log(static_cast<double>(cfg.dim));
  for (const auto& r : res.records) {
    CHECK(r.metric("entropy_nats") >= 0.0);
    CHECK(r.metric("entropy_nats") <= ln_m + 1e-10);
    if (r.param("beta") == "0") CHECK(r.metric("entropy_nats") == doctest::Approx(ln_m).epsilon(1e-14));
  }
  CHECK(res.summary["checks"]["nonincreasing_for_nonnegative_beta"]["passed"] == true);
  CHECK(res.summary["checks"]["within_zero_and_ln_m"]["passed"] == true);
}

TEST_CASE("betafit demo and discrimination") {
  const auto fit = run_betafit_demo(small(Experiment::betafit_demo));
  CHECK(fit.summary["checks"]["stationary"]["passed"] == true);
  CHECK(fit.summary["checks"]["multistart_agreement"]["passed"] == true);

  auto cfg = small(Experiment::discrimination);
  cfg.trials = 50;
  const auto disc = run_discrimination(cfg);
  CHECK(disc.records.size() == 100);
  CHECK(disc.summary["checks"].contains("auc_vne"));
}

TEST_CASE("reproducible and thread-independent") {
  for (auto e : {Experiment::stability, Experiment::lipschitz, Experiment::regression, Experiment::entropy_curve}) {
    auto cfg = small(e);
    cfg.trials = 4;
    if (e == Experiment::regression) cfg.sample_sizes = {100};
    cfg.threads = 1;
    const auto a = run_experiment(cfg);
    cfg.threads = 3;
    const auto b = run_experiment(cfg);
    CHECK(a.records == b.records);
    CHECK(a.summary == b.summary);
    cfg.seed += 1;
    CHECK_FALSE(run_experiment(cfg).records == a.records);
  }
}

TEST_CASE("format_double") {
  CHECK(format_double(100.0) == "100");
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.5e-300) == "-2.5e-300");
  CHECK(format_double(NAN) == "nan");
  CHECK(format_double(-INFINITY) == "-inf");
  Rng rng = make_rng(2);
  std::normal_distribution<double> normal(0.0, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = normal(rng);
    CHECK(std::stod(format_double(v)) == v);
  }
}

TEST_CASE("records round-trip through CSV and JSON") {
  auto cfg = small(Experiment::stability);
  cfg.dim = 4;
  cfg.n_samples = 20;
  cfg.trials = 3;
  const auto res = run_stability(cfg);
  std::stringstream csv;
  write_records_csv(csv, res.records);
  CHECK(read_records_csv(csv) == res.records);
  CHECK(records_from_json(records_to_json(res.records)) == res.records);

  TrialRecord odd;
  odd.experiment = "x";
  odd.params = {{"label", "a,\"b\""}};
  odd.metrics = {{"v", 1.0 / 3.0}};
  TrialRecord other;
  other.experiment = "x";
  other.trial = 1;
  other.metrics = {{"w", -0.0}};
  const std::vector<TrialRecord> mixed{odd, other};
  std::stringstream s2;
  write_records_csv(s2, mixed);
  CHECK(s2.str().substr(0, s2.str().find('\n')) == "experiment,trial,seed,param.label,metric.v,metric.w");
  const auto back = read_records_csv(s2);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == odd);
  CHECK(back[1].metrics == other.metrics);

  std::istringstream bad("experiment,trial\nx,1\n");
  CHECK_THROWS_AS(read_records_csv(bad), Error);
}

TEST_CASE("summarize_records") {
  std::vector<TrialRecord> rs;
  for (int i = 0; i < 4; ++i) {
    TrialRecord r;
    r.experiment = "e";
    r.trial = i;
    r.params = {{"g", i % 2 ? "b" : "a"}};
    r.metrics = {{"m", static_cast<double>(i)}};
    rs.push_back(r);
  }
  const auto s = summarize_records(rs, {"g"});
  REQUIRE(s.is_array());
  REQUIRE(s.size() == 2);
  CHECK(s[0]["params"]["g"] == "a");
  CHECK(s[0]["metrics"]["m"]["mean"] == doctest::Approx(1.0));
  CHECK(s[0]["metrics"]["m"]["count"] == 2);
  CHECK(s[1]["metrics"]["m"]["max"] == doctest::Approx(3.0));
  CHECK(s[1]["metrics"]["m"]["min"] == doctest::Approx(1.0));
  CHECK(s[1]["metrics"]["m"]["std"] == doctest::Approx(std::sqrt(2.0)));
}
