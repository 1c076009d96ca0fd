#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "bloomlab/experiments.hpp"
#include "bloomlab/kernels.hpp"
#include "bloomlab/paraproducts.hpp"
#include "support.hpp"

using namespace bloomlab;
using testsupport::haar2;

namespace {

ExperimentConfig small(int depth, int trials) {
  ExperimentConfig c;
  c.depth = depth;
  c.trials = trials;
  c.seed = 11;
  return c;
}

// full 4^L matrix of an axis operator given by its N x N matrix
Eigen::MatrixXd lift(const kernels::DenseMatrix& a, int axis, int L) {
  const int N = 1 << L;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N * N, N * N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      for (int t = 0; t < N; ++t) {
        if (axis == 1)
          m(i * N + j, t * N + j) = a(i, t);
        else
          m(i * N + j, i * N + t) = a(j, t);
      }
  return m;
}

double top_sv(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues()(0);
}

}  // namespace

TEST_CASE("config round trip and validation") {
  auto c = small(3, 4);
  c.weights.mu.x1 = {AxisWeightSpec::Kind::power, 1.0, 0.25, 0.0, 0};
  c.operators.u1 = "shift";
  c.b.kind = "little";
  const auto j = to_json(c);
  CHECK(to_json(config_from_json(j)) == j);
  CHECK(config_from_json(nlohmann::json::object()).depth == 4);
  CHECK_THROWS_AS(config_from_json({{"experiment", {{"depht", 3}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"experiment", {{"depth", "three"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json({{"weights", {{"mu", {{"x1", {{"kind", "bumpy"}}}}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(config_from_json({{"weights", {{"mu", {{"x3", nlohmann::json::object()}}}}}}),
                  ConfigError);
  CHECK_THROWS_AS(
      config_from_json({{"weights", {{"mu", {{"x1", {{"kind", "power"}, {"alpha", 1}}}}}}}}),
      ConfigError);
  auto bad = c;
  bad.mode = "exact";
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  bad.depth = 7;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  bad.p = 1.0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  bad = c;
  bad.operators.u2 = "wavelet";
  CHECK_THROWS_AS(validate(bad), ConfigError);
  CHECK_THROWS_AS(run_experiment("nonsense", c), ConfigError);
}

TEST_CASE("identity suite") {
  for (int L : {1, 2, 4}) {
    const auto r = identity_suite(small(L, L == 4 ? 6 : 10));
    CHECK(r.passed());
    CHECK(r.rows.size() == 7u * (r.config.trials + 1));
    for (const auto& row : r.rows) CHECK(row.value <= 1e-10);
    CHECK(r.rows.back().extra["adversarial"].get<bool>());
  }
}

TEST_CASE("reports are reproducible and independent of scheduling") {
  const auto c = small(3, 6);
  const auto a = to_json(bloom_ratio(c)).dump();
  kernels::set_parallel(false);
  const auto s = to_json(bloom_ratio(c)).dump();
  kernels::set_parallel(true);
  CHECK(a == s);
  CHECK(to_json(bloom_ratio(c)).dump() == a);
  // a row depends on (seed, trial id) only
  const auto more = bloom_ratio(small(3, 9));
  const auto fewer = bloom_ratio(c);
  for (std::size_t i = 0; i < fewer.rows.size(); ++i)
    CHECK(more.rows[i].value == fewer.rows[i].value);
  CHECK(to_csv(more).substr(0, csv_header().size()) == csv_header());
  CHECK(csv_header() ==
        "trial_id,L,p,seed,mu_ap,lambda_ap,nu_a2,b_bmoprod,b_bmolittle,k1,k2,v1,v2,value,value_kind\n");
}

TEST_CASE("bloom ratio rows") {
  auto c = small(3, 12);
  const auto r = bloom_ratio(c);
  CHECK(r.passed());
  CHECK(r.rows.size() + r.excluded.size() == 12u);
  for (const auto& row : r.rows) {
    CHECK(std::isfinite(row.value));
    CHECK(*row.mu_ap <= 16.0);
    CHECK(*row.lambda_ap <= 16.0);
    CHECK(row.extra["b_scaling_residual"].get<double>() <= 1e-10);
    CHECK(std::max(row.k1, row.k2) <= 2);
  }
  CHECK(r.summary["table"].size() >= 1);
  // zero symbol: every trial excluded, none silently dropped
  c.b.scale = 0.0;
  const auto z = bloom_ratio(c);
  CHECK(z.rows.empty());
  CHECK(z.excluded.size() == 12u);
}

TEST_CASE("bloom ratio against a dense oracle") {
  const int L = 2;
  const ShiftKey k1{{0, 0}, {1, 0}, {1, 1}}, k2{{0, 0}, {1, 1}, {1, 0}};
  const ShiftSpec s1{1, 1, 1, {{k1, shift_bound(k1)}}}, s2{2, 1, 1, {{k2, -shift_bound(k2)}}};
  const TrialOperators ops{s1, s2, make_shift(s1, L), make_shift(s2, L), "shift", "shift", 1, 1, 1, 1};
  const auto one = Weight::uniform(L);
  const Eigen::MatrixXd S1 = lift(shift_matrix(s1, L), 1, L), S2 = lift(shift_matrix(s2, L), 2, L);
  for (const auto& I : active_intervals(L))
    for (const auto& J : active_intervals(L)) {
      const auto b = haar2(I, J, L);
      Eigen::MatrixXd B = Eigen::MatrixXd::Zero(16, 16);
      for (int q = 0; q < 16; ++q) B(q, q) = b.values()[q];
      const Eigen::MatrixXd C = B * S2 - S2 * B;
      const double oracle = top_sv(S1 * C - C * S1) / std::pow(I.length() * J.length(), -0.5);
      CHECK(std::abs(bloom_ratio_of(b, ops, one, one, "exact") - oracle) < 1e-8);
    }
  const auto [best, arg] = single_coefficient_scan(ops, one, one, "exact");
  CHECK(best > 0.0);
  CHECK(std::abs(bloom_ratio_of(arg, ops, one, one, "exact") - best) == 0.0);
}

TEST_CASE("extremizer") {
  auto c = small(2, 0);
  c.mode = "exact";
  c.restarts = 2;
  c.sweeps = 2;
  c.start_from_scan = true;
  c.weights.random = false;
  const auto r = extremize_b(c);
  CHECK(r.report.passed());
  CHECK(r.best_ratio >= r.scan_best);
  for (double s : r.start_ratios) CHECK(r.best_ratio >= s);
  for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] >= r.trace[i - 1]);
  CHECK(std::abs(r.norm / r.bmo.value - r.best_ratio) < 1e-9 * r.best_ratio);
  CHECK(to_json(extremize_b(c).report).dump() == to_json(r.report).dump());

  c.operators.u1 = "zero";
  c.start_from_scan = false;
  const auto z = extremize_b(c);
  CHECK(z.best_ratio == 0.0);
  CHECK(z.report.excluded.size() == 2u);
  c.p = 3.0;
  CHECK_THROWS_AS(extremize_b(c), ConfigError);
}

TEST_CASE("lemma suite") {
  auto c = small(3, 4);
  c.weights.random = false;
  const auto r = lemma_suite(c);
  CHECK(r.passed());
  for (const auto& row : r.rows) {
    const auto q = row.extra["quantity"].get<std::string>();
    if (q == "square_function") CHECK(std::abs(row.value - 1.0) < 1e-12);
    if (q == "maximal_single" || q == "fefferman_stein") CHECK(row.value >= 1.0);
  }
  c.weights.random = true;
  c.p = 3.0;
  CHECK(lemma_suite(c).passed());

  // A1 with a single Haar coefficient and nu = 1 against an assembled SVD
  const int L = 3;
  const DyadicInterval I{1, 1}, J{0, 0};
  const auto b = haar2(I, J, L);
  Eigen::MatrixXd A(64, 64);
  for (int col = 0; col < 64; ++col) {
    GridFunction e(L);
    e.values()[col] = 1.0;
    const auto y = paraproduct(ParaproductKind::A1, b, e);
    for (int row = 0; row < 64; ++row) A(row, col) = y.values()[row];
  }
  const double oracle = top_sv(A);
  const auto M = kernels::assemble(64, 64, [&](int col, std::span<double> out) {
    GridFunction e(L);
    e.values()[col] = 1.0;
    const auto y = paraproduct(ParaproductKind::A1, b, e);
    std::copy(y.values().begin(), y.values().end(), out.begin());
  });
  const auto one = Weight::uniform(L);
  const double bmo = bmo_prod(b, one, ProdMode::greedy).value;
  CHECK(std::abs(bmo - std::pow(I.length() * J.length(), -0.5)) < 1e-12);
  CHECK(std::abs(operator_norm_p2(M, one, one).value - oracle) < 1e-8);
}

TEST_CASE("duality, norms and lower-bound drivers") {
  auto c = small(3, 5);
  const auto d = duality_study(c);
  CHECK(d.passed());
  CHECK(d.rows.size() == 5u);
  c.b.scale = 0.0;
  CHECK(duality_study(c).excluded.size() == 5u);

  const auto n = norm_calibration(small(3, 3));
  CHECK(n.passed());
  CHECK(n.summary["oracle_checked"].get<bool>());
  int calibrated = 0;
  for (const auto& row : n.rows)
    if (row.extra.contains("expected")) {
      ++calibrated;
      CHECK(row.extra["error"].get<double>() < 1e-8);
    }
  CHECK(calibrated >= 12);

  auto lc = small(3, 6);
  lc.k = 2;
  const auto lb = lower_bound_study(lc);
  CHECK(lb.passed());
  CHECK(lb.rows.size() == 6u);
  for (const auto& row : lb.rows) {
    CHECK(row.value_kind == "gamma");
    CHECK(std::isfinite(row.extra["ratio"].get<double>()));
  }
  CHECK_THROWS_AS(lower_bound_study(small(1, 1)), ConfigError);
}
