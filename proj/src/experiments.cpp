#include "bloomlab/experiments.hpp"

#include <omp.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>

#include "bloomlab/kernels.hpp"
#include "bloomlab/paraproducts.hpp"

namespace bloomlab {

using nlohmann::json;

namespace {

enum Tag : std::uint64_t {
  tag_identity = 1,
  tag_bloom,
  tag_lemma,
  tag_duality,
  tag_norms,
  tag_lower,
  tag_extremize_ops,
  tag_extremize_restart
};

// ---------------------------------------------------------------------------
// config <-> json

void check_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* s) { return k == s; }))
      throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

json axis_to_json(const AxisWeightSpec& a) {
  switch (a.kind) {
    case AxisWeightSpec::Kind::constant: return {{"kind", "constant"}, {"c", a.c}};
    case AxisWeightSpec::Kind::power: return {{"kind", "power"}, {"a", a.a}};
    case AxisWeightSpec::Kind::haar_perturbation:
      return {{"kind", "haar_perturbation"}, {"eps", a.eps}, {"level_cap", a.level_cap}};
  }
  return {};
}

AxisWeightSpec axis_from_json(const json& j) {
  check_keys(j, {"kind", "c", "a", "eps", "level_cap"}, "weight axis");
  AxisWeightSpec a;
  const auto kind = j.value("kind", std::string("constant"));
  if (kind == "constant") {
    a.kind = AxisWeightSpec::Kind::constant;
    a.c = j.value("c", 1.0);
  } else if (kind == "power") {
    a.kind = AxisWeightSpec::Kind::power;
    a.a = j.value("a", 0.0);
  } else if (kind == "haar_perturbation") {
    a.kind = AxisWeightSpec::Kind::haar_perturbation;
    a.eps = j.value("eps", 0.0);
    a.level_cap = j.value("level_cap", 0);
  } else {
    throw ConfigError("unknown weight kind '" + kind + "'");
  }
  return a;
}

json weight_to_json(const WeightSpec& w) { return {{"x1", axis_to_json(w.x1)}, {"x2", axis_to_json(w.x2)}}; }

WeightSpec weight_from_json(const json& j) {
  check_keys(j, {"x1", "x2"}, "weight");
  WeightSpec w;
  if (j.contains("x1")) w.x1 = axis_from_json(j.at("x1"));
  if (j.contains("x2")) w.x2 = axis_from_json(j.at("x2"));
  return w;
}


// ---------------------------------------------------------------------------

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct TrialOut {
  std::vector<Row> rows;
  std::vector<json> excluded;
  std::vector<std::string> failures;
};

// Trials run in parallel; each writes only its own slot and results are
// merged in trial order.
std::vector<TrialOut> run_trials(int n, const std::function<TrialOut(int)>& fn) {
  std::vector<TrialOut> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> err(static_cast<std::size_t>(n));
  const int threads = kernels::thread_cap() > 0 ? kernels::thread_cap() : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads) if (kernels::parallel())
  for (int t = 0; t < n; ++t) {
    try {
      out[static_cast<std::size_t>(t)] = fn(t);
    } catch (...) {
      err[static_cast<std::size_t>(t)] = std::current_exception();
    }
  }
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
  return out;
}

void merge(ExperimentReport& r, std::vector<TrialOut>&& outs) {
  for (auto& o : outs) {
    for (auto& row : o.rows) r.rows.push_back(std::move(row));
    for (auto& e : o.excluded) r.excluded.push_back(std::move(e));
    for (auto& f : o.failures) r.failures.push_back(std::move(f));
  }
}

Row base_row(const ExperimentConfig& c, int trial) {
  Row r;
  r.trial_id = trial;
  r.L = c.depth;
  r.p = c.p;
  r.seed = c.seed;
  return r;
}

int draw_complexity(const OperatorsConfig& c, int depth, Rng& rng, int fixed) {
  const int cap = std::min(c.max_complexity, depth - 1);
  if (!c.random_complexity) {
    if (fixed > depth - 1) throw ConfigError("complexity too large for the grid depth");
    return fixed;
  }
  return rng.below(cap + 1);
}

bool is_constant(const Weight& w) {
  const auto v = w.function().values();
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

kernels::DenseMatrix assemble_fn(int depth, const std::function<GridFunction(const GridFunction&)>& t) {
  const int n = 1 << (2 * depth);
  return kernels::assemble(n, n, [&](int col, std::span<double> out) {
    GridFunction e(depth);
    e.values()[static_cast<std::size_t>(col)] = 1.0;
    const auto y = t(e);
    std::copy(y.values().begin(), y.values().end(), out.begin());
  });
}

bool all_zero(const kernels::DenseMatrix& m) {
  return std::all_of(m.a.begin(), m.a.end(), [](double v) { return v == 0.0; });
}

struct NormResult {
  double value = 0.0;
  std::string kind;
  double residual = 0.0;
  int iterations = 0;
};

NormResult weighted_norm(const kernels::DenseMatrix& m, const Weight& mu, const Weight& lam,
                         double p, int budget, std::uint64_t seed) {
  if (all_zero(m)) return {0.0, p == 2.0 ? "certified_norm" : "lower_estimate", 0.0, 0};
  if (p == 2.0) {
    const auto e = operator_norm_p2(m, mu, lam, {1e-9, 50000, seed});
    return {e.value, "certified_norm", e.residual, e.iterations};
  }
  return {operator_norm_lower(m, mu, lam, p, budget, seed), "lower_estimate", 0.0, budget};
}

// top singular value of D_l^{1/2} M D_m^{-1/2} from a dense symmetric eigensolve
double eigen_oracle(const kernels::DenseMatrix& m, const Weight& mu, const Weight& lam) {
  const int n = m.rows;
  const double area = mu.function().cell_area();
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      B(i, j) = std::sqrt(lam.function().values()[i] * area) * m(i, j) /
                std::sqrt(mu.function().values()[j] * area);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B.transpose() * B, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

ShiftSpec shift_for(int axis, int a, int b, int depth, Rng& rng) {
  return gen_shift(axis, a, b, depth, rng.next());
}

double max_sqrt_ratio(const Weight& mu, const Weight& lam, const GridFunction* m) {
  double best = 0.0;
  for (std::size_t k = 0; k < mu.function().cells(); ++k) {
    const double s = m ? std::abs(m->values()[k]) : 1.0;
    best = std::max(best, s * std::sqrt(lam.function().values()[k] / mu.function().values()[k]));
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig c;
    check_keys(j, {"experiment", "weights", "operators", "b"}, "config");
    if (j.contains("experiment")) {
      const auto& e = j.at("experiment");
      check_keys(e, {"depth", "p", "seed", "trials", "k", "mode", "budget", "restarts", "sweeps",
                     "start_from_scan", "random_subsets"},
                 "experiment");
      c.depth = e.value("depth", c.depth);
      c.p = e.value("p", c.p);
      c.seed = e.value("seed", c.seed);
      c.trials = e.value("trials", c.trials);
      c.k = e.value("k", c.k);
      c.mode = e.value("mode", c.mode);
      c.budget = e.value("budget", c.budget);
      c.restarts = e.value("restarts", c.restarts);
      c.sweeps = e.value("sweeps", c.sweeps);
      c.start_from_scan = e.value("start_from_scan", c.start_from_scan);
      c.random_subsets = e.value("random_subsets", c.random_subsets);
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      check_keys(w, {"random", "ap_cap", "max_eps", "mu", "lambda"}, "weights");
      c.weights.random = w.value("random", c.weights.random);
      c.weights.ap_cap = w.value("ap_cap", c.weights.ap_cap);
      c.weights.max_eps = w.value("max_eps", c.weights.max_eps);
      if (w.contains("mu")) c.weights.mu = weight_from_json(w.at("mu"));
      if (w.contains("lambda")) c.weights.lambda = weight_from_json(w.at("lambda"));
    }
    if (j.contains("operators")) {
      const auto& o = j.at("operators");
      check_keys(o, {"u1", "u2", "random_complexity", "max_complexity", "k1", "k2", "v1", "v2"},
                 "operators");
      auto& oc = c.operators;
      oc.u1 = o.value("u1", oc.u1);
      oc.u2 = o.value("u2", oc.u2);
      oc.random_complexity = o.value("random_complexity", oc.random_complexity);
      oc.max_complexity = o.value("max_complexity", oc.max_complexity);
      oc.k1 = o.value("k1", oc.k1);
      oc.k2 = o.value("k2", oc.k2);
      oc.v1 = o.value("v1", oc.v1);
      oc.v2 = o.value("v2", oc.v2);
    }
    if (j.contains("b")) {
      const auto& b = j.at("b");
      check_keys(b, {"kind", "decay", "scale"}, "b");
      c.b.kind = b.value("kind", c.b.kind);
      c.b.decay = b.value("decay", c.b.decay);
      c.b.scale = b.value("scale", c.b.scale);
    }
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = {{"depth", c.depth},       {"p", c.p},
                     {"seed", c.seed},         {"trials", c.trials},
                     {"k", c.k},               {"mode", c.mode},
                     {"budget", c.budget},     {"restarts", c.restarts},
                     {"sweeps", c.sweeps},     {"start_from_scan", c.start_from_scan},
                     {"random_subsets", c.random_subsets}};
  j["weights"] = {{"random", c.weights.random},
                  {"ap_cap", c.weights.ap_cap},
                  {"max_eps", c.weights.max_eps},
                  {"mu", weight_to_json(c.weights.mu)},
                  {"lambda", weight_to_json(c.weights.lambda)}};
  const auto& o = c.operators;
  j["operators"] = {{"u1", o.u1}, {"u2", o.u2}, {"random_complexity", o.random_complexity},
                    {"max_complexity", o.max_complexity}, {"k1", o.k1}, {"k2", o.k2},
                    {"v1", o.v1}, {"v2", o.v2}};
  j["b"] = {{"kind", c.b.kind}, {"decay", c.b.decay}, {"scale", c.b.scale}};
  return j;
}

void validate(const ExperimentConfig& c) {
  auto bad = [](const std::string& m) { throw ConfigError(m); };
  if (c.depth < 1 || c.depth > 6) bad("depth must be in 1..6");
  if (!(c.p > 1.0) || !std::isfinite(c.p)) bad("p must be a finite number above 1");
  if (c.trials < 0) bad("trials must be nonnegative");
  if (c.k < 1) bad("k must be at least 1");
  if (c.budget < 1 || c.restarts < 1 || c.sweeps < 1) bad("budget, restarts and sweeps must be positive");
  if (c.random_subsets < 0) bad("random_subsets must be nonnegative");
  if (c.mode != "auto" && c.mode != "exact" && c.mode != "greedy" && c.mode != "rect")
    bad("mode must be auto, exact, greedy or rect");
  if (c.mode == "exact" && c.depth > kExactProdMaxDepth) bad("exact product BMO needs depth <= 2");
  for (const auto& u : {c.operators.u1, c.operators.u2})
    if (u != "shift" && u != "paraproduct" && u != "paraproduct_dual" && u != "zero" &&
        u != "random")
      bad("unknown operator kind '" + u + "'");
  if (c.operators.max_complexity < 0) bad("max_complexity must be nonnegative");
  if (c.b.kind != "spectrum" && c.b.kind != "little" && c.b.kind != "checkerboard")
    bad("unknown b kind '" + c.b.kind + "'");
  if (!(c.weights.ap_cap >= 1.0)) bad("ap_cap must be at least 1");
  if (c.weights.max_eps < 0.0) bad("max_eps must be nonnegative");
}

// ---------------------------------------------------------------------------

const char* const kCsvColumns[15] = {"trial_id", "L",          "p",        "seed",
                                     "mu_ap",    "lambda_ap",  "nu_a2",    "b_bmoprod",
                                     "b_bmolittle", "k1",      "k2",       "v1",
                                     "v2",       "value",      "value_kind"};

std::string csv_header() {
  std::string s;
  for (int i = 0; i < 15; ++i) {
    if (i) s += ',';
    s += kCsvColumns[i];
  }
  return s + '\n';
}

std::string to_csv(const ExperimentReport& r) {
  std::string s = csv_header();
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : std::string(); };
  for (const auto& row : r.rows) {
    s += std::to_string(row.trial_id) + ',' + std::to_string(row.L) + ',' + num(row.p) + ',' +
         std::to_string(row.seed) + ',' + opt(row.mu_ap) + ',' + opt(row.lambda_ap) + ',' +
         opt(row.nu_a2) + ',' + opt(row.b_bmoprod) + ',' + opt(row.b_bmolittle) + ',' +
         std::to_string(row.k1) + ',' + std::to_string(row.k2) + ',' + std::to_string(row.v1) +
         ',' + std::to_string(row.v2) + ',' + num(row.value) + ',' + row.value_kind + '\n';
  }
  return s;
}

json to_json(const ExperimentReport& r) {
  json j;
  j["header"] = {{"tool", "bloomlab"},
                 {"version", kToolVersion},
                 {"experiment", r.experiment},
                 {"config", to_json(r.config)},
                 {"seed", r.config.seed}};
  json rows = json::array();
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  for (const auto& row : r.rows)
    rows.push_back({{"trial_id", row.trial_id}, {"L", row.L}, {"p", row.p},
                    {"seed", row.seed}, {"mu_ap", opt(row.mu_ap)},
                    {"lambda_ap", opt(row.lambda_ap)}, {"nu_a2", opt(row.nu_a2)},
                    {"b_bmoprod", opt(row.b_bmoprod)}, {"b_bmolittle", opt(row.b_bmolittle)},
                    {"k1", row.k1}, {"k2", row.k2}, {"v1", row.v1}, {"v2", row.v2},
                    {"value", row.value}, {"value_kind", row.value_kind},
                    {"extra", row.extra}});
  j["rows"] = std::move(rows);
  j["excluded"] = r.excluded;
  j["failures"] = r.failures;
  j["summary"] = r.summary;
  j["passed"] = r.passed();
  return j;
}

// ---------------------------------------------------------------------------

GridFunction random_cancellative(int depth, double decay, Rng& rng) {
  HaarSpectrum s(depth);
  for (const auto& I : active_intervals(depth))
    for (const auto& J : active_intervals(depth))
      s.at(I, J) = rng.normal() * std::pow(I.length() * J.length(), decay);
  return synthesize(s);
}

GridFunction random_b(const BConfig& c, int depth, Rng& rng) {
  GridFunction b(depth);
  const int n = 1 << depth;
  if (c.kind == "spectrum") {
    b = random_cancellative(depth, c.decay, rng);
  } else if (c.kind == "little") {
    const double shift = rng.uniform(-0.5, 0.5), h = std::ldexp(1.0, -depth);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = std::log(std::abs((i - j) * h - shift) + h);
  } else if (c.kind == "checkerboard") {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) b(i, j) = (i + j) % 2 ? -1.0 : 1.0;
  } else {
    throw ConfigError("unknown b kind '" + c.kind + "'");
  }
  return c.scale * b;
}

std::pair<Weight, Weight> trial_weights(const WeightsConfig& c, int depth, double p, Rng& rng) {
  if (!c.random)
    return {gen_weight(c.mu, depth, p, rng.next()), gen_weight(c.lambda, depth, p, rng.next())};
  double shrink = 1.0;
  for (int attempt = 0; attempt < 64; ++attempt) {
    auto axis = [&] {
      AxisWeightSpec a;
      a.kind = AxisWeightSpec::Kind::haar_perturbation;
      a.eps = rng.uniform(0.0, c.max_eps * shrink);
      a.level_cap = depth - 1;
      return a;
    };
    const WeightSpec ms{axis(), axis()}, ls{axis(), axis()};
    Weight mu = gen_weight(ms, depth, p, rng.next());
    Weight lam = gen_weight(ls, depth, p, rng.next());
    if (ap_characteristic(mu, p) <= c.ap_cap && ap_characteristic(lam, p) <= c.ap_cap)
      return {std::move(mu), std::move(lam)};
    shrink *= 0.8;
  }
  return {Weight::uniform(depth), Weight::uniform(depth)};
}

TrialOperators trial_operators(const OperatorsConfig& c, int depth, Rng& rng) {
  const int n = 1 << depth;
  auto resolve = [&](const std::string& k) {
    if (k != "random") return k;
    return std::string(rng.below(2) ? "paraproduct" : "shift");
  };
  const std::string k1 = resolve(c.u1), k2 = resolve(c.u2);
  int c1 = 0, c2 = 0, c3 = 0, c4 = 0;
  auto build = [&](const std::string& kind, int axis, int fa, int fb, int& ca,
                   int& cb) -> std::pair<AxisSpec, OperatorHandle> {
    if (kind == "shift") {
      ca = draw_complexity(c, depth, rng, fa);
      cb = draw_complexity(c, depth, rng, fb);
      auto s = shift_for(axis, ca, cb, depth, rng);
      auto h = make_shift(s, depth);
      return {std::move(s), std::move(h)};
    }
    if (kind == "paraproduct" || kind == "paraproduct_dual") {
      auto p = gen_paraproduct(axis, kind == "paraproduct" ? ParaForm::direct : ParaForm::dual,
                               depth, rng.next());
      auto h = make_paraproduct(p, depth);
      return {std::move(p), std::move(h)};
    }
    if (kind == "zero") {
      ShiftSpec s{axis, 0, 0, {}};
      return {s, axis_operator("0", axis, kernels::DenseMatrix(n, n))};
    }
    throw ConfigError("unknown operator kind '" + kind + "'");
  };
  auto [s1, h1] = build(k1, 1, c.k1, c.k2, c1, c2);
  auto [s2, h2] = build(k2, 2, c.v1, c.v2, c3, c4);
  return {std::move(s1), std::move(s2), std::move(h1), std::move(h2), k1, k2, c1, c2, c3, c4};
}

BmoCertificate bmo_prod_mode(const GridFunction& b, const Weight& nu, const std::string& mode) {
  if (mode == "auto") return bmo_prod_best(b, nu);
  if (mode == "exact") return bmo_prod(b, nu, ProdMode::exact);
  if (mode == "greedy") return bmo_prod(b, nu, ProdMode::greedy);
  if (mode == "rect") return bmo_prod(b, nu, ProdMode::rect);
  throw ConfigError("unknown mode '" + mode + "'");
}

// ---------------------------------------------------------------------------

ExperimentReport identity_suite(const ExperimentConfig& c) {
  validate(c);
  ExperimentReport rep{"identities", c, {}, {}, {}, json::object()};
  const int L = c.depth;
  auto one = [&](int t, bool adversarial) {
    TrialOut o;
    Rng rng = Rng::split(c.seed, tag_identity, static_cast<std::uint64_t>(t));
    GridFunction b(L), f(L);
    if (adversarial) {
      b = f = random_b({"checkerboard", 0.0, 1.0}, L, rng);
    } else {
      for (double& v : b.values()) v = rng.uniform(-1.0, 1.0);
      for (double& v : f.values()) v = rng.uniform(-1.0, 1.0);
    }
    auto row = [&](const std::string& check, double value, double tol) {
      Row r = base_row(c, t);
      r.value = value;
      r.value_kind = "residual";
      r.extra = {{"check", check}, {"tolerance", tol}, {"adversarial", adversarial}};
      return r;
    };
    for (auto [mode, label] : {std::pair{ExpansionMode::bi, "product_bi"},
                               std::pair{ExpansionMode::param1, "product_param1"},
                               std::pair{ExpansionMode::param2, "product_param2"}}) {
      try {
        const auto d = decompose_product(b, f, mode);
        o.rows.push_back(row(label, d.residual_sup, d.tolerance));
      } catch (const IdentityFailure& e) {
        o.failures.push_back(std::string(label) + " trial " + std::to_string(t) + " seed " +
                             std::to_string(c.seed) + ": " + e.what());
      }
    }
    OperatorsConfig oc = c.operators;
    const int a1 = draw_complexity(oc, L, rng, oc.k1), a2 = draw_complexity(oc, L, rng, oc.k2);
    const int b1 = draw_complexity(oc, L, rng, oc.v1), b2 = draw_complexity(oc, L, rng, oc.v2);
    const auto s1 = shift_for(1, a1, a2, L, rng);
    const auto s2 = shift_for(2, b1, b2, L, rng);
    const auto p1 = gen_paraproduct(1, ParaForm::direct, L, rng.next());
    const auto p1d = gen_paraproduct(1, ParaForm::dual, L, rng.next());
    const auto p2 = gen_paraproduct(2, ParaForm::direct, L, rng.next());
    const std::pair<AxisSpec, AxisSpec> ops[] = {{s1, s2}, {p1, p2}, {s1, p2}, {p1d, p2}};
    const DecompositionCase cases[] = {DecompositionCase::shift_shift, DecompositionCase::pi_pi,
                                       DecompositionCase::mixed_shift_pi,
                                       DecompositionCase::pi_pi_dual};
    for (int q = 0; q < 4; ++q) {
      const auto label = std::string("decomposition_") + to_string(cases[q]);
      try {
        const auto d = verify_decomposition(cases[q], b, ops[q].first, ops[q].second, f);
        Row r = row(label, d.residual_sup, d.tolerance);
        if (q == 0) {
          r.k1 = a1, r.k2 = a2, r.v1 = b1, r.v2 = b2;
        } else if (q == 2) {
          r.k1 = a1, r.k2 = a2;
        }
        double worst = 0.0;
        for (const auto& [name, res] : d.identities) {
          r.extra["identities"][name] = res;
          worst = std::max(worst, res);
        }
        if (worst > d.tolerance)
          o.failures.push_back(label + " auxiliary identity, trial " + std::to_string(t) +
                               " seed " + std::to_string(c.seed) + ": residual " + num(worst));
        o.rows.push_back(std::move(r));
      } catch (const IdentityFailure& e) {
        o.failures.push_back(label + " trial " + std::to_string(t) + " seed " +
                             std::to_string(c.seed) + ": " + e.what());
      }
    }
    return o;
  };
  merge(rep, run_trials(c.trials + 1, [&](int t) { return one(t, t == c.trials); }));
  double worst = 0.0;
  for (const auto& r : rep.rows) worst = std::max(worst, r.value);
  rep.summary = {{"rows", rep.rows.size()}, {"max_residual", worst},
                 {"failures", rep.failures.size()}};
  return rep;
}

// ---------------------------------------------------------------------------

double bloom_ratio_of(const GridFunction& b, const TrialOperators& ops, const Weight& mu,
                      const Weight& lambda, const std::string& mode) {
  const auto nu = bloom_weight(mu, lambda, 2.0);
  const auto bmo = bmo_prod_mode(b, nu, mode);
  if (bmo.value == 0.0) return 0.0;
  const auto M = assemble_matrix(nested_commutator(ops.t1, b, ops.t2));
  if (all_zero(M)) return 0.0;
  return operator_norm_p2(M, mu, lambda).value / bmo.value;
}

ExperimentReport bloom_ratio(const ExperimentConfig& c) {
  validate(c);
  ExperimentReport rep{"bloom", c, {}, {}, {}, json::object()};
  const int L = c.depth;
  merge(rep, run_trials(c.trials, [&](int t) {
    TrialOut o;
    Rng rng = Rng::split(c.seed, tag_bloom, static_cast<std::uint64_t>(t));
    const auto ops = trial_operators(c.operators, L, rng);
    const auto [mu, lam] = trial_weights(c.weights, L, c.p, rng);
    const auto nu = bloom_weight(mu, lam, c.p);
    const auto b = random_b(c.b, L, rng);
    const std::uint64_t nseed = rng.next();
    const auto bmo = bmo_prod_mode(b, nu, c.mode);
    if (bmo.value == 0.0) {
      o.excluded.push_back({{"trial_id", t}, {"reason", "b has zero product BMO norm"}});
      return o;
    }
    Row r = base_row(c, t);
    r.mu_ap = ap_characteristic(mu, c.p);
    r.lambda_ap = ap_characteristic(lam, c.p);
    r.nu_a2 = ap_characteristic(nu, 2.0);
    r.b_bmoprod = bmo.value;
    r.b_bmolittle = bmo_little(b, nu).value;
    r.k1 = ops.k1, r.k2 = ops.k2, r.v1 = ops.v1, r.v2 = ops.v2;
    try {
      const auto M = assemble_matrix(nested_commutator(ops.t1, b, ops.t2));
      const auto n = weighted_norm(M, mu, lam, c.p, c.budget, nseed);
      r.value = n.value / bmo.value;
      r.value_kind = "ratio";
      // b -> -3 b
      const GridFunction bc = -3.0 * b;
      const auto bmoc = bmo_prod_mode(bc, nu, c.mode);
      const auto nc = weighted_norm(assemble_matrix(nested_commutator(ops.t1, bc, ops.t2)), mu,
                                    lam, c.p, c.budget, nseed);
      const double rc = nc.value / bmoc.value;
      const double scale_res = std::abs(rc - r.value) / std::max(r.value, 1e-300);
      // f -> 1000 f on a random input
      GridFunction f(L);
      for (double& v : f.values()) v = rng.normal();
      const auto T = nested_commutator(ops.t1, b, ops.t2);
      const double q1 = lp_norm(T(f), lam, c.p) / lp_norm(f, mu, c.p);
      const GridFunction fs = 1000.0 * f;
      const double q2 = lp_norm(T(fs), lam, c.p) / lp_norm(fs, mu, c.p);
      const double input_res = std::abs(q1 - q2) / std::max(q1, 1e-300);
      r.extra = {{"pair", ops.kind1 + "/" + ops.kind2},
                 {"norm", n.value},
                 {"norm_kind", n.kind},
                 {"power_residual", n.residual},
                 {"iterations", n.iterations},
                 {"bmo_mode", c.mode},
                 {"b_scaling_residual", scale_res},
                 {"input_scaling_residual", input_res}};
      if (n.value != 0.0 && (scale_res > 1e-10 || input_res > 1e-10))
        o.failures.push_back("scaling invariance, trial " + std::to_string(t) + ": b " +
                             num(scale_res) + ", input " + num(input_res));
      if (!std::isfinite(r.value))
        o.failures.push_back("non-finite ratio, trial " + std::to_string(t));
      o.rows.push_back(std::move(r));
    } catch (const NonConvergence& e) {
      o.excluded.push_back({{"trial_id", t}, {"reason", "power iteration did not converge"},
                            {"residual", e.residual}});
    }
    return o;
  }));

  // sup-ratio table by operator pair and largest complexities
  std::map<std::string, std::tuple<int, double, double>> table;
  double sup = 0.0, sum = 0.0;
  for (const auto& r : rep.rows) {
    const std::string key = r.extra["pair"].get<std::string>() + " maxk=" +
                            std::to_string(std::max(r.k1, r.k2)) +
                            " maxv=" + std::to_string(std::max(r.v1, r.v2));
    auto& [n, s, m] = table[key];
    ++n;
    s = std::max(s, r.value);
    m += r.value;
    sup = std::max(sup, r.value);
    sum += r.value;
  }
  json tj = json::array();
  for (const auto& [key, v] : table) {
    const auto& [n, s, m] = v;
    tj.push_back({{"group", key}, {"count", n}, {"sup_ratio", s}, {"mean_ratio", m / n}});
  }
  rep.summary = {{"rows", rep.rows.size()},
                 {"excluded", rep.excluded.size()},
                 {"sup_ratio", sup},
                 {"mean_ratio", rep.rows.empty() ? 0.0 : sum / static_cast<double>(rep.rows.size())},
                 {"value_kind", c.p == 2.0 ? "certified norm / bmo_prod" : "lower estimate / bmo_prod"},
                 {"table", tj}};
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport lemma_suite(const ExperimentConfig& c) {
  validate(c);
  ExperimentReport rep{"lemmas", c, {}, {}, {}, json::object()};
  const int L = c.depth;
  merge(rep, run_trials(c.trials, [&](int t) {
    TrialOut o;
    Rng rng = Rng::split(c.seed, tag_lemma, static_cast<std::uint64_t>(t));
    const auto [w, lam] = trial_weights(c.weights, L, c.p, rng);
    const double wap = ap_characteristic(w, c.p);
    const auto f = random_cancellative(L, 0.0, rng);
    const double nf = lp_norm(f, w, c.p);
    auto row = [&](const std::string& what, double v) {
      Row r = base_row(c, t);
      r.mu_ap = wap;
      r.value = v;
      r.value_kind = "ratio";
      r.extra = {{"quantity", what}};
      o.rows.push_back(std::move(r));
    };
    const double sq = lp_norm(square_function(SquareKind::full, f), w, c.p);
    row("square_function", sq / nf);
    row("square_function_inverse", nf / sq);
    if (c.p == 2.0 && is_constant(w) && std::abs(sq / nf - 1.0) > 1e-12)
      o.failures.push_back("Parseval: square function ratio " + num(sq / nf) + " at trial " +
                           std::to_string(t));
    const double mx = lp_norm(maximal(MaximalKind::full, f), w, c.p) / nf;
    row("maximal_single", mx);
    if (mx < 1.0 - 1e-12)
      o.failures.push_back("maximal function below |f| at trial " + std::to_string(t));
    // Fefferman-Stein with three functions
    GridFunction num2(L), den2(L);
    for (int q = 0; q < 3; ++q) {
      GridFunction g(L);
      for (double& v : g.values()) v = rng.normal();
      num2 += hadamard(maximal(MaximalKind::full, g), maximal(MaximalKind::full, g));
      den2 += hadamard(g, g);
    }
    for (double& v : num2.values()) v = std::sqrt(v);
    for (double& v : den2.values()) v = std::sqrt(v);
    const double fs = lp_norm(num2, w, c.p) / lp_norm(den2, w, c.p);
    row("fefferman_stein", fs);
    if (fs < 1.0 - 1e-12)
      o.failures.push_back("Fefferman-Stein ratio below 1 at trial " + std::to_string(t));
    row("square_x1_max", lp_norm(square_function(SquareKind::x1_max, f), w, c.p) / nf);
    row("square_x2_max", lp_norm(square_function(SquareKind::x2_max, f), w, c.p) / nf);

    // A_i(b, .) from L^p(w) to L^p(lam) against |b|_{BMO_prod(nu)}
    const auto b = random_b(c.b, L, rng);
    const auto nu = bloom_weight(w, lam, c.p);
    const auto bmo = bmo_prod_mode(b, nu, c.mode);
    const std::uint64_t nseed = rng.next();
    if (bmo.value == 0.0) {
      o.excluded.push_back({{"trial_id", t}, {"reason", "b has zero product BMO norm"}});
      return o;
    }
    for (int i = 1; i <= 4; ++i) {
      const auto kind = a_kind(i);
      const auto M = assemble_fn(L, [&](const GridFunction& g) { return paraproduct(kind, b, g); });
      const auto n = weighted_norm(M, w, lam, c.p, c.budget, nseed + static_cast<std::uint64_t>(i));
      Row r = base_row(c, t);
      r.mu_ap = wap;
      r.lambda_ap = ap_characteristic(lam, c.p);
      r.nu_a2 = ap_characteristic(nu, 2.0);
      r.b_bmoprod = bmo.value;
      r.value = n.value / bmo.value;
      r.value_kind = "ratio";
      r.extra = {{"quantity", "A" + std::to_string(i)}, {"norm", n.value}, {"norm_kind", n.kind}};
      o.rows.push_back(std::move(r));
    }
    return o;
  }));
  std::map<std::string, std::pair<double, double>> range;
  for (const auto& r : rep.rows) {
    const auto q = r.extra["quantity"].get<std::string>();
    auto it = range.find(q);
    if (it == range.end())
      range[q] = {r.value, r.value};
    else
      it->second = {std::min(it->second.first, r.value), std::max(it->second.second, r.value)};
  }
  json s = json::object();
  for (const auto& [q, mm] : range) s[q] = {{"min", mm.first}, {"max", mm.second}};
  rep.summary = {{"rows", rep.rows.size()}, {"ranges", s}};
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport duality_study(const ExperimentConfig& c) {
  validate(c);
  ExperimentReport rep{"duality", c, {}, {}, {}, json::object()};
  const int L = c.depth;
  merge(rep, run_trials(c.trials, [&](int t) {
    TrialOut o;
    Rng rng = Rng::split(c.seed, tag_duality, static_cast<std::uint64_t>(t));
    const auto [mu, lam] = trial_weights(c.weights, L, c.p, rng);
    const auto b = random_b(c.b, L, rng);
    HaarSpectrum cs(L);
    for (const auto& I : active_intervals(L))
      for (const auto& J : active_intervals(L)) cs.at(I, J) = rng.normal();
    const auto d = duality_ratio(b, cs, mu, lam, c.p);
    if (d.degenerate) {
      o.excluded.push_back({{"trial_id", t}, {"reason", "right-hand side vanishes"}});
      return o;
    }
    Row r = base_row(c, t);
    r.mu_ap = ap_characteristic(mu, c.p);
    r.lambda_ap = ap_characteristic(lam, c.p);
    r.nu_a2 = ap_characteristic(bloom_weight(mu, lam, c.p), 2.0);
    r.b_bmoprod = d.bmo_prod;
    r.value = d.ratio;
    r.value_kind = "ratio";
    r.extra = {{"lhs", d.lhs}, {"rhs", d.rhs}, {"bmo_mode", to_string(d.mode)}};
    o.rows.push_back(std::move(r));
    return o;
  }));
  double sup = 0.0;
  for (const auto& r : rep.rows) sup = std::max(sup, r.value);
  rep.summary = {{"rows", rep.rows.size()}, {"excluded", rep.excluded.size()}, {"sup_ratio", sup}};
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport norm_calibration(const ExperimentConfig& c) {
  validate(c);
  ExperimentReport rep{"norms", c, {}, {}, {}, json::object()};
  const int L = c.depth;
  const bool oracle = (std::size_t{1} << (2 * L)) <= 1024;
  merge(rep, run_trials(c.trials, [&](int t) {
    TrialOut o;
    Rng rng = Rng::split(c.seed, tag_norms, static_cast<std::uint64_t>(t));
    const auto [mu, lam] = trial_weights(c.weights, L, c.p, rng);
    const auto one = Weight::uniform(L);
    auto record = [&](const std::string& inst, const kernels::DenseMatrix& M, const Weight& m,
                      const Weight& l, std::optional<double> expected) {
      NormResult n;
      try {
        n = weighted_norm(M, m, l, c.p, c.budget, rng.next());
      } catch (const NonConvergence& e) {
        o.excluded.push_back({{"trial_id", t}, {"instance", inst},
                              {"reason", "power iteration did not converge"},
                              {"residual", e.residual}});
        return;
      }
      Row r = base_row(c, t);
      r.mu_ap = ap_characteristic(m, c.p);
      r.lambda_ap = ap_characteristic(l, c.p);
      r.value = n.value;
      r.value_kind = n.kind;
      r.extra = {{"instance", inst}, {"power_residual", n.residual}, {"iterations", n.iterations}};
      if (c.p == 2.0) {
        if (expected) {
          r.extra["expected"] = *expected;
          const double e = std::abs(n.value - *expected);
          r.extra["error"] = e;
          if (e > 1e-8 * std::max(1.0, *expected))
            o.failures.push_back(inst + " norm off by " + num(e) + " at trial " + std::to_string(t));
        }
        if (oracle) {
          const double ref = eigen_oracle(M, m, l);
          const double rel = std::abs(n.value - ref) / std::max(ref, 1e-300);
          r.extra["oracle"] = ref;
          r.extra["oracle_relative_error"] = rel;
          if (ref > 0.0 && rel > 1e-6)
            o.failures.push_back(inst + " differs from the dense oracle by " + num(rel) +
                                 " at trial " + std::to_string(t));
        }
      } else if (expected) {
        r.extra["upper_reference"] = *expected;
      }
      o.rows.push_back(std::move(r));
    };
    const int n = 1 << (2 * L);
    kernels::DenseMatrix id(n, n);
    for (int i = 0; i < n; ++i) id(i, i) = 1.0;
    record("identity", id, one, one, 1.0);
    record("identity_weighted", id, mu, lam, max_sqrt_ratio(mu, lam, nullptr));
    GridFunction m(L);
    for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
    m.values()[static_cast<std::size_t>(rng.below(n))] = rng.sign() * 2.0;
    kernels::DenseMatrix mm(n, n);
    for (int i = 0; i < n; ++i) mm(i, i) = m.values()[static_cast<std::size_t>(i)];
    record("multiplication", mm, one, one, m.sup_norm());
    record("multiplication_weighted", mm, mu, lam, max_sqrt_ratio(mu, lam, &m));
    if (L >= 2) {
      const auto full = gen_shift(1, 1, 1, L, rng.next());
      auto it = full.coeffs.begin();
      std::advance(it, rng.below(static_cast<int>(full.coeffs.size())));
      const ShiftSpec single{1, 1, 1, {{it->first, it->second}}};
      record("single_shift", assemble_matrix(make_shift(single, L)), one, one, std::abs(it->second));
    }
    const auto ops = trial_operators(c.operators, L, rng);
    record("u1_" + ops.kind1, assemble_matrix(ops.t1), mu, lam, std::nullopt);
    record("u2_" + ops.kind2, assemble_matrix(ops.t2), mu, lam, std::nullopt);
    const auto b = random_b(c.b, L, rng);
    record("nested_commutator", assemble_matrix(nested_commutator(ops.t1, b, ops.t2)), mu, lam,
           std::nullopt);
    return o;
  }));
  rep.summary = {{"rows", rep.rows.size()}, {"oracle_checked", oracle && c.p == 2.0},
                 {"failures", rep.failures.size()}};
  return rep;
}

// ---------------------------------------------------------------------------

ExperimentReport lower_bound_study(const ExperimentConfig& c) {
  validate(c);
  if (c.depth < 2) throw ConfigError("lower-bound runs need depth >= 2");
  ExperimentReport rep{"lower-bound", c, {}, {}, {}, json::object()};
  const int L = c.depth;
  const KernelSpec kern{};
  merge(rep, run_trials(c.trials, [&](int t) {
    TrialOut o;
    Rng rng = Rng::split(c.seed, tag_lower, static_cast<std::uint64_t>(t));
    const auto [mu, lam] = trial_weights(c.weights, L, c.p, rng);
    GridFunction b = random_b(c.b, L, rng);
    const std::uint64_t gseed = rng.next();
    try {
      const auto lb = check_lower_bound(kern, b, mu, lam, c.k, c.p, {c.random_subsets, gseed});
      if (lb.degenerate) {
        o.excluded.push_back({{"trial_id", t}, {"reason", "Gamma vanishes (constant b)"}});
        return o;
      }
      Row r = base_row(c, t);
      r.mu_ap = ap_characteristic(mu, c.p);
      r.lambda_ap = ap_characteristic(lam, c.p);
      r.nu_a2 = ap_characteristic(bloom_weight(mu, lam, c.p), 2.0);
      r.b_bmolittle = lb.bmo_value;
      r.value = lb.gamma;
      r.value_kind = "gamma";
      r.extra = to_json(lb);
      if (!std::isfinite(lb.ratio))
        o.failures.push_back("non-finite lower-bound ratio at trial " + std::to_string(t));
      o.rows.push_back(std::move(r));
    } catch (const StepFailure& e) {
      o.failures.push_back("lower-bound step, trial " + std::to_string(t) + ": " + e.what());
    }
    return o;
  }));
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& r : rep.rows) {
    const double q = r.extra["ratio"].get<double>();
    lo = first ? q : std::min(lo, q);
    hi = first ? q : std::max(hi, q);
    first = false;
  }
  rep.summary = {{"rows", rep.rows.size()}, {"k", c.k}, {"min_ratio", lo}, {"max_ratio", hi},
                 {"excluded", rep.excluded.size()}};
  return rep;
}

// ---------------------------------------------------------------------------

std::pair<double, GridFunction> single_coefficient_scan(const TrialOperators& ops,
                                                         const Weight& mu, const Weight& lambda,
                                                         const std::string& mode) {
  const int L = mu.depth();
  double best = -1.0;
  GridFunction arg(L);
  for (const auto& I : active_intervals(L))
    for (const auto& J : active_intervals(L)) {
      HaarSpectrum s(L);
      s.at(I, J) = 1.0;
      const auto b = synthesize(s);
      const double r = bloom_ratio_of(b, ops, mu, lambda, mode);
      if (r > best) {
        best = r;
        arg = b;
      }
    }
  return {best, arg};
}

ExtremizeResult extremize_b(const ExperimentConfig& c) {
  validate(c);
  if (c.p != 2.0) throw ConfigError("extremize needs p = 2");
  const int L = c.depth;
  Rng rng = Rng::split(c.seed, tag_extremize_ops, 0);
  const auto ops = trial_operators(c.operators, L, rng);
  const auto [mu, lam] = trial_weights(c.weights, L, c.p, rng);
  const auto act = active_intervals(L);
  const std::size_t dim = act.size() * act.size();

  auto to_b = [&](const std::vector<double>& x) {
    HaarSpectrum s(L);
    std::size_t q = 0;
    for (const auto& I : act)
      for (const auto& J : act) s.at(I, J) = x[q++];
    return synthesize(s);
  };
  auto normalize = [](std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    s = std::sqrt(s);
    if (s > 0.0)
      for (double& v : x) v /= s;
  };

  ExtremizeResult res;
  res.report = {"extremize", c, {}, {}, {}, json::object()};
  res.best_b = GridFunction(L);
  std::vector<double> best_x;
  double best = 0.0;
  if (c.start_from_scan) res.scan_best = single_coefficient_scan(ops, mu, lam, c.mode).first;

  for (int r = 0; r < c.restarts; ++r) {
    Rng rr = Rng::split(c.seed, tag_extremize_restart, static_cast<std::uint64_t>(r));
    std::vector<double> x(dim);
    double cur = 0.0;
    for (int attempt = 0; attempt < 4 && cur == 0.0; ++attempt) {
      if (r == 0 && attempt == 0 && c.start_from_scan) {
        const auto sb = single_coefficient_scan(ops, mu, lam, c.mode).second;
        const auto sp = analyze(sb);
        std::size_t q = 0;
        for (const auto& I : act)
          for (const auto& J : act) x[q++] = sp.at(I, J);
      } else {
        for (double& v : x) v = rr.normal();
      }
      normalize(x);
      cur = bloom_ratio_of(to_b(x), ops, mu, lam, c.mode);
    }
    res.start_ratios.push_back(cur);
    auto push = [&](double v) {
      best = std::max(best, v);
      res.trace.push_back(best);
    };
    push(cur);
    if (cur > 0.0 && best_x.empty()) best_x = x;
    if (cur >= best && cur > 0.0) best_x = x;
    double step = 0.5;
    for (int sweep = 0; sweep < c.sweeps && cur > 0.0; ++sweep) {
      std::vector<std::size_t> order(dim);
      for (std::size_t q = 0; q < dim; ++q) order[q] = q;
      for (std::size_t q = dim; q > 1; --q)
        std::swap(order[q - 1], order[static_cast<std::size_t>(rr.below(static_cast<int>(q)))]);
      bool improved = false;
      for (std::size_t q : order) {
        for (double dir : {1.0, -1.0}) {
          auto y = x;
          y[q] += dir * step;
          normalize(y);
          const double v = bloom_ratio_of(to_b(y), ops, mu, lam, c.mode);
          push(v);
          if (v > cur) {
            cur = v;
            x = std::move(y);
            improved = true;
            if (cur >= best) best_x = x;
            break;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    Row row = base_row(c, r);
    row.k1 = ops.k1, row.k2 = ops.k2, row.v1 = ops.v1, row.v2 = ops.v2;
    row.value = cur;
    row.value_kind = "ratio";
    row.extra = {{"restart", r}, {"start_ratio", res.start_ratios.back()},
                 {"pair", ops.kind1 + "/" + ops.kind2}};
    res.report.rows.push_back(std::move(row));
    if (cur == 0.0)
      res.report.excluded.push_back({{"restart", r}, {"reason", "ratio vanished at every start"}});
  }
  res.best_ratio = best;
  if (!best_x.empty()) {
    res.best_b = to_b(best_x);
    const auto nu = bloom_weight(mu, lam, 2.0);
    res.bmo = bmo_prod_mode(res.best_b, nu, c.mode);
    const auto M = assemble_matrix(nested_commutator(ops.t1, res.best_b, ops.t2));
    res.norm = all_zero(M) ? 0.0 : operator_norm_p2(M, mu, lam).value;
  }
  for (std::size_t q = 1; q < res.trace.size(); ++q)
    if (res.trace[q] < res.trace[q - 1]) res.report.failures.push_back("trace decreased");
  json coeffs = json::array();
  for (double v : best_x) coeffs.push_back(v);
  res.report.summary = {{"best_ratio", res.best_ratio},
                        {"norm", res.norm},
                        {"bmo_prod", res.bmo.value},
                        {"bmo_cells", res.bmo.cells},
                        {"start_ratios", res.start_ratios},
                        {"scan_best", res.scan_best},
                        {"trace", res.trace},
                        {"coefficients", coeffs},
                        {"pair", ops.kind1 + "/" + ops.kind2}};
  return res;
}

ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& c) {
  if (name == "identities") return identity_suite(c);
  if (name == "bloom") return bloom_ratio(c);
  if (name == "lemmas") return lemma_suite(c);
  if (name == "duality") return duality_study(c);
  if (name == "norms") return norm_calibration(c);
  if (name == "lower-bound") return lower_bound_study(c);
  if (name == "extremize") return extremize_b(c).report;
  throw ConfigError("unknown experiment '" + name + "'");
}

}  // namespace bloomlab
