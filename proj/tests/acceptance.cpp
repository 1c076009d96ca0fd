// Acceptance run: one PASS/FAIL line per criterion.
//   acceptance [path-to-bloomlab-cli]

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "bloomlab/commutators.hpp"
#include "bloomlab/experiments.hpp"
#include "bloomlab/lower_bound.hpp"
#include "bloomlab/paraproducts.hpp"
#include "support.hpp"

using namespace bloomlab;
using testsupport::haar2;
using testsupport::random_function;
using testsupport::random_weight;

namespace {

struct Outcome {
  bool ok = true;
  std::string note;
  void require(bool cond, const std::string& what) {
    if (!cond && ok) note = what;
    ok = ok && cond;
  }
};

int failed = 0;

void criterion(int id, const char* name, double limit_s, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.ok = false;
    o.note = std::string("exception: ") + e.what();
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0 && s > limit_s) o.require(false, "runtime over limit");
  std::printf("%s %2d %s (%.2f s)%s%s\n", o.ok ? "PASS" : "FAIL", id, name, s,
              o.note.empty() ? "" : ": ", o.note.c_str());
  std::fflush(stdout);
  failed += !o.ok;
}

std::string str(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// top singular value of D_l^{1/2} M D_m^{-1/2}
double dense_norm(const kernels::DenseMatrix& m, const Weight& mu, const Weight& lam) {
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

double ap_1d(const GridLine& w, double p) {
  const double pp = p / (p - 1.0);
  double best = 0.0;
  for (const auto& I : intervals_up_to(w.depth)) {
    double s = 0.0, d = 0.0;
    const int a = I.first_cell(w.depth), n = I.cell_count(w.depth);
    for (int i = a; i < a + n; ++i) {
      s += w[i];
      d += std::pow(w[i], 1.0 - pp);
    }
    best = std::max(best, (s / n) * std::pow(d / n, p - 1.0));
  }
  return best;
}

// every nonempty subset of the 16 cells at depth 2
double prod_bmo_brute(const GridFunction& b, const Weight& nu) {
  const int L = b.depth(), n = b.side(), cells = n * n;
  std::vector<std::pair<unsigned, double>> terms;
  for (const auto& I : active_intervals(L))
    for (const auto& J : active_intervals(L)) {
      const double c = inner(b, haar2(I, J, L));
      unsigned mask = 0;
      for (int i = I.first_cell(L); i < I.first_cell(L) + I.cell_count(L); ++i)
        for (int j = J.first_cell(L); j < J.first_cell(L) + J.cell_count(L); ++j)
          mask |= 1u << (i * n + j);
      terms.emplace_back(mask, c * c / nu.average({I, J}));
    }
  double best = 0.0;
  for (unsigned set = 1; set < (1u << cells); ++set) {
    double mass = 0.0, s = 0.0;
    for (int c = 0; c < cells; ++c)
      if (set >> c & 1) mass += nu(c / n, c % n) * b.cell_area();
    for (const auto& [m, v] : terms)
      if ((m & set) == m) s += v;
    best = std::max(best, std::sqrt(s / mass));
  }
  return best;
}

// weak L^p(lambda) quasinorm of F on cells, by every level |F(x)|
double weak_brute(const std::vector<double>& F, const std::vector<double>& mass, double p) {
  double best = 0.0;
  for (double t : F) {
    t = std::abs(t);
    if (t == 0.0) continue;
    double m = 0.0;
    for (std::size_t i = 0; i < F.size(); ++i)
      if (std::abs(F[i]) >= t) m += mass[i];
    best = std::max(best, t * std::pow(m, 1.0 / p));
  }
  return best;
}

double gamma_brute(const GridFunction& b, const Weight& mu, const Weight& lam, int k, double p,
                   const DyadicRectangle& R, const DyadicRectangle& P, const std::vector<int>& A) {
  const int N = b.side();
  const double h = 1.0 / N;
  auto inside = [&](const DyadicRectangle& Q, double x1, double x2) {
    return x1 >= Q.ix.left() && x1 < Q.ix.right() && x2 >= Q.jy.left() && x2 < Q.jy.right();
  };
  std::vector<double> F, m;
  double muR = 0.0;
  for (int xi = 0; xi < N; ++xi)
    for (int xj = 0; xj < N; ++xj) {
      const double x1 = (xi + 0.5) * h, x2 = (xj + 0.5) * h;
      double s = 0.0;
      if (inside(P, x1, x2))
        for (int a : A) {
          const int yi = a / N, yj = a % N;
          const double y1 = (yi + 0.5) * h, y2 = (yj + 0.5) * h;
          s += std::pow(b(xi, xj) - b(yi, yj), k) / ((x1 - y1) * (x2 - y2)) * h * h;
        }
      F.push_back(s);
      m.push_back(lam(xi, xj) * h * h);
      if (inside(R, x1, x2)) muR += mu(xi, xj) * h * h;
    }
  return std::pow(muR, -1.0 / p) * weak_brute(F, m, p);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  const std::string cli = argc > 1 ? argv[1] : "";

  criterion(1, "resolution of identity and Plancherel", 10.0, [](Outcome& o) {
    double worst_rt = 0.0, worst_pl = 0.0;
    for (int s = 0; s < 200; ++s) {
      const int L = 1 + s % 5;
      const auto f = random_function(L, 1000 + s, 1.0 + s % 7);
      const auto spec = analyze(f);
      worst_rt = std::max(worst_rt, sup_distance(synthesize(spec), f));
      double e = 0.0;
      for (double v : f.values()) e += v * v * f.cell_area();
      double c = 0.0;
      for (double v : spec.raw()) c += v * v;
      worst_pl = std::max(worst_pl, std::abs(e - c));
    }
    o.require(worst_rt <= 1e-12, "round trip error " + str(worst_rt));
    o.require(worst_pl <= 1e-12, "Plancherel error " + str(worst_pl));
    o.note = o.ok ? "max round trip " + str(worst_rt) + ", max energy gap " + str(worst_pl) : o.note;
  });

  criterion(2, "product decompositions", 30.0, [](Outcome& o) {
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
      const auto b = random_function(4, 2000 + 2 * s, 3.0), f = random_function(4, 2001 + 2 * s);
      for (auto m : {ExpansionMode::bi, ExpansionMode::param1, ExpansionMode::param2})
        worst = std::max(worst, decompose_product(b, f, m).residual_sup);
    }
    o.require(worst <= 1e-12, "residual " + str(worst));
    if (o.ok) o.note = "max residual " + str(worst);
  });

  criterion(3, "commutator decompositions", 300.0, [](Outcome& o) {
    const int L = 4;
    double worst = 0.0;
    const DecompositionCase cases[] = {DecompositionCase::shift_shift, DecompositionCase::pi_pi,
                                       DecompositionCase::mixed_shift_pi,
                                       DecompositionCase::pi_pi_dual};
    for (auto c : cases)
      for (int t = 0; t < 25; ++t) {
        Rng rng = Rng::split(3, static_cast<std::uint64_t>(c), t);
        auto shift = [&](int axis) {
          const int a = rng.below(3), b = rng.below(3);
          return gen_shift(axis, a, b, L, rng.next());
        };
        auto para = [&](int axis, ParaForm form) { return gen_paraproduct(axis, form, L, rng.next()); };
        AxisSpec u1, u2;
        switch (c) {
          case DecompositionCase::shift_shift: u1 = shift(1); u2 = shift(2); break;
          case DecompositionCase::pi_pi: u1 = para(1, ParaForm::direct); u2 = para(2, ParaForm::direct); break;
          case DecompositionCase::mixed_shift_pi: u1 = shift(1); u2 = para(2, ParaForm::direct); break;
          case DecompositionCase::pi_pi_dual: u1 = para(1, ParaForm::dual); u2 = para(2, ParaForm::direct); break;
        }
        const auto b = random_function(L, rng.next(), 2.0), f = random_function(L, rng.next());
        const auto r = verify_decomposition(c, b, u1, u2, f);
        worst = std::max(worst, r.residual_sup);
        o.require(r.residual_sup <= 1e-10, std::string(to_string(c)) + " residual " + str(r.residual_sup));
      }
    if (o.ok) o.note = "max residual " + str(worst);
  });

  criterion(4, "E-term identity and telescoping", 0.0, [](Outcome& o) {
    const int L = 3;
    double worst = 0.0;
    for (std::uint64_t s = 1; s <= 5; ++s) {
      const auto sp1 = gen_shift(1, 1 + s % 2, s % 3, L, 10 + s), sp2 = gen_shift(2, s % 2, 1, L, 20 + s);
      const auto b = random_function(L, 30 + s), f = random_function(L, 40 + s);
      const auto S1 = make_shift(sp1, L), S2 = make_shift(sp2, L);
      const auto W = paraproduct(ParaproductKind::W, b, S2(f));
      const double d = sup_distance(S1(W), e_term_shift(b, sp1, sp2, 1, 2)(f));
      o.require(d <= 1e-12, "S1 W S2 vs (S1S2)^{b,1,2}: " + str(d));
      worst = std::max(worst, d);
      // one pair of shift coefficients at a time
      for (const auto& [k1, a1] : sp1.coeffs)
        for (const auto& [k2, a2] : sp2.coeffs) {
          const ShiftSpec one1{1, sp1.k1, sp1.k2, {{k1, a1}}}, one2{2, sp2.k1, sp2.k2, {{k2, a2}}};
          const double alt = b.average({k1.I1, k2.I2}) - b.average({k1.I1, k2.I1}) -
                             b.average({k1.I2, k2.I2}) + b.average({k1.I2, k2.I1});
          const auto expect = (alt * a1 * a2 * inner(f, haar2(k1.I1, k2.I1, L))) * haar2(k1.I2, k2.I2, L);
          const double e1 = sup_distance(shift_e_term(b, one1, one2, f), expect);
          const double e2 = sup_distance(shift_e_term_telescoped(b, one1, one2, f), expect);
          worst = std::max({worst, e1, e2});
          o.require(e1 <= 1e-12 && e2 <= 1e-12, "term mismatch " + str(std::max(e1, e2)));
        }
    }
    if (o.ok) o.note = "max error " + str(worst);
  });

  criterion(5, "auxiliary square function identity", 0.0, [](Outcome& o) {
    double worst = 0.0;
    for (std::uint64_t s = 1; s <= 40; ++s) {
      const int L = 1 + static_cast<int>(s % 5);
      const auto f = random_function(L, 500 + s, 2.0);
      const auto full = square_function(SquareKind::full, f);
      worst = std::max({worst, sup_distance(square_function(SquareKind::x1, aux_phi(f, 1)), full),
                        sup_distance(square_function(SquareKind::x2, aux_phi(f, 2)), full)});
    }
    o.require(worst <= 1e-12, "pointwise error " + str(worst));
    if (o.ok) o.note = "max error " + str(worst);
  });

  criterion(6, "calibration norms", 0.0, [](Outcome& o) {
    double worst_cal = 0.0, worst_rel = 0.0;
    int instances = 0;
    for (int L = 1; L <= 5; ++L) {
      const int n = 1 << (2 * L);
      const auto one = Weight::uniform(L);
      const auto mu = random_weight(L, 60 + L), lam = random_weight(L, 70 + L);
      auto both = [&](const kernels::DenseMatrix& M, const Weight& m, const Weight& l,
                      std::optional<double> expected) {
        const double est = operator_norm_p2(M, m, l).value;
        const double ref = dense_norm(M, m, l);
        ++instances;
        const double rel = std::abs(est - ref) / ref;
        worst_rel = std::max(worst_rel, rel);
        o.require(rel <= 1e-6, "oracle gap " + str(rel) + " at depth " + std::to_string(L));
        if (expected) {
          const double e = std::abs(est - *expected);
          worst_cal = std::max(worst_cal, e);
          o.require(e <= 1e-8, "calibration error " + str(e) + " at depth " + std::to_string(L));
        }
      };
      kernels::DenseMatrix id(n, n), mm(n, n);
      for (int i = 0; i < n; ++i) id(i, i) = 1.0;
      both(id, one, one, 1.0);
      Rng rng(80 + L);
      GridFunction m(L);
      for (double& v : m.values()) v = rng.uniform(-1.0, 1.0);
      m.values()[static_cast<std::size_t>(rng.below(n))] = -1.5;
      for (int i = 0; i < n; ++i) mm(i, i) = m.values()[static_cast<std::size_t>(i)];
      both(mm, one, one, 1.5);
      if (L >= 2) {
        const auto full = gen_shift(1, 1, 1, L, 90 + L);
        const auto& [key, a] = *full.coeffs.begin();
        const ShiftSpec single{1, 1, 1, {{key, a}}};
        both(assemble_matrix(make_shift(single, L)), one, one, std::abs(a));
        both(assemble_matrix(compose(make_shift(full, L), multiplication(random_function(L, 95 + L)))),
             mu, lam, std::nullopt);
      }
      both(assemble_matrix(nested_commutator(make_paraproduct(gen_paraproduct(1, ParaForm::direct, L, L), L),
                                             random_function(L, 99 + L),
                                             make_paraproduct(gen_paraproduct(2, ParaForm::dual, L, L), L))),
           mu, lam, std::nullopt);
    }
    if (o.ok)
      o.note = std::to_string(instances) + " instances, max calibration error " + str(worst_cal) +
               ", max oracle gap " + str(worst_rel);
  });

  criterion(7, "weights", 0.0, [](Outcome& o) {
    for (int L = 1; L <= 4; ++L)
      for (double p : {1.5, 2.0, 3.0})
        o.require(ap_characteristic(Weight::uniform(L), p) == 1.0, "[1]_Ap != 1");
    double worst_f = 0.0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
      AxisWeightSpec a{AxisWeightSpec::Kind::haar_perturbation, 1.0, 0.0, 0.6, 3};
      AxisWeightSpec b{AxisWeightSpec::Kind::power, 1.0, 0.1 * (s % 5), 0.0, 0};
      for (double p : {1.5, 2.0, 3.0}) {
        const auto g1 = gen_axis_profile(a, 4, p, s), g2 = gen_axis_profile(b, 4, p, 0);
        const Weight w(GridFunction::tensor(g1, g2));
        const double e = std::abs(ap_characteristic(w, p) - ap_1d(g1, p) * ap_1d(g2, p));
        worst_f = std::max(worst_f, e);
      }
    }
    o.require(worst_f <= 1e-10, "factorization error " + str(worst_f));
    double slack = 1e300;
    for (std::uint64_t s = 1; s <= 50; ++s) {
      const auto mu = random_weight(3, 700 + s, 2.0), lam = random_weight(3, 800 + s, 2.0);
      for (double p : {1.5, 2.0, 4.0})
        for (int k : {1, 2}) slack = std::min(slack, holder_chain_min_slack(mu, lam, p, k));
    }
    o.require(slack >= -1e-12, "Hoelder slack " + str(slack));
    if (o.ok) o.note = "factorization error " + str(worst_f) + ", min Hoelder slack " + str(slack);
  });

  criterion(8, "product BMO", 0.0, [](Outcome& o) {
    double worst = 0.0;
    for (std::uint64_t s = 1; s <= 50; ++s) {
      const auto b = random_function(2, 900 + s, 1.0 + s % 3);
      const auto nu = s % 5 == 0 ? Weight::uniform(2) : random_weight(2, 950 + s, 0.8);
      const double ex = bmo_prod(b, nu, ProdMode::exact).value;
      const double gr = bmo_prod(b, nu, ProdMode::greedy).value;
      const double re = bmo_prod(b, nu, ProdMode::rect).value;
      const double e = std::abs(ex - prod_bmo_brute(b, nu));
      worst = std::max(worst, e);
      o.require(e <= 1e-12, "exact vs brute force " + str(e));
      o.require(ex >= gr && gr >= re, "mode ordering violated");
    }
    const auto one = Weight::uniform(2);
    for (const auto& I : active_intervals(2))
      for (const auto& J : active_intervals(2)) {
        const double expect = 1.0 / std::sqrt(I.length() * J.length());
        for (auto m : {ProdMode::exact, ProdMode::greedy, ProdMode::rect})
          o.require(std::abs(bmo_prod(haar2(I, J, 2), one, m).value - expect) <= 1e-12 * expect,
                    "single coefficient value");
      }
    if (o.ok) o.note = "max brute-force gap " + str(worst);
  });

  criterion(9, "lower bound functional", 0.0, [](Outcome& o) {
    const KernelSpec kern{};
    const auto mu3 = random_weight(3, 1), lam3 = random_weight(3, 2);
    for (int k : {1, 2}) {
      const auto c = gamma(kern, GridFunction(3, 0.7), mu3, lam3, k, 2.0);
      o.require(c.gamma == 0.0 && c.bmo_value == 0.0, "constant b not zero");
    }
    const auto b3 = random_function(3, 3);
    for (int k : {1, 2, 3}) {
      const double g = gamma(kern, b3, mu3, lam3, k, 2.0).gamma;
      for (double s : {-2.0, 0.25, 5.0}) {
        const double gs = gamma(kern, s * b3, mu3, lam3, k, 2.0).gamma;
        o.require(std::abs(gs - std::pow(std::abs(s), k) * g) <= 1e-10 * std::max(1.0, gs),
                  "homogeneity k=" + std::to_string(k));
      }
    }
    for (int L = 1; L <= 2; ++L)
      for (std::uint64_t s = 1; s <= 20; ++s) {
        const auto f = random_function(L, 40 + s);
        for (const auto& Q : all_rectangles(L)) {
          const double a = median(f, Q);
          int le = 0, ge = 0, n = 0;
          for (int i = Q.ix.first_cell(L); i < Q.ix.first_cell(L) + Q.ix.cell_count(L); ++i)
            for (int j = Q.jy.first_cell(L); j < Q.jy.first_cell(L) + Q.jy.cell_count(L); ++j) {
              ++n;
              le += f(i, j) <= a;
              ge += f(i, j) >= a;
            }
          o.require(2 * le >= n && 2 * ge >= n, "median mass condition");
        }
      }
    for (std::uint64_t s = 1; s <= 10; ++s) {
      const auto f = random_function(2, 60 + s);
      const auto m = random_weight(2, 70 + s), l = random_weight(2, 80 + s);
      for (int k : {1, 2})
        for (double p : {2.0, 3.0}) {
          const auto rep = gamma(kern, f, m, l, k, p);
          const auto& w = *rep.witness;
          const double brute = gamma_brute(f, m, l, k, p, w.partner.base, w.partner.partner, w.cells);
          o.require(std::abs(rep.gamma - brute) <= 1e-10 * (1 + brute), "weak-type formula vs brute force");
        }
    }
    double lo = 1e300, hi = 0.0;
    for (std::uint64_t s = 1; s <= 25; ++s) {
      const auto b = random_function(3, 100 + s);
      const auto mu = random_weight(3, 200 + s, 1.5), lam = random_weight(3, 300 + s, 1.5);
      for (int k : {1, 2}) {
        const auto r = check_lower_bound(kern, b, mu, lam, k, 2.0);
        o.require(!r.degenerate && std::isfinite(r.ratio) && r.ratio > 0.0, "ratio not finite");
        o.require(r.witness.has_value() && r.bmo_witness.has_value(), "missing witness");
        lo = std::min(lo, r.ratio);
        hi = std::max(hi, r.ratio);
      }
    }
    if (o.ok) o.note = "ratio range [" + str(lo) + ", " + str(hi) + "] over 50 runs";
  });

  criterion(10, "Bloom ratio study", 600.0, [](Outcome& o) {
    ExperimentConfig c;
    c.depth = 4;
    c.p = 2.0;
    c.trials = 200;
    c.seed = 1;
    const auto r = bloom_ratio(c);
    o.require(r.passed(), r.failures.empty() ? "" : r.failures.front());
    o.require(r.rows.size() + r.excluded.size() == 200u, "trials lost");
    o.require(!r.rows.empty(), "no rows");
    bool shifts = false, paras = false;
    double sup = 0.0;
    for (const auto& row : r.rows) {
      o.require(std::isfinite(row.value), "non-finite ratio");
      o.require(row.extra["b_scaling_residual"].get<double>() <= 1e-10, "b scaling residual");
      o.require(*row.mu_ap <= 16.0 && *row.lambda_ap <= 16.0, "weight characteristic over 16");
      o.require(std::max({row.k1, row.k2, row.v1, row.v2}) <= 2, "complexity over 2");
      const auto d = row.extra.dump();
      shifts = shifts || d.find("shift") != std::string::npos;
      paras = paras || d.find("paraproduct") != std::string::npos;
      sup = std::max(sup, row.value);
    }
    o.require(shifts && paras, "operator families not both sampled");
    o.require(r.summary.contains("table") && !r.summary["table"].empty(), "no sup-ratio table");
    if (o.ok)
      o.note = std::to_string(r.rows.size()) + " rows, " + std::to_string(r.excluded.size()) +
               " excluded, sup ratio " + str(sup);
  });

  criterion(11, "reproducible artifacts", 0.0, [&cli](Outcome& o) {
    ExperimentConfig c;
    c.depth = 2;
    c.trials = 3;
    c.seed = 5;
    for (const char* name :
         {"identities", "lemmas", "bloom", "lower-bound", "extremize", "duality", "norms"}) {
      const auto a = run_experiment(name, c), b = run_experiment(name, c);
      o.require(to_json(a).dump() == to_json(b).dump() && to_csv(a) == to_csv(b),
                std::string(name) + " report differs between runs");
    }
    if (cli.empty()) {
      o.note = "library reports only (no CLI path given)";
      return;
    }
    const auto dir = std::filesystem::temp_directory_path() / "bloomlab_acceptance";
    std::filesystem::create_directories(dir);
    for (const char* name :
         {"identities", "lemmas", "bloom", "lower-bound", "extremize", "duality", "norms"}) {
      std::string out[2];
      for (int r = 0; r < 2; ++r) {
        const auto base = dir / (std::string(name) + std::to_string(r));
        const std::string cmd = "\"" + cli + "\" " + name +
                                " --depth 2 --trials 3 --seed 5 --reproducible --out \"" +
                                base.string() + ".json\" --csv \"" + base.string() + ".csv\" 2>/dev/null";
        o.require(std::system(cmd.c_str()) == 0, std::string(name) + " exited nonzero");
        out[r] = slurp(base.string() + ".json") + "\n--\n" + slurp(base.string() + ".csv");
      }
      o.require(out[0] == out[1], std::string(name) + " artifacts differ");
    }
    std::filesystem::remove_all(dir);
  });

  return failed == 0 ? 0 : 1;
}
