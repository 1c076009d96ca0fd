#include "bloomlab/lower_bound.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bloomlab/kernels.hpp"
#include "bloomlab/rng.hpp"

namespace bloomlab {

double kernel_eval(const KernelSpec& k, Point x, Point y) {
  if (k.kind == KernelSpec::Kind::product_riesz)
    require(k.i == 1 && k.j == 1, "only the first Riesz component exists in one variable");
  const double d1 = x.x1 - y.x1, d2 = x.x2 - y.x2;
  if (d1 == 0.0 || d2 == 0.0) throw DomainError("kernel evaluated on a singular configuration");
  return k.sign / (d1 * d2);
}

namespace {

Point centre(int i, int j, int L) {
  const double w = std::ldexp(1.0, -L);
  return {(i + 0.5) * w, (j + 0.5) * w};
}

struct CellRange {
  int i0, ni, j0, nj;
};

CellRange cells_of(const DyadicRectangle& R, int L) {
  return {R.ix.first_cell(L), R.ix.cell_count(L), R.jy.first_cell(L), R.jy.cell_count(L)};
}

std::vector<int> flat_cells(const DyadicRectangle& R, int L) {
  const auto c = cells_of(R, L);
  std::vector<int> out;
  for (int i = c.i0; i < c.i0 + c.ni; ++i)
    for (int j = c.j0; j < c.j0 + c.nj; ++j) out.push_back(i * (1 << L) + j);
  return out;
}

bool fits(const DyadicInterval& I, int shift) {
  const int idx = I.index + shift;
  return idx >= 0 && idx < (1 << I.level);
}

double ipow(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= x;
  return r;
}

// same evaluation as weak_lp_norm, on (|value|, mass) pairs
double weak_norm(std::vector<std::pair<double, double>> vals, double p) {
  std::erase_if(vals, [](const auto& v) { return v.first == 0.0; });
  std::sort(vals.begin(), vals.end(), [](auto& a, auto& b) { return a.first > b.first; });
  double mass = 0.0, best = 0.0;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    mass += vals[k].second;
    if (k + 1 == vals.size() || vals[k + 1].first < vals[k].first)
      best = std::max(best, vals[k].first * std::pow(mass, 1.0 / p));
  }
  return best;
}

std::vector<DyadicRectangle> admissible(int L) {
  std::vector<DyadicRectangle> out;
  for (const auto& R : all_rectangles(L))
    if (has_partner(R)) out.push_back(R);
  return out;
}

struct Scan {
  double value = 0.0;
  GammaWitness witness;
};

// Best A in the family for one rectangle. Family order: sublevel sets by
// ascending threshold, superlevel sets by ascending threshold, random sets.
Scan scan_rectangle(const KernelSpec& kern, const GridFunction& b, const Weight& mu,
                    const Weight& lambda, int k, double p, const DyadicRectangle& R,
                    std::size_t rect_id, const GammaOptions& opt, bool want_witness) {
  const int L = b.depth();
  const int n = 1 << L;
  const auto pc = find_partner(R, kern, L);
  const auto ys = flat_cells(R, L);
  const auto xs = flat_cells(pc.partner, L);
  const double area = b.cell_area();
  const auto bv = b.values();
  const auto lv = lambda.function().values();
  const double norm = std::pow(mu.measure(R), -1.0 / p);

  // contribution of y to F(x)
  std::vector<double> contrib(xs.size() * ys.size());
  for (std::size_t a = 0; a < xs.size(); ++a)
    for (std::size_t c = 0; c < ys.size(); ++c) {
      const int x = xs[a], y = ys[c];
      contrib[a * ys.size() + c] = ipow(bv[x] - bv[y], k) *
                                   kernel_eval(kern, centre(x / n, x % n, L),
                                               centre(y / n, y % n, L)) *
                                   area;
    }
  auto evaluate = [&](const std::vector<double>& F) {
    std::vector<std::pair<double, double>> vals;
    for (std::size_t a = 0; a < xs.size(); ++a)
      vals.emplace_back(std::abs(F[a]), lv[xs[a]] * area);
    return norm * weak_norm(std::move(vals), p);
  };

  std::vector<std::size_t> order(ys.size());
  for (std::size_t c = 0; c < ys.size(); ++c) order[c] = c;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t u, std::size_t v) { return bv[ys[u]] < bv[ys[v]]; });

  Scan best;
  best.value = -1.0;
  auto consider = [&](double v, const char* fam, double t, auto members) {
    if (v > best.value) {
      best.value = v;
      if (want_witness) {
        best.witness.family = fam;
        best.witness.threshold = t;
        best.witness.cells = members();
        std::sort(best.witness.cells.begin(), best.witness.cells.end());
      }
    }
  };

  // sublevel: grow from the smallest values
  std::vector<double> F(xs.size(), 0.0);
  for (std::size_t m = 0; m < order.size(); ++m) {
    for (std::size_t a = 0; a < xs.size(); ++a) F[a] += contrib[a * ys.size() + order[m]];
    const double t = bv[ys[order[m]]];
    if (m + 1 < order.size() && bv[ys[order[m + 1]]] == t) continue;
    consider(evaluate(F), "sublevel", t, [&] {
      std::vector<int> s;
      for (std::size_t q = 0; q <= m; ++q) s.push_back(ys[order[q]]);
      return s;
    });
  }
  // superlevel {b >= t}, t ascending: shrink from the full set
  std::vector<double> G(xs.size(), 0.0);
  std::vector<std::vector<double>> suffix;
  std::vector<std::size_t> starts;
  for (std::size_t m = order.size(); m-- > 0;) {
    for (std::size_t a = 0; a < xs.size(); ++a) G[a] += contrib[a * ys.size() + order[m]];
    if (m > 0 && bv[ys[order[m - 1]]] == bv[ys[order[m]]]) continue;
    suffix.push_back(G);
    starts.push_back(m);
  }
  for (std::size_t q = suffix.size(); q-- > 0;) {
    const std::size_t m = starts[q];
    consider(evaluate(suffix[q]), "superlevel", bv[ys[order[m]]], [&] {
      std::vector<int> s;
      for (std::size_t r = m; r < order.size(); ++r) s.push_back(ys[order[r]]);
      return s;
    });
  }
  if (opt.random_subsets > 0) {
    Rng rng = Rng::split(opt.seed, 0x6a, rect_id);
    for (int r = 0; r < opt.random_subsets; ++r) {
      std::vector<char> in(ys.size());
      for (auto& v : in) v = static_cast<char>(rng.next() >> 63);
      std::vector<double> H(xs.size(), 0.0);
      for (std::size_t a = 0; a < xs.size(); ++a)
        for (std::size_t c = 0; c < ys.size(); ++c)
          if (in[c]) H[a] += contrib[a * ys.size() + c];
      consider(evaluate(H), "random", 0.0, [&] {
        std::vector<int> s;
        for (std::size_t c = 0; c < ys.size(); ++c)
          if (in[c]) s.push_back(ys[c]);
        return s;
      });
    }
  }
  best.witness.partner = pc;
  return best;
}

double rel_slack(double small, double big) {
  return (big - small) / std::max({1.0, std::abs(small), std::abs(big)});
}

}  // namespace

bool has_partner(const DyadicRectangle& R) {
  return (fits(R.ix, 2) || fits(R.ix, -2)) && (fits(R.jy, 2) || fits(R.jy, -2));
}

PartnerCertificate find_partner(const DyadicRectangle& R, const KernelSpec& k, int depth) {
  require(R.ix.valid(depth) && R.jy.valid(depth), "rectangle not on the grid");
  const auto yc = cells_of(R, depth);
  PartnerCertificate best;
  bool found = false;
  for (int d1 : {2, -2})
    for (int d2 : {2, -2}) {
      if (!fits(R.ix, d1) || !fits(R.jy, d2)) continue;
      const DyadicRectangle P{{R.ix.level, R.ix.index + d1}, {R.jy.level, R.jy.index + d2}};
      const auto xc = cells_of(P, depth);
      double lo_pos = std::numeric_limits<double>::infinity();
      double lo_neg = lo_pos;
      for (int xi = xc.i0; xi < xc.i0 + xc.ni; ++xi)
        for (int xj = xc.j0; xj < xc.j0 + xc.nj; ++xj)
          for (int yi = yc.i0; yi < yc.i0 + yc.ni; ++yi)
            for (int yj = yc.j0; yj < yc.j0 + yc.nj; ++yj) {
              const double v =
                  kernel_eval(k, centre(xi, xj, depth), centre(yi, yj, depth)) * R.area();
              lo_pos = std::min(lo_pos, v);
              lo_neg = std::min(lo_neg, -v);
            }
      const int sigma = lo_pos >= lo_neg ? 1 : -1;
      const double c = std::max(lo_pos, lo_neg);
      if (!found || c > best.constant) {
        best = {R, P, sigma, c};
        found = true;
      }
    }
  if (!found) throw DomainError("no diagonal translate of " + to_string(R) + " fits in the unit square");
  return best;
}

double median(const GridFunction& b, const DyadicRectangle& R) {
  std::vector<double> v;
  for (int c : flat_cells(R, b.depth())) v.push_back(b.values()[c]);
  std::sort(v.begin(), v.end());
  return v[(v.size() - 1) / 2];
}

double gamma_value(const KernelSpec& kern, const GridFunction& b, const Weight& mu,
                   const Weight& lambda, int k, double p, const PartnerCertificate& pc,
                   const std::vector<int>& cells) {
  const int L = b.depth();
  const int n = 1 << L;
  GridFunction F(L);
  const auto xs = flat_cells(pc.partner, L);
  for (int x : xs) {
    double s = 0.0;
    for (int y : cells)
      s += ipow(b.values()[x] - b.values()[y], k) *
           kernel_eval(kern, centre(x / n, x % n, L), centre(y / n, y % n, L)) * b.cell_area();
    F.values()[x] = s;
  }
  return std::pow(mu.measure(pc.base), -1.0 / p) * weak_lp_norm(F, lambda, p);
}

LowerBoundReport gamma(const KernelSpec& kern, const GridFunction& b, const Weight& mu,
                       const Weight& lambda, int k, double p, const GammaOptions& opt) {
  require(k >= 1, "k must be at least 1");
  require(p > 1.0, "p must exceed 1");
  b.check_same_depth(mu.function());
  b.check_same_depth(lambda.function());
  const auto rects = admissible(b.depth());
  if (rects.empty()) throw DomainError("no admissible rectangle at this depth");
  const auto scores = kernels::evaluate(rects.size(), [&](std::size_t r) {
    return scan_rectangle(kern, b, mu, lambda, k, p, rects[r], r, opt, false).value;
  });
  const auto best = kernels::reduce_max(scores);
  LowerBoundReport rep;
  rep.k = k;
  rep.p = p;
  rep.gamma = best.value;
  rep.witness = scan_rectangle(kern, b, mu, lambda, k, p, rects[best.index], best.index, opt,
                               true).witness;
  const auto nu = bloom_weight(mu, lambda, p).pow(1.0 / k);
  const auto bmo = bmo_little(b, nu);
  rep.bmo_value = bmo.value;
  rep.bmo_witness = bmo.rectangle;
  rep.degenerate = rep.gamma == 0.0;
  rep.ratio = rep.degenerate ? 0.0 : rep.bmo_value / std::pow(rep.gamma, 1.0 / k);
  return rep;
}

double holder_chain_min_slack(const Weight& mu, const Weight& lambda, double p, int k) {
  const auto nu = bloom_weight(mu, lambda, p);
  const double pp = p / (p - 1.0);
  const double apmu = ap_characteristic(mu, p);
  const RectangleIntegrals a(nu.pow(1.0 / k).function()), bi(nu.pow(-1.0).function()),
      lam(lambda.function()), mdual(mu.pow(1.0 - pp).function()), m(mu.function());
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& R : all_rectangles(mu.depth())) {
    const double nuinv = bi.average(R);
    const double s1 = rel_slack(1.0, std::pow(a.average(R), k) * nuinv);
    const double mid = std::pow(lam.average(R), 1.0 / p) * std::pow(mdual.average(R), 1.0 / pp);
    const double s2 = rel_slack(nuinv, mid);
    const double top = std::pow(apmu, 1.0 / p) * std::pow(m.average(R), -1.0 / p) *
                       std::pow(lam.average(R), 1.0 / p);
    const double s3 = rel_slack(mid, top);
    worst = std::min({worst, s1, s2, s3});
  }
  return worst;
}

LowerBoundReport check_lower_bound(const KernelSpec& kern, const GridFunction& b,
                                   const Weight& mu, const Weight& lambda, int k, double p,
                                   const GammaOptions& opt) {
  constexpr double tol = 1e-12;
  auto rep = gamma(kern, b, mu, lambda, k, p, opt);
  const int L = b.depth();
  const double area = b.cell_area();
  LowerBoundChecks ch;
  const double inf = std::numeric_limits<double>::infinity();
  ch.median_min_excess = ch.jensen_min_slack = ch.pointwise_min_slack = ch.weak_min_slack = inf;
  ch.holder_min_slack = holder_chain_min_slack(mu, lambda, p, k);
  auto fail = [](const std::string& what, const DyadicRectangle& R, double v) {
    throw StepFailure(what + " fails on " + to_string(R) + " (slack " + std::to_string(v) + ")");
  };
  if (ch.holder_min_slack < -tol) throw StepFailure("Hoelder chain fails");
  const int n = 1 << L;
  const auto bv = b.values();

  for (const auto& R : admissible(L)) {
    ++ch.rectangles;
    const auto pc = find_partner(R, kern, L);
    const double alpha = median(b, pc.partner);
    const auto xs = flat_cells(pc.partner, L);
    const auto ys = flat_cells(R, L);

    int le = 0, ge = 0;
    for (int x : xs) {
      le += bv[x] <= alpha;
      ge += bv[x] >= alpha;
    }
    const double excess = (std::min(le, ge) - 0.5 * static_cast<double>(xs.size())) * area;
    ch.median_min_excess = std::min(ch.median_min_excess, excess);
    if (excess < 0.0) fail("median mass condition", pc.partner, excess);

    double neg = 0.0, pos = 0.0, absd = 0.0, negk = 0.0, posk = 0.0;
    std::vector<int> below, above;
    for (int y : ys) {
      const double d = bv[y] - alpha;
      neg += std::max(-d, 0.0) * area;
      pos += std::max(d, 0.0) * area;
      absd += std::abs(d) * area;
      negk += ipow(std::max(-d, 0.0), k) * area;
      posk += ipow(std::max(d, 0.0), k) * area;
      if (bv[y] <= alpha) below.push_back(y);
      if (bv[y] >= alpha) above.push_back(y);
    }
    ch.tplus_max_residual = std::max(ch.tplus_max_residual, std::abs(neg + pos - absd));
    const double js = std::min(rel_slack(ipow(neg / R.area(), k), negk / R.area()),
                               rel_slack(ipow(pos / R.area(), k), posk / R.area()));
    ch.jensen_min_slack = std::min(ch.jensen_min_slack, js);
    if (js < -tol) fail("Jensen step", R, js);

    // x in partner on the opposite side of alpha from A
    auto side = [&](const std::vector<int>& A, bool x_above, double target, double sgn) {
      double good_mass = 0.0;
      for (int x : xs) {
        if (x_above ? bv[x] < alpha : bv[x] > alpha) continue;
        good_mass += lambda.function().values()[x] * area;
        double F = 0.0;
        for (int y : A)
          F += ipow(bv[x] - bv[y], k) *
               kernel_eval(kern, centre(x / n, x % n, L), centre(y / n, y % n, L)) * area;
        const double s = rel_slack(pc.constant * target, sgn * pc.sigma * F);
        ch.pointwise_min_slack = std::min(ch.pointwise_min_slack, s);
        if (s < -tol) fail("pointwise kernel bound", R, s);
      }
      const double lower = std::pow(mu.measure(R), -1.0 / p) * pc.constant * target *
                           std::pow(good_mass, 1.0 / p);
      const double g = A.empty() ? 0.0 : gamma_value(kern, b, mu, lambda, k, p, pc, A);
      const double s = std::min(rel_slack(lower, g), rel_slack(g, rep.gamma));
      ch.weak_min_slack = std::min(ch.weak_min_slack, s);
      if (s < -tol) fail("weak-type lower bound", R, s);
    };
    side(below, true, negk / R.area(), 1.0);
    side(above, false, posk / R.area(), k % 2 ? -1.0 : 1.0);

    ch.doubling_max =
        std::max(ch.doubling_max, lambda.measure(pc.partner) / lambda.measure(R));
  }
  if (ch.tplus_max_residual > 1e-12 * (1.0 + b.sup_norm())) throw StepFailure("t_+ algebra fails");
  rep.checks = ch;
  return rep;
}

nlohmann::json to_json(const LowerBoundReport& r) {
  nlohmann::json j;
  j["k"] = r.k;
  j["p"] = r.p;
  j["gamma"] = r.gamma;
  j["bmo_value"] = r.bmo_value;
  j["ratio"] = r.ratio;
  j["degenerate"] = r.degenerate;
  if (r.witness) {
    const auto& w = *r.witness;
    j["witness"] = {{"rectangle", to_string(w.partner.base)},
                    {"partner", to_string(w.partner.partner)},
                    {"sigma", w.partner.sigma},
                    {"constant", w.partner.constant},
                    {"family", w.family},
                    {"threshold", w.threshold},
                    {"cells", w.cells}};
  }
  if (r.bmo_witness) j["bmo_rectangle"] = to_string(*r.bmo_witness);
  if (r.checks) {
    const auto& c = *r.checks;
    j["checks"] = {{"rectangles", c.rectangles},
                   {"median_min_excess", c.median_min_excess},
                   {"holder_min_slack", c.holder_min_slack},
                   {"jensen_min_slack", c.jensen_min_slack},
                   {"pointwise_min_slack", c.pointwise_min_slack},
                   {"weak_min_slack", c.weak_min_slack},
                   {"tplus_max_residual", c.tplus_max_residual},
                   {"doubling_max", c.doubling_max}};
  }
  return j;
}

}  // namespace bloomlab
