#include "bloomlab/weights.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "bloomlab/kernels.hpp"
#include "bloomlab/rng.hpp"

namespace bloomlab {

Weight::Weight(GridFunction w) : w_(std::move(w)) {
  for (double v : w_.values())
    if (!(v > 0.0) || !std::isfinite(v))
      throw PreconditionError("weight values must be finite and strictly positive");
}

Weight Weight::uniform(int depth, double c) { return Weight(GridFunction(depth, c)); }

Weight Weight::pow(double e) const {
  GridFunction out = w_;
  for (double& v : out.values()) v = std::pow(v, e);
  return Weight(std::move(out));
}

RectangleIntegrals::RectangleIntegrals(const GridFunction& f) : depth_(f.depth()) {
  const int L = depth_;
  tables_.resize(static_cast<std::size_t>((L + 1) * (L + 1)));
  auto at = [&](int li, int lj) -> std::vector<double>& {
    return tables_[static_cast<std::size_t>(li * (L + 1) + lj)];
  };
  auto& finest = at(L, L);
  finest.assign(f.values().begin(), f.values().end());
  for (double& v : finest) v *= f.cell_area();
  for (int li = L; li >= 0; --li) {
    if (li < L) {
      const auto& src = at(li + 1, L);
      auto& dst = at(li, L);
      const int cols = 1 << L;
      dst.assign(static_cast<std::size_t>((1 << li) * cols), 0.0);
      for (int i = 0; i < (1 << li); ++i)
        for (int j = 0; j < cols; ++j)
          dst[static_cast<std::size_t>(i * cols + j)] =
              src[static_cast<std::size_t>(2 * i * cols + j)] +
              src[static_cast<std::size_t>((2 * i + 1) * cols + j)];
    }
    for (int lj = L - 1; lj >= 0; --lj) {
      const auto& src = at(li, lj + 1);
      auto& dst = at(li, lj);
      const int sc = 1 << (lj + 1), dc = 1 << lj;
      dst.assign(static_cast<std::size_t>((1 << li) * dc), 0.0);
      for (int i = 0; i < (1 << li); ++i)
        for (int j = 0; j < dc; ++j)
          dst[static_cast<std::size_t>(i * dc + j)] =
              src[static_cast<std::size_t>(i * sc + 2 * j)] +
              src[static_cast<std::size_t>(i * sc + 2 * j + 1)];
    }
  }
}

double RectangleIntegrals::integral(const DyadicRectangle& R) const {
  const int L = depth_;
  const auto& t = tables_[static_cast<std::size_t>(R.ix.level * (L + 1) + R.jy.level)];
  return t[static_cast<std::size_t>(R.ix.index * (1 << R.jy.level) + R.jy.index)];
}

double ap_characteristic(const Weight& w, double p) {
  require(p > 1.0, "A_p needs p > 1");
  const double pp = p / (p - 1.0);
  const RectangleIntegrals iw(w.function());
  const RectangleIntegrals idual(w.pow(1.0 - pp).function());
  const auto rects = all_rectangles(w.depth());
  const auto best = kernels::argmax(rects.size(), [&](std::size_t k) {
    const auto& R = rects[k];
    return iw.average(R) * std::pow(idual.average(R), p - 1.0);
  });
  return best.value;
}

Weight bloom_weight(const Weight& mu, const Weight& lambda, double p) {
  mu.function().check_same_depth(lambda.function());
  require(p > 0.0, "p must be positive");
  GridFunction nu(mu.depth());
  for (int i = 0; i < nu.side(); ++i)
    for (int j = 0; j < nu.side(); ++j)
      nu(i, j) = std::pow(mu(i, j), 1.0 / p) * std::pow(lambda(i, j), -1.0 / p);
  return Weight(std::move(nu));
}

double lp_norm(const GridFunction& f, const Weight& w, double p) {
  require(p >= 1.0, "L^p needs p >= 1");
  f.check_same_depth(w.function());
  auto fv = f.values();
  auto wv = w.function().values();
  double s = 0.0;
  for (std::size_t k = 0; k < fv.size(); ++k) s += std::pow(std::abs(fv[k]), p) * wv[k];
  return std::pow(s * f.cell_area(), 1.0 / p);
}

double weak_lp_norm(const GridFunction& f, const Weight& w, double p) {
  require(p >= 1.0, "weak L^p needs p >= 1");
  f.check_same_depth(w.function());
  auto fv = f.values();
  auto wv = w.function().values();
  std::vector<std::pair<double, double>> vals;  // (|f|, w * area)
  for (std::size_t k = 0; k < fv.size(); ++k)
    if (std::abs(fv[k]) > 0.0) vals.emplace_back(std::abs(fv[k]), wv[k] * f.cell_area());
  std::sort(vals.begin(), vals.end(), [](auto& a, auto& b) { return a.first > b.first; });
  double mass = 0.0, best = 0.0;
  for (std::size_t k = 0; k < vals.size(); ++k) {
    mass += vals[k].second;
    // evaluate once all cells sharing this value are counted
    if (k + 1 == vals.size() || vals[k + 1].first < vals[k].first)
      best = std::max(best, vals[k].first * std::pow(mass, 1.0 / p));
  }
  return best;
}

BmoCertificate bmo_little(const GridFunction& b, const Weight& nu) {
  b.check_same_depth(nu.function());
  const RectangleIntegrals ib(b), inu(nu.function());
  const auto rects = all_rectangles(b.depth());
  const int L = b.depth();
  const auto best = kernels::argmax(rects.size(), [&](std::size_t k) {
    const auto& R = rects[k];
    const double mean = ib.average(R);
    const int i0 = R.ix.first_cell(L), ni = R.ix.cell_count(L);
    const int j0 = R.jy.first_cell(L), nj = R.jy.cell_count(L);
    double osc = 0.0;
    for (int i = i0; i < i0 + ni; ++i)
      for (int j = j0; j < j0 + nj; ++j) osc += std::abs(b(i, j) - mean);
    return osc * b.cell_area() / inu.integral(R);
  });
  BmoCertificate cert;
  cert.value = best.value;
  cert.rectangle = rects[best.index];
  return cert;
}

const char* to_string(ProdMode m) {
  switch (m) {
    case ProdMode::exact: return "exact";
    case ProdMode::greedy: return "greedy";
    case ProdMode::rect: return "rect";
  }
  return "?";
}

namespace {

std::vector<int> rectangle_cells(const DyadicRectangle& R, int L) {
  std::vector<int> cells;
  const int n = 1 << L;
  const int i0 = R.ix.first_cell(L), ni = R.ix.cell_count(L);
  const int j0 = R.jy.first_cell(L), nj = R.jy.cell_count(L);
  for (int i = i0; i < i0 + ni; ++i)
    for (int j = j0; j < j0 + nj; ++j) cells.push_back(i * n + j);
  return cells;
}

// Per-rectangle contributions |<b,h_R>|^2 <nu>_R^{-1} over fully active R.
struct ProdTerms {
  int depth;
  int ncells;
  std::vector<DyadicRectangle> rects;
  std::vector<double> term;
  std::vector<std::vector<int>> cells_of;   // rect -> cells
  std::vector<std::vector<int>> rects_at;   // cell -> rects containing it
  std::vector<double> cell_nu;              // nu(cell)

  ProdTerms(const GridFunction& b, const Weight& nu) : depth(b.depth()) {
    b.check_same_depth(nu.function());
    const int L = depth;
    ncells = 1 << (2 * L);
    const HaarSpectrum s = analyze(b);
    const RectangleIntegrals inu(nu.function());
    const auto act = active_intervals(L);
    rects_at.resize(static_cast<std::size_t>(ncells));
    for (const auto& I : act)
      for (const auto& J : act) {
        const double c = s.at(I, J);
        if (c == 0.0) continue;
        const DyadicRectangle R{I, J};
        const int r = static_cast<int>(rects.size());
        rects.push_back(R);
        term.push_back(c * c / inu.average(R));
        cells_of.push_back(rectangle_cells(R, L));
        for (int cell : cells_of.back()) rects_at[static_cast<std::size_t>(cell)].push_back(r);
      }
    cell_nu.resize(static_cast<std::size_t>(ncells));
    auto nv = nu.function().values();
    for (int c = 0; c < ncells; ++c)
      cell_nu[static_cast<std::size_t>(c)] = nv[static_cast<std::size_t>(c)] * b.cell_area();
  }
};

double objective(double sum, double mass) { return mass > 0.0 ? std::sqrt(sum / mass) : 0.0; }

BmoCertificate prod_exact(const ProdTerms& t) {
  if (t.depth > kExactProdMaxDepth)
    throw CapabilityError("exact product-BMO enumeration is limited to depth <= 2");
  std::vector<std::uint64_t> masks;
  for (const auto& cells : t.cells_of) {
    std::uint64_t m = 0;
    for (int c : cells) m |= std::uint64_t{1} << c;
    masks.push_back(m);
  }
  const std::uint64_t total = (std::uint64_t{1} << t.ncells) - 1;
  const auto best = kernels::argmax(total, [&](std::size_t k) {
    const std::uint64_t set = static_cast<std::uint64_t>(k) + 1;
    double mass = 0.0;
    for (std::uint64_t rest = set; rest; rest &= rest - 1)
      mass += t.cell_nu[static_cast<std::size_t>(std::countr_zero(rest))];
    double sum = 0.0;
    for (std::size_t r = 0; r < masks.size(); ++r)
      if ((masks[r] & set) == masks[r]) sum += t.term[r];
    return objective(sum, mass);
  });
  BmoCertificate cert;
  cert.value = best.value;
  const std::uint64_t set = static_cast<std::uint64_t>(best.index) + 1;
  for (int c = 0; c < t.ncells; ++c)
    if (set >> c & 1) cert.cells.push_back(c);
  return cert;
}

BmoCertificate prod_rect(const ProdTerms& t) {
  const auto rects = all_rectangles(t.depth);
  const auto best = kernels::argmax(rects.size(), [&](std::size_t k) {
    const auto& R0 = rects[k];
    double sum = 0.0;
    for (std::size_t r = 0; r < t.rects.size(); ++r)
      if (R0.contains(t.rects[r])) sum += t.term[r];
    double mass = 0.0;
    for (int c : rectangle_cells(R0, t.depth)) mass += t.cell_nu[static_cast<std::size_t>(c)];
    return objective(sum, mass);
  });
  BmoCertificate cert;
  cert.value = best.value;
  cert.rectangle = rects[best.index];
  cert.cells = rectangle_cells(rects[best.index], t.depth);
  return cert;
}

// Grow a cell set from one seed rectangle, adding the single best cell while
// the objective strictly improves.
std::pair<double, std::vector<int>> grow(const ProdTerms& t, std::size_t seed) {
  std::vector<char> in(static_cast<std::size_t>(t.ncells), 0);
  std::vector<int> missing(t.rects.size());
  for (std::size_t r = 0; r < t.rects.size(); ++r)
    missing[r] = static_cast<int>(t.cells_of[r].size());
  double sum = 0.0, mass = 0.0;
  auto add = [&](int c) {
    in[static_cast<std::size_t>(c)] = 1;
    mass += t.cell_nu[static_cast<std::size_t>(c)];
    for (int r : t.rects_at[static_cast<std::size_t>(c)])
      if (--missing[static_cast<std::size_t>(r)] == 0) sum += t.term[static_cast<std::size_t>(r)];
  };
  for (int c : t.cells_of[seed]) add(c);
  double value = objective(sum, mass);
  for (;;) {
    int best_cell = -1;
    double best_value = value;
    for (int c = 0; c < t.ncells; ++c) {
      if (in[static_cast<std::size_t>(c)]) continue;
      double gain = 0.0;
      for (int r : t.rects_at[static_cast<std::size_t>(c)])
        if (missing[static_cast<std::size_t>(r)] == 1) gain += t.term[static_cast<std::size_t>(r)];
      const double v = objective(sum + gain, mass + t.cell_nu[static_cast<std::size_t>(c)]);
      if (v > best_value) {
        best_value = v;
        best_cell = c;
      }
    }
    if (best_cell < 0) break;
    add(best_cell);
    value = objective(sum, mass);
  }
  std::vector<int> cells;
  for (int c = 0; c < t.ncells; ++c)
    if (in[static_cast<std::size_t>(c)]) cells.push_back(c);
  return {value, cells};
}

BmoCertificate prod_greedy(const ProdTerms& t) {
  BmoCertificate cert = prod_rect(t);
  if (t.rects.empty()) return cert;
  const auto values = kernels::evaluate(t.rects.size(), [&](std::size_t k) { return grow(t, k).first; });
  const auto best = kernels::reduce_max(values);
  if (best.value > cert.value) {
    auto [v, cells] = grow(t, best.index);
    cert.value = v;
    cert.rectangle.reset();
    cert.cells = std::move(cells);
  }
  return cert;
}

}  // namespace

BmoCertificate bmo_prod(const GridFunction& b, const Weight& nu, ProdMode mode) {
  const ProdTerms t(b, nu);
  switch (mode) {
    case ProdMode::exact: return prod_exact(t);
    case ProdMode::greedy: return prod_greedy(t);
    case ProdMode::rect: return prod_rect(t);
  }
  throw PreconditionError("unknown product-BMO mode");
}

BmoCertificate bmo_prod_best(const GridFunction& b, const Weight& nu) {
  return bmo_prod(b, nu, b.depth() <= kExactProdMaxDepth ? ProdMode::exact : ProdMode::greedy);
}

double bmo_prod_objective(const GridFunction& b, const Weight& nu, const std::vector<int>& cells) {
  const ProdTerms t(b, nu);
  std::vector<char> in(static_cast<std::size_t>(t.ncells), 0);
  double mass = 0.0;
  for (int c : cells) {
    require(c >= 0 && c < t.ncells, "cell id out of range");
    if (!in[static_cast<std::size_t>(c)]) mass += t.cell_nu[static_cast<std::size_t>(c)];
    in[static_cast<std::size_t>(c)] = 1;
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < t.rects.size(); ++r) {
    bool inside = true;
    for (int c : t.cells_of[r]) inside = inside && in[static_cast<std::size_t>(c)];
    if (inside) sum += t.term[r];
  }
  return objective(sum, mass);
}

double bmo_sequence(const std::map<DyadicInterval, double>& a) {
  if (a.empty()) return 0.0;
  int deepest = 0;
  for (const auto& [I, v] : a) deepest = std::max(deepest, I.level);
  double best = 0.0;
  for (const auto& I0 : intervals_up_to(deepest)) {
    double s = 0.0;
    for (const auto& [I, v] : a)
      if (I0.contains(I)) s += v * v;
    best = std::max(best, std::sqrt(s / I0.length()));
  }
  return best;
}

// ---------------------------------------------------------------------------

GridLine gen_axis_profile(const AxisWeightSpec& spec, int depth, double p, std::uint64_t seed) {
  GridLine g(depth, 1.0);
  const int n = g.size();
  switch (spec.kind) {
    case AxisWeightSpec::Kind::constant:
      require(spec.c > 0.0, "constant weight must be positive");
      for (double& v : g.values) v = spec.c;
      break;
    case AxisWeightSpec::Kind::power: {
      require(spec.a > -1.0 && spec.a < p - 1.0, "power exponent must lie in (-1, p-1)");
      const double e = spec.a + 1.0;
      for (int i = 0; i < n; ++i) {
        const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
        g[i] = (std::pow(hi, e) - std::pow(lo, e)) / e * n;
      }
      break;
    }
    case AxisWeightSpec::Kind::haar_perturbation: {
      require(spec.eps >= 0.0, "perturbation amplitude must be nonnegative");
      Rng rng(seed);
      GridLine expo(depth, 0.0);
      const int cap = std::min(spec.level_cap, depth - 1);
      for (const auto& I : intervals_up_to(cap)) {
        const double c = rng.uniform(-spec.eps, spec.eps);
        const GridLine h = haar(I, HaarKind::cancellative, depth);
        for (int i = 0; i < n; ++i) expo[i] += c * h[i];
      }
      for (int i = 0; i < n; ++i) g[i] = std::exp(expo[i]);
      break;
    }
  }
  return g;
}

Weight gen_weight(const WeightSpec& spec, int depth, double p, std::uint64_t seed) {
  const GridLine g1 = gen_axis_profile(spec.x1, depth, p, splitmix64(seed ^ 0x1));
  const GridLine g2 = gen_axis_profile(spec.x2, depth, p, splitmix64(seed ^ 0x2));
  return Weight(GridFunction::tensor(g1, g2));
}

// ---------------------------------------------------------------------------

DualityRatio duality_ratio(const GridFunction& b, const HaarSpectrum& c, const Weight& nu) {
  b.check_same_depth(nu.function());
  require(c.depth() == b.depth(), "coefficient family depth mismatch");
  const int L = b.depth();
  const HaarSpectrum s = analyze(b);
  DualityRatio out;
  GridFunction sq(L);
  for (const auto& I : active_intervals(L))
    for (const auto& J : active_intervals(L)) {
      const double cij = c.at(I, J);
      out.lhs += std::abs(s.at(I, J)) * std::abs(cij);
      if (cij == 0.0) continue;
      const double dens = cij * cij / (I.length() * J.length());
      const int i0 = I.first_cell(L), ni = I.cell_count(L);
      const int j0 = J.first_cell(L), nj = J.cell_count(L);
      for (int i = i0; i < i0 + ni; ++i)
        for (int j = j0; j < j0 + nj; ++j) sq(i, j) += dens;
    }
  double integral = 0.0;
  for (int i = 0; i < sq.side(); ++i)
    for (int j = 0; j < sq.side(); ++j) integral += std::sqrt(sq(i, j)) * nu(i, j);
  integral *= b.cell_area();
  out.mode = L <= kExactProdMaxDepth ? ProdMode::exact : ProdMode::greedy;
  out.bmo_prod = bmo_prod(b, nu, out.mode).value;
  out.rhs = out.bmo_prod * integral;
  out.degenerate = !(out.rhs > 0.0);
  out.ratio = out.degenerate ? 0.0 : out.lhs / out.rhs;
  return out;
}

DualityRatio duality_ratio(const GridFunction& b, const HaarSpectrum& c, const Weight& mu,
                           const Weight& lambda, double p) {
  return duality_ratio(b, c, bloom_weight(mu, lambda, p));
}

}  // namespace bloomlab
