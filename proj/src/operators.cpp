#include "bloomlab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bloomlab/rng.hpp"

namespace bloomlab {

using kernels::DenseMatrix;

OperatorHandle::OperatorHandle(std::string descriptor, int depth, int axis, Map apply, Map adjoint)
    : desc_(std::move(descriptor)),
      depth_(depth),
      axis_(axis),
      fwd_(std::make_shared<const Map>(std::move(apply))),
      bwd_(std::make_shared<const Map>(std::move(adjoint))) {}

GridFunction OperatorHandle::apply(const GridFunction& f) const {
  if (f.depth() != depth_) throw DepthMismatch(depth_, f.depth());
  return (*fwd_)(f);
}

GridFunction OperatorHandle::apply_adjoint(const GridFunction& g) const {
  if (g.depth() != depth_) throw DepthMismatch(depth_, g.depth());
  return (*bwd_)(g);
}

OperatorHandle OperatorHandle::adjoint() const {
  OperatorHandle t = *this;
  t.desc_ = "adjoint(" + desc_ + ")";
  std::swap(t.fwd_, t.bwd_);
  return t;
}

OperatorHandle identity_operator(int depth) {
  auto id = [](const GridFunction& f) { return f; };
  return {"identity", depth, 0, id, id};
}

OperatorHandle zero_operator(int depth) {
  auto z = [](const GridFunction& f) { return GridFunction(f.depth()); };
  return {"zero", depth, 0, z, z};
}

OperatorHandle multiplication(const GridFunction& m) {
  auto mul = [m](const GridFunction& f) { return hadamard(m, f); };
  return {"mul", m.depth(), 0, mul, mul};
}

OperatorHandle compose(const OperatorHandle& t, const OperatorHandle& u) {
  require(t.depth() == u.depth(), "composition of operators at different depths");
  const int axis = t.axis() == u.axis() ? t.axis() : 0;
  return {t.descriptor() + " . " + u.descriptor(), t.depth(), axis,
          [t, u](const GridFunction& f) { return t.apply(u.apply(f)); },
          [t, u](const GridFunction& g) { return u.apply_adjoint(t.apply_adjoint(g)); }};
}

OperatorHandle operator+(const OperatorHandle& t, const OperatorHandle& u) {
  require(t.depth() == u.depth(), "sum of operators at different depths");
  const int axis = t.axis() == u.axis() ? t.axis() : 0;
  return {"(" + t.descriptor() + " + " + u.descriptor() + ")", t.depth(), axis,
          [t, u](const GridFunction& f) { return t.apply(f) + u.apply(f); },
          [t, u](const GridFunction& g) { return t.apply_adjoint(g) + u.apply_adjoint(g); }};
}

OperatorHandle operator-(const OperatorHandle& t, const OperatorHandle& u) {
  require(t.depth() == u.depth(), "difference of operators at different depths");
  const int axis = t.axis() == u.axis() ? t.axis() : 0;
  return {"(" + t.descriptor() + " - " + u.descriptor() + ")", t.depth(), axis,
          [t, u](const GridFunction& f) { return t.apply(f) - u.apply(f); },
          [t, u](const GridFunction& g) { return t.apply_adjoint(g) - u.apply_adjoint(g); }};
}

OperatorHandle operator*(double s, const OperatorHandle& t) {
  std::ostringstream os;
  os << s << "*" << t.descriptor();
  return {os.str(), t.depth(), t.axis(), [s, t](const GridFunction& f) { return s * t.apply(f); },
          [s, t](const GridFunction& g) { return s * t.apply_adjoint(g); }};
}

namespace {

GridFunction apply_axis(const DenseMatrix& m, int axis, const GridFunction& f) {
  const int n = f.side();
  require(m.rows == n && m.cols == n, "axis matrix does not match the grid");
  GridFunction out(f.depth());
  if (axis == 1) {
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) {
        const double a = m(i, k);
        if (a == 0.0) continue;
        for (int j = 0; j < n; ++j) out(i, j) += a * f(k, j);
      }
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += m(j, k) * f(i, k);
        out(i, j) = s;
      }
  }
  return out;
}

DenseMatrix transposed(const DenseMatrix& m) {
  DenseMatrix t(m.cols, m.rows);
  for (int i = 0; i < m.rows; ++i)
    for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

// m += coef * out_fn (x) in_fn / N  (the 1/N is the cell width in the pairing)
void add_rank_one(DenseMatrix& m, double coef, const GridLine& out_fn, const GridLine& in_fn) {
  const int n = out_fn.size();
  const double c = coef / n;
  for (int i = 0; i < n; ++i) {
    if (out_fn[i] == 0.0) continue;
    for (int k = 0; k < n; ++k) m(i, k) += c * out_fn[i] * in_fn[k];
  }
}

std::string axis_name(const char* what, int axis) {
  return std::string(what) + "[x" + std::to_string(axis) + "]";
}

GridLine cancellative(const DyadicInterval& I, int depth) {
  return haar(I, HaarKind::cancellative, depth);
}

}  // namespace

OperatorHandle matrix_operator(std::string descriptor, int depth, const DenseMatrix& m) {
  const int n = 1 << (2 * depth);
  require(m.rows == n && m.cols == n, "matrix does not match the grid");
  auto fwd = std::make_shared<const DenseMatrix>(m);
  auto bwd = std::make_shared<const DenseMatrix>(transposed(m));
  auto run = [depth](const DenseMatrix& a, const GridFunction& f) {
    GridFunction out(depth);
    kernels::matvec(a, f.values(), out.values());
    return out;
  };
  return {std::move(descriptor), depth, 0,
          [fwd, run](const GridFunction& f) { return run(*fwd, f); },
          [bwd, run](const GridFunction& g) { return run(*bwd, g); }};
}

OperatorHandle axis_operator(std::string descriptor, int axis, const DenseMatrix& m) {
  require(axis == 1 || axis == 2, "axis must be 1 or 2");
  int depth = 0;
  while ((1 << depth) < m.rows) ++depth;
  require((1 << depth) == m.rows && depth >= 1, "axis matrix size must be 2^L");
  auto fwd = std::make_shared<const DenseMatrix>(m);
  auto bwd = std::make_shared<const DenseMatrix>(transposed(m));
  return {std::move(descriptor), depth, axis,
          [fwd, axis](const GridFunction& f) { return apply_axis(*fwd, axis, f); },
          [bwd, axis](const GridFunction& g) { return apply_axis(*bwd, axis, g); }};
}

// ---------------------------------------------------------------------------

double shift_bound(const ShiftKey& key) {
  return std::sqrt(key.I1.length() * key.I2.length()) / key.K.length();
}

void validate(const ShiftSpec& s, int depth) {
  require(s.axis == 1 || s.axis == 2, "shift axis must be 1 or 2");
  require(s.k1 >= 0 && s.k2 >= 0, "shift complexities must be nonnegative");
  for (const auto& [key, a] : s.coeffs) {
    require(key.I1.level == key.K.level + s.k1 && key.I2.level == key.K.level + s.k2,
            "shift coefficient levels do not match the complexity");
    require(key.K.contains(key.I1) && key.K.contains(key.I2), "shift intervals must lie in K");
    require(key.I1.active(depth) && key.I2.active(depth), "shift intervals must be active");
    require(std::isfinite(a), "shift coefficient must be finite");
    require(std::abs(a) <= shift_bound(key) * (1.0 + 1e-12), "shift coefficient exceeds its bound");
  }
}

void validate(const ParaproductSpec& s, int depth) {
  require(s.axis == 1 || s.axis == 2, "paraproduct axis must be 1 or 2");
  for (const auto& [K, a] : s.coeffs) {
    require(K.active(depth), "paraproduct intervals must be active");
    require(std::isfinite(a), "paraproduct coefficient must be finite");
  }
  require(bmo_sequence(s.coeffs) <= 1.0 + 1e-12, "paraproduct coefficients exceed BMO norm 1");
}

DenseMatrix shift_matrix(const ShiftSpec& s, int depth) {
  validate(s, depth);
  const int n = 1 << depth;
  DenseMatrix m(n, n);
  for (const auto& [key, a] : s.coeffs)
    add_rank_one(m, a, cancellative(key.I2, depth), cancellative(key.I1, depth));
  return m;
}

DenseMatrix paraproduct_matrix(const ParaproductSpec& s, int depth) {
  validate(s, depth);
  const int n = 1 << depth;
  DenseMatrix m(n, n);
  for (const auto& [K, a0] : s.coeffs) {
    const double a = s.abs_flag ? std::abs(a0) : a0;
    const GridLine h = cancellative(K, depth), avg = normalized_indicator(K, depth);
    if (s.form == ParaForm::direct)
      add_rank_one(m, a, h, avg);
    else
      add_rank_one(m, a, avg, h);
  }
  return m;
}

OperatorHandle make_shift(const ShiftSpec& s, int depth) {
  std::ostringstream os;
  os << axis_name("shift", s.axis) << "(" << s.k1 << "," << s.k2 << ")";
  return axis_operator(os.str(), s.axis, shift_matrix(s, depth));
}

OperatorHandle make_paraproduct(const ParaproductSpec& s, int depth) {
  std::string d = axis_name(s.abs_flag ? "abs_pi" : "pi", s.axis);
  d += s.form == ParaForm::direct ? "(direct)" : "(dual)";
  return axis_operator(d, s.axis, paraproduct_matrix(s, depth));
}

namespace {

std::vector<DyadicInterval> descendants(const DyadicInterval& K, int k) {
  std::vector<DyadicInterval> out;
  for (int i = 0; i < (1 << k); ++i) out.push_back({K.level + k, (K.index << k) + i});
  return out;
}

}  // namespace

ShiftSpec gen_shift(int axis, int k1, int k2, int depth, std::uint64_t seed) {
  require(k1 >= 0 && k2 >= 0, "shift complexities must be nonnegative");
  require(std::max(k1, k2) <= depth - 1, "complexity leaves no active K");
  ShiftSpec s{axis, k1, k2, {}};
  Rng rng(seed);
  for (const auto& K : intervals_up_to(depth - 1 - std::max(k1, k2)))
    for (const auto& I1 : descendants(K, k1))
      for (const auto& I2 : descendants(K, k2)) {
        const ShiftKey key{K, I1, I2};
        s.coeffs[key] = rng.sign() * shift_bound(key);
      }
  validate(s, depth);
  return s;
}

ParaproductSpec gen_paraproduct(int axis, ParaForm form, int depth, std::uint64_t seed) {
  ParaproductSpec s{axis, form, false, {}};
  Rng rng(seed);
  for (const auto& K : active_intervals(depth)) s.coeffs[K] = rng.normal();
  const double norm = bmo_sequence(s.coeffs);
  for (auto& [K, a] : s.coeffs) a /= norm;
  const double after = bmo_sequence(s.coeffs);
  if (after > 1.0)
    for (auto& [K, a] : s.coeffs) a /= after;
  validate(s, depth);
  return s;
}

// ---------------------------------------------------------------------------

OperatorHandle e_term_shift(const GridFunction& b, const ShiftSpec& s1, const ShiftSpec& s2,
                            int i, int j) {
  require(s1.axis == 1 && s2.axis == 2, "E-term needs an x1 shift and an x2 shift");
  require((i == 1 || i == 2) && (j == 1 || j == 2), "E-term averaging index must be 1 or 2");
  const int L = b.depth();
  validate(s1, L);
  validate(s2, L);
  struct Term {
    DyadicInterval I1, I2, J1, J2;
    double c;
  };
  const RectangleIntegrals ib(b);
  auto terms = std::make_shared<std::vector<Term>>();
  for (const auto& [k1, a] : s1.coeffs)
    for (const auto& [k2, c] : s2.coeffs) {
      const DyadicRectangle R{i == 1 ? k1.I1 : k1.I2, j == 1 ? k2.I1 : k2.I2};
      terms->push_back({k1.I1, k1.I2, k2.I1, k2.I2, ib.average(R) * a * c});
    }
  auto fwd = [terms, L](const GridFunction& f) {
    const HaarSpectrum s = analyze(f);
    HaarSpectrum out(L);
    for (const auto& t : *terms) out.at(t.I2, t.J2) += t.c * s.at(t.I1, t.J1);
    return synthesize(out);
  };
  auto bwd = [terms, L](const GridFunction& g) {
    const HaarSpectrum s = analyze(g);
    HaarSpectrum out(L);
    for (const auto& t : *terms) out.at(t.I1, t.J1) += t.c * s.at(t.I2, t.J2);
    return synthesize(out);
  };
  return {"E(shift,shift)^b[" + std::to_string(i) + "," + std::to_string(j) + "]", L, 0, fwd,
          bwd};
}

OperatorHandle pipi_b(const GridFunction& b, const ParaproductSpec& p1,
                      const ParaproductSpec& p2) {
  require(p1.axis == 1 && p2.axis == 2, "(pi pi)^b needs an x1 and an x2 paraproduct");
  require(p1.form == ParaForm::direct && p2.form == ParaForm::direct,
          "(pi pi)^b uses direct forms");
  const int L = b.depth();
  validate(p1, L);
  validate(p2, L);
  struct Term {
    DyadicRectangle R;
    double c;
  };
  const RectangleIntegrals ib(b);
  auto terms = std::make_shared<std::vector<Term>>();
  for (const auto& [K, a] : p1.coeffs)
    for (const auto& [V, c] : p2.coeffs) {
      const double ak = p1.abs_flag ? std::abs(a) : a, av = p2.abs_flag ? std::abs(c) : c;
      terms->push_back({{K, V}, ib.average({K, V}) * ak * av});
    }
  auto fwd = [terms, L](const GridFunction& f) {
    const RectangleIntegrals iff(f);
    HaarSpectrum out(L);
    for (const auto& t : *terms) out.at(t.R.ix, t.R.jy) += t.c * iff.average(t.R);
    return synthesize(out);
  };
  auto bwd = [terms, L](const GridFunction& g) {
    const HaarSpectrum s = analyze(g);
    GridFunction out(L);
    for (const auto& t : *terms) {
      const double v = t.c * s.at(t.R.ix, t.R.jy) / t.R.area();
      if (v == 0.0) continue;
      const int i0 = t.R.ix.first_cell(L), ni = t.R.ix.cell_count(L);
      const int j0 = t.R.jy.first_cell(L), nj = t.R.jy.cell_count(L);
      for (int x = i0; x < i0 + ni; ++x)
        for (int y = j0; y < j0 + nj; ++y) out(x, y) += v;
    }
    return out;
  };
  return {"(pi pi)^b", L, 0, fwd, bwd};
}

// ---------------------------------------------------------------------------

GridLine square_function_1d(const GridLine& g) {
  const int L = g.depth;
  const GridLine c = analyze_line(g);
  GridLine out(L);
  for (const auto& I : active_intervals(L)) {
    const double v = c[I.slot()] * c[I.slot()] / I.length();
    const int i0 = I.first_cell(L), n = I.cell_count(L);
    for (int i = i0; i < i0 + n; ++i) out[i] += v;
  }
  for (double& v : out.values) v = std::sqrt(v);
  return out;
}

GridLine maximal_1d(const GridLine& g) {
  const int L = g.depth;
  GridLine out(L);
  for (const auto& I : intervals_up_to(L)) {
    const int i0 = I.first_cell(L), n = I.cell_count(L);
    double s = 0.0;
    for (int i = i0; i < i0 + n; ++i) s += std::abs(g[i]);
    s /= n;
    for (int i = i0; i < i0 + n; ++i) out[i] = std::max(out[i], s);
  }
  return out;
}

namespace {

GridLine row_line(const GridFunction& f, int i) {
  GridLine g(f.depth());
  for (int j = 0; j < f.side(); ++j) g[j] = f(i, j);
  return g;
}

GridLine col_line(const GridFunction& f, int j) {
  GridLine g(f.depth());
  for (int i = 0; i < f.side(); ++i) g[i] = f(i, j);
  return g;
}

GridFunction transpose(const GridFunction& f) {
  GridFunction t(f.depth());
  for (int i = 0; i < f.side(); ++i)
    for (int j = 0; j < f.side(); ++j) t(j, i) = f(i, j);
  return t;
}

// sum_I 1_I/|I| (x) [op <f, h_I>_1]^2, square-rooted
GridFunction slice_square_x1(const GridFunction& f, bool with_maximal) {
  const int L = f.depth(), n = f.side();
  const GridFunction rows = analyze_axis(f, 1);
  GridFunction out(L);
  for (const auto& I : active_intervals(L)) {
    GridLine slice = row_line(rows, I.slot());
    if (with_maximal) slice = maximal_1d(slice);
    const int i0 = I.first_cell(L), ni = I.cell_count(L);
    for (int i = i0; i < i0 + ni; ++i)
      for (int j = 0; j < n; ++j) out(i, j) += slice[j] * slice[j] / I.length();
  }
  for (double& v : out.values()) v = std::sqrt(v);
  return out;
}

}  // namespace

GridFunction square_function(SquareKind kind, const GridFunction& f) {
  const int L = f.depth();
  switch (kind) {
    case SquareKind::full: {
      const HaarSpectrum s = analyze(f);
      GridFunction out(L);
      for (const auto& I : active_intervals(L))
        for (const auto& J : active_intervals(L)) {
          const double v = s.at(I, J) * s.at(I, J) / (I.length() * J.length());
          if (v == 0.0) continue;
          const int i0 = I.first_cell(L), ni = I.cell_count(L);
          const int j0 = J.first_cell(L), nj = J.cell_count(L);
          for (int i = i0; i < i0 + ni; ++i)
            for (int j = j0; j < j0 + nj; ++j) out(i, j) += v;
        }
      for (double& v : out.values()) v = std::sqrt(v);
      return out;
    }
    case SquareKind::x1: return slice_square_x1(f, false);
    case SquareKind::x2: return transpose(slice_square_x1(transpose(f), false));
    case SquareKind::x1_max: return slice_square_x1(f, true);
    case SquareKind::x2_max: return transpose(slice_square_x1(transpose(f), true));
  }
  return f;
}

GridFunction maximal(MaximalKind kind, const GridFunction& f) {
  const int L = f.depth(), n = f.side();
  GridFunction out(L);
  switch (kind) {
    case MaximalKind::full: {
      GridFunction a(L);
      for (std::size_t c = 0; c < f.cells(); ++c) a.values()[c] = std::abs(f.values()[c]);
      const RectangleIntegrals ia(a);
      for (const auto& R : all_rectangles(L)) {
        const double v = ia.average(R);
        const int i0 = R.ix.first_cell(L), ni = R.ix.cell_count(L);
        const int j0 = R.jy.first_cell(L), nj = R.jy.cell_count(L);
        for (int i = i0; i < i0 + ni; ++i)
          for (int j = j0; j < j0 + nj; ++j) out(i, j) = std::max(out(i, j), v);
      }
      break;
    }
    case MaximalKind::x1:
      for (int j = 0; j < n; ++j) {
        const GridLine m = maximal_1d(col_line(f, j));
        for (int i = 0; i < n; ++i) out(i, j) = m[i];
      }
      break;
    case MaximalKind::x2:
      for (int i = 0; i < n; ++i) {
        const GridLine m = maximal_1d(row_line(f, i));
        for (int j = 0; j < n; ++j) out(i, j) = m[j];
      }
      break;
  }
  return out;
}

GridFunction aux_phi(const GridFunction& f, int axis) {
  require(axis == 1 || axis == 2, "axis must be 1 or 2");
  if (axis == 2) return transpose(aux_phi(transpose(f), 1));
  const int L = f.depth(), n = f.side();
  const GridFunction rows = analyze_axis(f, 1);
  GridFunction out(L);
  for (const auto& K : active_intervals(L)) {
    const GridLine s = square_function_1d(row_line(rows, K.slot()));
    const GridLine h = cancellative(K, L);
    const int i0 = K.first_cell(L), ni = K.cell_count(L);
    for (int i = i0; i < i0 + ni; ++i)
      for (int j = 0; j < n; ++j) out(i, j) += h[i] * s[j];
  }
  return out;
}

// ---------------------------------------------------------------------------

DenseMatrix assemble_matrix(const OperatorHandle& t) {
  const int L = t.depth();
  const std::size_t cells = std::size_t{1} << (2 * L);
  require(cells <= kMaxAssembleCells, "grid too large for dense assembly");
  const int n = static_cast<int>(cells);
  return kernels::assemble(n, n, [&t, L](int c, std::span<double> out) {
    GridFunction e(L);
    e.values()[static_cast<std::size_t>(c)] = 1.0;
    const GridFunction y = t.apply(e);
    std::copy(y.values().begin(), y.values().end(), out.begin());
  });
}

namespace {

double norm2(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

DenseMatrix scaled_matrix(const DenseMatrix& m, const Weight& mu, const Weight& lambda) {
  require(m.rows == m.cols && static_cast<std::size_t>(m.rows) == mu.function().cells(),
          "matrix does not match the weights");
  mu.function().check_same_depth(lambda.function());
  const double area = mu.function().cell_area();
  DenseMatrix b = m;
  for (int r = 0; r < m.rows; ++r) {
    const double dl = std::sqrt(lambda.function().values()[static_cast<std::size_t>(r)] * area);
    for (int c = 0; c < m.cols; ++c)
      b(r, c) *= dl / std::sqrt(mu.function().values()[static_cast<std::size_t>(c)] * area);
  }
  return b;
}

}  // namespace

NormEstimate operator_norm_p2(const DenseMatrix& m, const Weight& mu, const Weight& lambda,
                              const PowerOptions& opt) {
  const DenseMatrix b = scaled_matrix(m, mu, lambda);
  const int n = b.cols;
  NormEstimate est;
  if (norm2(b.a) == 0.0) return est;

  const bool use_gram = n <= 4096;
  const DenseMatrix g = use_gram ? kernels::gram(b) : DenseMatrix();
  std::vector<double> x(static_cast<std::size_t>(n)), y(x.size()), t(static_cast<std::size_t>(b.rows));
  auto normal_apply = [&](std::span<const double> in, std::span<double> out) {
    if (use_gram) {
      kernels::matvec(g, in, out);
    } else {
      kernels::matvec(b, in, t);
      kernels::matvec_transposed(b, t, out);
    }
  };

  Rng rng(opt.seed);
  for (double& v : x) v = rng.normal();
  double nx = norm2(x);
  for (double& v : x) v /= nx;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    normal_apply(x, y);
    double theta = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) theta += x[k] * y[k];
    double r = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) r += (y[k] - theta * x[k]) * (y[k] - theta * x[k]);
    r = std::sqrt(r);
    est.value = std::sqrt(std::max(theta, 0.0));
    est.residual = theta > 0.0 ? r / theta : INFINITY;
    est.iterations = it;
    if (theta > 0.0 && r <= opt.tolerance * theta) return est;
    const double ny = norm2(y);
    if (ny == 0.0) {
      // start vector in the kernel; restart
      for (double& v : x) v = rng.normal();
    } else {
      for (std::size_t k = 0; k < x.size(); ++k) x[k] = y[k] / ny;
      continue;
    }
    nx = norm2(x);
    for (double& v : x) v /= nx;
  }
  std::ostringstream os;
  os << "power iteration did not converge in " << opt.max_iterations
     << " iterations, relative residual " << est.residual;
  throw NonConvergence(os.str(), est.residual);
}

NormEstimate operator_norm_p2(const OperatorHandle& t, const Weight& mu, const Weight& lambda,
                              const PowerOptions& opt) {
  return operator_norm_p2(assemble_matrix(t), mu, lambda, opt);
}

namespace {

struct LpRatio {
  const DenseMatrix& m;
  std::vector<double> wmu, wla;  // weight * cell area
  double p;
  mutable std::vector<double> y;

  double norm(std::span<const double> v, const std::vector<double>& w) const {
    double s = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) s += std::pow(std::abs(v[k]), p) * w[k];
    return std::pow(s, 1.0 / p);
  }
  double value(std::span<const double> x) const {
    kernels::matvec(m, x, y);
    const double d = norm(x, wmu);
    return d > 0.0 ? norm(y, wla) / d : 0.0;
  }
  // gradient of log(ratio)
  std::vector<double> grad(std::span<const double> x) const {
    kernels::matvec(m, x, y);
    const double nn = norm(y, wla), nd = norm(x, wmu);
    std::vector<double> u(y.size()), g(x.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double s = y[k] > 0 ? 1.0 : (y[k] < 0 ? -1.0 : 0.0);
      u[k] = wla[k] * std::pow(std::abs(y[k]), p - 1.0) * s / std::pow(nn, p);
    }
    kernels::matvec_transposed(m, u, g);
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double s = x[k] > 0 ? 1.0 : (x[k] < 0 ? -1.0 : 0.0);
      g[k] -= wmu[k] * std::pow(std::abs(x[k]), p - 1.0) * s / std::pow(nd, p);
    }
    return g;
  }
};

}  // namespace

double operator_norm_lower(const DenseMatrix& m, const Weight& mu, const Weight& lambda, double p,
                           int budget, std::uint64_t seed) {
  require(p >= 1.0, "p must be at least 1");
  require(budget >= 1, "evaluation budget must be positive");
  const std::size_t n = mu.function().cells();
  require(static_cast<std::size_t>(m.cols) == n && static_cast<std::size_t>(m.rows) == n,
          "matrix does not match the weights");
  const double area = mu.function().cell_area();
  LpRatio f{m, {}, {}, p, std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    f.wmu.push_back(mu.function().values()[k] * area);
    f.wla.push_back(lambda.function().values()[k] * area);
  }

  const int starts = std::max(1, std::min(4, budget / 50));
  const int per_start = std::max(1, budget / starts);
  double best = 0.0;
  for (int s = 0; s < starts; ++s) {
    Rng rng = Rng::split(seed, 0x6e6f726d, static_cast<std::uint64_t>(s));
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    double fx = f.value(x);
    int used = 1;
    double eta = 0.5;
    while (used < per_start && eta > 1e-14) {
      const auto g = f.grad(x);
      ++used;
      const double ng = norm2(g), nx = norm2(x);
      if (ng == 0.0) break;
      std::vector<double> cand(n);
      for (std::size_t k = 0; k < n; ++k) cand[k] = x[k] + eta * nx * g[k] / ng;
      const double fc = f.value(cand);
      ++used;
      if (fc > fx) {
        x = std::move(cand);
        fx = fc;
        eta = std::min(1.0, eta * 1.5);
      } else {
        eta *= 0.5;
      }
    }
    best = std::max(best, fx);
  }
  return best;
}

double operator_norm_lower(const OperatorHandle& t, const Weight& mu, const Weight& lambda,
                           double p, int budget, std::uint64_t seed) {
  return operator_norm_lower(assemble_matrix(t), mu, lambda, p, budget, seed);
}

}  // namespace bloomlab
