#include "bloomlab/dyadic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace bloomlab {

DyadicInterval DyadicInterval::from_slot(int slot) {
  if (slot < 1) throw PreconditionError("top slot has no interval");
  const int level = std::bit_width(static_cast<unsigned>(slot)) - 1;
  return {level, slot - (1 << level)};
}

std::string to_string(const DyadicInterval& I) {
  return "[" + std::to_string(I.index) + "/2^" + std::to_string(I.level) + "," +
         std::to_string(I.index + 1) + "/2^" + std::to_string(I.level) + ")";
}

std::string to_string(const DyadicRectangle& R) {
  return to_string(R.ix) + "x" + to_string(R.jy);
}

std::vector<DyadicInterval> intervals_up_to(int max_level) {
  std::vector<DyadicInterval> out;
  for (int l = 0; l <= max_level; ++l)
    for (int k = 0; k < (1 << l); ++k) out.push_back({l, k});
  return out;
}

std::vector<DyadicRectangle> all_rectangles(int depth) {
  const auto ints = intervals_up_to(depth);
  std::vector<DyadicRectangle> out;
  out.reserve(ints.size() * ints.size());
  for (const auto& I : ints)
    for (const auto& J : ints) out.push_back({I, J});
  return out;
}

// ---------------------------------------------------------------------------

GridLine::GridLine(int L, double fill)
    : depth(L), values(static_cast<std::size_t>(1) << L, fill) {
  require(L >= 0, "depth must be nonnegative");
}

double GridLine::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * cell_width();
}

double GridLine::average(const DyadicInterval& I) const {
  require(I.valid(depth), "interval outside grid");
  const int a = I.first_cell(depth), n = I.cell_count(depth);
  double s = 0.0;
  for (int i = a; i < a + n; ++i) s += (*this)[i];
  return s / n;
}

double inner(const GridLine& a, const GridLine& b) {
  if (a.depth != b.depth) throw DepthMismatch(a.depth, b.depth);
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s * a.cell_width();
}

GridFunction::GridFunction(int depth, double fill)
    : depth_(depth), values_(static_cast<std::size_t>(1) << (2 * depth), fill) {
  require(depth >= 1, "GridFunction depth must be >= 1");
}

GridFunction::GridFunction(int depth, std::vector<double> values)
    : depth_(depth), values_(std::move(values)) {
  require(depth >= 1, "GridFunction depth must be >= 1");
  require(values_.size() == static_cast<std::size_t>(1) << (2 * depth),
          "value count does not match depth");
}

GridFunction GridFunction::tensor(const GridLine& g1, const GridLine& g2) {
  if (g1.depth != g2.depth) throw DepthMismatch(g1.depth, g2.depth);
  GridFunction f(g1.depth);
  for (int i = 0; i < f.side(); ++i)
    for (int j = 0; j < f.side(); ++j) f(i, j) = g1[i] * g2[j];
  return f;
}

double GridFunction::integral() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s * cell_area();
}

double GridFunction::integral(const DyadicRectangle& R) const {
  require(R.ix.valid(depth_) && R.jy.valid(depth_), "rectangle outside grid");
  const int i0 = R.ix.first_cell(depth_), ni = R.ix.cell_count(depth_);
  const int j0 = R.jy.first_cell(depth_), nj = R.jy.cell_count(depth_);
  double s = 0.0;
  for (int i = i0; i < i0 + ni; ++i)
    for (int j = j0; j < j0 + nj; ++j) s += (*this)(i, j);
  return s * cell_area();
}

double GridFunction::average(const DyadicRectangle& R) const {
  return integral(R) / R.area();
}

double GridFunction::sup_norm() const {
  double m = 0.0;
  for (double v : values_) m = std::max(m, std::abs(v));
  return m;
}

double GridFunction::l2_norm() const { return std::sqrt(inner(*this, *this)); }

GridFunction& GridFunction::operator+=(const GridFunction& o) {
  check_same_depth(o);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += o.values_[k];
  return *this;
}

GridFunction& GridFunction::operator-=(const GridFunction& o) {
  check_same_depth(o);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= o.values_[k];
  return *this;
}

GridFunction& GridFunction::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
GridFunction operator*(double s, GridFunction a) { return a *= s; }

GridFunction hadamard(const GridFunction& a, const GridFunction& b) {
  a.check_same_depth(b);
  GridFunction out = a;
  auto ov = out.values();
  auto bv = b.values();
  for (std::size_t k = 0; k < ov.size(); ++k) ov[k] *= bv[k];
  return out;
}

double inner(const GridFunction& a, const GridFunction& b) {
  a.check_same_depth(b);
  auto av = a.values();
  auto bv = b.values();
  double s = 0.0;
  for (std::size_t k = 0; k < av.size(); ++k) s += av[k] * bv[k];
  return s * a.cell_area();
}

double sup_distance(const GridFunction& a, const GridFunction& b) {
  a.check_same_depth(b);
  auto av = a.values();
  auto bv = b.values();
  double m = 0.0;
  for (std::size_t k = 0; k < av.size(); ++k) m = std::max(m, std::abs(av[k] - bv[k]));
  return m;
}

// ---------------------------------------------------------------------------

GridLine haar(const DyadicInterval& I, HaarKind kind, int depth) {
  require(I.valid(depth), "interval outside grid");
  if (kind == HaarKind::cancellative)
    require(I.active(depth), "cancellative Haar needs an active interval");
  GridLine g(depth);
  const double amp = 1.0 / std::sqrt(I.length());
  const int a = I.first_cell(depth), n = I.cell_count(depth);
  for (int i = 0; i < n; ++i) {
    const bool right = (kind == HaarKind::cancellative) && i >= n / 2;
    g[a + i] = right ? -amp : amp;
  }
  return g;
}

GridLine normalized_indicator(const DyadicInterval& I, int depth) {
  require(I.valid(depth), "interval outside grid");
  GridLine g(depth);
  const int a = I.first_cell(depth), n = I.cell_count(depth);
  for (int i = a; i < a + n; ++i) g[i] = 1.0 / I.length();
  return g;
}

void haar_forward_1d(std::span<double> v, std::size_t stride, int depth,
                     std::vector<double>& scratch) {
  const int n = 1 << depth;
  scratch.resize(static_cast<std::size_t>(2 * n));
  double* sums = scratch.data();
  double* out = scratch.data() + n;
  const double w = std::ldexp(1.0, -depth);
  for (int i = 0; i < n; ++i) sums[i] = v[static_cast<std::size_t>(i) * stride] * w;
  for (int l = depth - 1; l >= 0; --l) {
    const double amp = std::sqrt(std::ldexp(1.0, l));  // |I|^{-1/2}
    for (int k = 0; k < (1 << l); ++k) {
      const double sl = sums[2 * k], sr = sums[2 * k + 1];
      out[(1 << l) + k] = (sl - sr) * amp;
      sums[k] = sl + sr;
    }
  }
  out[0] = sums[0];
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * stride] = out[i];
}

void haar_inverse_1d(std::span<double> v, std::size_t stride, int depth,
                     std::vector<double>& scratch) {
  const int n = 1 << depth;
  scratch.resize(static_cast<std::size_t>(2 * n));
  double* cur = scratch.data();
  double* nxt = scratch.data() + n;
  cur[0] = v[0];
  for (int l = 0; l < depth; ++l) {
    const double amp = std::sqrt(std::ldexp(1.0, l));
    for (int k = 0; k < (1 << l); ++k) {
      const double c = v[static_cast<std::size_t>((1 << l) + k) * stride] * amp;
      nxt[2 * k] = cur[k] + c;
      nxt[2 * k + 1] = cur[k] - c;
    }
    std::swap(cur, nxt);
  }
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * stride] = cur[i];
}

GridLine analyze_line(const GridLine& g) {
  GridLine out = g;
  std::vector<double> scratch;
  haar_forward_1d(out.values, 1, g.depth, scratch);
  return out;
}

GridLine synthesize_line(const GridLine& coeffs) {
  GridLine out = coeffs;
  std::vector<double> scratch;
  haar_inverse_1d(out.values, 1, coeffs.depth, scratch);
  return out;
}

HaarSpectrum::HaarSpectrum(int depth)
    : depth_(depth), c_(static_cast<std::size_t>(1) << (2 * depth), 0.0) {}

double HaarSpectrum::sum_of_squares() const {
  double s = 0.0;
  for (double v : c_) s += v * v;
  return s;
}

namespace {

void transform_axis(std::span<double> v, int depth, int axis, bool forward) {
  const std::size_t n = static_cast<std::size_t>(1) << depth;
  std::vector<double> scratch;
  for (std::size_t t = 0; t < n; ++t) {
    // axis 1 varies the row index: stride n along a fixed column t
    auto line = axis == 1 ? v.subspan(t) : v.subspan(t * n);
    const std::size_t stride = axis == 1 ? n : 1;
    if (forward)
      haar_forward_1d(line, stride, depth, scratch);
    else
      haar_inverse_1d(line, stride, depth, scratch);
  }
}

}  // namespace

HaarSpectrum analyze(const GridFunction& f) {
  HaarSpectrum s(f.depth());
  std::copy(f.values().begin(), f.values().end(), s.raw().begin());
  transform_axis(s.raw(), f.depth(), 1, true);
  transform_axis(s.raw(), f.depth(), 2, true);
  return s;
}

GridFunction synthesize(const HaarSpectrum& s) {
  std::vector<double> v(s.raw().begin(), s.raw().end());
  transform_axis(v, s.depth(), 2, false);
  transform_axis(v, s.depth(), 1, false);
  return GridFunction(s.depth(), std::move(v));
}

GridFunction analyze_axis(const GridFunction& f, int axis) {
  require(axis == 1 || axis == 2, "axis must be 1 or 2");
  GridFunction out = f;
  transform_axis(out.values(), f.depth(), axis, true);
  return out;
}

GridFunction synthesize_axis(const GridFunction& f, int axis) {
  require(axis == 1 || axis == 2, "axis must be 1 or 2");
  GridFunction out = f;
  transform_axis(out.values(), f.depth(), axis, false);
  return out;
}

// ---------------------------------------------------------------------------

GridFunction extend(const GridLine& g, int axis) {
  GridLine one(g.depth, 1.0);
  return axis == 1 ? GridFunction::tensor(g, one) : GridFunction::tensor(one, g);
}

GridLine partial_pairing(const GridFunction& f, const GridLine& h, int axis) {
  require(axis == 1 || axis == 2, "axis must be 1 or 2");
  if (h.depth != f.depth()) throw DepthMismatch(f.depth(), h.depth);
  const int n = f.side();
  GridLine out(f.depth());
  const double w = h.cell_width();
  for (int t = 0; t < n; ++t) {
    double s = 0.0;
    for (int u = 0; u < n; ++u) s += (axis == 1 ? f(u, t) : f(t, u)) * h[u];
    out[t] = s * w;
  }
  return out;
}

GridLine partial_average(const GridFunction& f, const DyadicInterval& I, int axis) {
  require(axis == 1 || axis == 2, "axis must be 1 or 2");
  require(I.valid(f.depth()), "interval outside grid");
  const int n = f.side(), a = I.first_cell(f.depth()), m = I.cell_count(f.depth());
  GridLine out(f.depth());
  for (int t = 0; t < n; ++t) {
    double s = 0.0;
    for (int u = a; u < a + m; ++u) s += axis == 1 ? f(u, t) : f(t, u);
    out[t] = s / m;
  }
  return out;
}

namespace {

// out(x) = g_axis(x_axis) * line(x_other)
GridFunction place(const GridLine& along, const GridLine& other, int axis) {
  return axis == 1 ? GridFunction::tensor(along, other)
                   : GridFunction::tensor(other, along);
}

void check_interval(const DyadicInterval& I, int depth, bool need_active) {
  require(I.valid(depth), "interval outside grid");
  if (need_active) require(I.active(depth), "interval must be active");
}

}  // namespace

GridFunction project(const GridFunction& f, const DeltaSel& s) {
  check_interval(s.I, f.depth(), true);
  const GridLine h = haar(s.I, HaarKind::cancellative, f.depth());
  return place(h, partial_pairing(f, h, s.axis), s.axis);
}

GridFunction project(const GridFunction& f, const ExpectSel& s) {
  check_interval(s.I, f.depth(), false);
  GridLine ind(f.depth());
  const int a = s.I.first_cell(f.depth()), m = s.I.cell_count(f.depth());
  for (int i = a; i < a + m; ++i) ind[i] = 1.0;
  return place(ind, partial_average(f, s.I, s.axis), s.axis);
}

GridFunction project(const GridFunction& f, const DeltaRect& s) {
  check_interval(s.I, f.depth(), true);
  check_interval(s.J, f.depth(), true);
  return project(project(f, DeltaSel{2, s.J}), DeltaSel{1, s.I});
}

GridFunction project(const GridFunction& f, const ExpectRect& s) {
  return project(project(f, ExpectSel{2, s.J}), ExpectSel{1, s.I});
}

GridFunction project(const GridFunction& f, const BlockSel& s) {
  check_interval(s.K, f.depth(), false);
  require(s.offset >= 0 && s.K.level + s.offset <= f.depth() - 1,
          "block offset out of range");
  GridFunction out(f.depth());
  const int l = s.K.level + s.offset;
  for (int k = s.K.index << s.offset; k < (s.K.index + 1) << s.offset; ++k)
    out += project(f, DeltaSel{s.axis, {l, k}});
  return out;
}

GridFunction project(const GridFunction& f, const BlockRect& s) {
  return project(project(f, BlockSel{2, s.V, s.j}), BlockSel{1, s.K, s.i});
}

}  // namespace bloomlab
