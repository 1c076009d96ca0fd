#pragma once

// Dyadic geometry on [0,1)^2, piecewise-constant grid functions and the
// extended tensor Haar system (cancellative Haar plus a top-average slot).
//
// Sign convention: h_I = |I|^{-1/2} (1_{left half} - 1_{right half}).

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bloomlab {

struct PreconditionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct DepthMismatch : std::invalid_argument {
  DepthMismatch(int a, int b)
      : std::invalid_argument("depth mismatch: " + std::to_string(a) + " vs " +
                              std::to_string(b)) {}
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw PreconditionError(msg);
}

// I = [index 2^-level, (index+1) 2^-level)
struct DyadicInterval {
  int level = 0;
  int index = 0;

  double length() const { return std::ldexp(1.0, -level); }
  double left() const { return index * length(); }
  double right() const { return (index + 1) * length(); }
  bool active(int depth) const { return level <= depth - 1; }
  bool valid(int depth) const {
    return level >= 0 && level <= depth && index >= 0 && index < (1 << level);
  }
  bool contains(const DyadicInterval& o) const {
    return o.level >= level && (o.index >> (o.level - level)) == index;
  }
  // I^{(k)}
  DyadicInterval ancestor(int k) const {
    if (k < 0 || k > level) throw PreconditionError("ancestor above [0,1)");
    return {level - k, index >> k};
  }
  DyadicInterval left_child() const { return {level + 1, 2 * index}; }
  DyadicInterval right_child() const { return {level + 1, 2 * index + 1}; }
  // Cells [first, last) of a depth-L grid covered by I.
  int first_cell(int depth) const { return index << (depth - level); }
  int cell_count(int depth) const { return 1 << (depth - level); }
  // Heap slot in the extended index space: 0 is the top slot, so only
  // active intervals get slots 1 .. 2^L - 1.
  int slot() const { return (1 << level) + index; }
  static DyadicInterval from_slot(int slot);

  auto operator<=>(const DyadicInterval&) const = default;
};

struct DyadicRectangle {
  DyadicInterval ix;  // parameter 1
  DyadicInterval jy;  // parameter 2

  double area() const { return ix.length() * jy.length(); }
  bool contains(const DyadicRectangle& o) const {
    return ix.contains(o.ix) && jy.contains(o.jy);
  }
  auto operator<=>(const DyadicRectangle&) const = default;
};

std::string to_string(const DyadicInterval& I);
std::string to_string(const DyadicRectangle& R);

// All dyadic intervals of levels 0..max_level, ordered by level then index.
std::vector<DyadicInterval> intervals_up_to(int max_level);
inline std::vector<DyadicInterval> active_intervals(int depth) {
  return intervals_up_to(depth - 1);
}
// All dyadic rectangles with both sides at levels 0..depth.
std::vector<DyadicRectangle> all_rectangles(int depth);

// Piecewise-constant function of one variable on 2^L cells.
struct GridLine {
  int depth = 1;
  std::vector<double> values;

  GridLine() = default;
  explicit GridLine(int L, double fill = 0.0);
  int size() const { return static_cast<int>(values.size()); }
  double cell_width() const { return std::ldexp(1.0, -depth); }
  double& operator[](int i) { return values[static_cast<std::size_t>(i)]; }
  double operator[](int i) const { return values[static_cast<std::size_t>(i)]; }
  double integral() const;
  double average(const DyadicInterval& I) const;
};

double inner(const GridLine& a, const GridLine& b);

// Real function on [0,1)^2, constant on the 2^L x 2^L cells. values is
// row-major with the row index the x1 cell and the column index the x2 cell.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(int depth, double fill = 0.0);
  GridFunction(int depth, std::vector<double> values);

  static GridFunction tensor(const GridLine& g1, const GridLine& g2);

  int depth() const { return depth_; }
  int side() const { return 1 << depth_; }
  std::size_t cells() const { return values_.size(); }
  double cell_area() const { return std::ldexp(1.0, -2 * depth_); }

  double& operator()(int i, int j) { return values_[idx(i, j)]; }
  double operator()(int i, int j) const { return values_[idx(i, j)]; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  double integral() const;
  double integral(const DyadicRectangle& R) const;
  double average(const DyadicRectangle& R) const;
  double sup_norm() const;
  double l2_norm() const;

  GridFunction& operator+=(const GridFunction& o);
  GridFunction& operator-=(const GridFunction& o);
  GridFunction& operator*=(double s);

  void check_same_depth(const GridFunction& o) const {
    if (o.depth_ != depth_) throw DepthMismatch(depth_, o.depth_);
  }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(side()) +
           static_cast<std::size_t>(j);
  }
  int depth_ = 1;
  std::vector<double> values_;
};

GridFunction operator+(GridFunction a, const GridFunction& b);
GridFunction operator-(GridFunction a, const GridFunction& b);
GridFunction operator*(double s, GridFunction a);
// Pointwise product.
GridFunction hadamard(const GridFunction& a, const GridFunction& b);
double inner(const GridFunction& a, const GridFunction& b);
double sup_distance(const GridFunction& a, const GridFunction& b);

// ---------------------------------------------------------------------------
// Haar system

enum class HaarKind { cancellative, noncancellative };

GridLine haar(const DyadicInterval& I, HaarKind kind, int depth);
// 1_I / |I|
GridLine normalized_indicator(const DyadicInterval& I, int depth);

// Extended index: 0 is the top slot (pairs with 1 on [0,1)), slot s >= 1 is
// the active interval DyadicInterval::from_slot(s).
struct ExtendedIndex {
  int slot = 0;
  bool is_top() const { return slot == 0; }
  DyadicInterval interval() const { return DyadicInterval::from_slot(slot); }
  static ExtendedIndex top() { return {0}; }
  static ExtendedIndex of(const DyadicInterval& I) { return {I.slot()}; }
};

// In-place 1D transforms on a strided line of 2^L samples.
void haar_forward_1d(std::span<double> v, std::size_t stride, int depth,
                     std::vector<double>& scratch);
void haar_inverse_1d(std::span<double> v, std::size_t stride, int depth,
                     std::vector<double>& scratch);
GridLine analyze_line(const GridLine& g);
GridLine synthesize_line(const GridLine& coeffs);

class HaarSpectrum {
 public:
  HaarSpectrum() = default;
  explicit HaarSpectrum(int depth);

  int depth() const { return depth_; }
  int side() const { return 1 << depth_; }
  double& operator()(int a, int b) { return c_[idx(a, b)]; }
  double operator()(int a, int b) const { return c_[idx(a, b)]; }
  double& at(ExtendedIndex a, ExtendedIndex b) { return (*this)(a.slot, b.slot); }
  double at(ExtendedIndex a, ExtendedIndex b) const { return (*this)(a.slot, b.slot); }
  // <f, h_I (x) h_J> for active I, J
  double& at(const DyadicInterval& I, const DyadicInterval& J) {
    return (*this)(I.slot(), J.slot());
  }
  double at(const DyadicInterval& I, const DyadicInterval& J) const {
    return (*this)(I.slot(), J.slot());
  }
  std::span<const double> raw() const { return c_; }
  std::span<double> raw() { return c_; }
  double sum_of_squares() const;

 private:
  std::size_t idx(int a, int b) const {
    return static_cast<std::size_t>(a) * static_cast<std::size_t>(side()) +
           static_cast<std::size_t>(b);
  }
  int depth_ = 1;
  std::vector<double> c_;
};

HaarSpectrum analyze(const GridFunction& f);
GridFunction synthesize(const HaarSpectrum& s);

// Transform along one axis only; axis 1 acts on rows (x1), axis 2 on columns.
GridFunction analyze_axis(const GridFunction& f, int axis);
GridFunction synthesize_axis(const GridFunction& f, int axis);

// ---------------------------------------------------------------------------
// Projections

struct DeltaSel {  // Delta_I^axis
  int axis;
  DyadicInterval I;
};
struct ExpectSel {  // E_I^axis
  int axis;
  DyadicInterval I;
};
struct DeltaRect {  // Delta_{I x J}
  DyadicInterval I, J;
};
struct ExpectRect {  // E_{I x J}
  DyadicInterval I, J;
};
struct BlockSel {  // Delta_{K,i}^axis
  int axis;
  DyadicInterval K;
  int offset;
};
struct BlockRect {  // Delta_{K x V}^{i,j}
  DyadicInterval K, V;
  int i, j;
};

GridFunction project(const GridFunction& f, const DeltaSel& s);
GridFunction project(const GridFunction& f, const ExpectSel& s);
GridFunction project(const GridFunction& f, const DeltaRect& s);
GridFunction project(const GridFunction& f, const ExpectRect& s);
GridFunction project(const GridFunction& f, const BlockSel& s);
GridFunction project(const GridFunction& f, const BlockRect& s);

// <f, h>_axis as a function of the other variable.
GridLine partial_pairing(const GridFunction& f, const GridLine& h, int axis);
// <f>_{I,axis}: average over I in the given variable.
GridLine partial_average(const GridFunction& f, const DyadicInterval& I, int axis);

// Builds g1 (x) g2 with g placed on the given axis and ones elsewhere.
GridFunction extend(const GridLine& g, int axis);

}  // namespace bloomlab
