#pragma once

// Weights, dyadic A_p characteristics, weighted L^p / weak-L^p norms, the
// Bloom weight and the three BMO norms (little bmo, product BMO, sequence BMO).

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "bloomlab/dyadic.hpp"

namespace bloomlab {

struct CapabilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Weight {
 public:
  // Throws PreconditionError unless every cell value is finite and > 0.
  explicit Weight(GridFunction w);
  static Weight uniform(int depth, double c = 1.0);

  const GridFunction& function() const { return w_; }
  int depth() const { return w_.depth(); }
  double operator()(int i, int j) const { return w_(i, j); }
  // w(R) and <w>_R
  double measure(const DyadicRectangle& R) const { return w_.integral(R); }
  double average(const DyadicRectangle& R) const { return w_.average(R); }
  Weight pow(double e) const;

 private:
  GridFunction w_;
};

// Integrals of a grid function over every dyadic rectangle, built bottom-up
// by pairwise sums (no prefix-sum cancellation).
class RectangleIntegrals {
 public:
  explicit RectangleIntegrals(const GridFunction& f);
  double integral(const DyadicRectangle& R) const;
  double average(const DyadicRectangle& R) const { return integral(R) / R.area(); }

 private:
  int depth_;
  // level pair (li, lj) -> 2^li x 2^lj table
  std::vector<std::vector<double>> tables_;
};

// Dyadic A_p: sup over all dyadic rectangles of <w>_R <w^{1-p'}>_R^{p-1}.
double ap_characteristic(const Weight& w, double p);

// nu = mu^{1/p} lambda^{-1/p}
Weight bloom_weight(const Weight& mu, const Weight& lambda, double p);

double lp_norm(const GridFunction& f, const Weight& w, double p);
// max over values v > 0 of |f| of v * w({|f| >= v})^{1/p}
double weak_lp_norm(const GridFunction& f, const Weight& w, double p);

struct BmoCertificate {
  double value = 0.0;
  std::optional<DyadicRectangle> rectangle;  // bmo / rect witness
  std::vector<int> cells;                    // product BMO witness (flat cell ids)
};

BmoCertificate bmo_little(const GridFunction& b, const Weight& nu);

enum class ProdMode { exact, greedy, rect };
const char* to_string(ProdMode m);

// Largest depth for which exact product-BMO enumeration is offered.
inline constexpr int kExactProdMaxDepth = 2;

BmoCertificate bmo_prod(const GridFunction& b, const Weight& nu, ProdMode mode);
// exact when the depth allows it, greedy otherwise
BmoCertificate bmo_prod_best(const GridFunction& b, const Weight& nu);
// The product-BMO objective evaluated on a given cell set.
double bmo_prod_objective(const GridFunction& b, const Weight& nu, const std::vector<int>& cells);

double bmo_sequence(const std::map<DyadicInterval, double>& a);

// ---------------------------------------------------------------------------
// Weight generation

struct AxisWeightSpec {
  enum class Kind { constant, power, haar_perturbation } kind = Kind::constant;
  double c = 1.0;       // constant value
  double a = 0.0;       // power exponent, x^a
  double eps = 0.0;     // perturbation amplitude
  int level_cap = 0;    // deepest perturbed level
};

// Tensor product of two one-variable profiles.
struct WeightSpec {
  AxisWeightSpec x1;
  AxisWeightSpec x2;
};

// Throws PreconditionError when a power exponent lies outside (-1, p-1).
Weight gen_weight(const WeightSpec& spec, int depth, double p, std::uint64_t seed);
GridLine gen_axis_profile(const AxisWeightSpec& spec, int depth, double p, std::uint64_t seed);

// ---------------------------------------------------------------------------

struct DualityRatio {
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  bool degenerate = false;  // rhs == 0
  double bmo_prod = 0.0;
  ProdMode mode = ProdMode::exact;
};

// Sum |<b,h_R>| |c_R| against ||b||_{BMO_prod(nu)} * int (sum c_R^2 1_R/|R|)^{1/2} nu.
// Only the active (I,J) entries of c are used.
DualityRatio duality_ratio(const GridFunction& b, const HaarSpectrum& c, const Weight& nu);
DualityRatio duality_ratio(const GridFunction& b, const HaarSpectrum& c, const Weight& mu,
                           const Weight& lambda, double p);

}  // namespace bloomlab
