#pragma once

// One-parameter dyadic shifts and paraproducts acting in x1 or x2, the
// operator algebra used to build commutators, the shift/paraproduct terms
// with b inserted, square and maximal functions, and weighted operator norms.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "bloomlab/dyadic.hpp"
#include "bloomlab/kernels.hpp"
#include "bloomlab/weights.hpp"

namespace bloomlab {

// Linear map on GridFunctions of a fixed depth, with its L^2 adjoint.
// axis is 1 or 2 when the operator acts in that variable only, 0 otherwise.
class OperatorHandle {
 public:
  using Map = std::function<GridFunction(const GridFunction&)>;

  OperatorHandle(std::string descriptor, int depth, int axis, Map apply, Map adjoint);

  GridFunction apply(const GridFunction& f) const;
  GridFunction operator()(const GridFunction& f) const { return apply(f); }
  GridFunction apply_adjoint(const GridFunction& g) const;
  OperatorHandle adjoint() const;

  const std::string& descriptor() const { return desc_; }
  int depth() const { return depth_; }
  int axis() const { return axis_; }

 private:
  std::string desc_;
  int depth_;
  int axis_;
  std::shared_ptr<const Map> fwd_, bwd_;
};

OperatorHandle identity_operator(int depth);
OperatorHandle multiplication(const GridFunction& m);
// T after U
OperatorHandle compose(const OperatorHandle& t, const OperatorHandle& u);
OperatorHandle operator+(const OperatorHandle& t, const OperatorHandle& u);
OperatorHandle operator-(const OperatorHandle& t, const OperatorHandle& u);
OperatorHandle operator*(double s, const OperatorHandle& t);
OperatorHandle zero_operator(int depth);

// Operator given by a 4^L x 4^L matrix on row-major cell values.
OperatorHandle matrix_operator(std::string descriptor, int depth, const kernels::DenseMatrix& m);
// Operator acting in one variable through an N x N matrix on cell values.
OperatorHandle axis_operator(std::string descriptor, int axis, const kernels::DenseMatrix& m);

// ---------------------------------------------------------------------------
// Shifts and paraproducts

struct ShiftKey {
  DyadicInterval K, I1, I2;
  auto operator<=>(const ShiftKey&) const = default;
};

struct ShiftSpec {
  int axis = 1;
  int k1 = 0;
  int k2 = 0;
  std::map<ShiftKey, double> coeffs;
};

// |I1|^{1/2} |I2|^{1/2} / |K|
double shift_bound(const ShiftKey& key);

enum class ParaForm { direct, dual };

struct ParaproductSpec {
  int axis = 1;
  ParaForm form = ParaForm::direct;
  bool abs_flag = false;  // use |a_K|
  std::map<DyadicInterval, double> coeffs;
};

// Throw PreconditionError on bad geometry, normalization or inactive intervals.
void validate(const ShiftSpec& s, int depth);
void validate(const ParaproductSpec& s, int depth);

// S f = sum a h_{I2} (x) <f, h_{I1}>  (in the spec's variable)
OperatorHandle make_shift(const ShiftSpec& s, int depth);
// direct: sum a_K h_K (x) <f>_K ; dual: sum a_K 1_K/|K| (x) <f, h_K>
OperatorHandle make_paraproduct(const ParaproductSpec& s, int depth);
kernels::DenseMatrix shift_matrix(const ShiftSpec& s, int depth);
kernels::DenseMatrix paraproduct_matrix(const ParaproductSpec& s, int depth);

// Every K with room for both complexities gets all (I1, I2) pairs, each
// coefficient +-shift_bound with a random sign.
ShiftSpec gen_shift(int axis, int k1, int k2, int depth, std::uint64_t seed);
// Gaussian a_K on all active K, rescaled to sequence BMO norm exactly 1.
ParaproductSpec gen_paraproduct(int axis, ParaForm form, int depth, std::uint64_t seed);

// (S1 S2)^{b,i,j} f = sum <b>_{I_i x J_j} a_{K,(I)} a_{V,(J)} <f, h_{I1} (x) h_{J1}> h_{I2} (x) h_{J2}
OperatorHandle e_term_shift(const GridFunction& b, const ShiftSpec& s1, const ShiftSpec& s2,
                            int i, int j);
// (pi1 pi2)^b f = sum <b>_{KxV} a_K a_V <f>_{KxV} h_K (x) h_V, direct forms
OperatorHandle pipi_b(const GridFunction& b, const ParaproductSpec& p1,
                      const ParaproductSpec& p2);

// ---------------------------------------------------------------------------
// Square and maximal functions

enum class SquareKind { full, x1, x2, x1_max, x2_max };
enum class MaximalKind { full, x1, x2 };

GridLine square_function_1d(const GridLine& g);
GridLine maximal_1d(const GridLine& g);
GridFunction square_function(SquareKind kind, const GridFunction& f);
GridFunction maximal(MaximalKind kind, const GridFunction& f);

// axis 1: sum_K h_K (x) S<f, h_K>_1 ; axis 2 symmetric
GridFunction aux_phi(const GridFunction& f, int axis);

// ---------------------------------------------------------------------------
// Matrices and norms

inline constexpr std::size_t kMaxAssembleCells = std::size_t{1} << 14;

// Column c is T applied to the indicator of cell c (row-major cell order).
kernels::DenseMatrix assemble_matrix(const OperatorHandle& t);

struct NonConvergence : std::runtime_error {
  NonConvergence(const std::string& what, double residual)
      : std::runtime_error(what), residual(residual) {}
  double residual;
};

struct NormEstimate {
  double value = 0.0;     // sqrt of the final Rayleigh quotient (a lower bound)
  double residual = 0.0;  // |G x - theta x| / theta at exit
  int iterations = 0;
};

struct PowerOptions {
  double tolerance = 1e-9;
  int max_iterations = 50000;
  std::uint64_t seed = 1;
};

// L^2(mu) -> L^2(lambda) norm: top singular value of D_l^{1/2} M D_m^{-1/2}
// with D_w = diag(w * cell area), by power iteration on the normal matrix.
NormEstimate operator_norm_p2(const OperatorHandle& t, const Weight& mu, const Weight& lambda,
                              const PowerOptions& opt = {});
NormEstimate operator_norm_p2(const kernels::DenseMatrix& m, const Weight& mu,
                              const Weight& lambda, const PowerOptions& opt = {});

// Best |Tf|_{L^p(lambda)} / |f|_{L^p(mu)} found by random starts plus
// normalized gradient ascent; a lower estimate of the norm.
double operator_norm_lower(const OperatorHandle& t, const Weight& mu, const Weight& lambda,
                           double p, int budget, std::uint64_t seed);
double operator_norm_lower(const kernels::DenseMatrix& m, const Weight& mu, const Weight& lambda,
                           double p, int budget, std::uint64_t seed);

}  // namespace bloomlab
