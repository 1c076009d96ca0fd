#pragma once

// Bi-parameter and one-parameter paraproducts of (b, f) on the finite grid,
// together with the boundary operators that make the product expansions
// exact once the dyadic sums are truncated to active intervals:
//
//   bf = A1 + ... + A8 + W + P1 + P2 - P12
//   bf = a1_1 + a1_2 + w1 + P1 = a2_1 + a2_2 + w2 + P2
//
// P1(b,f)(x1,x2) = (int b(y1,x2) dy1)(int f(y1,x2) dy1), P2 symmetric and
// P12(b,f) = (int b)(int f).

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bloomlab/dyadic.hpp"

namespace bloomlab {

enum class ParaproductKind {
  A1, A2, A3, A4, A5, A6, A7, A8, W,
  a1_1, a1_2, w1, a2_1, a2_2, w2,
  P1, P2, P12
};

inline constexpr std::array kBiKinds{
    ParaproductKind::A1, ParaproductKind::A2, ParaproductKind::A3,
    ParaproductKind::A4, ParaproductKind::A5, ParaproductKind::A6,
    ParaproductKind::A7, ParaproductKind::A8, ParaproductKind::W};

std::string_view name(ParaproductKind k);
// A_i for i = 1..8
ParaproductKind a_kind(int i);

GridFunction paraproduct(ParaproductKind kind, const GridFunction& b, const GridFunction& f);

// Sum of A_i(b, f) for i in [first, last].
GridFunction sum_a(const GridFunction& b, const GridFunction& f, int first, int last);
// P1 + P2 - P12
GridFunction boundary_bi(const GridFunction& b, const GridFunction& f);

struct IdentityFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ExpansionMode { bi, param1, param2 };

struct ProductDecomposition {
  ExpansionMode mode;
  std::vector<std::pair<ParaproductKind, GridFunction>> parts;  // P12 enters with a minus
  GridFunction residual;  // bf - sum of parts
  double residual_sup = 0.0;
  double tolerance = 0.0;
};

// Throws IdentityFailure if the residual exceeds 1e-12 (1 + |b|_inf |f|_inf).
ProductDecomposition decompose_product(const GridFunction& b, const GridFunction& f,
                                       ExpansionMode mode);

}  // namespace bloomlab
