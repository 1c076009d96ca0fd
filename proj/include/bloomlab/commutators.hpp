#pragma once

// Commutators [b,T], nested commutators [T1,[b,T2]] and iterated
// commutators, plus exact decompositions of [U1,[b,U2]] into named parts for
// the four operator pairings (shift/shift, paraproduct/paraproduct,
// shift/paraproduct and dual/direct paraproducts).

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bloomlab/operators.hpp"
#include "bloomlab/paraproducts.hpp"

namespace bloomlab {

// b T - T b
OperatorHandle commutator(const GridFunction& b, const OperatorHandle& t);
// T1(b T2 f) - T1 T2(b f) - b T2 T1 f + T2(b T1 f); T1, T2 must act in different variables
OperatorHandle nested_commutator(const OperatorHandle& t1, const GridFunction& b,
                                 const OperatorHandle& t2);
// [b, [b, ... [b, T]]] with k brackets
OperatorHandle iterated_commutator(const GridFunction& b, const OperatorHandle& t, int k);

enum class DecompositionCase { shift_shift, pi_pi, mixed_shift_pi, pi_pi_dual };
const char* to_string(DecompositionCase c);

using AxisSpec = std::variant<ShiftSpec, ParaproductSpec>;

struct NamedPart {
  std::string name;
  GridFunction value;
};

struct DecompositionReport {
  DecompositionCase tag = DecompositionCase::shift_shift;
  GridFunction direct;                       // [U1,[b,U2]] f evaluated directly
  std::vector<NamedPart> parts;              // terms of the displayed split
  std::vector<NamedPart> boundary_parts;     // finite-grid P1/P2/P12 insertions
  std::vector<std::pair<std::string, double>> identities;  // auxiliary identity residuals
  double residual_sup = 0.0;
  double tolerance = 0.0;
};

// Throws IdentityFailure, listing every part, if direct and reassembled
// values differ by more than tolerance = 1e-10 (1 + |b|_inf |f|_inf).
// Operator kinds: shift_shift (x1 shift, x2 shift), pi_pi (direct, direct),
// mixed_shift_pi (x1 shift, direct x2 paraproduct), pi_pi_dual (dual x1, direct x2).
DecompositionReport verify_decomposition(DecompositionCase c, const GridFunction& b,
                                         const AxisSpec& u1, const AxisSpec& u2,
                                         const GridFunction& f);

nlohmann::json to_json(const DecompositionReport& r);

// ---------------------------------------------------------------------------
// Closed forms of individual pieces, evaluated coefficient by coefficient.

// E = (S1S2)^{b,1,2} - (S1S2)^{b,1,1} - (S1S2)^{b,2,2} + (S1S2)^{b,2,1} applied to f
GridFunction shift_e_term(const GridFunction& b, const ShiftSpec& s1, const ShiftSpec& s2,
                          const GridFunction& f);
// Same, with each alternating sum of averages of b written as telescoping
// sums of averaged martingale differences.
GridFunction shift_e_term_telescoped(const GridFunction& b, const ShiftSpec& s1,
                                     const ShiftSpec& s2, const GridFunction& f);
// S1(A5(b,f)) - A5(b, S1 f) as the coefficient sum
// sum a_{K,(I)} [<<b,h_J>_2>_{I1} - <<b,h_J>_2>_{I2}] <f, h_{I1} (x) h_J> h_{I2} (x) h_J h_J
GridFunction shift_a5_difference(const GridFunction& b, const ShiftSpec& s1,
                                 const GridFunction& f);
// pi1(a2_1(b,f)) - A5(b, pi1 f), average form and expanded form
GridFunction pi_a5_difference_average(const GridFunction& b, const ParaproductSpec& p1,
                                      const GridFunction& f);
GridFunction pi_a5_difference_expanded(const GridFunction& b, const ParaproductSpec& p1,
                                       const GridFunction& f);
// The three tail sums of the paraproduct/paraproduct split
GridFunction pipi_tail1(const GridFunction& b, const ParaproductSpec& p1,
                        const ParaproductSpec& p2, const GridFunction& f);
GridFunction pipi_tail2(const GridFunction& b, const ParaproductSpec& p1,
                        const ParaproductSpec& p2, const GridFunction& f);
GridFunction pipi_tail3(const GridFunction& b, const ParaproductSpec& p1,
                        const ParaproductSpec& p2, const GridFunction& f);
// sum_{K,V} a_K a_V sum_{I in K, J in V} b_IJ f_IJ / (|K||V|) h_K (x) h_V
GridFunction pipi_tail_expanded(const GridFunction& b, const ParaproductSpec& p1,
                                const ParaproductSpec& p2, const GridFunction& f);
// sum_V a_V sum a_{K,(I)} sum_{J in V} |V|^{-1} [<<b,h_J>_2>_{I2} - <<b,h_J>_2>_{I1}]
//   <f, h_{I1} (x) h_J> h_{I2} (x) h_V
GridFunction mixed_rest(const GridFunction& b, const ShiftSpec& s1, const ParaproductSpec& p2,
                        const GridFunction& f);
// E1, E2 in their displayed average forms, and the combined coefficient sum
// sum_{K,V} sum_{I in K, J in V} a_K a_V |V|^{-1} |K|^{-1} b_IJ <f, h_K (x) h_J> h_I (x) h_V
GridFunction dual_e1_average(const GridFunction& b, const ParaproductSpec& p1,
                             const ParaproductSpec& p2, const GridFunction& f);
GridFunction dual_e2_average(const GridFunction& b, const ParaproductSpec& p1,
                             const ParaproductSpec& p2, const GridFunction& f);
GridFunction dual_e_expanded(const GridFunction& b, const ParaproductSpec& p1,
                             const ParaproductSpec& p2, const GridFunction& f);

}  // namespace bloomlab
