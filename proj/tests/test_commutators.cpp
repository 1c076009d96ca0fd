#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "bloomlab/commutators.hpp"
#include "support.hpp"

using namespace bloomlab;
using testsupport::haar2;
using testsupport::random_function;

namespace {

constexpr int L = 3;

struct Fixture {
  ShiftSpec s1 = gen_shift(1, 1, 2, L, 1);
  ShiftSpec s2 = gen_shift(2, 1, 0, L, 2);
  ParaproductSpec p1 = gen_paraproduct(1, ParaForm::direct, L, 3);
  ParaproductSpec p1d = gen_paraproduct(1, ParaForm::dual, L, 4);
  ParaproductSpec p2 = gen_paraproduct(2, ParaForm::direct, L, 5);

  std::pair<AxisSpec, AxisSpec> ops(DecompositionCase c) const {
    switch (c) {
      case DecompositionCase::shift_shift: return {s1, s2};
      case DecompositionCase::pi_pi: return {p1, p2};
      case DecompositionCase::mixed_shift_pi: return {s1, p2};
      case DecompositionCase::pi_pi_dual: return {p1d, p2};
    }
    return {s1, s2};
  }
};

const DecompositionCase kCases[] = {DecompositionCase::shift_shift, DecompositionCase::pi_pi,
                                    DecompositionCase::mixed_shift_pi,
                                    DecompositionCase::pi_pi_dual};

double identity_residual(const DecompositionReport& r, const std::string& name) {
  for (const auto& [n, v] : r.identities)
    if (n == name) return v;
  FAIL("missing identity " << name);
  return 0.0;
}

}  // namespace

TEST_CASE("commutator basics") {
  const auto T = make_shift(gen_shift(1, 1, 1, L, 1), L);
  const auto f = random_function(L, 2);
  const auto b1 = random_function(L, 3), b2 = random_function(L, 4);
  CHECK(commutator(GridFunction(L, 4.0), T)(f).sup_norm() < 1e-13);
  CHECK(commutator(b1, identity_operator(L))(f).sup_norm() == 0.0);
  CHECK(sup_distance(commutator(b1 + b2, T)(f), commutator(b1, T)(f) + commutator(b2, T)(f)) <
        1e-13);
  // b T f - T(b f) by hand
  CHECK(sup_distance(commutator(b1, T)(f), hadamard(b1, T(f)) - T(hadamard(b1, f))) == 0.0);
}

TEST_CASE("nested commutator") {
  const auto T1 = make_shift(gen_shift(1, 0, 1, L, 5), L);
  const auto T2 = make_paraproduct(gen_paraproduct(2, ParaForm::direct, L, 6), L);
  const auto f = random_function(L, 7), b = random_function(L, 8);
  CHECK(nested_commutator(T1, GridFunction(L, 1.0), T2)(f).sup_norm() < 1e-13);
  CHECK(sup_distance(nested_commutator(T1, -1.0 * b, T2)(f), -1.0 * nested_commutator(T1, b, T2)(f)) <
        1e-13);
  // [T1, C] with C = [b, T2], evaluated as T1 C - C T1
  const auto C = commutator(b, T2);
  CHECK(sup_distance(nested_commutator(T1, b, T2)(f), T1(C(f)) - C(T1(f))) < 1e-13);
  // b depending on x1 only
  Rng rng(1);
  GridLine b1(L);
  for (double& v : b1.values) v = rng.normal();
  const auto bx = GridFunction::tensor(b1, GridLine(L, 1.0));
  const auto Cx = commutator(bx, T2);
  CHECK(sup_distance(nested_commutator(T1, bx, T2)(f), T1(Cx(f)) - Cx(T1(f))) < 1e-13);
  CHECK_THROWS_AS(nested_commutator(T1, b, T1), PreconditionError);
  CHECK_THROWS_AS(nested_commutator(T1, b, multiplication(b)), PreconditionError);
}

TEST_CASE("iterated commutator") {
  const auto T = make_shift(gen_shift(2, 1, 1, L, 9), L);
  const auto b = random_function(L, 1), f = random_function(L, 2);
  CHECK(sup_distance(iterated_commutator(b, T, 1)(f), commutator(b, T)(f)) == 0.0);
  for (int k = 1; k <= 3; ++k)
    CHECK(iterated_commutator(GridFunction(L, -2.0), T, k)(f).sup_norm() < 1e-12);
  CHECK_THROWS_AS(iterated_commutator(b, T, 0), PreconditionError);

  // kernel operator vanishing on the diagonal: [b,[b,T]] 1_A (x) = sum_y (b(x)-b(y))^2 K(x,y) 1_A(y) |cell|
  const int d = 2, n = 16;
  kernels::DenseMatrix m(n, n);
  Rng rng(3);
  for (int x = 0; x < n; ++x)
    for (int y = 0; y < n; ++y)
      if (x != y) m(x, y) = rng.normal() / n;
  const auto K = matrix_operator("kernel", d, m);
  const auto bb = random_function(d, 4);
  GridFunction A(d);
  A(0, 1) = A(1, 1) = 1.0;
  const auto lhs = iterated_commutator(bb, K, 2)(A);
  for (int x = 0; x < n; ++x) {
    double s = 0.0;
    for (int y = 0; y < n; ++y) {
      const double db = bb.values()[x] - bb.values()[y];
      s += db * db * m(x, y) * A.values()[y];
    }
    CHECK(std::abs(lhs.values()[x] - s) < 1e-13);
  }
}

TEST_CASE("decompositions reassemble the nested commutator") {
  const Fixture fx;
  for (auto c : kCases)
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto b = random_function(L, 100 + seed, 2.0), f = random_function(L, 200 + seed);
      const auto [u1, u2] = fx.ops(c);
      const auto r = verify_decomposition(c, b, u1, u2, f);
      CHECK(r.residual_sup <= r.tolerance);
      CHECK(r.direct.sup_norm() > 0.0);
      CHECK(r.identities.size() >= 1);
      CHECK(r.parts.size() >= 8);
      for (const auto& [name, res] : r.identities) {
        INFO(to_string(c) << ": " << name);
        CHECK(res < 1e-12);
      }
    }
}

TEST_CASE("constant symbol kills every part") {
  const Fixture fx;
  const auto f = random_function(L, 9);
  for (auto c : kCases) {
    const auto [u1, u2] = fx.ops(c);
    const auto r = verify_decomposition(c, GridFunction(L, 3.0), u1, u2, f);
    for (const auto& p : r.parts) {
      INFO(to_string(c) << ": " << p.name);
      CHECK(p.value.sup_norm() < 1e-12);
    }
    for (const auto& p : r.boundary_parts) {
      INFO(to_string(c) << ": " << p.name);
      CHECK(p.value.sup_norm() < 1e-12);
    }
  }
}

TEST_CASE("parts are linear in b and in f") {
  const Fixture fx;
  const auto b = random_function(L, 1), f = random_function(L, 2);
  for (auto c : kCases) {
    const auto [u1, u2] = fx.ops(c);
    const auto r = verify_decomposition(c, b, u1, u2, f);
    const auto rb = verify_decomposition(c, -2.0 * b, u1, u2, f);
    const auto rf = verify_decomposition(c, b, u1, u2, 3.0 * f);
    for (std::size_t i = 0; i < r.parts.size(); ++i) {
      CHECK(sup_distance(rb.parts[i].value, -2.0 * r.parts[i].value) < 1e-12);
      CHECK(sup_distance(rf.parts[i].value, 3.0 * r.parts[i].value) < 1e-12);
    }
  }
}

TEST_CASE("shift/shift E term with single coefficients") {
  const ShiftKey k1{{0, 0}, {1, 1}, {1, 0}}, k2{{1, 1}, {2, 2}, {2, 3}};
  const ShiftSpec s1{1, 1, 1, {{k1, shift_bound(k1)}}}, s2{2, 1, 1, {{k2, -shift_bound(k2)}}};
  const auto b = random_function(L, 5), f = random_function(L, 6);
  const auto E = shift_e_term(b, s1, s2, f);
  // alternating sum of averages of b, expanded with dyadic-core projections:
  // <b>_{I x J} - <b>_{K x J} - <b>_{I x V} + <b>_{K x V} = <Delta_{K x V} b>_{I x J} for one level
  auto avg_delta = [&](const ShiftKey& a, const DyadicInterval& I, const ShiftKey& c,
                       const DyadicInterval& J) {
    return project(b, DeltaRect{a.K, c.K}).average({I, J});
  };
  const double t = avg_delta(k1, k1.I1, k2, k2.I2) - avg_delta(k1, k1.I1, k2, k2.I1) -
                   avg_delta(k1, k1.I2, k2, k2.I2) + avg_delta(k1, k1.I2, k2, k2.I1);
  const double coef = shift_bound(k1) * -shift_bound(k2) * inner(f, haar2(k1.I1, k2.I1, L));
  CHECK(sup_distance(E, t * coef * haar2(k1.I2, k2.I2, L)) < 1e-13);
  CHECK(sup_distance(E, shift_e_term_telescoped(b, s1, s2, f)) < 1e-13);
}

TEST_CASE("paraproduct/paraproduct tails carry a minus sign") {
  const Fixture fx;
  const auto b = random_function(L, 11), f = random_function(L, 12);
  const auto t = pipi_tail1(b, fx.p1, fx.p2, f) + pipi_tail2(b, fx.p1, fx.p2, f) +
                 pipi_tail3(b, fx.p1, fx.p2, f);
  const auto e = pipi_tail_expanded(b, fx.p1, fx.p2, f);
  CHECK(sup_distance(t, -1.0 * e) < 1e-12);
  CHECK(sup_distance(t, e) > 1e-3);
  // unit-scale case: b = f = h (x) h, one coefficient each
  const int d = 1;
  const ParaproductSpec q1{1, ParaForm::direct, false, {{DyadicInterval{0, 0}, 1.0}}};
  const ParaproductSpec q2{2, ParaForm::direct, false, {{DyadicInterval{0, 0}, 1.0}}};
  const auto h = haar2({0, 0}, {0, 0}, d);
  const auto s = pipi_tail1(h, q1, q2, h) + pipi_tail2(h, q1, q2, h) + pipi_tail3(h, q1, q2, h);
  CHECK(sup_distance(s, -1.0 * h) < 1e-14);
}

TEST_CASE("dual case combined coefficient sum by brute force") {
  const int d = 2;
  const auto p1 = gen_paraproduct(1, ParaForm::dual, d, 1);
  const auto p2 = gen_paraproduct(2, ParaForm::direct, d, 2);
  const auto b = random_function(d, 3), f = random_function(d, 4);
  GridFunction brute(d);
  for (const auto& [Kk, ak] : p1.coeffs)
    for (const auto& [V, av] : p2.coeffs)
      for (const auto& I : active_intervals(d))
        for (const auto& J : active_intervals(d)) {
          if (!Kk.contains(I) || !V.contains(J)) continue;
          const double c = ak * av / (V.length() * Kk.length()) * inner(b, haar2(I, J, d)) *
                           inner(f, haar2(Kk, J, d));
          brute += c * haar2(I, V, d);
        }
  const auto r = verify_decomposition(DecompositionCase::pi_pi_dual, b, p1, p2, f);
  GridFunction e(d);
  for (const auto& p : r.parts)
    if (p.name == "E1" || p.name == "E2") e += p.value;
  CHECK(sup_distance(e, brute) < 1e-13);
  CHECK(identity_residual(r, "E1 + E2 = coefficient sum") < 1e-13);
}

TEST_CASE("paired differences") {
  const Fixture fx;
  const auto b = random_function(L, 21), f = random_function(L, 22);
  const auto S1 = make_shift(fx.s1, L);
  const auto lhs = S1(paraproduct(ParaproductKind::A5, b, f)) -
                   paraproduct(ParaproductKind::A5, b, S1(f));
  CHECK(sup_distance(lhs, shift_a5_difference(b, fx.s1, f)) < 1e-12);
  const auto P1 = make_paraproduct(fx.p1, L);
  const auto d = P1(paraproduct(ParaproductKind::a2_1, b, f)) -
                 paraproduct(ParaproductKind::A5, b, P1(f));
  CHECK(sup_distance(d, pi_a5_difference_average(b, fx.p1, f)) < 1e-12);
  CHECK(sup_distance(d, pi_a5_difference_expanded(b, fx.p1, f)) < 1e-12);
}

TEST_CASE("wrong operator kinds are rejected") {
  const Fixture fx;
  const auto b = random_function(L, 1), f = random_function(L, 2);
  CHECK_THROWS_AS(verify_decomposition(DecompositionCase::shift_shift, b, fx.p1, fx.s2, f),
                  PreconditionError);
  CHECK_THROWS_AS(verify_decomposition(DecompositionCase::pi_pi_dual, b, fx.p1, fx.p2, f),
                  PreconditionError);
  const auto j = to_json(verify_decomposition(DecompositionCase::pi_pi, b, fx.p1, fx.p2, f));
  CHECK(j["case"] == "pi_pi");
  CHECK(j["parts"].contains("tail3"));
}
