#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bloomlab/paraproducts.hpp"
#include "support.hpp"

using namespace bloomlab;
using testsupport::random_function;
using K = ParaproductKind;

namespace {

// Reference paraproducts written as sums of products of projections.
enum class Op { delta, expect };

GridFunction piece(const GridFunction& g, Op o1, Op o2, const DyadicInterval& I,
                   const DyadicInterval& J) {
  GridFunction t = o2 == Op::delta ? project(g, DeltaSel{2, J}) : project(g, ExpectSel{2, J});
  return o1 == Op::delta ? project(t, DeltaSel{1, I}) : project(t, ExpectSel{1, I});
}

GridFunction reference_bi(K k, const GridFunction& b, const GridFunction& f) {
  struct R {
    Op b1, b2, f1, f2;
  };
  const Op D = Op::delta, E = Op::expect;
  R r{};
  switch (k) {
    case K::A1: r = {D, D, D, D}; break;
    case K::A2: r = {D, D, E, D}; break;
    case K::A3: r = {D, D, D, E}; break;
    case K::A4: r = {D, D, E, E}; break;
    case K::A5: r = {E, D, D, D}; break;
    case K::A6: r = {E, D, D, E}; break;
    case K::A7: r = {D, E, D, D}; break;
    case K::A8: r = {D, E, E, D}; break;
    case K::W: r = {E, E, D, D}; break;
    default: FAIL("not bi");
  }
  const int L = b.depth();
  GridFunction out(L);
  for (const auto& I : active_intervals(L))
    for (const auto& J : active_intervals(L))
      out += hadamard(piece(b, r.b1, r.b2, I, J), piece(f, r.f1, r.f2, I, J));
  return out;
}

GridFunction reference_one(K k, const GridFunction& b, const GridFunction& f) {
  const int L = b.depth();
  GridFunction out(L);
  for (const auto& I : active_intervals(L)) {
    const auto db = project(b, DeltaSel{1, I}), df = project(f, DeltaSel{1, I});
    const auto eb = project(b, ExpectSel{1, I}), ef = project(f, ExpectSel{1, I});
    switch (k) {
      case K::a1_1: out += hadamard(db, df); break;
      case K::a1_2: out += hadamard(db, ef); break;
      case K::w1: out += hadamard(eb, df); break;
      default: FAIL("not one-parameter");
    }
  }
  return out;
}

GridFunction transpose(const GridFunction& f) {
  GridFunction t(f.depth());
  for (int i = 0; i < f.side(); ++i)
    for (int j = 0; j < f.side(); ++j) t(j, i) = f(i, j);
  return t;
}

}  // namespace

TEST_CASE("single nonzero bi-paraproduct") {
  const int L = 2;
  const auto h = haar({0, 0}, HaarKind::cancellative, L);
  const GridLine one(L, 1.0);
  const auto b = GridFunction::tensor(h, one), f = GridFunction::tensor(one, h);
  const auto bf = hadamard(b, f);
  for (auto k : kBiKinds) {
    const auto g = paraproduct(k, b, f);
    if (k == K::A8)
      CHECK(sup_distance(g, bf) < 1e-14);
    else
      CHECK(g.sup_norm() < 1e-14);
  }
  CHECK(boundary_bi(b, f).sup_norm() < 1e-14);
}

TEST_CASE("paraproducts agree with the projection reference") {
  for (int L = 1; L <= 3; ++L)
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const auto b = random_function(L, seed), f = random_function(L, seed + 40);
      for (auto k : kBiKinds) CHECK(sup_distance(paraproduct(k, b, f), reference_bi(k, b, f)) < 1e-12);
      for (auto k : {K::a1_1, K::a1_2, K::w1})
        CHECK(sup_distance(paraproduct(k, b, f), reference_one(k, b, f)) < 1e-12);
      const std::pair<K, K> twins[] = {{K::a2_1, K::a1_1}, {K::a2_2, K::a1_2}, {K::w2, K::w1}};
      for (auto [k2, k1] : twins)
        CHECK(sup_distance(paraproduct(k2, b, f),
                           transpose(reference_one(k1, transpose(b), transpose(f)))) < 1e-12);
    }
}

TEST_CASE("symmetries between paraproducts") {
  const auto b = random_function(3, 5), f = random_function(3, 6);
  CHECK(sup_distance(paraproduct(K::A1, b, f), paraproduct(K::A1, f, b)) < 1e-13);
  CHECK(sup_distance(paraproduct(K::W, b, f), paraproduct(K::A4, f, b)) < 1e-13);
  CHECK(sup_distance(paraproduct(K::A5, b, f), paraproduct(K::A2, f, b)) < 1e-13);
  CHECK(sup_distance(paraproduct(K::A7, b, f), paraproduct(K::A3, f, b)) < 1e-13);
  CHECK(sup_distance(paraproduct(K::A6, b, f), paraproduct(K::A8, f, b)) < 1e-13);
  CHECK(sup_distance(sum_a(b, f, 1, 8), [&] {
          GridFunction s(3);
          for (int i = 1; i <= 8; ++i) s += paraproduct(a_kind(i), b, f);
          return s;
        }()) < 1e-13);
}

TEST_CASE("product expansions are exact") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const int L = 1 + static_cast<int>(seed % 4);
    const auto b = random_function(L, 2 * seed, 3.0), f = random_function(L, 2 * seed + 1);
    for (auto m : {ExpansionMode::bi, ExpansionMode::param1, ExpansionMode::param2}) {
      const auto d = decompose_product(b, f, m);
      CHECK(d.residual_sup <= d.tolerance);
    }
  }
}

TEST_CASE("boundary terms") {
  const int L = 3;
  const auto b = random_function(L, 1), f = random_function(L, 2);
  const auto p1 = paraproduct(K::P1, b, f);
  for (int j = 0; j < 8; ++j) {
    double ib = 0.0, jf = 0.0;
    for (int i = 0; i < 8; ++i) {
      ib += b(i, j) / 8;
      jf += f(i, j) / 8;
    }
    for (int i = 0; i < 8; ++i) CHECK(std::abs(p1(i, j) - ib * jf) < 1e-14);
  }
  const auto p12 = paraproduct(K::P12, b, f);
  CHECK(p12(3, 4) == doctest::Approx(b.integral() * f.integral()));
  CHECK_THROWS_AS(a_kind(9), PreconditionError);
  CHECK_THROWS_AS(paraproduct(K::A1, random_function(2, 1), random_function(3, 1)), DepthMismatch);
}

TEST_CASE("constants and cancellation") {
  const int L = 3;
  const GridFunction one(L, 1.0);
  const auto f = random_function(L, 12);
  for (int i = 1; i <= 8; ++i) CHECK(paraproduct(a_kind(i), one, f).sup_norm() < 1e-14);
  GridFunction dd(L);
  for (const auto& I : active_intervals(L))
    for (const auto& J : active_intervals(L)) dd += project(f, DeltaRect{I, J});
  CHECK(sup_distance(paraproduct(K::W, one, f), dd) < 1e-13);
  CHECK(sup_distance(boundary_bi(one, f), f - dd) < 1e-13);
  // W(b, .) kills anything without doubly cancellative content
  CHECK(paraproduct(K::W, random_function(L, 4), f - dd).sup_norm() < 1e-13);

  const auto d = decompose_product(one, one, ExpansionMode::bi);
  for (const auto& [k, g] : d.parts) {
    const bool boundary = k == K::P1 || k == K::P2 || k == K::P12;
    CHECK(sup_distance(g, GridFunction(L, boundary ? 1.0 : 0.0)) < 1e-15);
  }
}

TEST_CASE("bilinearity and the A1 / A4 adjoint pair") {
  const int L = 3;
  const auto b = random_function(L, 1), f = random_function(L, 2), g = random_function(L, 3);
  for (auto k : kBiKinds)
    CHECK(sup_distance(paraproduct(k, b, f + g), paraproduct(k, b, f) + paraproduct(k, b, g)) <
          1e-12);
  // <A1(b,f), g> = sum b_R f_R <g>_R = <f, A4(b,g)>
  CHECK(std::abs(inner(paraproduct(K::A1, b, f), g) - inner(f, paraproduct(K::A4, b, g))) < 1e-13);
  CHECK(std::abs(inner(paraproduct(K::A1, b, f), g) - inner(f, paraproduct(K::A1, b, g))) > 1e-6);
}
