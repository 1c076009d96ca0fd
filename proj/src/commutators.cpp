#include "bloomlab/commutators.hpp"

#include <cmath>
#include <sstream>

namespace bloomlab {

namespace {

OperatorHandle renamed(const OperatorHandle& t, std::string name) {
  return {std::move(name), t.depth(), t.axis(),
          [t](const GridFunction& f) { return t.apply(f); },
          [t](const GridFunction& g) { return t.apply_adjoint(g); }};
}

}  // namespace

OperatorHandle commutator(const GridFunction& b, const OperatorHandle& t) {
  require(b.depth() == t.depth(), "commutator symbol and operator depths differ");
  const auto mb = multiplication(b);
  return renamed(compose(mb, t) - compose(t, mb), "[b, " + t.descriptor() + "]");
}

OperatorHandle nested_commutator(const OperatorHandle& t1, const GridFunction& b,
                                 const OperatorHandle& t2) {
  require((t1.axis() == 1 && t2.axis() == 2) || (t1.axis() == 2 && t2.axis() == 1),
          "nested commutator needs operators acting in different variables");
  require(b.depth() == t1.depth() && b.depth() == t2.depth(), "depth mismatch");
  const auto mb = multiplication(b);
  const auto I = compose(t1, compose(mb, t2));
  const auto II = compose(compose(t1, t2), mb);
  const auto III = compose(mb, compose(t2, t1));
  const auto IV = compose(t2, compose(mb, t1));
  return renamed(I - II - III + IV,
                 "[" + t1.descriptor() + ", [b, " + t2.descriptor() + "]]");
}

OperatorHandle iterated_commutator(const GridFunction& b, const OperatorHandle& t, int k) {
  require(k >= 1, "iterated commutator needs k >= 1");
  OperatorHandle c = commutator(b, t);
  for (int i = 2; i <= k; ++i) c = commutator(b, c);
  return c;
}

const char* to_string(DecompositionCase c) {
  switch (c) {
    case DecompositionCase::shift_shift: return "shift_shift";
    case DecompositionCase::pi_pi: return "pi_pi";
    case DecompositionCase::mixed_shift_pi: return "mixed_shift_pi";
    case DecompositionCase::pi_pi_dual: return "pi_pi_dual";
  }
  return "?";
}

// ---------------------------------------------------------------------------

namespace {

using K = ParaproductKind;

double coeff(const ParaproductSpec& p, double a) { return p.abs_flag ? std::abs(a) : a; }

std::vector<DyadicInterval> inside(const DyadicInterval& K, int depth) {
  std::vector<DyadicInterval> out;
  for (int l = K.level; l <= depth - 1; ++l)
    for (int i = 0; i < (1 << (l - K.level)); ++i) out.push_back({l, (K.index << (l - K.level)) + i});
  return out;
}

// g += c * u (x) v
void add_tensor(GridFunction& g, double c, const GridLine& u, const GridLine& v) {
  if (c == 0.0) return;
  const int n = g.side();
  for (int i = 0; i < n; ++i) {
    if (u[i] == 0.0) continue;
    for (int j = 0; j < n; ++j) g(i, j) += c * u[i] * v[j];
  }
}

GridLine h1(const DyadicInterval& I, int L) { return haar(I, HaarKind::cancellative, L); }

GridLine column(const GridFunction& f, int j) {
  GridLine g(f.depth());
  for (int i = 0; i < f.side(); ++i) g[i] = f(i, j);
  return g;
}

double line_average(const GridLine& g, const DyadicInterval& I) { return g.average(I); }

GridLine times(const GridLine& a, const GridLine& b) {
  GridLine c = a;
  for (int i = 0; i < c.size(); ++i) c[i] *= b[i];
  return c;
}

GridLine shifted(const GridLine& a, double s) {
  GridLine c = a;
  for (double& v : c.values) v -= s;
  return c;
}

}  // namespace

GridFunction shift_e_term(const GridFunction& b, const ShiftSpec& s1, const ShiftSpec& s2,
                          const GridFunction& f) {
  return e_term_shift(b, s1, s2, 1, 2)(f) - e_term_shift(b, s1, s2, 1, 1)(f) -
         e_term_shift(b, s1, s2, 2, 2)(f) + e_term_shift(b, s1, s2, 2, 1)(f);
}

GridFunction shift_e_term_telescoped(const GridFunction& b, const ShiftSpec& s1,
                                     const ShiftSpec& s2, const GridFunction& f) {
  const int L = b.depth();
  const HaarSpectrum sb = analyze(b), sf = analyze(f);
  // sum_{k=1}^{levels} sum_{v=1}^{levels} <Delta_{I^(k) x J^(v)} b>_{I x J}
  auto tele = [&](const DyadicInterval& I, int ki, const DyadicInterval& J, int vj) {
    double s = 0.0;
    for (int k = 1; k <= ki; ++k)
      for (int v = 1; v <= vj; ++v) {
        const auto A = I.ancestor(k), B = J.ancestor(v);
        s += sb.at(A, B) * h1(A, L).average(I) * h1(B, L).average(J);
      }
    return s;
  };
  HaarSpectrum out(L);
  for (const auto& [k1, a] : s1.coeffs)
    for (const auto& [k2, c] : s2.coeffs) {
      const double t = tele(k1.I1, s1.k1, k2.I2, s2.k2) - tele(k1.I1, s1.k1, k2.I1, s2.k1) -
                       tele(k1.I2, s1.k2, k2.I2, s2.k2) + tele(k1.I2, s1.k2, k2.I1, s2.k1);
      out.at(k1.I2, k2.I2) += t * a * c * sf.at(k1.I1, k2.I1);
    }
  return synthesize(out);
}

GridFunction shift_a5_difference(const GridFunction& b, const ShiftSpec& s1,
                                 const GridFunction& f) {
  require(s1.axis == 1, "x1 shift expected");
  const int L = b.depth();
  const GridFunction bj = analyze_axis(b, 2);  // bj(x1, slot J) = <b, h_J>_2(x1)
  const HaarSpectrum sf = analyze(f);
  GridFunction out(L);
  for (const auto& J : active_intervals(L)) {
    const GridLine BJ = column(bj, J.slot());
    const GridLine sq = normalized_indicator(J, L);
    for (const auto& [key, a] : s1.coeffs) {
      const double c =
          a * (line_average(BJ, key.I1) - line_average(BJ, key.I2)) * sf.at(key.I1, J);
      add_tensor(out, c, h1(key.I2, L), sq);
    }
  }
  return out;
}

GridFunction pi_a5_difference_average(const GridFunction& b, const ParaproductSpec& p1,
                                      const GridFunction& f) {
  require(p1.axis == 1 && p1.form == ParaForm::direct, "direct x1 paraproduct expected");
  const int L = b.depth();
  const GridFunction bj = analyze_axis(b, 2), fj = analyze_axis(f, 2);
  GridFunction out(L);
  for (const auto& J : active_intervals(L)) {
    const GridLine BJ = column(bj, J.slot()), FJ = column(fj, J.slot());
    for (const auto& [Kk, a] : p1.coeffs) {
      const double c =
          coeff(p1, a) * times(shifted(BJ, BJ.average(Kk)), FJ).average(Kk);
      add_tensor(out, c, h1(Kk, L), normalized_indicator(J, L));
    }
  }
  return out;
}

GridFunction pi_a5_difference_expanded(const GridFunction& b, const ParaproductSpec& p1,
                                       const GridFunction& f) {
  const int L = b.depth();
  const HaarSpectrum sb = analyze(b), sf = analyze(f);
  GridFunction out(L);
  for (const auto& [Kk, a] : p1.coeffs)
    for (const auto& J : active_intervals(L)) {
      double s = 0.0;
      for (const auto& I : inside(Kk, L)) s += sb.at(I, J) * sf.at(I, J);
      add_tensor(out, coeff(p1, a) * s / Kk.length(), h1(Kk, L), normalized_indicator(J, L));
    }
  return out;
}

GridFunction pipi_tail1(const GridFunction& b, const ParaproductSpec& p1,
                        const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth();
  GridFunction out(L);
  for (const auto& [V, av] : p2.coeffs) {
    const GridLine bV = partial_average(b, V, 2), fV = partial_average(f, V, 2);
    for (const auto& [Kk, ak] : p1.coeffs) {
      const double bKV = b.average({Kk, V});
      const double c = coeff(p1, ak) * coeff(p2, av) * times(shifted(bV, bKV), fV).average(Kk);
      add_tensor(out, c, h1(Kk, L), h1(V, L));
    }
  }
  return out;
}

GridFunction pipi_tail2(const GridFunction& b, const ParaproductSpec& p1,
                        const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth();
  GridFunction out(L);
  for (const auto& [Kk, ak] : p1.coeffs) {
    const GridLine bK = partial_average(b, Kk, 1), fK = partial_average(f, Kk, 1);
    for (const auto& [V, av] : p2.coeffs) {
      const double bKV = b.average({Kk, V});
      const double c = coeff(p1, ak) * coeff(p2, av) * times(shifted(bK, bKV), fK).average(V);
      add_tensor(out, c, h1(Kk, L), h1(V, L));
    }
  }
  return out;
}

GridFunction pipi_tail3(const GridFunction& b, const ParaproductSpec& p1,
                        const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth();
  GridFunction out(L);
  for (const auto& [Kk, ak] : p1.coeffs)
    for (const auto& [V, av] : p2.coeffs) {
      const DyadicRectangle R{Kk, V};
      const double c = coeff(p1, ak) * coeff(p2, av) *
                       hadamard(b - GridFunction(L, b.average(R)), f).average(R);
      add_tensor(out, -c, h1(Kk, L), h1(V, L));
    }
  return out;
}

GridFunction pipi_tail_expanded(const GridFunction& b, const ParaproductSpec& p1,
                                const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth();
  const HaarSpectrum sb = analyze(b), sf = analyze(f);
  HaarSpectrum out(L);
  for (const auto& [Kk, ak] : p1.coeffs)
    for (const auto& [V, av] : p2.coeffs) {
      double s = 0.0;
      for (const auto& I : inside(Kk, L))
        for (const auto& J : inside(V, L)) s += sb.at(I, J) * sf.at(I, J);
      out.at(Kk, V) += coeff(p1, ak) * coeff(p2, av) * s / (Kk.length() * V.length());
    }
  return synthesize(out);
}

GridFunction mixed_rest(const GridFunction& b, const ShiftSpec& s1, const ParaproductSpec& p2,
                        const GridFunction& f) {
  require(s1.axis == 1 && p2.axis == 2, "x1 shift and x2 paraproduct expected");
  const int L = b.depth();
  const GridFunction bj = analyze_axis(b, 2);
  const HaarSpectrum sf = analyze(f);
  HaarSpectrum out(L);
  for (const auto& [V, av] : p2.coeffs)
    for (const auto& J : inside(V, L)) {
      const GridLine BJ = column(bj, J.slot());
      for (const auto& [key, a] : s1.coeffs) {
        const double d = BJ.average(key.I2) - BJ.average(key.I1);
        out.at(key.I2, V) += coeff(p2, av) * a * d * sf.at(key.I1, J) / V.length();
      }
    }
  return synthesize(out);
}

GridFunction dual_e1_average(const GridFunction& b, const ParaproductSpec& p1,
                             const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth();
  GridFunction out(L);
  for (const auto& [Kk, ak] : p1.coeffs) {
    const GridLine bK = partial_average(b, Kk, 1);
    const GridLine fK = partial_pairing(f, h1(Kk, L), 1);
    for (const auto& [V, av] : p2.coeffs) {
      const double c = coeff(p1, ak) * coeff(p2, av) *
                       times(shifted(bK, b.average({Kk, V})), fK).average(V);
      add_tensor(out, -c, normalized_indicator(Kk, L), h1(V, L));
    }
  }
  return out;
}

GridFunction dual_e2_average(const GridFunction& b, const ParaproductSpec& p1,
                             const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth(), n = b.side();
  GridFunction out(L);
  for (const auto& [Kk, ak] : p1.coeffs) {
    const GridLine fK = partial_pairing(f, h1(Kk, L), 1);
    for (const auto& [V, av] : p2.coeffs) {
      const GridLine bV = partial_average(b, V, 2);
      // x1 -> <(b - <b>_{V,2}) <f,h_K>_1>_{V,2}
      GridLine u(L);
      const int j0 = V.first_cell(L), nj = V.cell_count(L);
      for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = j0; j < j0 + nj; ++j) s += (b(i, j) - bV[i]) * fK[j];
        u[i] = s / nj;
      }
      const GridLine w = times(u, normalized_indicator(Kk, L));
      add_tensor(out, coeff(p1, ak) * coeff(p2, av), w, h1(V, L));
    }
  }
  return out;
}

GridFunction dual_e_expanded(const GridFunction& b, const ParaproductSpec& p1,
                             const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth();
  const HaarSpectrum sb = analyze(b), sf = analyze(f);
  HaarSpectrum out(L);
  for (const auto& [Kk, ak] : p1.coeffs)
    for (const auto& [V, av] : p2.coeffs) {
      const double c = coeff(p1, ak) * coeff(p2, av) / (Kk.length() * V.length());
      for (const auto& I : inside(Kk, L))
        for (const auto& J : inside(V, L)) out.at(I, V) += c * sb.at(I, J) * sf.at(Kk, J);
    }
  return synthesize(out);
}

// ---------------------------------------------------------------------------

namespace {

using Fn = std::function<GridFunction(const GridFunction&)>;

struct Builder {
  DecompositionReport& r;
  void part(std::string name, GridFunction g) { r.parts.push_back({std::move(name), std::move(g)}); }
  void boundary(std::string name, GridFunction g) {
    r.boundary_parts.push_back({std::move(name), std::move(g)});
  }
  void identity(std::string name, const GridFunction& a, const GridFunction& b) {
    r.identities.emplace_back(std::move(name), sup_distance(a, b));
  }
};

std::string ai(int i) { return "A" + std::to_string(i); }

GridFunction pp(K k, const GridFunction& b, const GridFunction& f) { return paraproduct(k, b, f); }

// The three pieces of P1 + P2 - P12, each applied through `outer` and fed `inner_arg`.
void boundary_bi_parts(Builder& out, const std::string& where, double sign, const Fn& outer,
                       const GridFunction& b, const GridFunction& g) {
  out.boundary(where + " P1", sign * outer(pp(K::P1, b, g)));
  out.boundary(where + " P2", sign * outer(pp(K::P2, b, g)));
  out.boundary(where + " P12", -sign * outer(pp(K::P12, b, g)));
}

void shift_shift(Builder& out, const GridFunction& b, const ShiftSpec& s1, const ShiftSpec& s2,
                 const GridFunction& f) {
  const int L = b.depth();
  const auto S1 = make_shift(s1, L), S2 = make_shift(s2, L);
  const auto g1 = S1(f), g2 = S2(f), g21 = S2(g1);
  for (int i = 1; i <= 8; ++i) {
    const K k = a_kind(i);
    const auto t1 = S1(pp(k, b, g2)), t2 = S1(S2(pp(k, b, f))), t3 = pp(k, b, g21),
               t4 = S2(pp(k, b, g1));
    if (i <= 4) {
      out.part(ai(i) + " bracket", t1 - t2 - t3 + t4);
    } else if (i <= 6) {
      out.part(ai(i) + " S1 A(b,S2 f) - A(b,S2 S1 f)", t1 - t3);
      out.part(ai(i) + " remainder", t4 - t2);
    } else {
      out.part(ai(i) + " S1 A(b,S2 f) - S1 S2 A(b,f)", t1 - t2);
      out.part(ai(i) + " remainder", t4 - t3);
    }
  }
  const auto E = shift_e_term(b, s1, s2, f);
  out.part("E", E);

  const Fn id = [](const GridFunction& g) { return g; };
  const Fn s1f = [&](const GridFunction& g) { return S1(g); };
  const Fn s2f = [&](const GridFunction& g) { return S2(g); };
  const Fn s12 = [&](const GridFunction& g) { return S1(S2(g)); };
  boundary_bi_parts(out, "I", 1.0, s1f, b, g2);
  boundary_bi_parts(out, "II", -1.0, s12, b, f);
  boundary_bi_parts(out, "III", -1.0, id, b, g21);
  boundary_bi_parts(out, "IV", 1.0, s2f, b, g1);

  auto W = [&](const GridFunction& g) { return pp(K::W, b, g); };
  out.identity("E = W-term bracket", E, S1(W(g2)) - S1(S2(W(f))) - W(g21) + S2(W(g1)));
  out.identity("E = telescoped averages", E, shift_e_term_telescoped(b, s1, s2, f));
  out.identity("S1 A5(b,f) - A5(b,S1 f) = coefficient sum", S1(pp(K::A5, b, f)) - pp(K::A5, b, g1),
               shift_a5_difference(b, s1, f));
}

void pi_pi(Builder& out, const GridFunction& b, const ParaproductSpec& p1,
           const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth();
  const auto P1 = make_paraproduct(p1, L), P2 = make_paraproduct(p2, L);
  const auto g1 = P1(f), g2 = P2(f), g21 = P2(g1), g12 = P1(g2);
  for (int i = 1; i <= 4; ++i) out.part("-" + ai(i) + "(b, pi1 pi2 f)", -1.0 * pp(a_kind(i), b, g12));
  out.part("a2_1 / A5", P1(pp(K::a2_1, b, g2)) - pp(K::A5, b, g21));
  out.part("a2_2 / A6", P1(pp(K::a2_2, b, g2)) - pp(K::A6, b, g21));
  out.part("a1_1 / A7", P2(pp(K::a1_1, b, g1)) - pp(K::A7, b, g21));
  out.part("a1_2 / A8", P2(pp(K::a1_2, b, g1)) - pp(K::A8, b, g21));
  const auto t1 = pipi_tail1(b, p1, p2, f), t2 = pipi_tail2(b, p1, p2, f),
             t3 = pipi_tail3(b, p1, p2, f);
  out.part("tail1", t1);
  out.part("tail2", t2);
  out.part("tail3", t3);

  const Fn id = [](const GridFunction& g) { return g; };
  out.boundary("I P2", P1(pp(K::P2, b, g2)));
  boundary_bi_parts(out, "III", -1.0, id, b, g21);
  out.boundary("IV P1", P2(pp(K::P1, b, g1)));

  const auto pb = pipi_b(b, p1, p2)(f);
  out.identity("pi1 w2(b, pi2 f) = tail1 + (pi pi)^b f", P1(pp(K::w2, b, g2)), t1 + pb);
  out.identity("pi2 w1(b, pi1 f) = tail2 + (pi pi)^b f", P2(pp(K::w1, b, g1)), t2 + pb);
  out.identity("pi1 pi2 (bf) = -tail3 + (pi pi)^b f", P1(P2(hadamard(b, f))), pb - t3);
  out.identity("W(b, pi2 pi1 f) = (pi pi)^b f", pp(K::W, b, g21), pb);
  out.identity("tail1 + tail2 + tail3 = -(expanded sum)", t1 + t2 + t3,
               -1.0 * pipi_tail_expanded(b, p1, p2, f));
  const auto d = P1(pp(K::a2_1, b, f)) - pp(K::A5, b, g1);
  out.identity("pi1 a2_1(b,f) - A5(b, pi1 f) = average form", d, pi_a5_difference_average(b, p1, f));
  out.identity("pi1 a2_1(b,f) - A5(b, pi1 f) = expanded form", d,
               pi_a5_difference_expanded(b, p1, f));
}

void mixed(Builder& out, const GridFunction& b, const ShiftSpec& s1, const ParaproductSpec& p2,
           const GridFunction& f) {
  const int L = b.depth();
  const auto S1 = make_shift(s1, L), P2 = make_paraproduct(p2, L);
  const auto g1 = S1(f), g2 = P2(f), g21 = P2(g1);
  for (int i = 1; i <= 4; ++i) out.part("S1 " + ai(i) + "(b, pi2 f)", S1(pp(a_kind(i), b, g2)));
  for (int i = 1; i <= 4; ++i) out.part("-" + ai(i) + "(b, pi2 S1 f)", -1.0 * pp(a_kind(i), b, g21));
  auto pair = [&](int i) { return S1(pp(a_kind(i), b, g2)) - pp(a_kind(i), b, g21); };
  out.part("A5 pair", pair(5));
  out.part("A6 pair", pair(6));
  out.part("a1_1 / A7", pair(7) + P2(pp(K::a1_1, b, g1)) - S1(P2(pp(K::a1_1, b, f))));
  out.part("a1_2 / A8", pair(8) + P2(pp(K::a1_2, b, g1)) - S1(P2(pp(K::a1_2, b, f))));
  const auto rest = mixed_rest(b, s1, p2, f);
  out.part("rest", rest);

  const Fn id = [](const GridFunction& g) { return g; };
  const Fn s1f = [&](const GridFunction& g) { return S1(g); };
  boundary_bi_parts(out, "I", 1.0, s1f, b, g2);
  out.boundary("II P1", -1.0 * S1(P2(pp(K::P1, b, f))));
  boundary_bi_parts(out, "III", -1.0, id, b, g21);
  out.boundary("IV P1", P2(pp(K::P1, b, g1)));

  out.identity("rest = W/w1 bracket", rest,
               S1(pp(K::W, b, g2)) - S1(P2(pp(K::w1, b, f))) - pp(K::W, b, g21) +
                   P2(pp(K::w1, b, g1)));
}

void pi_pi_dual(Builder& out, const GridFunction& b, const ParaproductSpec& p1,
                const ParaproductSpec& p2, const GridFunction& f) {
  const int L = b.depth();
  const auto P1 = make_paraproduct(p1, L), P2 = make_paraproduct(p2, L);
  const auto g1 = P1(f), g2 = P2(f), g21 = P2(g1);
  for (int i = 1; i <= 8; ++i) out.part("pi1 " + ai(i) + "(b, pi2 f)", P1(pp(a_kind(i), b, g2)));
  out.part("-pi1 pi2 a1_1(b,f)", -1.0 * P1(P2(pp(K::a1_1, b, f))));
  out.part("-pi1 pi2 a1_2(b,f)", -1.0 * P1(P2(pp(K::a1_2, b, f))));
  out.part("-a2_1(b, pi2 pi1 f)", -1.0 * pp(K::a2_1, b, g21));
  out.part("-a2_2(b, pi2 pi1 f)", -1.0 * pp(K::a2_2, b, g21));
  const auto e1 = P1(pp(K::W, b, g2)) - P1(P2(pp(K::w1, b, f)));
  const auto e2 = P2(hadamard(b, g1)) - pp(K::w2, b, g21);
  out.part("E1", e1);
  out.part("E2", e2);

  const Fn p1f = [&](const GridFunction& g) { return P1(g); };
  boundary_bi_parts(out, "I", 1.0, p1f, b, g2);
  out.boundary("II P1", -1.0 * P1(P2(pp(K::P1, b, f))));
  out.boundary("III P2", -1.0 * pp(K::P2, b, g21));

  out.identity("E1 = average form", e1, dual_e1_average(b, p1, p2, f));
  out.identity("E2 = average form", e2, dual_e2_average(b, p1, p2, f));
  out.identity("E1 + E2 = coefficient sum", e1 + e2, dual_e_expanded(b, p1, p2, f));
}

template <class T>
const T& as(const AxisSpec& s, const char* what) {
  const T* p = std::get_if<T>(&s);
  require(p != nullptr, what);
  return *p;
}

}  // namespace

DecompositionReport verify_decomposition(DecompositionCase c, const GridFunction& b,
                                         const AxisSpec& u1, const AxisSpec& u2,
                                         const GridFunction& f) {
  b.check_same_depth(f);
  const int L = b.depth();
  DecompositionReport r;
  r.tag = c;
  Builder out{r};
  OperatorHandle t1 = identity_operator(L), t2 = identity_operator(L);
  switch (c) {
    case DecompositionCase::shift_shift: {
      const auto& s1 = as<ShiftSpec>(u1, "shift_shift needs an x1 shift");
      const auto& s2 = as<ShiftSpec>(u2, "shift_shift needs an x2 shift");
      require(s1.axis == 1 && s2.axis == 2, "shift_shift needs an x1 shift and an x2 shift");
      t1 = make_shift(s1, L);
      t2 = make_shift(s2, L);
      shift_shift(out, b, s1, s2, f);
      break;
    }
    case DecompositionCase::pi_pi: {
      const auto& p1 = as<ParaproductSpec>(u1, "pi_pi needs an x1 paraproduct");
      const auto& p2 = as<ParaproductSpec>(u2, "pi_pi needs an x2 paraproduct");
      require(p1.axis == 1 && p2.axis == 2 && p1.form == ParaForm::direct &&
                  p2.form == ParaForm::direct,
              "pi_pi needs direct paraproducts in x1 and x2");
      t1 = make_paraproduct(p1, L);
      t2 = make_paraproduct(p2, L);
      pi_pi(out, b, p1, p2, f);
      break;
    }
    case DecompositionCase::mixed_shift_pi: {
      const auto& s1 = as<ShiftSpec>(u1, "mixed case needs an x1 shift");
      const auto& p2 = as<ParaproductSpec>(u2, "mixed case needs an x2 paraproduct");
      require(s1.axis == 1 && p2.axis == 2 && p2.form == ParaForm::direct,
              "mixed case needs an x1 shift and a direct x2 paraproduct");
      t1 = make_shift(s1, L);
      t2 = make_paraproduct(p2, L);
      mixed(out, b, s1, p2, f);
      break;
    }
    case DecompositionCase::pi_pi_dual: {
      const auto& p1 = as<ParaproductSpec>(u1, "dual case needs an x1 paraproduct");
      const auto& p2 = as<ParaproductSpec>(u2, "dual case needs an x2 paraproduct");
      require(p1.axis == 1 && p2.axis == 2 && p1.form == ParaForm::dual &&
                  p2.form == ParaForm::direct,
              "dual case needs a dual x1 paraproduct and a direct x2 paraproduct");
      t1 = make_paraproduct(p1, L);
      t2 = make_paraproduct(p2, L);
      pi_pi_dual(out, b, p1, p2, f);
      break;
    }
  }
  r.direct = nested_commutator(t1, b, t2)(f);
  GridFunction sum(L);
  for (const auto& p : r.parts) sum += p.value;
  for (const auto& p : r.boundary_parts) sum += p.value;
  r.residual_sup = sup_distance(sum, r.direct);
  r.tolerance = 1e-10 * (1.0 + b.sup_norm() * f.sup_norm());
  if (!(r.residual_sup <= r.tolerance)) {
    std::ostringstream os;
    os << to_string(c) << " decomposition residual " << r.residual_sup << " exceeds "
       << r.tolerance << "; direct sup " << r.direct.sup_norm();
    for (const auto& p : r.parts) os << "; " << p.name << " sup " << p.value.sup_norm();
    for (const auto& p : r.boundary_parts) os << "; " << p.name << " sup " << p.value.sup_norm();
    throw IdentityFailure(os.str());
  }
  return r;
}

nlohmann::json to_json(const DecompositionReport& r) {
  nlohmann::json j;
  j["case"] = to_string(r.tag);
  j["residual_sup"] = r.residual_sup;
  j["tolerance"] = r.tolerance;
  j["direct_sup"] = r.direct.sup_norm();
  for (const auto& p : r.parts) j["parts"][p.name] = p.value.sup_norm();
  for (const auto& p : r.boundary_parts) j["boundary_parts"][p.name] = p.value.sup_norm();
  for (const auto& [name, res] : r.identities) j["identities"][name] = res;
  return j;
}

}  // namespace bloomlab
