#include "bloomlab/paraproducts.hpp"

#include <cmath>
#include <sstream>

namespace bloomlab {

std::string_view name(ParaproductKind k) {
  switch (k) {
    case ParaproductKind::A1: return "A1";
    case ParaproductKind::A2: return "A2";
    case ParaproductKind::A3: return "A3";
    case ParaproductKind::A4: return "A4";
    case ParaproductKind::A5: return "A5";
    case ParaproductKind::A6: return "A6";
    case ParaproductKind::A7: return "A7";
    case ParaproductKind::A8: return "A8";
    case ParaproductKind::W: return "W";
    case ParaproductKind::a1_1: return "a1_1";
    case ParaproductKind::a1_2: return "a1_2";
    case ParaproductKind::w1: return "w1";
    case ParaproductKind::a2_1: return "a2_1";
    case ParaproductKind::a2_2: return "a2_2";
    case ParaproductKind::w2: return "w2";
    case ParaproductKind::P1: return "P1";
    case ParaproductKind::P2: return "P2";
    case ParaproductKind::P12: return "P12";
  }
  return "?";
}

ParaproductKind a_kind(int i) {
  require(i >= 1 && i <= 8, "A_i index must be in 1..8");
  return kBiKinds[static_cast<std::size_t>(i - 1)];
}

namespace {

// Scalar pieces of g attached to each active rectangle I x J:
//   dd = <g, h_I (x) h_J>              (Delta_{IxJ} g = dd h_I (x) h_J)
//   ed = <g, 1_I/|I| (x) h_J>          (E_I^1 Delta_J^2 g = ed 1_I (x) h_J)
//   de = <g, h_I (x) 1_J/|J|>          (Delta_I^1 E_J^2 g = de h_I (x) 1_J)
//   ee = <g>_{I x J}
struct RectPieces {
  int depth;
  HaarSpectrum dd, ed, de, ee;

  explicit RectPieces(const GridFunction& g)
      : depth(g.depth()), dd(analyze(g)), ed(depth), de(depth), ee(depth) {
    const int L = depth;
    const GridFunction rows = analyze_axis(g, 1);  // rows(slot I, x2 cell)
    const GridFunction cols = analyze_axis(g, 2);  // cols(x1 cell, slot J)
    for (const auto& I : active_intervals(L))
      for (const auto& J : active_intervals(L)) {
        const int i0 = I.first_cell(L), ni = I.cell_count(L);
        const int j0 = J.first_cell(L), nj = J.cell_count(L);
        double s_ed = 0.0, s_de = 0.0, s_ee = 0.0;
        for (int i = i0; i < i0 + ni; ++i) s_ed += cols(i, J.slot());
        for (int j = j0; j < j0 + nj; ++j) s_de += rows(I.slot(), j);
        for (int i = i0; i < i0 + ni; ++i)
          for (int j = j0; j < j0 + nj; ++j) s_ee += g(i, j);
        ed.at(I, J) = s_ed / ni;
        de.at(I, J) = s_de / nj;
        ee.at(I, J) = s_ee / (ni * nj);
      }
  }
};

enum class Shape { haar, one, square };  // h_I, 1_I, h_I h_I = 1_I/|I|

double shape_value(Shape s, const DyadicInterval& I, int cell, int depth) {
  switch (s) {
    case Shape::one: return 1.0;
    case Shape::square: return 1.0 / I.length();
    case Shape::haar: {
      const int half = I.cell_count(depth) / 2;
      const double amp = 1.0 / std::sqrt(I.length());
      return cell - I.first_cell(depth) < half ? amp : -amp;
    }
  }
  return 0.0;
}

enum class Piece { dd, ed, de, ee };

const HaarSpectrum& piece(const RectPieces& p, Piece k) {
  switch (k) {
    case Piece::dd: return p.dd;
    case Piece::ed: return p.ed;
    case Piece::de: return p.de;
    case Piece::ee: return p.ee;
  }
  return p.dd;
}

struct BiRule {
  Piece b, f;
  Shape s1, s2;
};

BiRule rule(ParaproductKind k) {
  using P = Piece;
  using S = Shape;
  switch (k) {
    case ParaproductKind::A1: return {P::dd, P::dd, S::square, S::square};
    case ParaproductKind::A2: return {P::dd, P::ed, S::haar, S::square};
    case ParaproductKind::A3: return {P::dd, P::de, S::square, S::haar};
    case ParaproductKind::A4: return {P::dd, P::ee, S::haar, S::haar};
    case ParaproductKind::A5: return {P::ed, P::dd, S::haar, S::square};
    case ParaproductKind::A6: return {P::ed, P::de, S::haar, S::haar};
    case ParaproductKind::A7: return {P::de, P::dd, S::square, S::haar};
    case ParaproductKind::A8: return {P::de, P::ed, S::haar, S::haar};
    case ParaproductKind::W: return {P::ee, P::dd, S::haar, S::haar};
    default: break;
  }
  throw PreconditionError("not a bi-parameter paraproduct");
}

GridFunction bi_paraproduct(const BiRule& r, const RectPieces& pb, const RectPieces& pf) {
  const int L = pb.depth;
  GridFunction out(L);
  const auto& cb = piece(pb, r.b);
  const auto& cf = piece(pf, r.f);
  for (const auto& I : active_intervals(L))
    for (const auto& J : active_intervals(L)) {
      const double c = cb.at(I, J) * cf.at(I, J);
      if (c == 0.0) continue;
      const int i0 = I.first_cell(L), ni = I.cell_count(L);
      const int j0 = J.first_cell(L), nj = J.cell_count(L);
      for (int i = i0; i < i0 + ni; ++i) {
        const double u = c * shape_value(r.s1, I, i, L);
        for (int j = j0; j < j0 + nj; ++j) out(i, j) += u * shape_value(r.s2, J, j, L);
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

// One-parameter pieces in x1; parameter-2 versions go through a transpose.
GridFunction one_param_x1(ParaproductKind k, const GridFunction& b, const GridFunction& f) {
  const int L = b.depth(), n = b.side();
  const GridFunction rb = analyze_axis(b, 1), rf = analyze_axis(f, 1);
  GridFunction out(L);
  if (k == ParaproductKind::P1) {
    for (int j = 0; j < n; ++j) {
      const double ib = rb(0, j), jf = rf(0, j);
      for (int i = 0; i < n; ++i) out(i, j) = ib * jf;
    }
    return out;
  }
  for (const auto& I : active_intervals(L)) {
    const int i0 = I.first_cell(L), ni = I.cell_count(L);
    for (int j = 0; j < n; ++j) {
      double c = 0.0;
      Shape s = Shape::haar;
      switch (k) {
        case ParaproductKind::a1_1:
          c = rb(I.slot(), j) * rf(I.slot(), j);
          s = Shape::square;
          break;
        case ParaproductKind::a1_2: {
          double avg = 0.0;
          for (int i = i0; i < i0 + ni; ++i) avg += f(i, j);
          c = rb(I.slot(), j) * avg / ni;
          break;
        }
        case ParaproductKind::w1: {
          double avg = 0.0;
          for (int i = i0; i < i0 + ni; ++i) avg += b(i, j);
          c = avg / ni * rf(I.slot(), j);
          break;
        }
        default: throw PreconditionError("not a one-parameter paraproduct");
      }
      if (c == 0.0) continue;
      for (int i = i0; i < i0 + ni; ++i) out(i, j) += c * shape_value(s, I, i, L);
    }
  }
  return out;
}

ParaproductKind to_x1(ParaproductKind k) {
  switch (k) {
    case ParaproductKind::a2_1: return ParaproductKind::a1_1;
    case ParaproductKind::a2_2: return ParaproductKind::a1_2;
    case ParaproductKind::w2: return ParaproductKind::w1;
    case ParaproductKind::P2: return ParaproductKind::P1;
    default: return k;
  }
}

}  // namespace

GridFunction paraproduct(ParaproductKind kind, const GridFunction& b, const GridFunction& f) {
  b.check_same_depth(f);
  switch (kind) {
    case ParaproductKind::a1_1:
    case ParaproductKind::a1_2:
    case ParaproductKind::w1:
    case ParaproductKind::P1:
      return one_param_x1(kind, b, f);
    case ParaproductKind::a2_1:
    case ParaproductKind::a2_2:
    case ParaproductKind::w2:
    case ParaproductKind::P2:
      return transpose(one_param_x1(to_x1(kind), transpose(b), transpose(f)));
    case ParaproductKind::P12:
      return GridFunction(b.depth(), b.integral() * f.integral());
    default:
      return bi_paraproduct(rule(kind), RectPieces(b), RectPieces(f));
  }
}

GridFunction sum_a(const GridFunction& b, const GridFunction& f, int first, int last) {
  b.check_same_depth(f);
  const RectPieces pb(b), pf(f);
  GridFunction out(b.depth());
  for (int i = first; i <= last; ++i) out += bi_paraproduct(rule(a_kind(i)), pb, pf);
  return out;
}

GridFunction boundary_bi(const GridFunction& b, const GridFunction& f) {
  return paraproduct(ParaproductKind::P1, b, f) + paraproduct(ParaproductKind::P2, b, f) -
         paraproduct(ParaproductKind::P12, b, f);
}

ProductDecomposition decompose_product(const GridFunction& b, const GridFunction& f,
                                       ExpansionMode mode) {
  b.check_same_depth(f);
  ProductDecomposition d{mode, {}, GridFunction(b.depth()), 0.0, 0.0};
  auto add = [&](ParaproductKind k, GridFunction g) { d.parts.emplace_back(k, std::move(g)); };
  switch (mode) {
    case ExpansionMode::bi: {
      const RectPieces pb(b), pf(f);
      for (auto k : kBiKinds) add(k, bi_paraproduct(rule(k), pb, pf));
      add(ParaproductKind::P1, paraproduct(ParaproductKind::P1, b, f));
      add(ParaproductKind::P2, paraproduct(ParaproductKind::P2, b, f));
      add(ParaproductKind::P12, paraproduct(ParaproductKind::P12, b, f));
      break;
    }
    case ExpansionMode::param1:
      for (auto k : {ParaproductKind::a1_1, ParaproductKind::a1_2, ParaproductKind::w1,
                     ParaproductKind::P1})
        add(k, paraproduct(k, b, f));
      break;
    case ExpansionMode::param2:
      for (auto k : {ParaproductKind::a2_1, ParaproductKind::a2_2, ParaproductKind::w2,
                     ParaproductKind::P2})
        add(k, paraproduct(k, b, f));
      break;
  }
  GridFunction r = hadamard(b, f);
  for (const auto& [k, g] : d.parts) {
    if (k == ParaproductKind::P12)
      r += g;
    else
      r -= g;
  }
  d.residual_sup = r.sup_norm();
  d.residual = std::move(r);
  d.tolerance = 1e-12 * (1.0 + b.sup_norm() * f.sup_norm());
  if (!(d.residual_sup <= d.tolerance)) {
    std::ostringstream os;
    os << "product expansion residual " << d.residual_sup << " exceeds " << d.tolerance;
    throw IdentityFailure(os.str());
  }
  return d;
}

}  // namespace bloomlab
