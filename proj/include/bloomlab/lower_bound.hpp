#pragma once

// Lower-bound machinery for iterated commutators of non-degenerate product
// kernels: partner rectangles, medians, the Gamma functional and a checker
// for the inequalities that lead from Gamma to the little bmo norm.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bloomlab/dyadic.hpp"
#include "bloomlab/weights.hpp"

namespace bloomlab {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct StepFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// In one dimension per parameter both kinds reduce to s / ((x1-y1)(x2-y2)).
struct KernelSpec {
  enum class Kind { product_hilbert, product_riesz } kind = Kind::product_hilbert;
  int i = 1;  // Riesz component in parameter 1 (only 1 exists here)
  int j = 1;
  double sign = 1.0;
};

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
};

double kernel_eval(const KernelSpec& k, Point x, Point y);

struct PartnerCertificate {
  DyadicRectangle base;
  DyadicRectangle partner;
  int sigma = 1;
  double constant = 0.0;  // min over cell-centre pairs of sigma K(x,y) |R|
};

// Cell centres at the given depth are the sample points.
PartnerCertificate find_partner(const DyadicRectangle& R, const KernelSpec& k, int depth);
bool has_partner(const DyadicRectangle& R);

// Lower median of the cell values of b on R.
double median(const GridFunction& b, const DyadicRectangle& R);

struct GammaOptions {
  int random_subsets = 0;  // extra seeded subsets of R per rectangle
  std::uint64_t seed = 1;
};

struct GammaWitness {
  PartnerCertificate partner;
  std::string family;       // "sublevel", "superlevel" or "random"
  double threshold = 0.0;   // for level sets
  std::vector<int> cells;   // A as flat cell ids
};

struct LowerBoundChecks {
  int rectangles = 0;
  double median_min_excess = 0.0;   // min over R of mass - |R|/2, both sides
  double holder_min_slack = 0.0;    // over every dyadic rectangle
  double jensen_min_slack = 0.0;
  double pointwise_min_slack = 0.0; // |F(x)| - c <(alpha-b)_+^k>_R on the good set
  double weak_min_slack = 0.0;      // Gamma_R - mu(R)^{-1/p} c <.>_R lambda(good)^{1/p}
  double tplus_max_residual = 0.0;
  double doubling_max = 0.0;        // lambda(partner) / lambda(R), reported only
};

struct LowerBoundReport {
  int k = 1;
  double p = 2.0;
  double gamma = 0.0;
  double bmo_value = 0.0;  // |b|_{bmo(nu^{1/k})}
  double ratio = 0.0;      // bmo_value / gamma^{1/k}
  bool degenerate = false; // gamma == 0
  std::optional<GammaWitness> witness;
  std::optional<DyadicRectangle> bmo_witness;
  std::optional<LowerBoundChecks> checks;
};

// mu(R)^{-1/p} | 1_{partner}(x) sum_{y in A} (b(x)-b(y))^k K(x,y) |cell| |_{L^{p,infty}(lambda)}
double gamma_value(const KernelSpec& kern, const GridFunction& b, const Weight& mu,
                   const Weight& lambda, int k, double p, const PartnerCertificate& pc,
                   const std::vector<int>& cells);

LowerBoundReport gamma(const KernelSpec& kern, const GridFunction& b, const Weight& mu,
                       const Weight& lambda, int k, double p, const GammaOptions& opt = {});

// gamma plus the proof inequalities on every admissible R; throws StepFailure
// if one of them fails.
LowerBoundReport check_lower_bound(const KernelSpec& kern, const GridFunction& b,
                                   const Weight& mu, const Weight& lambda, int k, double p,
                                   const GammaOptions& opt = {});

// Hoelder chain on every dyadic rectangle: min over R of the slacks in
//   1 <= <nu^{1/k}>^k <nu^{-1}>,  <nu^{-1}> <= <lambda>^{1/p} <mu^{1-p'}>^{1/p'}
//   <= [mu]_{A_p}^{1/p} <mu>^{-1/p} <lambda>^{1/p}, each relative to its right side.
double holder_chain_min_slack(const Weight& mu, const Weight& lambda, double p, int k);

nlohmann::json to_json(const LowerBoundReport& r);

}  // namespace bloomlab
