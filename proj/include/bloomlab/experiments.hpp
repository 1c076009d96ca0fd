#pragma once

// Seeded experiment drivers. Every trial draws its randomness from
// Rng::split(seed, experiment tag, trial id), so a row can be regenerated
// from (seed, trial id) alone and thread scheduling never changes output.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bloomlab/commutators.hpp"
#include "bloomlab/lower_bound.hpp"
#include "bloomlab/operators.hpp"
#include "bloomlab/rng.hpp"
#include "bloomlab/weights.hpp"

namespace bloomlab {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct WeightsConfig {
  // random: per-trial tensor Haar-perturbation weights, resampled until
  // both characteristics are <= ap_cap; otherwise mu / lambda below.
  bool random = true;
  double ap_cap = 16.0;
  double max_eps = 0.6;
  WeightSpec mu;
  WeightSpec lambda;
};

struct OperatorsConfig {
  // shift | paraproduct | paraproduct_dual | zero | random (shift or paraproduct)
  std::string u1 = "random";
  std::string u2 = "random";
  bool random_complexity = true;
  int max_complexity = 2;
  int k1 = 1, k2 = 1, v1 = 1, v2 = 1;
};

struct BConfig {
  std::string kind = "spectrum";  // spectrum | little | checkerboard
  double decay = 0.5;             // spectrum coefficients ~ N(0,1) |I x J|^{decay}
  double scale = 1.0;
};

struct ExperimentConfig {
  int depth = 4;
  double p = 2.0;
  std::uint64_t seed = 1;
  int trials = 20;
  int k = 1;                 // iteration order for lower-bound runs
  std::string mode = "auto"; // product BMO: auto | exact | greedy | rect
  int budget = 40;           // lower-estimate ascent steps (p != 2)
  int restarts = 3;          // extremize
  int sweeps = 4;            // extremize coordinate sweeps per restart
  bool start_from_scan = false;
  int random_subsets = 0;    // lower-bound A-family extras
  WeightsConfig weights;
  OperatorsConfig operators;
  BConfig b;
};

ExperimentConfig config_from_json(const nlohmann::json& j);  // throws ConfigError
nlohmann::json to_json(const ExperimentConfig& c);
// depth / trial / mode limits; throws ConfigError
void validate(const ExperimentConfig& c);

struct Row {
  int trial_id = 0;
  int L = 0;
  double p = 2.0;
  std::uint64_t seed = 0;
  std::optional<double> mu_ap, lambda_ap, nu_a2, b_bmoprod, b_bmolittle;
  int k1 = 0, k2 = 0, v1 = 0, v2 = 0;
  double value = 0.0;
  std::string value_kind;  // certified_norm | lower_estimate | residual | gamma | ratio
  nlohmann::json extra = nlohmann::json::object();
};

struct ExperimentReport {
  std::string experiment;
  ExperimentConfig config;
  std::vector<Row> rows;
  std::vector<nlohmann::json> excluded;  // degenerate or failed trials, with reasons
  std::vector<std::string> failures;     // exact checks that did not hold
  nlohmann::json summary = nlohmann::json::object();
  bool passed() const { return failures.empty(); }
};

extern const char* const kCsvColumns[15];
std::string csv_header();
std::string to_csv(const ExperimentReport& r);
// header {tool, version, config, seed} plus body
nlohmann::json to_json(const ExperimentReport& r);

inline constexpr const char* kToolVersion = "0.3.0";

// ---------------------------------------------------------------------------
// Trial ingredients

struct TrialOperators {
  AxisSpec u1, u2;
  OperatorHandle t1, t2;
  std::string kind1, kind2;
  int k1 = 0, k2 = 0, v1 = 0, v2 = 0;
};

GridFunction random_b(const BConfig& c, int depth, Rng& rng);
// doubly cancellative: only (I, J) with I, J active
GridFunction random_cancellative(int depth, double decay, Rng& rng);
std::pair<Weight, Weight> trial_weights(const WeightsConfig& c, int depth, double p, Rng& rng);
TrialOperators trial_operators(const OperatorsConfig& c, int depth, Rng& rng);
BmoCertificate bmo_prod_mode(const GridFunction& b, const Weight& nu, const std::string& mode);

// ---------------------------------------------------------------------------
// Drivers

ExperimentReport identity_suite(const ExperimentConfig& c);
ExperimentReport bloom_ratio(const ExperimentConfig& c);
ExperimentReport lemma_suite(const ExperimentConfig& c);
ExperimentReport duality_study(const ExperimentConfig& c);
ExperimentReport norm_calibration(const ExperimentConfig& c);
ExperimentReport lower_bound_study(const ExperimentConfig& c);

struct ExtremizeResult {
  GridFunction best_b;
  double best_ratio = 0.0;
  std::vector<double> trace;           // best so far after each evaluation
  std::vector<double> start_ratios;    // ratio at each restart's initial point
  double scan_best = 0.0;              // best single-coefficient ratio (if scanned)
  BmoCertificate bmo;
  double norm = 0.0;
  ExperimentReport report;
};

// ratio(b) = |[U1,[b,U2]]|_{L^2(mu) -> L^2(lambda)} / |b|_{BMO_prod(nu)}, 0 if b has no norm
double bloom_ratio_of(const GridFunction& b, const TrialOperators& ops, const Weight& mu,
                      const Weight& lambda, const std::string& mode);
// every b = h_I (x) h_J; returns the best ratio and its b
std::pair<double, GridFunction> single_coefficient_scan(const TrialOperators& ops,
                                                         const Weight& mu, const Weight& lambda,
                                                         const std::string& mode);
ExtremizeResult extremize_b(const ExperimentConfig& c);

// Runs the experiment named by the CLI subcommand.
ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& c);

}  // namespace bloomlab
