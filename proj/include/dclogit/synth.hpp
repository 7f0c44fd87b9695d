#pragma once

#include "dclogit/config.hpp"
#include "dclogit/data.hpp"
#include "dclogit/policy.hpp"
#include "dclogit/theta.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dclogit {

// Recipe for a synthetic market sampled from the model itself. Coefficients
// are keyed by design column name so the generator can line the truth vector
// up with whatever column order build_dataset produces.
struct SyntheticSpec {
    std::size_t n_households = 1000;
    std::uint64_t seed = 1;
    MarketConfig config;
    std::vector<VehicleRow> vehicles;     // sales_count is overwritten
    std::map<std::string, double> gamma;  // keyed by design column name
    double mu_beta = -1.0;
    double sd_beta = 0.4;
    double mu_alpha = -1.6;
    double sd_alpha = 0.9;
    double sd_eta = 0.5;
    double scale_mu = 2.0;
    double income_log_mean = 0.0;  // log-normal income in retail price units
    double income_log_sd = 0.65;
};

struct SyntheticResult {
    PreparedDataset data;  // weights are exactly 1: sales equal sample counts
    Theta truth;           // gamma ordered like data.gamma_names
};

// Draws households, their mixed coefficients and Gumbel taste shocks from
// per-household RNG substreams, picks each household's utility-maximizing
// model and its usage from the demand equation at the drawn taste, and packs
// the result into a dataset whose sales counts equal the sample counts.
// Deterministic in (spec, seed) and invariant to vehicle input order.
SyntheticResult generate(const SyntheticSpec& spec);

// Ready-made market: 10 models across 3 makes and 3 segments, five formula
// terms, parameter values in a realistic range. Used by tests and `synth`.
SyntheticSpec demo_spec(std::size_t n_households, std::uint64_t seed);

// Gauss-Hermite rule mapped to a standard normal, so that
// E[g(Z)] ~= sum_k weight[k] * g(node[k]) with the weights summing to 1.
struct GaussHermite {
    std::vector<double> node;
    std::vector<double> weight;
};
GaussHermite gauss_hermite(int n);

// Deterministic tensor-product quadrature counterpart of the simulated log
// likelihood: the two coefficient dimensions are integrated on a
// nodes_per_dim^2 Gauss-Hermite grid and the usage taste enters analytically
// through the residual density. Written against the raw formulas rather than
// the clamped likelihood kernel; restricted to small problems (at most 100
// households, 6 models, at least 31 nodes per dimension).
double quadrature_loglik(const Theta& theta, const PreparedDataset& ds, int nodes_per_dim);

// Market state under fully degenerate mixing (all three sds zero), evaluated
// straight from the closed-form logit shares without any draws.
FleetState closed_form_fleet(const Theta& theta, const PreparedDataset& ds, const Scenario& sc);

} // namespace dclogit
