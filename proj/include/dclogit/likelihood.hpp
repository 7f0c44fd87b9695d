#pragma once

#include "dclogit/choice.hpp"
#include "dclogit/data.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/theta.hpp"

#include <vector>

namespace dclogit {

struct LikelihoodReport {
    double value = 0.0;                   // weighted simulated log likelihood
    std::vector<double> gradient;         // free layout; empty if not requested
    std::vector<double> household_loglik; // log L_i per household, unweighted
    std::vector<double> scores;           // N x P row-major d log L_i / d theta
    NumericFlags flags;
};

struct EvalOptions {
    bool gradient = true;
    bool scores = false;
    int threads = 1;
};

// Weighted simulated log likelihood with analytic gradient on the free
// (unconstrained) parameter layout.
//
// Each household contributes log of (1/R) sum_r P_chosen(beta_r, alpha_r,
// eta_r) * phi(eta_r; 0, sd_eta), where eta_r is the usage residual implied
// by the observed annual km at the drawn coefficients,
//   eta_r = log KM_i - [beta_r(y - r_j*) + gamma.X_ij* + alpha_r p_j*],
// and that same eta_r enters the utility of every alternative for the draw.
// Contributions are computed per household in parallel and reduced in
// canonical household order, so results are bit-identical for any thread
// count.
LikelihoodReport wll(const Theta& theta, const PreparedDataset& ds,
                     const DrawSet& draws, const EvalOptions& opts = {});

// Simulated joint likelihood level of one household (diagnostics and tests).
double joint_likelihood_household(const Theta& theta, const PreparedDataset& ds,
                                  const DrawSet& draws, size_t i,
                                  NumericFlags* flags = nullptr);

} // namespace dclogit
