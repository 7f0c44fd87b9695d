#pragma once

#include <cstdint>
#include <vector>

namespace dclogit {

// Exponents are capped here before exponentiation so trial parameter values
// far from any optimum give finite utilities instead of overflow.
constexpr double kExpClamp = 700.0;

// Likelihood floor applied to per-household simulated likelihoods.
constexpr double kLikelihoodFloor = 1e-300;

struct NumericFlags {
    long clamp_count = 0;
    long floor_count = 0;
};

// One-draw utility of an alternative:
//   u = -(1/beta) exp(-beta(y - r) - gx - eta) - (1/alpha) exp(alpha p)
// with beta > 0 and alpha < 0; gx is the covariate inner product gamma.X.
double systematic_utility(double beta, double alpha, double eta,
                          double y_minus_r, double gx, double p,
                          NumericFlags* flags = nullptr);

// Roy's identity usage equation: log KM = beta(y - r) + gx + alpha p + eta.
double log_vkt(double beta, double alpha, double eta,
               double y_minus_r, double gx, double p);

// Softmax of u/scale computed with max subtraction. Returns
// log sum_j exp(u_j/scale), so log P_j = u_j/scale - returned value.
double choice_probabilities(const std::vector<double>& u, double scale,
                            std::vector<double>& probs);

// Expected usage with the taste shock integrated analytically:
//   E[KM | beta, alpha] = exp(beta(y - r) + gx + alpha p + sd_eta^2 / 2).
double expected_vkt(double beta, double alpha, double y_minus_r, double gx,
                    double p, double sd_eta, NumericFlags* flags = nullptr);

} // namespace dclogit
