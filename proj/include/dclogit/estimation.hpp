#pragma once

#include "dclogit/data.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/likelihood.hpp"
#include "dclogit/theta.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace dclogit {

struct OptimOptions {
    double tol = 1e-5;       // gradient max-norm at the solution
    double rel_tol = 1e-9;   // relative objective change
    int max_iter = 1000;
    int memory = 10;         // L-BFGS history pairs
};

struct OptimResult {
    std::vector<double> x;
    double value = 0.0;
    double grad_max_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

// fn(x, grad_out) returns the objective; maximization.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

// L-BFGS ascent with a strong-Wolfe line search. Non-finite trial values are
// treated as failed steps and the search backs off.
OptimResult maximize(const Objective& fn, std::vector<double> x0, const OptimOptions& opts = {});

struct EstimateConfig {
    size_t r_draws = 500;
    uint64_t seed = 1;
    int starts = 1;          // total optimizer starts; first is deterministic
    double tol = 1e-5;
    double rel_tol = 1e-9;
    int max_iter = 1000;
    int threads = 1;
    double fd_step = 1e-4;   // Hessian finite-difference step
};

struct EstimationResult {
    Theta theta;
    std::vector<std::string> gamma_names;
    std::vector<double> free;           // optimizer layout
    std::vector<double> covariance;     // P x P row-major, free layout
    std::vector<double> std_errors;     // reported scale, delta method
    double loglik = 0.0;
    double grad_max_norm = 0.0;
    int iterations = 0;
    bool converged = false;
    double hessian_condition = 0.0;
    bool hessian_singular = false;
    long clamp_count = 0;
    long floor_count = 0;
    size_t r_draws = 0;
    uint64_t seed = 0;

    size_t n_free() const { return free.size(); }
    double cov(size_t a, size_t b) const { return covariance[a * n_free() + b]; }
};

// Deterministic start: zero covariate coefficients, unit choice scale,
// mu_beta = mu_alpha = -1, all mixing scales 0.5.
Theta default_start(size_t n_gamma);

EstimationResult estimate(const PreparedDataset& ds, const EstimateConfig& cfg);
EstimationResult estimate_with_draws(const PreparedDataset& ds, const DrawSet& draws,
                                     const EstimateConfig& cfg);

// Robust sandwich H^-1 G H^-1 on the free layout; H is a central
// finite-difference Hessian of the analytic gradient, G the weighted outer
// product of per-household scores. Near-singular H falls back to a
// pseudo-inverse (flagged via *singular).
std::vector<double> sandwich_covariance(const Theta& theta, const PreparedDataset& ds,
                                        const DrawSet& draws, double fd_step, int threads,
                                        double* condition = nullptr, bool* singular = nullptr);

struct Propagated {
    double value = 0.0;      // functional at the point estimate
    double std_error = 0.0;  // standard deviation across parameter draws
    int n_used = 0;
    int n_failed = 0;
};

// Parametric bootstrap of a scalar functional: draws parameter vectors from
// N(free_hat, covariance) and reports the standard deviation of the
// functional across draws. Draws where the functional throws or returns a
// non-finite value are skipped and counted.
Propagated propagate_uncertainty(const EstimationResult& fit,
                                 const std::function<double(const Theta&)>& functional,
                                 int n_draws, uint64_t seed);

std::string result_to_json(const EstimationResult& r);
EstimationResult result_from_json(const std::string& text);
void save_result(const EstimationResult& r, const std::string& path);
EstimationResult load_result(const std::string& path);

} // namespace dclogit
