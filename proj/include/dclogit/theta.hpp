#pragma once

#include <string>
#include <vector>

namespace dclogit {

// Model parameters on the reported scale. mu/sd pairs describe the underlying
// normals of the mixed coefficients: beta = exp(mu_beta + sd_beta Z) and
// alpha = -exp(mu_alpha + sd_alpha Z).
struct Theta {
    std::vector<double> gamma;   // covariate + dummy coefficients
    double mu_beta = 0.0;
    double sd_beta = 0.0;
    double mu_alpha = 0.0;
    double sd_alpha = 0.0;
    double sd_eta = 0.0;         // usage-taste standard deviation
    double scale_mu = 1.0;       // Gumbel scale of the choice kernel

    size_t n_free() const { return gamma.size() + 6; }

    // Population means of the mixed coefficients.
    double mean_beta() const;
    double mean_alpha() const;
};

// Unconstrained optimizer layout: [gamma..., mu_beta, log sd_beta, mu_alpha,
// log sd_alpha, log sd_eta, log scale_mu]. The positive parameters must be
// strictly positive to map onto it.
std::vector<double> to_free(const Theta& t);
Theta from_free(const std::vector<double>& v, size_t n_gamma);

std::vector<std::string> free_names(const std::vector<std::string>& gamma_names);

// d(reported)/d(free) for each coordinate: 1 for gamma and the mus, the
// parameter value itself for log-mapped scales. Used by delta-method errors.
std::vector<double> free_to_reported_jacobian(const Theta& t);

std::vector<double> reported_values(const Theta& t);

} // namespace dclogit
