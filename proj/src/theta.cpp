#include "dclogit/theta.hpp"

#include "dclogit/errors.hpp"

#include <cmath>

namespace dclogit {

double Theta::mean_beta() const {
    return std::exp(mu_beta + 0.5 * sd_beta * sd_beta);
}

double Theta::mean_alpha() const {
    return -std::exp(mu_alpha + 0.5 * sd_alpha * sd_alpha);
}

std::vector<double> to_free(const Theta& t) {
    if (!(t.sd_beta > 0) || !(t.sd_alpha > 0) || !(t.sd_eta > 0) || !(t.scale_mu > 0))
        throw DomainError("to_free: scale parameters must be > 0");
    std::vector<double> v(t.gamma);
    v.push_back(t.mu_beta);
    v.push_back(std::log(t.sd_beta));
    v.push_back(t.mu_alpha);
    v.push_back(std::log(t.sd_alpha));
    v.push_back(std::log(t.sd_eta));
    v.push_back(std::log(t.scale_mu));
    return v;
}

Theta from_free(const std::vector<double>& v, size_t n_gamma) {
    if (v.size() != n_gamma + 6)
        throw DomainError("from_free: expected " + std::to_string(n_gamma + 6) + " entries");
    Theta t;
    t.gamma.assign(v.begin(), v.begin() + n_gamma);
    t.mu_beta = v[n_gamma + 0];
    t.sd_beta = std::exp(v[n_gamma + 1]);
    t.mu_alpha = v[n_gamma + 2];
    t.sd_alpha = std::exp(v[n_gamma + 3]);
    t.sd_eta = std::exp(v[n_gamma + 4]);
    t.scale_mu = std::exp(v[n_gamma + 5]);
    return t;
}

std::vector<std::string> free_names(const std::vector<std::string>& gamma_names) {
    std::vector<std::string> names(gamma_names);
    names.push_back("mu_beta");
    names.push_back("sd_beta");
    names.push_back("mu_alpha");
    names.push_back("sd_alpha");
    names.push_back("sd_eta");
    names.push_back("scale_mu");
    return names;
}

std::vector<double> free_to_reported_jacobian(const Theta& t) {
    std::vector<double> j(t.gamma.size(), 1.0);
    j.push_back(1.0);          // mu_beta
    j.push_back(t.sd_beta);    // d sd / d log sd
    j.push_back(1.0);          // mu_alpha
    j.push_back(t.sd_alpha);
    j.push_back(t.sd_eta);
    j.push_back(t.scale_mu);
    return j;
}

std::vector<double> reported_values(const Theta& t) {
    std::vector<double> v(t.gamma);
    v.push_back(t.mu_beta);
    v.push_back(t.sd_beta);
    v.push_back(t.mu_alpha);
    v.push_back(t.sd_alpha);
    v.push_back(t.sd_eta);
    v.push_back(t.scale_mu);
    return v;
}

} // namespace dclogit
