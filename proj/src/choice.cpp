#include "dclogit/choice.hpp"

#include "dclogit/errors.hpp"

#include <algorithm>
#include <cmath>

namespace dclogit {

namespace {

inline double clamped_exp(double exponent, NumericFlags* flags) {
    if (exponent > kExpClamp) {
        if (flags) ++flags->clamp_count;
        exponent = kExpClamp;
    }
    return std::exp(exponent);
}

} // namespace

double systematic_utility(double beta, double alpha, double eta,
                          double y_minus_r, double gx, double p,
                          NumericFlags* flags) {
    if (!(beta > 0)) throw DomainError("systematic_utility: beta must be > 0");
    if (!(alpha < 0)) throw DomainError("systematic_utility: alpha must be < 0");
    // -(1/beta) e^{-beta(y-r) - gx - eta} = -e^{l1}, 1/beta folded into l1;
    // -(1/alpha) e^{alpha p} = +e^{l2} since alpha < 0.
    const double l1 = -beta * y_minus_r - gx - eta - std::log(beta);
    const double l2 = alpha * p - std::log(-alpha);
    return -clamped_exp(l1, flags) + clamped_exp(l2, flags);
}

double log_vkt(double beta, double alpha, double eta,
               double y_minus_r, double gx, double p) {
    if (!(beta > 0)) throw DomainError("log_vkt: beta must be > 0");
    if (!(alpha < 0)) throw DomainError("log_vkt: alpha must be < 0");
    return beta * y_minus_r + gx + alpha * p + eta;
}

double choice_probabilities(const std::vector<double>& u, double scale,
                            std::vector<double>& probs) {
    if (u.empty()) throw DomainError("choice_probabilities: empty utility vector");
    if (!(scale > 0)) throw DomainError("choice_probabilities: scale must be > 0");
    probs.resize(u.size());
    const double umax = *std::max_element(u.begin(), u.end());
    double z = 0.0;
    for (size_t k = 0; k < u.size(); ++k) {
        probs[k] = std::exp((u[k] - umax) / scale);
        z += probs[k];
    }
    for (double& pk : probs) pk /= z;
    return umax / scale + std::log(z);
}

double expected_vkt(double beta, double alpha, double y_minus_r, double gx,
                    double p, double sd_eta, NumericFlags* flags) {
    if (!(beta > 0)) throw DomainError("expected_vkt: beta must be > 0");
    if (!(alpha < 0)) throw DomainError("expected_vkt: alpha must be < 0");
    if (sd_eta < 0) throw DomainError("expected_vkt: sd_eta must be >= 0");
    const double exponent = log_vkt(beta, alpha, 0.0, y_minus_r, gx, p) + 0.5 * sd_eta * sd_eta;
    double e = exponent;
    if (e > kExpClamp) {
        if (flags) ++flags->clamp_count;
        e = kExpClamp;
    }
    return std::exp(e);
}

} // namespace dclogit
