#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dclogit {

// Radical-inverse Halton point; index starts at 1, base must be >= 2.
double halton(uint64_t index, uint32_t base);

// n Halton points in `base`, after discarding the first 10 (burn-in), with a
// seed-driven uniform shift modulo 1 and a seed-driven permutation of point
// order. Values lie in the open interval (0, 1).
std::vector<double> shifted_shuffled_sequence(size_t n, uint32_t base, uint64_t seed, uint32_t dim);

// Inverse standard normal CDF (Wichura's rational approximation); absolute
// error well below 1e-9 on (0, 1).
double to_standard_normal(double u);

// Standard normal CDF (reference direction for round trips).
double normal_cdf(double z);

// Standard-normal quasi-random draws for every household and simulation
// repetition, three dimensions per draw in fixed order: price/income
// coefficient, operating-cost coefficient, usage taste. Bases 2, 3, 5.
struct DrawSet {
    size_t n = 0;   // households
    size_t r = 0;   // draws per household
    uint64_t seed = 0;
    std::vector<double> z;  // layout [( i*r + rep )*3 + dim]

    double at(size_t i, size_t rep, size_t dim) const { return z[(i * r + rep) * 3 + dim]; }
};

DrawSet make_draws(size_t n_households, size_t r_draws, uint64_t seed);

// Little-endian binary dump: magic, version, n, r, seed, then the z array.
void dump_draws(const DrawSet& d, const std::string& path);
DrawSet load_draws(const std::string& path);

// Per-draw mixed coefficients: beta = exp(mu_b + sd_b z1) > 0 and
// alpha = -exp(mu_a + sd_a z2) < 0.
struct CoefficientDraws {
    size_t n = 0, r = 0;
    std::vector<double> beta;   // [i*r + rep]
    std::vector<double> alpha;  // [i*r + rep]
};

CoefficientDraws materialize_coefficients(const DrawSet& d, double mu_beta, double sd_beta,
                                          double mu_alpha, double sd_alpha);

} // namespace dclogit
