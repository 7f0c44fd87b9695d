#include "dclogit/draws.hpp"

#include "dclogit/errors.hpp"
#include "dclogit/rand.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace dclogit {

double halton(uint64_t index, uint32_t base) {
    if (index == 0) throw DomainError("halton: index starts at 1");
    if (base < 2) throw DomainError("halton: base must be >= 2");
    double f = 1.0, x = 0.0;
    while (index > 0) {
        f /= base;
        x += f * (index % base);
        index /= base;
    }
    return x;
}

std::vector<double> shifted_shuffled_sequence(size_t n, uint32_t base, uint64_t seed, uint32_t dim) {
    constexpr uint64_t kBurnIn = 10;
    std::mt19937_64 g(rng::substream(seed, dim));
    const double shift = rng::uniform01(g);
    std::vector<double> pts(n);
    for (size_t k = 0; k < n; ++k) {
        double v = halton(kBurnIn + 1 + k, base) + shift;
        v -= std::floor(v);
        // keep strictly inside (0, 1) for the normal inverse
        if (v <= 0.0) v = 1e-15;
        if (v >= 1.0) v = 1.0 - 1e-15;
        pts[k] = v;
    }
    rng::shuffle(pts, g);
    return pts;
}

// Wichura (1988) algorithm AS 241, PPND16.
double to_standard_normal(double u) {
    if (!(u > 0.0) || !(u < 1.0)) throw DomainError("to_standard_normal: u must be in (0,1)");
    const double q = u - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r + 6.7265770927008700853e4) * r +
                     4.5921953931549871457e4) * r + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                  1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r + 3.9307895800092710610e4) * r +
                     2.1213794301586595867e4) * r + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                  4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0 ? u : 1.0 - u;
    r = std::sqrt(-std::log(r));
    double z;
    if (r <= 5.0) {
        r -= 1.6;
        z = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
                  1.27045825245236838258e0) * r + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
               4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
                  1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
               2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
                  2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
               5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
                  7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
               5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0 ? -z : z;
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

DrawSet make_draws(size_t n_households, size_t r_draws, uint64_t seed) {
    if (n_households == 0 || r_draws == 0)
        throw DomainError("make_draws: need at least one household and one draw");
    constexpr uint32_t kBases[3] = {2, 3, 5};
    DrawSet d;
    d.n = n_households;
    d.r = r_draws;
    d.seed = seed;
    const size_t total = n_households * r_draws;
    d.z.resize(total * 3);
    for (uint32_t dim = 0; dim < 3; ++dim) {
        auto u = shifted_shuffled_sequence(total, kBases[dim], seed, dim);
        for (size_t k = 0; k < total; ++k) d.z[k * 3 + dim] = to_standard_normal(u[k]);
    }
    return d;
}

namespace {

constexpr uint64_t kMagic = 0x44434c4f47445257ULL;  // "DCLOGDRW"
constexpr uint64_t kVersion = 1;

void put_u64(std::ofstream& out, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

uint64_t get_u64(std::ifstream& in, const std::string& path) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated draw file " + path);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

void dump_draws(const DrawSet& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    put_u64(out, kMagic);
    put_u64(out, kVersion);
    put_u64(out, d.n);
    put_u64(out, d.r);
    put_u64(out, d.seed);
    for (double x : d.z) put_u64(out, std::bit_cast<uint64_t>(x));
    if (!out) throw IoError("write failed: " + path);
}

DrawSet load_draws(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    if (get_u64(in, path) != kMagic) throw ValidationError(path + ": not a draw file");
    if (get_u64(in, path) != kVersion) throw ValidationError(path + ": unsupported draw file version");
    DrawSet d;
    d.n = get_u64(in, path);
    d.r = get_u64(in, path);
    d.seed = get_u64(in, path);
    if (d.n == 0 || d.r == 0) throw ValidationError(path + ": empty draw set");
    d.z.resize(d.n * d.r * 3);
    for (double& x : d.z) x = std::bit_cast<double>(get_u64(in, path));
    return d;
}

CoefficientDraws materialize_coefficients(const DrawSet& d, double mu_beta, double sd_beta,
                                          double mu_alpha, double sd_alpha) {
    if (sd_beta < 0 || sd_alpha < 0)
        throw DomainError("materialize_coefficients: standard deviations must be >= 0");
    CoefficientDraws c;
    c.n = d.n;
    c.r = d.r;
    const size_t total = d.n * d.r;
    c.beta.resize(total);
    c.alpha.resize(total);
    for (size_t k = 0; k < total; ++k) {
        c.beta[k] = std::exp(mu_beta + sd_beta * d.z[k * 3 + 0]);
        c.alpha[k] = -std::exp(mu_alpha + sd_alpha * d.z[k * 3 + 1]);
    }
    return c;
}

} // namespace dclogit
