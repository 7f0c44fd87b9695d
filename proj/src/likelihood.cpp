#include "dclogit/likelihood.hpp"

#include "dclogit/errors.hpp"
#include "dclogit/parallel.hpp"

#include <atomic>
#include <cmath>

namespace dclogit {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct HouseholdWork {
    double logl = 0.0;
    long clamps = 0;
    long floors = 0;
};

// Scratch reused across households within one worker thread.
struct Scratch {
    std::vector<double> gx;      // J
    std::vector<double> u;       // J
    std::vector<double> t1;      // J, e^{l1} with the clamp applied
    std::vector<double> t1g;     // J, zeroed where l1 clamped (chain rule stops)
    std::vector<double> e2;      // J
    std::vector<double> e2g;     // J
    std::vector<double> probs;   // J
    std::vector<double> cvec;    // K
    std::vector<double> lw;      // R draw log weights
    std::vector<double> sr;      // R x P per-draw scores
};

void eval_household(const Theta& th, const PreparedDataset& ds, const DrawSet& draws,
                    size_t i, bool want_grad, Scratch& s, HouseholdWork& out,
                    double* grad_row) {
    const size_t J = ds.j();
    const size_t K = ds.K;
    const size_t R = draws.r;
    const size_t P = K + 6;
    const int jstar = ds.chosen[i];
    const double y = ds.households[i].income;
    const double logkm = ds.log_km[i];
    const double mu = th.scale_mu;
    const double sd_eta = th.sd_eta;
    const double var_eta = sd_eta * sd_eta;

    s.gx.resize(J);
    s.u.resize(J);
    s.t1.resize(J);
    s.t1g.resize(J);
    s.e2.resize(J);
    s.e2g.resize(J);
    s.probs.resize(J);
    s.cvec.resize(K);
    s.lw.resize(R);
    if (want_grad) s.sr.assign(R * P, 0.0);

    const double* hhf = &ds.hh_factor[i * K];
    for (size_t j = 0; j < J; ++j) {
        double acc = 0.0;
        const double* vf = &ds.veh_factor[j * K];
        for (size_t k = 0; k < K; ++k) acc += th.gamma[k] * hhf[k] * vf[k];
        s.gx[j] = acc;
    }

    NumericFlags local;
    const double rstar = ds.annual_rent[jstar];
    const double pstar = ds.op_cost[jstar];
    // Coefficient magnitudes are kept inside [e^-400, e^400] so reciprocals
    // stay finite at wild trial points; the chain rule is stopped where the
    // cap binds, keeping the gradient consistent with finite differences.
    constexpr double kCoefLogCap = 400.0;
    for (size_t rep = 0; rep < R; ++rep) {
        const double z1 = draws.at(i, rep, 0);
        const double z2 = draws.at(i, rep, 1);
        double log_beta = th.mu_beta + th.sd_beta * z1;
        double log_neg_alpha = th.mu_alpha + th.sd_alpha * z2;
        const bool beta_capped = std::fabs(log_beta) > kCoefLogCap;
        const bool alpha_capped = std::fabs(log_neg_alpha) > kCoefLogCap;
        if (beta_capped) { ++local.clamp_count; log_beta = std::copysign(kCoefLogCap, log_beta); }
        if (alpha_capped) { ++local.clamp_count; log_neg_alpha = std::copysign(kCoefLogCap, log_neg_alpha); }
        const double beta = std::exp(log_beta);
        const double alpha = -std::exp(log_neg_alpha);

        const double astar = beta * (y - rstar) + s.gx[jstar];
        const double eta = logkm - astar - alpha * pstar;

        for (size_t j = 0; j < J; ++j) {
            double l1 = -beta * (y - ds.annual_rent[j]) - s.gx[j] - eta - log_beta;
            double l2 = alpha * ds.op_cost[j] - log_neg_alpha;
            bool c1 = l1 > kExpClamp, c2 = l2 > kExpClamp;
            if (c1) { ++local.clamp_count; l1 = kExpClamp; }
            if (c2) { ++local.clamp_count; l2 = kExpClamp; }
            const double t1 = std::exp(l1);
            const double e2 = std::exp(l2);
            s.t1[j] = t1;
            s.e2[j] = e2;
            s.t1g[j] = c1 ? 0.0 : t1;
            s.e2g[j] = c2 ? 0.0 : e2;
            s.u[j] = -t1 + e2;
        }

        const double lse = choice_probabilities(s.u, mu, s.probs);
        const double logp = s.u[jstar] / mu - lse;
        const double logphi = -0.5 * kLog2Pi - std::log(sd_eta) - 0.5 * eta * eta / var_eta;
        s.lw[rep] = logp + logphi;

        if (!want_grad) continue;

        double B = 0.0, Br = 0.0, C2 = 0.0, C2p = 0.0, ubar = 0.0;
        for (size_t k = 0; k < K; ++k) s.cvec[k] = 0.0;
        for (size_t j = 0; j < J; ++j) {
            const double pj = s.probs[j];
            const double pt = pj * s.t1g[j];
            const double pe = pj * s.e2g[j];
            B += pt;
            Br += pt * ds.annual_rent[j];
            C2 += pe;
            C2p += pe * ds.op_cost[j];
            ubar += pj * s.u[j];
            const double* vf = &ds.veh_factor[j * K];
            for (size_t k = 0; k < K; ++k) s.cvec[k] += pt * vf[k];
        }

        double* sr = &s.sr[rep * P];
        const double eta_over_var = eta / var_eta;
        const double* vstar = &ds.veh_factor[jstar * K];
        for (size_t k = 0; k < K; ++k) {
            const double xstar = hhf[k] * vstar[k];
            sr[k] = (B * xstar - hhf[k] * s.cvec[k]) / mu + eta_over_var * xstar;
        }
        // d u_k / d beta, total through the residual: T1g_k [1/beta + r_j* - r_k]
        const double sbeta = s.t1g[jstar] / beta - (B / beta + B * rstar - Br);
        const double dbeta = beta_capped ? 0.0 : sbeta / mu + eta_over_var * (y - rstar);
        sr[K + 0] = dbeta * beta;
        sr[K + 1] = dbeta * beta * th.sd_beta * z1;
        // d u_k / d alpha: E2g_k (p_k - 1/alpha) - T1g_k p_j*
        const double salpha = s.e2g[jstar] * (pstar - 1.0 / alpha) - (C2p - C2 / alpha)
                              - pstar * (s.t1g[jstar] - B);
        const double dalpha = alpha_capped ? 0.0 : salpha / mu + eta_over_var * pstar;
        sr[K + 2] = dalpha * alpha;
        sr[K + 3] = dalpha * alpha * th.sd_alpha * z2;
        sr[K + 4] = eta * eta / var_eta - 1.0;
        sr[K + 5] = -(s.u[jstar] - ubar) / mu;
    }

    double wmax = s.lw[0];
    for (size_t rep = 1; rep < R; ++rep) wmax = std::max(wmax, s.lw[rep]);
    double z = 0.0;
    for (size_t rep = 0; rep < R; ++rep) z += std::exp(s.lw[rep] - wmax);
    double logl = wmax + std::log(z) - std::log(static_cast<double>(R));
    if (logl < std::log(kLikelihoodFloor)) {
        logl = std::log(kLikelihoodFloor);
        ++local.floor_count;
    }
    out.logl = logl;
    out.clamps = local.clamp_count;
    out.floors = local.floor_count;

    if (want_grad) {
        for (size_t p = 0; p < P; ++p) grad_row[p] = 0.0;
        for (size_t rep = 0; rep < R; ++rep) {
            const double q = std::exp(s.lw[rep] - wmax) / z;
            const double* sr = &s.sr[rep * P];
            for (size_t p = 0; p < P; ++p) grad_row[p] += q * sr[p];
        }
    }
}

void check_theta(const Theta& th, const PreparedDataset& ds) {
    if (th.gamma.size() != ds.K)
        throw DomainError("likelihood: gamma has " + std::to_string(th.gamma.size()) +
                          " entries, design has " + std::to_string(ds.K));
    if (!(th.sd_eta > 0)) throw DomainError("likelihood: sd_eta must be > 0");
    if (!(th.scale_mu > 0)) throw DomainError("likelihood: scale_mu must be > 0");
    if (th.sd_beta < 0 || th.sd_alpha < 0)
        throw DomainError("likelihood: sd_beta and sd_alpha must be >= 0");
}

} // namespace

LikelihoodReport wll(const Theta& theta, const PreparedDataset& ds,
                     const DrawSet& draws, const EvalOptions& opts) {
    check_theta(theta, ds);
    const size_t N = ds.n();
    if (draws.n != N)
        throw DomainError("likelihood: draw set covers " + std::to_string(draws.n) +
                          " households, dataset has " + std::to_string(N));
    const size_t P = ds.K + 6;
    const bool want_grad = opts.gradient || opts.scores;

    LikelihoodReport rep;
    rep.household_loglik.resize(N);
    std::vector<HouseholdWork> work(N);
    std::vector<double> grads;
    if (want_grad) grads.assign(N * P, 0.0);

    parallel_for(N, opts.threads, [&](size_t i) {
        thread_local Scratch scratch;
        eval_household(theta, ds, draws, i, want_grad, scratch, work[i],
                       want_grad ? &grads[i * P] : nullptr);
    });

    double value = 0.0;
    for (size_t i = 0; i < N; ++i) {
        rep.household_loglik[i] = work[i].logl;
        value += ds.weight[i] * work[i].logl;
        rep.flags.clamp_count += work[i].clamps;
        rep.flags.floor_count += work[i].floors;
    }
    rep.value = value;
    if (opts.gradient) {
        rep.gradient.assign(P, 0.0);
        for (size_t i = 0; i < N; ++i)
            for (size_t p = 0; p < P; ++p)
                rep.gradient[p] += ds.weight[i] * grads[i * P + p];
    }
    if (opts.scores) rep.scores = std::move(grads);
    return rep;
}

double joint_likelihood_household(const Theta& theta, const PreparedDataset& ds,
                                  const DrawSet& draws, size_t i, NumericFlags* flags) {
    check_theta(theta, ds);
    if (i >= ds.n()) throw DomainError("joint_likelihood_household: index out of range");
    Scratch scratch;
    HouseholdWork out;
    eval_household(theta, ds, draws, i, false, scratch, out, nullptr);
    if (flags) {
        flags->clamp_count += out.clamps;
        flags->floor_count += out.floors;
    }
    return std::exp(out.logl);
}

} // namespace dclogit
