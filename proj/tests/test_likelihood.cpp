#include "doctest.h"

#include "dclogit/choice.hpp"
#include "dclogit/data.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/errors.hpp"
#include "dclogit/likelihood.hpp"
#include "dclogit/rand.hpp"
#include "dclogit/synth.hpp"
#include "dclogit/theta.hpp"
#include "fixtures.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace dclogit;

namespace {

Theta sane_theta(size_t n_gamma, std::mt19937_64& g) {
    auto uni = [&](double lo, double hi) { return lo + (hi - lo) * rng::uniform01(g); };
    Theta t;
    t.gamma.resize(n_gamma);
    for (auto& x : t.gamma) x = uni(-0.3, 0.3);
    t.mu_beta = uni(-1.4, -0.6);
    t.sd_beta = uni(0.2, 0.8);
    t.mu_alpha = uni(-1.6, -0.8);
    t.sd_alpha = uni(0.2, 0.8);
    t.sd_eta = uni(0.3, 0.8);
    t.scale_mu = uni(0.8, 2.0);
    return t;
}

// One household, two alternatives; the weight works out to exactly 1.
PreparedDataset duo_dataset() {
    auto vv = fixtures::tiny_vehicles();
    vv.resize(2);
    auto hh = fixtures::tiny_households();
    hh.resize(1);
    hh[0].chosen_model_id = "v1";
    return build_dataset(vv, hh, fixtures::tiny_config());
}

double normal_density(double x, double sd) {
    return std::exp(-0.5 * x * x / (sd * sd)) / (sd * std::sqrt(2.0 * M_PI));
}

}  // namespace

TEST_SUITE("likelihood") {

TEST_CASE("single-draw likelihood matches a by-hand evaluation") {
    const auto ds = duo_dataset();
    REQUIRE(ds.n() == 1);
    REQUIRE(ds.j() == 2);
    CHECK(ds.weight[0] == doctest::Approx(1.0).epsilon(1e-15));

    Theta t;
    t.gamma = {0.2, -0.1};
    t.mu_beta = -0.9;
    t.sd_beta = 0.3;
    t.mu_alpha = -1.2;
    t.sd_alpha = 0.4;
    t.sd_eta = 0.5;
    t.scale_mu = 1.3;

    const auto draws = make_draws(1, 1, 77);
    const double beta = std::exp(t.mu_beta + t.sd_beta * draws.at(0, 0, 0));
    const double alpha = -std::exp(t.mu_alpha + t.sd_alpha * draws.at(0, 0, 1));

    // usage residual at the chosen alternative, then utilities for both
    const int c = ds.chosen[0];
    const double y = ds.households[0].income;
    auto gx = [&](size_t j) {
        double s = 0.0;
        for (size_t k = 0; k < ds.K; ++k) s += t.gamma[k] * ds.x(0, j, k);
        return s;
    };
    const double roy = beta * (y - ds.annual_rent[c]) + gx(c) + alpha * ds.op_cost[c];
    const double eta = ds.log_km[0] - roy;

    std::vector<double> u(2);
    for (size_t j = 0; j < 2; ++j)
        u[j] = systematic_utility(beta, alpha, eta, y - ds.annual_rent[j], gx(j), ds.op_cost[j]);
    std::vector<double> probs;
    choice_probabilities(u, t.scale_mu, probs);
    const double expected = std::log(probs[c] * normal_density(eta, t.sd_eta));

    EvalOptions opts;
    opts.gradient = false;
    const auto rep = wll(t, ds, draws, opts);
    CHECK(rep.value == doctest::Approx(expected).epsilon(1e-13));
    CHECK(rep.household_loglik[0] == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("one-alternative markets reduce to the usage density") {
    auto vv = fixtures::tiny_vehicles();
    vv.resize(1);
    auto hh = fixtures::tiny_households();
    for (auto& h : hh) h.chosen_model_id = "v1";
    const auto ds = build_dataset(vv, hh, fixtures::tiny_config());

    std::mt19937_64 g(3);
    const Theta t = sane_theta(ds.K, g);
    const size_t R = 16;
    const auto draws = make_draws(ds.n(), R, 5);

    EvalOptions opts;
    opts.gradient = false;
    const auto rep = wll(t, ds, draws, opts);

    for (size_t i = 0; i < ds.n(); ++i) {
        double acc = 0.0;
        for (size_t r = 0; r < R; ++r) {
            const double beta = std::exp(t.mu_beta + t.sd_beta * draws.at(i, r, 0));
            const double alpha = -std::exp(t.mu_alpha + t.sd_alpha * draws.at(i, r, 1));
            double gx = 0.0;
            for (size_t k = 0; k < ds.K; ++k) gx += t.gamma[k] * ds.x(i, 0, k);
            const double roy = beta * (ds.households[i].income - ds.annual_rent[0]) + gx +
                               alpha * ds.op_cost[0];
            acc += normal_density(ds.log_km[i] - roy, t.sd_eta);
        }
        CHECK(rep.household_loglik[i] ==
              doctest::Approx(std::log(acc / static_cast<double>(R))).epsilon(1e-12));
    }
}

TEST_CASE("analytic gradient agrees with central differences") {
    const auto ds = fixtures::tiny_dataset(true);
    const auto draws = make_draws(ds.n(), 30, 19);
    std::mt19937_64 g(41);

    EvalOptions with_grad;
    EvalOptions value_only;
    value_only.gradient = false;

    double worst = 0.0;
    for (int rep = 0; rep < 20; ++rep) {
        const Theta t = sane_theta(ds.gamma_names.size(), g);
        const auto r0 = wll(t, ds, draws, with_grad);
        REQUIRE(r0.flags.clamp_count == 0);
        const auto x0 = to_free(t);
        for (size_t p = 0; p < x0.size(); ++p) {
            const double h = 1e-5 * std::max(1.0, std::fabs(x0[p]));
            auto xp = x0, xm = x0;
            xp[p] += h;
            xm[p] -= h;
            const double fp = wll(from_free(xp, t.gamma.size()), ds, draws, value_only).value;
            const double fm = wll(from_free(xm, t.gamma.size()), ds, draws, value_only).value;
            const double fd = (fp - fm) / (2 * h);
            const double rel =
                std::fabs(r0.gradient[p] - fd) / std::max(1.0, std::fabs(r0.gradient[p]));
            worst = std::max(worst, rel);
        }
    }
    INFO("worst relative gradient error ", worst);
    CHECK(worst < 1e-6);
}

TEST_CASE("the objective is linear in the weights") {
    auto ds = fixtures::tiny_dataset(true);
    std::mt19937_64 g(8);
    const Theta t = sane_theta(ds.gamma_names.size(), g);
    const auto draws = make_draws(ds.n(), 20, 3);

    const auto base = wll(t, ds, draws);
    for (auto& w : ds.weight) w *= 2.0;
    const auto doubled = wll(t, ds, draws);

    CHECK(doubled.value == 2.0 * base.value);
    REQUIRE(doubled.gradient.size() == base.gradient.size());
    for (size_t p = 0; p < base.gradient.size(); ++p)
        CHECK(doubled.gradient[p] == doctest::Approx(2.0 * base.gradient[p]).epsilon(1e-15));
    // per-household pieces are weight free
    for (size_t i = 0; i < ds.n(); ++i)
        CHECK(doubled.household_loglik[i] == base.household_loglik[i]);
}

TEST_CASE("input row order does not matter") {
    auto vv = fixtures::tiny_vehicles();
    auto hh = fixtures::tiny_households();
    const auto a = build_dataset(vv, hh, fixtures::tiny_config(true));
    std::swap(vv[0], vv[2]);
    std::swap(hh[1], hh[3]);
    std::swap(hh[0], hh[4]);
    const auto b = build_dataset(vv, hh, fixtures::tiny_config(true));

    std::mt19937_64 g(12);
    const Theta t = sane_theta(a.gamma_names.size(), g);
    const auto draws = make_draws(a.n(), 25, 7);
    const auto ra = wll(t, a, draws);
    const auto rb = wll(t, b, draws);
    CHECK(ra.value == rb.value);
    CHECK(ra.gradient == rb.gradient);
}

TEST_CASE("gradient and value are bit-identical for any thread count") {
    const auto syn = generate(demo_spec(60, 2));
    std::mt19937_64 g(6);
    const Theta t = sane_theta(syn.data.gamma_names.size(), g);
    const auto draws = make_draws(syn.data.n(), 40, 4);

    EvalOptions one;
    one.threads = 1;
    EvalOptions four;
    four.threads = 4;
    EvalOptions zero;
    zero.threads = 0;  // resolves to the hardware count

    const auto a = wll(t, syn.data, draws, one);
    const auto b = wll(t, syn.data, draws, four);
    const auto c = wll(t, syn.data, draws, zero);
    CHECK(a.value == b.value);
    CHECK(a.gradient == b.gradient);
    CHECK(a.value == c.value);
    CHECK(a.gradient == c.gradient);
}

TEST_CASE("simulation noise shrinks as draws double") {
    // evaluated at the generating parameters, where the integrand is well
    // behaved; far from them the simulated likelihood is draw-dominated and
    // no clean decay is expected
    const auto syn = generate(demo_spec(80, 9));
    const Theta& t = syn.truth;

    EvalOptions opts;
    opts.gradient = false;
    auto value_at = [&](size_t R) {
        return wll(t, syn.data, make_draws(syn.data.n(), R, 13), opts).value;
    };
    // quasi-random noise decays roughly like 1/R, so each quadrupling of R
    // should shrink the doubling gap
    const double d1 = std::fabs(value_at(100) - value_at(50));
    const double d2 = std::fabs(value_at(400) - value_at(200));
    const double d3 = std::fabs(value_at(1600) - value_at(800));
    CHECK(d2 < d1);
    CHECK(d3 < d2);
}

TEST_CASE("scores aggregate to the weighted gradient") {
    const auto ds = fixtures::tiny_dataset(true);
    std::mt19937_64 g(15);
    const Theta t = sane_theta(ds.gamma_names.size(), g);
    const auto draws = make_draws(ds.n(), 20, 2);

    EvalOptions opts;
    opts.scores = true;
    const auto rep = wll(t, ds, draws, opts);
    const size_t P = rep.gradient.size();
    REQUIRE(rep.scores.size() == ds.n() * P);
    for (size_t p = 0; p < P; ++p) {
        double acc = 0.0;
        for (size_t i = 0; i < ds.n(); ++i) acc += ds.weight[i] * rep.scores[i * P + p];
        CHECK(acc == doctest::Approx(rep.gradient[p]).epsilon(1e-12));
    }
}

TEST_CASE("household likelihood level matches its log") {
    const auto ds = fixtures::tiny_dataset();
    std::mt19937_64 g(22);
    const Theta t = sane_theta(ds.gamma_names.size(), g);
    const auto draws = make_draws(ds.n(), 15, 6);

    EvalOptions opts;
    opts.gradient = false;
    const auto rep = wll(t, ds, draws, opts);
    for (size_t i = 0; i < ds.n(); ++i)
        CHECK(joint_likelihood_household(t, ds, draws, i) ==
              doctest::Approx(std::exp(rep.household_loglik[i])).epsilon(1e-12));
}

TEST_CASE("absurd parameters clamp and floor instead of failing") {
    auto hh = fixtures::tiny_households();
    hh[0].annual_km = 1e-200;  // outlandish usage forces the density to zero
    const auto ds = build_dataset(fixtures::tiny_vehicles(), hh, fixtures::tiny_config());

    Theta t;
    t.gamma.assign(ds.K, 0.0);
    t.mu_beta = -1.0;
    t.sd_beta = 0.5;
    t.mu_alpha = -1.0;
    t.sd_alpha = 0.5;
    t.sd_eta = 0.05;
    t.scale_mu = 1.0;

    const auto draws = make_draws(ds.n(), 5, 1);
    EvalOptions opts;
    opts.gradient = false;
    const auto rep = wll(t, ds, draws, opts);
    CHECK(std::isfinite(rep.value));
    CHECK(rep.flags.floor_count > 0);
    CHECK(rep.household_loglik[0] >= std::log(1e-300) - 1e-9);

    Theta wild = t;
    wild.mu_beta = 300.0;  // beta around e^300 overflows any exponent
    const auto rep2 = wll(wild, ds, draws, opts);
    CHECK(std::isfinite(rep2.value));
    CHECK(rep2.flags.clamp_count > 0);
}

TEST_CASE("parameter domain is validated") {
    const auto ds = fixtures::tiny_dataset();
    const auto draws = make_draws(ds.n(), 4, 1);
    std::mt19937_64 g(1);
    Theta t = sane_theta(ds.K, g);
    t.sd_eta = 0.0;
    CHECK_THROWS_AS(wll(t, ds, draws), DomainError);
    t = sane_theta(ds.K, g);
    t.scale_mu = -1.0;
    CHECK_THROWS_AS(wll(t, ds, draws), DomainError);
    t = sane_theta(ds.K, g);
    t.gamma.pop_back();
    CHECK_THROWS_AS(wll(t, ds, draws), DomainError);

    const auto wrong = make_draws(ds.n() + 1, 4, 1);
    t = sane_theta(ds.K, g);
    CHECK_THROWS_AS(wll(t, ds, wrong), DomainError);
}

}  // TEST_SUITE
