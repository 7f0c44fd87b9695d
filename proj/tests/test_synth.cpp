#include "doctest.h"

#include "dclogit/choice.hpp"
#include "dclogit/data.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/errors.hpp"
#include "dclogit/likelihood.hpp"
#include "dclogit/policy.hpp"
#include "dclogit/synth.hpp"
#include "dclogit/theta.hpp"
#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

using namespace dclogit;

namespace {

// Demo market cut down to four models and mild mixing, small enough for the
// tensor-product quadrature oracle.
SyntheticSpec quad_slice(std::size_t n, std::uint64_t seed) {
    SyntheticSpec spec = demo_spec(n, seed);
    spec.vehicles.resize(4);
    spec.gamma.erase("asc_make:make_c");
    spec.gamma.erase("asc_segment:suv");
    spec.sd_beta = 0.3;
    spec.sd_alpha = 0.5;
    return spec;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("the demo market is shaped as documented") {
    const auto spec = demo_spec(25, 3);
    REQUIRE(spec.vehicles.size() == 10);
    std::set<std::string> makes, segments, ids;
    for (const auto& v : spec.vehicles) {
        makes.insert(v.make);
        segments.insert(v.segment);
        ids.insert(v.model_id);
    }
    CHECK(makes.size() == 3);
    CHECK(segments.size() == 3);
    CHECK(ids.size() == 10);
    CHECK(ids.count("m01") == 1);
    CHECK(ids.count("m10") == 1);
    CHECK(spec.n_households == 25);
    CHECK(spec.seed == 3);

    const auto syn = generate(spec);
    CHECK(syn.data.n() == 25);
    CHECK(syn.truth.gamma.size() == syn.data.K);
}

TEST_CASE("generation is deterministic and ignores vehicle input order") {
    auto spec = demo_spec(50, 9);
    const auto a = generate(spec);
    const auto b = generate(spec);
    REQUIRE(a.data.n() == b.data.n());
    for (size_t i = 0; i < a.data.n(); ++i) {
        CHECK(a.data.households[i].household_id == b.data.households[i].household_id);
        CHECK(a.data.households[i].chosen_model_id == b.data.households[i].chosen_model_id);
        CHECK(a.data.households[i].annual_km == b.data.households[i].annual_km);
        CHECK(a.data.households[i].income == b.data.households[i].income);
    }

    std::reverse(spec.vehicles.begin(), spec.vehicles.end());
    const auto c = generate(spec);
    for (size_t i = 0; i < a.data.n(); ++i) {
        CHECK(a.data.households[i].chosen_model_id == c.data.households[i].chosen_model_id);
        CHECK(a.data.households[i].annual_km == c.data.households[i].annual_km);
    }
    for (size_t j = 0; j < a.data.j(); ++j) {
        CHECK(a.data.vehicles[j].model_id == c.data.vehicles[j].model_id);
        CHECK(a.data.vehicles[j].sales_count == c.data.vehicles[j].sales_count);
    }

    const auto d = generate(demo_spec(50, 10));
    bool any_diff = false;
    for (size_t i = 0; i < a.data.n(); ++i)
        any_diff = any_diff || a.data.households[i].annual_km != d.data.households[i].annual_km;
    CHECK(any_diff);
}

TEST_CASE("sales equal sample counts so weights are exactly one") {
    const auto syn = generate(demo_spec(120, 21));
    double sales = 0.0;
    for (const auto& v : syn.data.vehicles) sales += v.sales_count;
    CHECK(sales == 120.0);
    for (size_t i = 0; i < syn.data.n(); ++i) CHECK(syn.data.weight[i] == 1.0);
}

TEST_CASE("degenerate tastes reduce generation to the deterministic model") {
    // no coefficient spread, no usage taste, and a vanishing choice scale:
    // every household picks the systematic argmax and drives the exact demand
    auto spec = demo_spec(80, 31);
    spec.sd_beta = 0.0;
    spec.sd_alpha = 0.0;
    spec.sd_eta = 0.0;
    spec.scale_mu = 1e-8;
    const auto syn = generate(spec);
    const auto& ds = syn.data;
    const double beta = std::exp(spec.mu_beta);
    const double alpha = -std::exp(spec.mu_alpha);

    for (size_t i = 0; i < ds.n(); ++i) {
        const double y = ds.households[i].income;
        size_t best = 0;
        double best_u = -1e300;
        for (size_t j = 0; j < ds.j(); ++j) {
            double gx = 0.0;
            for (size_t k = 0; k < ds.K; ++k) gx += syn.truth.gamma[k] * ds.x(i, j, k);
            const double u =
                systematic_utility(beta, alpha, 0.0, y - ds.annual_rent[j], gx, ds.op_cost[j]);
            if (u > best_u) {
                best_u = u;
                best = j;
            }
        }
        CHECK(ds.households[i].chosen_model_id == ds.vehicles[best].model_id);
        double gx = 0.0;
        for (size_t k = 0; k < ds.K; ++k) gx += syn.truth.gamma[k] * ds.x(i, best, k);
        const double km = std::exp(
            log_vkt(beta, alpha, 0.0, y - ds.annual_rent[best], gx, ds.op_cost[best]));
        CHECK(ds.households[i].annual_km == doctest::Approx(km).epsilon(1e-12));
    }
}

TEST_CASE("empirical shares match model probabilities on a large sample") {
    const auto syn = generate(demo_spec(20000, 41));
    const auto& ds = syn.data;
    const auto draws = make_draws(ds.n(), 200, 6);
    const auto st = baseline_fleet_state(syn.truth, ds, draws);
    const double n = static_cast<double>(ds.n());
    for (size_t j = 0; j < ds.j(); ++j) {
        const double empirical = ds.vehicles[j].sales_count / n;
        CHECK(std::fabs(empirical - st.share[j]) < 0.012);
    }
}

TEST_CASE("the closed-form fleet is the binary logit formula") {
    // two models, hand-evaluated: share of the first is 1/(1+exp(-(uA-uB)/mu))
    VehicleRow a;
    a.model_id = "cfA";
    a.make = "m";
    a.segment = "s";
    a.retail_price = 0.6;
    a.fuel_economy = 16.0;
    a.engine_displacement = 1.1;
    a.sales_count = 4;
    VehicleRow b = a;
    b.model_id = "cfB";
    b.retail_price = 1.1;
    b.fuel_economy = 12.0;
    b.engine_displacement = 1.9;
    b.sales_count = 2;
    auto hh = fixtures::tiny_households();
    hh.resize(3);
    hh[0].chosen_model_id = "cfA";
    hh[1].chosen_model_id = "cfB";
    hh[2].chosen_model_id = "cfA";
    const auto ds = build_dataset({a, b}, hh, fixtures::tiny_config());

    Theta t;
    t.gamma = {0.08, -0.04};
    t.mu_beta = -0.4;
    t.sd_beta = 0.0;
    t.mu_alpha = -0.9;
    t.sd_alpha = 0.0;
    t.sd_eta = 0.0;
    t.scale_mu = 1.3;
    const double beta = std::exp(t.mu_beta);
    const double alpha = -std::exp(t.mu_alpha);

    const auto st = closed_form_fleet(t, ds, baseline_scenario(ds));
    double mass0 = 0.0, usage0 = 0.0;
    for (size_t i = 0; i < ds.n(); ++i) {
        const double y = ds.households[i].income;
        double u[2], km[2];
        for (size_t j = 0; j < 2; ++j) {
            double gx = 0.0;
            for (size_t k = 0; k < ds.K; ++k) gx += t.gamma[k] * ds.x(i, j, k);
            u[j] = -(1.0 / beta) * std::exp(-beta * (y - ds.annual_rent[j]) - gx) -
                   (1.0 / alpha) * std::exp(alpha * ds.op_cost[j]);
            km[j] = std::exp(beta * (y - ds.annual_rent[j]) + gx + alpha * ds.op_cost[j]);
        }
        const double p0 = 1.0 / (1.0 + std::exp(-(u[0] - u[1]) / t.scale_mu));
        mass0 += ds.weight[i] * p0;
        usage0 += ds.weight[i] * p0 * km[0];
    }
    CHECK(st.share_mass[0] == doctest::Approx(mass0).epsilon(1e-12));
    CHECK(st.usage[0] == doctest::Approx(usage0).epsilon(1e-12));
    CHECK(st.share_mass[0] + st.share_mass[1] ==
          doctest::Approx(ds.total_weight()).epsilon(1e-12));
}

TEST_CASE("the closed form rejects anything but degenerate mixing") {
    const auto ds = fixtures::tiny_dataset();
    Theta t;
    t.gamma.assign(ds.K, 0.0);
    t.mu_beta = -0.5;
    t.mu_alpha = -1.0;
    t.sd_beta = 0.0;
    t.sd_alpha = 0.0;
    t.sd_eta = 0.0;
    t.scale_mu = 1.0;
    const auto sc = baseline_scenario(ds);
    CHECK_NOTHROW(closed_form_fleet(t, ds, sc));
    for (double* sd : {&t.sd_beta, &t.sd_alpha, &t.sd_eta}) {
        *sd = 0.1;
        CHECK_THROWS_AS(closed_form_fleet(t, ds, sc), DomainError);
        *sd = 0.0;
    }
    Theta wrong = t;
    wrong.gamma.push_back(0.0);
    CHECK_THROWS_AS(closed_form_fleet(wrong, ds, sc), DomainError);
    auto bad_sc = sc;
    bad_sc.income.pop_back();
    CHECK_THROWS_AS(closed_form_fleet(t, ds, bad_sc), DomainError);
}

TEST_CASE("the Gauss-Hermite rule has standard normal moments") {
    const auto gh = gauss_hermite(31);
    REQUIRE(gh.node.size() == 31);
    double w = 0.0, m1 = 0.0, m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (size_t k = 0; k < gh.node.size(); ++k) {
        w += gh.weight[k];
        m1 += gh.weight[k] * gh.node[k];
        m2 += gh.weight[k] * gh.node[k] * gh.node[k];
        m3 += gh.weight[k] * std::pow(gh.node[k], 3);
        m4 += gh.weight[k] * std::pow(gh.node[k], 4);
        CHECK(gh.node[k] == doctest::Approx(-gh.node[gh.node.size() - 1 - k]).epsilon(1e-10));
    }
    CHECK(w == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(m1 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m3 == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(m4 == doctest::Approx(3.0).epsilon(1e-10));

    const auto one = gauss_hermite(1);
    CHECK(one.node[0] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(one.weight[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(gauss_hermite(0), DomainError);
}

TEST_CASE("quadrature has converged by 31 nodes per dimension") {
    const auto syn = generate(quad_slice(50, 5));
    const double q31 = quadrature_loglik(syn.truth, syn.data, 31);
    const double q63 = quadrature_loglik(syn.truth, syn.data, 63);
    CHECK(std::fabs(q31 - q63) / std::fabs(q63) < 1e-8);
}

TEST_CASE("the simulated likelihood tracks the quadrature oracle") {
    const auto syn = generate(quad_slice(50, 5));
    const double q = quadrature_loglik(syn.truth, syn.data, 63);
    const auto draws = make_draws(syn.data.n(), 2000, 3);
    EvalOptions opts;
    opts.gradient = false;
    const auto sim = wll(syn.truth, syn.data, draws, opts);
    CHECK(std::fabs(sim.value - q) / std::fabs(q) < 0.01);
}

TEST_CASE("degenerate coefficient mixing makes one draw exact") {
    auto spec = quad_slice(50, 5);
    spec.sd_beta = 0.0;
    spec.sd_alpha = 0.0;
    const auto syn = generate(spec);
    const double q = quadrature_loglik(syn.truth, syn.data, 31);
    const auto draws = make_draws(syn.data.n(), 1, 3);
    EvalOptions opts;
    opts.gradient = false;
    const auto sim = wll(syn.truth, syn.data, draws, opts);
    CHECK(std::fabs(sim.value - q) / std::fabs(q) < 1e-10);
}

TEST_CASE("the quadrature oracle guards its domain") {
    const auto syn = generate(quad_slice(50, 5));
    CHECK_THROWS_AS(quadrature_loglik(syn.truth, syn.data, 30), ValidationError);
    Theta bad = syn.truth;
    bad.sd_eta = 0.0;
    CHECK_THROWS_AS(quadrature_loglik(bad, syn.data, 31), DomainError);
    const auto big = generate(demo_spec(120, 5));
    CHECK_THROWS_AS(quadrature_loglik(big.truth, big.data, 31), ValidationError);
}

TEST_CASE("generation inputs are validated") {
    auto spec = demo_spec(10, 1);
    spec.n_households = 0;
    CHECK_THROWS_AS(generate(spec), ValidationError);

    spec = demo_spec(10, 1);
    spec.vehicles.clear();
    CHECK_THROWS_AS(generate(spec), ValidationError);

    spec = demo_spec(10, 1);
    spec.sd_beta = -0.1;
    CHECK_THROWS_AS(generate(spec), ValidationError);

    spec = demo_spec(10, 1);
    spec.scale_mu = 0.0;
    CHECK_THROWS_AS(generate(spec), ValidationError);

    spec = demo_spec(10, 1);
    spec.gamma.erase("age");
    CHECK_THROWS_AS(generate(spec), ValidationError);

    spec = demo_spec(10, 1);
    spec.gamma["no_such_column"] = 1.0;
    CHECK_THROWS_AS(generate(spec), ValidationError);
}

}  // TEST_SUITE
