#include "doctest.h"

#include "dclogit/data.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/errors.hpp"
#include "dclogit/feebate.hpp"
#include "dclogit/synth.hpp"
#include "dclogit/theta.hpp"
#include "fixtures.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace dclogit;

namespace {

// Two models mirrored around fuel economy 30: equal prices, equal sales, and
// covariates that cancel across alternatives. The high fuel economies keep the
// operating-cost gap (and so the baseline share gap) small, so a fee rate
// equal to the rebate rate balances the budget.
PreparedDataset mirrored_dataset() {
    VehicleRow a;
    a.model_id = "s1";
    a.make = "m";
    a.segment = "seg";
    a.retail_price = 1.2;
    a.fuel_economy = 29.5;
    a.engine_displacement = 1.4;
    a.sales_count = 500;
    VehicleRow b = a;
    b.model_id = "s2";
    b.fuel_economy = 30.5;

    auto mk = [](const char* id, double income, double age, double family, const char* chosen) {
        HouseholdRow h;
        h.household_id = id;
        h.income = income;
        h.age = age;
        h.female = 0;
        h.n_cars = 1;
        h.family_size = family;
        h.chosen_model_id = chosen;
        h.annual_km = 1.0;
        return h;
    };
    return build_dataset({a, b}, {mk("h1", 1.4, 40, 3, "s1"), mk("h2", 1.6, 50, 4, "s2")},
                         fixtures::tiny_config());
}

Theta mild_theta(size_t n_gamma) {
    Theta t;
    t.gamma.assign(n_gamma, 0.05);
    t.mu_beta = -0.5;
    t.sd_beta = 0.2;
    t.mu_alpha = -0.8;
    t.sd_alpha = 0.3;
    t.sd_eta = 0.3;
    t.scale_mu = 1.0;
    return t;
}

}  // namespace

TEST_SUITE("feebate") {

TEST_CASE("price adjustment pivots at the anchor") {
    const FeebatePolicy pol{15.0, 2.0, 3.0};
    CHECK(adjusted_price(10.0, 18.0, pol) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(adjusted_price(10.0, 12.0, pol) == doctest::Approx(19.0).epsilon(1e-15));
    CHECK(adjusted_price(10.0, 15.0, pol) == doctest::Approx(10.0).epsilon(1e-15));
}

TEST_CASE("the default anchor is the sales-weighted fleet fuel economy") {
    const auto ds = fixtures::tiny_dataset();
    // (500*18 + 300*14 + 200*11) / 1000
    CHECK(default_anchor(ds) == doctest::Approx(15.4).epsilon(1e-14));
    PreparedDataset empty;
    CHECK_THROWS_AS(default_anchor(empty), DomainError);
}

TEST_CASE("policy inputs are validated") {
    const auto ds = fixtures::tiny_dataset();
    const auto draws = make_draws(ds.n(), 4, 1);
    const Theta t = mild_theta(ds.K);
    CHECK_THROWS_AS(evaluate_feebate(t, ds, draws, FeebatePolicy{0.0, 0.1, 0.1}), DomainError);
    CHECK_THROWS_AS(evaluate_feebate(t, ds, draws, FeebatePolicy{15.0, -0.1, 0.1}), DomainError);
    CHECK_THROWS_AS(solve_revenue_neutral(t, ds, draws, 15.0, 0.01, 0.0), DomainError);

    // a rebate of 0.2 per km/l pushes v1 (price 0.4, three km/l above the
    // anchor) to a negative sticker price
    try {
        evaluate_feebate(t, ds, draws, FeebatePolicy{15.0, 0.2, 0.0});
        FAIL("expected the adjusted-price guard to fire");
    } catch (const DomainError& e) {
        CHECK(std::string(e.what()).find("v1") != std::string::npos);
    }
}

TEST_CASE("a zero-rate policy reproduces the baseline bit for bit") {
    const auto syn = generate(demo_spec(60, 17));
    const auto draws = make_draws(syn.data.n(), 25, 3);
    const auto out = evaluate_feebate(syn.truth, syn.data, draws,
                                      FeebatePolicy{default_anchor(syn.data), 0.0, 0.0});
    CHECK(out.post.share_mass == out.base.share_mass);
    CHECK(out.post.usage == out.base.usage);
    CHECK(out.post.fuel == out.base.fuel);
    CHECK(out.total_fees == 0.0);
    CHECK(out.total_rebates == 0.0);
    CHECK(out.net_revenue == 0.0);
    CHECK(out.neutrality_gap == 0.0);
    CHECK(out.fuel_savings_pct == 0.0);
    CHECK(out.fleet_fe_change_pct == 0.0);
    CHECK(std::fabs(out.fuel_savings_no_rebound_pct) <= 1e-10);
}

TEST_CASE("fee and rebate totals follow from post-policy shares") {
    const auto syn = generate(demo_spec(120, 27));
    const auto& ds = syn.data;
    const auto draws = make_draws(ds.n(), 40, 5);
    const double anchor = default_anchor(ds);
    const double rebate_rate = 0.02 * ds.vehicles[0].retail_price;

    const auto out = solve_revenue_neutral(syn.truth, ds, draws, anchor, rebate_rate);
    CHECK(out.converged);
    CHECK(out.iterations >= 1);
    CHECK(out.neutrality_gap <= 1e-3);

    double fees = 0.0, rebates = 0.0;
    for (size_t j = 0; j < ds.j(); ++j) {
        const double fe = ds.vehicles[j].fuel_economy;
        if (fe >= anchor)
            rebates += out.post.share_mass[j] * out.policy.rebate_rate * (fe - anchor);
        else
            fees += out.post.share_mass[j] * out.policy.fee_rate * (anchor - fe);
    }
    CHECK(out.total_fees == doctest::Approx(fees).epsilon(1e-10));
    CHECK(out.total_rebates == doctest::Approx(rebates).epsilon(1e-10));
    CHECK(out.net_revenue == doctest::Approx(fees - rebates).epsilon(1e-10));
    CHECK(out.neutrality_gap ==
          doctest::Approx(std::fabs(out.net_revenue) / out.total_rebates).epsilon(1e-12));

    // re-running the solved policy reproduces the solver's own outcome
    const auto replay = evaluate_feebate(syn.truth, ds, draws, out.policy);
    CHECK(replay.post.share_mass == out.post.share_mass);
    CHECK(replay.post.usage == out.post.usage);
}

TEST_CASE("derived outcome fields are internally consistent") {
    const auto syn = generate(demo_spec(100, 37));
    const auto& ds = syn.data;
    const auto draws = make_draws(ds.n(), 30, 7);
    const auto out = solve_revenue_neutral(syn.truth, ds, draws, default_anchor(ds),
                                           0.02 * ds.vehicles[0].retail_price);

    CHECK(out.fleet_fe_change_pct ==
          doctest::Approx((out.post.fleet_fuel_economy - out.base.fleet_fuel_economy) /
                          out.base.fleet_fuel_economy * 100.0)
              .epsilon(1e-12));
    CHECK(out.fuel_savings_pct ==
          doctest::Approx((out.base.total_fuel - out.post.total_fuel) / out.base.total_fuel *
                          100.0)
              .epsilon(1e-12));
    double frozen = 0.0;
    for (size_t j = 0; j < ds.j(); ++j)
        frozen += out.post.share_mass[j] * out.base.mean_vkt[j] / ds.vehicles[j].fuel_economy;
    CHECK(out.fuel_savings_no_rebound_pct ==
          doctest::Approx((out.base.total_fuel - frozen) / out.base.total_fuel * 100.0)
              .epsilon(1e-12));
    if (out.fuel_savings_no_rebound_pct != 0.0)
        CHECK(out.rebound_share ==
              doctest::Approx(1.0 - out.fuel_savings_pct / out.fuel_savings_no_rebound_pct)
                  .epsilon(1e-12));
    // the policy makes efficient models cheaper, so the fleet shifts greener
    CHECK(out.fleet_fe_change_pct > 0.0);
}

TEST_CASE("a mirrored fleet balances at fee rate equal to rebate rate") {
    const auto ds = mirrored_dataset();
    const auto draws = make_draws(ds.n(), 60, 11);
    const Theta t = mild_theta(ds.K);

    const auto base = baseline_fleet_state(t, ds, draws);
    CHECK(std::fabs(base.share[0] - base.share[1]) < 0.01);

    const double rebate_rate = 0.05;
    const auto out = solve_revenue_neutral(t, ds, draws, 30.0, rebate_rate);
    CHECK(out.converged);
    CHECK(out.policy.fee_rate == doctest::Approx(rebate_rate).epsilon(0.02));
    CHECK(out.neutrality_gap <= 1e-3);
}

TEST_CASE("a zero rebate rate solves to a zero fee") {
    const auto ds = mirrored_dataset();
    const auto draws = make_draws(ds.n(), 20, 13);
    const auto out = solve_revenue_neutral(mild_theta(ds.K), ds, draws, 30.0, 0.0);
    CHECK(out.converged);
    CHECK(out.policy.fee_rate == 0.0);
    CHECK(out.total_fees == 0.0);
    CHECK(out.total_rebates == 0.0);
}

TEST_CASE("a one-sided fleet cannot balance") {
    const auto ds = fixtures::tiny_dataset();
    const auto draws = make_draws(ds.n(), 4, 1);
    // every model sits below an anchor of 50 km/l
    CHECK_THROWS_AS(solve_revenue_neutral(mild_theta(ds.K), ds, draws, 50.0, 0.01),
                    ValidationError);
}

TEST_CASE("an unbalanceable budget raises a convergence error") {
    const auto ds = mirrored_dataset();
    const auto draws = make_draws(ds.n(), 20, 19);
    // near-argmax choice: the huge rebate makes s2 strictly dominant, the fee
    // side's mass dies off faster than the fee rate grows
    Theta t = mild_theta(ds.K);
    t.sd_beta = 0.1;
    t.sd_alpha = 0.1;
    t.scale_mu = 0.05;
    CHECK_THROWS_AS(solve_revenue_neutral(t, ds, draws, 30.0, 2.0), ConvergenceError);
}

TEST_CASE("the segment report aggregates and flags empty sides") {
    const auto syn = generate(demo_spec(80, 47));
    const auto& ds = syn.data;
    const auto draws = make_draws(ds.n(), 25, 23);
    const auto out = solve_revenue_neutral(syn.truth, ds, draws, default_anchor(ds),
                                           0.02 * ds.vehicles[0].retail_price);
    const auto rep = feebate_report(out, ds);

    double base_sum = 0.0, post_sum = 0.0;
    for (const auto& row : rep.segments) {
        base_sum += row.base_share;
        post_sum += row.post_share;
        if (row.base_share > 0)
            CHECK(row.share_change_pct ==
                  doctest::Approx((row.post_share - row.base_share) / row.base_share * 100.0)
                      .epsilon(1e-12));
    }
    CHECK(base_sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(post_sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::isfinite(rep.mean_fee_pct_of_price));
    CHECK(rep.mean_fee_pct_of_price > 0.0);
    CHECK(rep.mean_rebate_pct_of_price > 0.0);

    // an anchor below the whole fleet leaves the fee side empty
    const auto all_above = evaluate_feebate(syn.truth, ds, draws, FeebatePolicy{1.0, 0.001, 0.0});
    const auto rep2 = feebate_report(all_above, ds);
    CHECK(std::isnan(rep2.mean_fee_pct_of_price));
    CHECK(rep2.mean_rebate_pct_of_price > 0.0);
}

}  // TEST_SUITE
