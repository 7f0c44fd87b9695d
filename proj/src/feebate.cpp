#include "dclogit/feebate.hpp"

#include "dclogit/errors.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace dclogit {

double adjusted_price(double price, double fuel_economy, const FeebatePolicy& policy) {
    if (fuel_economy >= policy.anchor)
        return price - policy.rebate_rate * (fuel_economy - policy.anchor);
    return price + policy.fee_rate * (policy.anchor - fuel_economy);
}

double default_anchor(const PreparedDataset& ds) {
    double sales = 0.0, fe = 0.0;
    for (const auto& v : ds.vehicles) {
        sales += v.sales_count;
        fe += v.sales_count * v.fuel_economy;
    }
    if (!(sales > 0)) throw DomainError("default_anchor: no sales mass");
    return fe / sales;
}

namespace {

struct PolicyEval {
    FleetState post;
    double fees = 0.0;
    double rebates = 0.0;
    double net = 0.0;
};

PolicyEval run_policy(const Theta& theta, const PreparedDataset& ds, const DrawSet& draws,
                      const FeebatePolicy& policy, int threads) {
    Scenario sc = baseline_scenario(ds);
    for (size_t j = 0; j < ds.j(); ++j) {
        const double price = adjusted_price(ds.vehicles[j].retail_price,
                                            ds.vehicles[j].fuel_economy, policy);
        if (!(price > 0))
            throw DomainError("feebate: adjusted price of " + ds.vehicles[j].model_id +
                              " is not positive at fee rate " + std::to_string(policy.fee_rate));
        sc.annual_rent[j] = annualize_price(price, ds.config.interest_rate,
                                            ds.config.car_life_years);
    }
    PolicyEval ev;
    ev.post = simulate_fleet(theta, ds, draws, sc, threads);
    for (size_t j = 0; j < ds.j(); ++j) {
        const double fe = ds.vehicles[j].fuel_economy;
        if (fe >= policy.anchor)
            ev.rebates += ev.post.share_mass[j] * policy.rebate_rate * (fe - policy.anchor);
        else
            ev.fees += ev.post.share_mass[j] * policy.fee_rate * (policy.anchor - fe);
    }
    ev.net = ev.fees - ev.rebates;
    return ev;
}

FeebateOutcome finish(const Theta& theta, const PreparedDataset& ds, const DrawSet& draws,
                      const FeebatePolicy& policy, const FleetState& base, PolicyEval ev,
                      int iterations, bool converged) {
    FeebateOutcome out;
    out.policy = policy;
    out.base = base;
    out.post = std::move(ev.post);
    out.total_fees = ev.fees;
    out.total_rebates = ev.rebates;
    out.net_revenue = ev.net;
    out.neutrality_gap = ev.rebates > 0 ? std::fabs(ev.net) / ev.rebates
                                        : (ev.fees > 0 ? std::numeric_limits<double>::infinity() : 0.0);
    out.iterations = iterations;
    out.converged = converged;
    out.fleet_fe_change_pct =
        (out.post.fleet_fuel_economy - base.fleet_fuel_economy) / base.fleet_fuel_economy * 100.0;
    out.fuel_savings_pct = (base.total_fuel - out.post.total_fuel) / base.total_fuel * 100.0;
    double frozen = 0.0;  // usage per model pinned at baseline; fuel economy unchanged
    for (size_t j = 0; j < ds.j(); ++j)
        frozen += out.post.share_mass[j] * base.mean_vkt[j] / ds.vehicles[j].fuel_economy;
    out.fuel_savings_no_rebound_pct = (base.total_fuel - frozen) / base.total_fuel * 100.0;
    out.rebound_share = out.fuel_savings_no_rebound_pct != 0.0
                            ? 1.0 - out.fuel_savings_pct / out.fuel_savings_no_rebound_pct
                            : 0.0;
    (void)theta;
    (void)draws;
    return out;
}

} // namespace

FeebateOutcome evaluate_feebate(const Theta& theta, const PreparedDataset& ds,
                                const DrawSet& draws, const FeebatePolicy& policy,
                                int threads) {
    if (!(policy.anchor > 0)) throw DomainError("feebate: anchor must be > 0");
    if (policy.rebate_rate < 0 || policy.fee_rate < 0)
        throw DomainError("feebate: rates must be >= 0");
    FleetState base = baseline_fleet_state(theta, ds, draws, threads);
    PolicyEval ev = run_policy(theta, ds, draws, policy, threads);
    return finish(theta, ds, draws, policy, base, std::move(ev), 0, true);
}

FeebateOutcome solve_revenue_neutral(const Theta& theta, const PreparedDataset& ds,
                                     const DrawSet& draws, double anchor,
                                     double rebate_rate, double tolerance, int threads) {
    if (!(anchor > 0)) throw DomainError("feebate: anchor must be > 0");
    if (rebate_rate < 0) throw DomainError("feebate: rebate rate must be >= 0");
    if (!(tolerance > 0)) throw DomainError("feebate: tolerance must be > 0");

    bool any_above = false, any_below = false;
    for (const auto& v : ds.vehicles) {
        if (v.fuel_economy > anchor) any_above = true;
        if (v.fuel_economy < anchor) any_below = true;
    }
    FleetState base = baseline_fleet_state(theta, ds, draws, threads);

    FeebatePolicy policy{anchor, rebate_rate, 0.0};
    if ((!any_above && !any_below) || rebate_rate == 0.0) {
        // Degenerate but balanced: nothing is owed on either side at fee 0.
        PolicyEval ev = run_policy(theta, ds, draws, policy, threads);
        return finish(theta, ds, draws, policy, base, std::move(ev), 0, true);
    }
    if (!any_above || !any_below)
        throw ValidationError("feebate: every model is on one side of the anchor; "
                              "fees and rebates cannot balance");

    constexpr int kMaxIter = 60;
    int used = 0;

    auto net_at = [&](double fee) {
        ++used;
        policy.fee_rate = fee;
        return run_policy(theta, ds, draws, policy, threads);
    };

    PolicyEval lo_ev = net_at(0.0);
    if (std::fabs(lo_ev.net) <= tolerance * lo_ev.rebates)
        return finish(theta, ds, draws, policy, base, std::move(lo_ev), used, true);

    double lo = 0.0, hi = rebate_rate > 0 ? rebate_rate : 1.0;
    PolicyEval hi_ev = net_at(hi);
    while (hi_ev.net < 0 && used < kMaxIter) {
        if (std::fabs(hi_ev.net) <= tolerance * hi_ev.rebates)
            return finish(theta, ds, draws, policy, base, std::move(hi_ev), used, true);
        lo = hi;
        hi *= 2.0;
        hi_ev = net_at(hi);
    }
    if (hi_ev.net < 0) {
        std::ostringstream msg;
        msg << "feebate: no sign change up to fee rate " << hi << " (net " << hi_ev.net
            << ", rebates " << hi_ev.rebates << ") after " << used << " evaluations";
        throw ConvergenceError(msg.str());
    }
    if (std::fabs(hi_ev.net) <= tolerance * hi_ev.rebates)
        return finish(theta, ds, draws, policy, base, std::move(hi_ev), used, true);

    while (used < kMaxIter) {
        const double mid = 0.5 * (lo + hi);
        PolicyEval ev = net_at(mid);
        if (std::fabs(ev.net) <= tolerance * ev.rebates)
            return finish(theta, ds, draws, policy, base, std::move(ev), used, true);
        if (ev.net < 0) lo = mid;
        else hi = mid;
    }
    std::ostringstream msg;
    msg << "feebate: bisection did not reach |net| <= " << tolerance
        << " * rebates within " << kMaxIter << " evaluations (bracket [" << lo << ", " << hi << "])";
    throw ConvergenceError(msg.str());
}

FeebateReport feebate_report(const FeebateOutcome& outcome, const PreparedDataset& ds) {
    FeebateReport rep;
    std::map<std::string, std::array<double, 5>> seg;  // base share, post share, base fuel, post fuel, frozen fuel
    for (size_t j = 0; j < ds.j(); ++j) {
        auto& row = seg[ds.vehicles[j].segment];
        row[0] += outcome.base.share[j];
        row[1] += outcome.post.share[j];
        row[2] += outcome.base.fuel[j];
        row[3] += outcome.post.fuel[j];
        row[4] += outcome.post.share_mass[j] * outcome.base.mean_vkt[j] / ds.vehicles[j].fuel_economy;
    }
    for (const auto& [name, row] : seg) {
        FeebateSegmentRow r;
        r.segment = name;
        r.base_share = row[0];
        r.post_share = row[1];
        r.share_change_pct = row[0] > 0 ? (row[1] - row[0]) / row[0] * 100.0 : 0.0;
        r.fuel_change_pct = row[2] > 0 ? (row[3] - row[2]) / row[2] * 100.0 : 0.0;
        r.fuel_change_no_rebound_pct = row[2] > 0 ? (row[4] - row[2]) / row[2] * 100.0 : 0.0;
        rep.segments.push_back(r);
    }
    double fee_sales = 0.0, fee_pct = 0.0, reb_sales = 0.0, reb_pct = 0.0;
    for (const auto& v : ds.vehicles) {
        if (v.fuel_economy < outcome.policy.anchor) {
            const double fee = outcome.policy.fee_rate * (outcome.policy.anchor - v.fuel_economy);
            fee_sales += v.sales_count;
            fee_pct += v.sales_count * (fee / v.retail_price * 100.0);
        } else if (v.fuel_economy > outcome.policy.anchor) {
            const double reb = outcome.policy.rebate_rate * (v.fuel_economy - outcome.policy.anchor);
            reb_sales += v.sales_count;
            reb_pct += v.sales_count * (reb / v.retail_price * 100.0);
        }
    }
    rep.mean_fee_pct_of_price = fee_sales > 0 ? fee_pct / fee_sales
                                              : std::numeric_limits<double>::quiet_NaN();
    rep.mean_rebate_pct_of_price = reb_sales > 0 ? reb_pct / reb_sales
                                                 : std::numeric_limits<double>::quiet_NaN();
    return rep;
}

} // namespace dclogit
