#pragma once

#include "dclogit/data.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/policy.hpp"
#include "dclogit/theta.hpp"

#include <string>
#include <vector>

namespace dclogit {

struct FeebatePolicy {
    double anchor = 0.0;       // km/l pivot
    double rebate_rate = 0.0;  // currency per km/l above the anchor
    double fee_rate = 0.0;     // currency per km/l below the anchor
};

// Rebates cut the price of models at or above the anchor, fees raise it below:
//   fe >= anchor: price - rebate_rate * (fe - anchor)
//   fe <  anchor: price + fee_rate * (anchor - fe)
double adjusted_price(double price, double fuel_economy, const FeebatePolicy& policy);

// Sales-weighted fleet fuel economy, the default anchor.
double default_anchor(const PreparedDataset& ds);

struct FeebateOutcome {
    FeebatePolicy policy;
    FleetState base;
    FleetState post;
    double total_fees = 0.0;       // post-policy share mass times per-model fee
    double total_rebates = 0.0;
    double net_revenue = 0.0;      // fees - rebates
    double neutrality_gap = 0.0;   // |net| / rebates (0 when rebates are 0)
    double fleet_fe_change_pct = 0.0;
    double fuel_savings_pct = 0.0;             // (F_base - F_post) / F_base * 100
    double fuel_savings_no_rebound_pct = 0.0;  // per-model usage frozen at baseline
    double rebound_share = 0.0;                // 1 - savings / savings_no_rebound
    int iterations = 0;            // bisection steps taken by the solver
    bool converged = true;
};

// Simulates one feebate policy: prices are adjusted, annual rents recomputed,
// the market re-simulated. Fee and rebate totals use post-policy shares.
FeebateOutcome evaluate_feebate(const Theta& theta, const PreparedDataset& ds,
                                const DrawSet& draws, const FeebatePolicy& policy,
                                int threads = 1);

// Finds the fee rate balancing fees against rebates for a given rebate rate:
// bisection on net revenue with automatic upper-bracket expansion, at most 60
// iterations, success when |net| <= tolerance * rebates.
FeebateOutcome solve_revenue_neutral(const Theta& theta, const PreparedDataset& ds,
                                     const DrawSet& draws, double anchor,
                                     double rebate_rate, double tolerance = 1e-3,
                                     int threads = 1);

struct FeebateSegmentRow {
    std::string segment;
    double base_share = 0.0;
    double post_share = 0.0;
    double share_change_pct = 0.0;
    double fuel_change_pct = 0.0;
    double fuel_change_no_rebound_pct = 0.0;
};

struct FeebateReport {
    std::vector<FeebateSegmentRow> segments;
    // Sales-weighted mean fee (rebate) as a percentage of retail price among
    // the models strictly below (above) the anchor; NaN when a side is empty.
    double mean_fee_pct_of_price = 0.0;
    double mean_rebate_pct_of_price = 0.0;
};

FeebateReport feebate_report(const FeebateOutcome& outcome, const PreparedDataset& ds);

} // namespace dclogit
