#pragma once

#include "dclogit/choice.hpp"
#include "dclogit/data.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/theta.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dclogit {

// Attribute overrides for counterfactual simulation. Formula covariates stay
// at their observed values; shocks act through rents, operating costs, fuel
// economies and incomes.
struct Scenario {
    std::vector<double> annual_rent;   // per vehicle
    std::vector<double> op_cost;       // per vehicle
    std::vector<double> fuel_economy;  // per vehicle
    std::vector<double> income;        // per household
};

Scenario baseline_scenario(const PreparedDataset& ds);

struct FleetState {
    std::vector<double> share_mass;  // per model: sum_i w_i P_ij
    std::vector<double> share;       // share_mass normalized to 1
    std::vector<double> mean_vkt;    // per model: usage mass / share mass
    std::vector<double> usage;       // per model: sum_i w_i P_ij E[KM_ij]
    std::vector<double> fuel;        // per model: usage / fuel economy
    double total_weight = 0.0;
    double total_vkt = 0.0;
    double total_fuel = 0.0;
    double fleet_fuel_economy = 0.0; // share-weighted mean fuel economy
    NumericFlags flags;
};

// Mixed-logit market simulation. P_ij averages the per-draw softmax over the
// full mixing distribution (usage taste included via the third draw
// dimension); E[KM_ij] averages exp(beta(y-r) + gamma.X + alpha p + sd_eta^2/2)
// over the coefficient draws. Household blocks are reduced in fixed order, so
// results are bit-identical for any thread count.
FleetState simulate_fleet(const Theta& theta, const PreparedDataset& ds,
                          const DrawSet& draws, const Scenario& sc, int threads = 1);

FleetState baseline_fleet_state(const Theta& theta, const PreparedDataset& ds,
                                const DrawSet& draws, int threads = 1);

enum class ShockKind { FuelPrice, Income };
enum class SegmentShock { RetailPrice, FuelEconomy };

// Closed-form short-run usage elasticities: mean(alpha) * mean operating cost
// for a fuel price change, mean(beta) * mean income for an income change.
// The operating-cost mean is sales weighted; the income mean is weighted by
// the sampling weights.
double short_run_elasticity_from_means(const Theta& theta, double mean_exposure,
                                       ShockKind kind);
double short_run_vkt_elasticity(const Theta& theta, const PreparedDataset& ds,
                                ShockKind kind);

struct ElasticityReport {
    double elasticity = 0.0;                      // fuel consumption, behaviour free
    std::optional<double> elasticity_no_rebound;  // per-model usage frozen at baseline
    double vkt_elasticity = 0.0;
    std::optional<double> share_elasticity;       // segment shocks only
    double shock = 0.0;
    std::optional<double> std_error;
};

// Arc elasticity of total fuel consumption to a proportional shock
// (default 5%) in fuel price or household income.
ElasticityReport long_run_elasticity(const Theta& theta, const PreparedDataset& ds,
                                     const DrawSet& draws, ShockKind kind,
                                     double shock = 0.05, int threads = 1);

// Own-attribute arc elasticities of one segment: shocks the retail price
// (re-annualized) or fuel economy (operating cost and litres both move) of
// every model in the segment and reports segment-level responses.
ElasticityReport segment_elasticity(const Theta& theta, const PreparedDataset& ds,
                                    const DrawSet& draws, const std::string& segment,
                                    SegmentShock kind, double shock = 0.05,
                                    int threads = 1);

// Share of a usage response suppressed when usage cannot adjust:
// 1 - e_with / e_without.
double rebound(double e_with, double e_without);

} // namespace dclogit
