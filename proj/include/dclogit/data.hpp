#pragma once

#include "dclogit/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dclogit {

struct VehicleRow {
    std::string model_id;
    std::string make;
    std::string segment;
    double retail_price = 0.0;
    double fuel_economy = 0.0;        // km per litre
    double engine_displacement = 0.0;
    std::optional<double> volume;
    std::optional<double> kerb_weight;
    double sales_count = 0.0;
};

struct HouseholdRow {
    std::string household_id;
    double income = 0.0;              // same currency unit as retail_price
    double age = 0.0;
    double female = 0.0;
    double n_cars = 0.0;
    double family_size = 0.0;
    std::string chosen_model_id;
    double annual_km = 0.0;
    std::optional<double> weight;
};

// Capital-recovery annuity r = P*i / (1 - (1+i)^-L).
double annualize_price(double price, double interest_rate, double life_years);

// Fuel cost per km = fuel price per litre / km per litre.
double operating_cost(double fuel_price, double fuel_economy);

// Choice-based sampling weights: w_i = sales share of the chosen model /
// sample share of the chosen model, normalized so the weights sum to the
// number of households. `chosen` holds vehicle indices; `sales_count` is per
// vehicle. A model chosen in the sample must have positive sales.
std::vector<double> compute_choice_based_weights(const std::vector<int>& chosen,
                                                 const std::vector<double>& sales_count);

struct PreparedDataset {
    MarketConfig config;
    std::vector<VehicleRow> vehicles;     // sorted by model_id
    std::vector<HouseholdRow> households; // sorted by household_id
    std::vector<int> chosen;              // per household, index into vehicles
    std::vector<double> weight;           // per household, sums to N
    std::vector<double> log_km;           // per household
    std::vector<double> annual_rent;      // r_j, per vehicle
    std::vector<double> op_cost;          // p_j, per vehicle
    std::vector<std::string> makes;       // sorted unique; [0] is the reference
    std::vector<std::string> segments;    // sorted unique; [0] is the reference
    std::vector<int> make_code;           // per vehicle
    std::vector<int> segment_code;        // per vehicle

    // Design: X[i][j][k] = hh_factor[i*K+k] * veh_factor[j*K+k]. Columns are
    // the formula terms followed by make dummies (reference omitted) and
    // segment dummies (reference omitted).
    size_t K = 0;
    std::vector<std::string> gamma_names;
    std::vector<double> hh_factor;   // N x K
    std::vector<double> veh_factor;  // J x K
    bool weights_supplied = false;

    size_t n() const { return households.size(); }
    size_t j() const { return vehicles.size(); }
    double x(size_t i, size_t jj, size_t k) const {
        return hh_factor[i * K + k] * veh_factor[jj * K + k];
    }
    double total_weight() const;
    // Weighted choice share of each vehicle, summing to 1.
    std::vector<double> weighted_choice_shares() const;
};

// Validates rows, sorts into canonical order (vehicles by model_id,
// households by household_id), derives annual rents, operating costs, weights
// and the design factors. Throws ValidationError with itemized messages.
PreparedDataset build_dataset(std::vector<VehicleRow> vehicles,
                              std::vector<HouseholdRow> households,
                              MarketConfig config);

PreparedDataset load_dataset(const std::string& vehicles_csv,
                             const std::string& households_csv,
                             const MarketConfig& config);

// Writes the raw tables back out (weights included) such that reloading
// reproduces every derived quantity bit-for-bit.
void save_dataset(const PreparedDataset& ds,
                  const std::string& vehicles_csv,
                  const std::string& households_csv);

} // namespace dclogit
