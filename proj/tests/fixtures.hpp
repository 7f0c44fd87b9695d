#pragma once

// Hand-sized market fixtures shared by the unit suites. Values are chosen so
// every derived quantity (rents, operating costs, design columns) is easy to
// recompute by hand.

#include "dclogit/config.hpp"
#include "dclogit/data.hpp"

#include <vector>

namespace fixtures {

inline dclogit::MarketConfig tiny_config(bool ascs = false) {
    dclogit::MarketConfig cfg;
    cfg.fuel_price = 6.0;
    cfg.interest_rate = 0.10;
    cfg.car_life_years = 10.0;
    cfg.use_ascs = ascs;
    cfg.usd_conversion = 1.0;
    cfg.currency_unit = "price units";
    cfg.scalings["age"] = 100.0;
    cfg.formula.push_back(dclogit::parse_formula_term("age"));
    cfg.formula.push_back(dclogit::parse_formula_term("family_size*engine_displacement"));
    return cfg;
}

inline std::vector<dclogit::VehicleRow> tiny_vehicles() {
    using dclogit::VehicleRow;
    VehicleRow a;
    a.model_id = "v1";
    a.make = "alpha";
    a.segment = "small";
    a.retail_price = 0.4;
    a.fuel_economy = 18.0;
    a.engine_displacement = 1.0;
    a.sales_count = 500;
    VehicleRow b;
    b.model_id = "v2";
    b.make = "alpha";
    b.segment = "big";
    b.retail_price = 0.9;
    b.fuel_economy = 14.0;
    b.engine_displacement = 1.6;
    b.sales_count = 300;
    VehicleRow c;
    c.model_id = "v3";
    c.make = "beta";
    c.segment = "big";
    c.retail_price = 1.5;
    c.fuel_economy = 11.0;
    c.engine_displacement = 2.2;
    c.sales_count = 200;
    return {a, b, c};
}

inline std::vector<dclogit::HouseholdRow> tiny_households() {
    using dclogit::HouseholdRow;
    auto mk = [](const char* id, double income, double age, double female, double n_cars,
                 double family_size, const char* chosen, double km) {
        HouseholdRow h;
        h.household_id = id;
        h.income = income;
        h.age = age;
        h.female = female;
        h.n_cars = n_cars;
        h.family_size = family_size;
        h.chosen_model_id = chosen;
        h.annual_km = km;
        return h;
    };
    return {
        mk("h1", 0.8, 34, 0, 0, 3, "v1", 1.10),
        mk("h2", 1.2, 45, 1, 1, 4, "v1", 0.85),
        mk("h3", 1.9, 29, 0, 1, 5, "v2", 1.45),
        mk("h4", 2.6, 52, 1, 2, 2, "v3", 1.90),
        mk("h5", 1.1, 61, 0, 0, 6, "v2", 0.70),
    };
}

inline dclogit::PreparedDataset tiny_dataset(bool ascs = false) {
    return dclogit::build_dataset(tiny_vehicles(), tiny_households(), tiny_config(ascs));
}

}  // namespace fixtures
