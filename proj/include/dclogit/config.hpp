#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dclogit {

// One covariate term of the model formula. Terms are products of at most one
// household variable and one vehicle variable ("family_size*engine_displacement");
// a bare name is either side alone. Values are divided by the configured
// scaling before entering the design.
struct FormulaTerm {
    std::string name;                       // as written in the config
    std::optional<std::string> household;   // household column, if any
    std::optional<std::string> vehicle;     // vehicle column, if any
};

struct MarketConfig {
    double fuel_price = 0.0;       // currency per litre
    double interest_rate = 0.0;    // annual, fraction
    double car_life_years = 0.0;
    bool use_ascs = true;          // make + segment dummies in the design
    double usd_conversion = 0.0;   // market currency units per USD; 0 = unset
    std::map<std::string, double> scalings;  // covariate -> divisor
    std::vector<FormulaTerm> formula;
    std::string currency_unit;     // informational label
};

// Parses the TOML-like market config: `key = value` lines, [section] tables
// (scalings, formula), "#" comments. Strings are double quoted; arrays hold
// quoted strings.
MarketConfig parse_market_config(const std::string& text, const std::string& origin);
MarketConfig load_market_config(const std::string& path);

std::string render_market_config(const MarketConfig& cfg);

FormulaTerm parse_formula_term(const std::string& spec);

} // namespace dclogit
