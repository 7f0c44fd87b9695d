#include "dclogit/config.hpp"

#include "dclogit/csv.hpp"
#include "dclogit/errors.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

namespace dclogit {

namespace {

constexpr std::array<const char*, 5> kHouseholdVars = {
    "income", "age", "female", "n_cars", "family_size"};
constexpr std::array<const char*, 5> kVehicleVars = {
    "retail_price", "fuel_economy", "engine_displacement", "volume", "kerb_weight"};

bool is_household_var(const std::string& s) {
    return std::find(kHouseholdVars.begin(), kHouseholdVars.end(), s) != kHouseholdVars.end();
}
bool is_vehicle_var(const std::string& s) {
    return std::find(kVehicleVars.begin(), kVehicleVars.end(), s) != kVehicleVars.end();
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& v, const std::string& where) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ValidationError(where + ": not a number: '" + v + "'");
    }
}

std::string unquote(const std::string& v, const std::string& where) {
    if (v.size() < 2 || v.front() != '"' || v.back() != '"')
        throw ValidationError(where + ": expected quoted string, got '" + v + "'");
    return v.substr(1, v.size() - 2);
}

std::vector<std::string> parse_string_array(const std::string& v, const std::string& where) {
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
        throw ValidationError(where + ": expected [ ... ] array");
    std::vector<std::string> out;
    std::string inner = v.substr(1, v.size() - 2);
    std::string item;
    std::istringstream in(inner);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(unquote(item, where));
    }
    return out;
}

} // namespace

FormulaTerm parse_formula_term(const std::string& spec) {
    FormulaTerm term;
    term.name = spec;
    std::vector<std::string> parts;
    std::string piece;
    std::istringstream in(spec);
    while (std::getline(in, piece, '*')) parts.push_back(trim(piece));
    if (parts.empty() || parts.size() > 2)
        throw ValidationError("formula term '" + spec + "': expected var or var*var");
    for (const auto& p : parts) {
        if (is_household_var(p)) {
            if (term.household)
                throw ValidationError("formula term '" + spec + "': two household variables");
            term.household = p;
        } else if (is_vehicle_var(p)) {
            if (term.vehicle)
                throw ValidationError("formula term '" + spec + "': two vehicle variables");
            term.vehicle = p;
        } else {
            throw ValidationError("formula term '" + spec + "': unknown variable '" + p + "'");
        }
    }
    return term;
}

MarketConfig parse_market_config(const std::string& text, const std::string& origin) {
    MarketConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    size_t lineno = 0;
    bool saw_fuel = false, saw_interest = false, saw_life = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string where = origin + ":" + std::to_string(lineno);
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ValidationError(where + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(where + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (section.empty()) {
            if (key == "fuel_price") { cfg.fuel_price = parse_number(val, where); saw_fuel = true; }
            else if (key == "interest_rate") { cfg.interest_rate = parse_number(val, where); saw_interest = true; }
            else if (key == "car_life_years") { cfg.car_life_years = parse_number(val, where); saw_life = true; }
            else if (key == "use_ascs") {
                if (val == "true") cfg.use_ascs = true;
                else if (val == "false") cfg.use_ascs = false;
                else throw ValidationError(where + ": use_ascs must be true or false");
            }
            else if (key == "usd_conversion") cfg.usd_conversion = parse_number(val, where);
            else if (key == "currency_unit") cfg.currency_unit = unquote(val, where);
            else throw ValidationError(where + ": unknown key '" + key + "'");
        } else if (section == "scalings") {
            double d = parse_number(val, where);
            if (!(d > 0)) throw ValidationError(where + ": scaling for '" + key + "' must be > 0");
            cfg.scalings[key] = d;
        } else if (section == "formula") {
            if (key != "terms") throw ValidationError(where + ": unknown formula key '" + key + "'");
            for (const auto& t : parse_string_array(val, where))
                cfg.formula.push_back(parse_formula_term(t));
        } else {
            throw ValidationError(where + ": unknown section '" + section + "'");
        }
    }
    std::string missing;
    if (!saw_fuel) missing += " fuel_price";
    if (!saw_interest) missing += " interest_rate";
    if (!saw_life) missing += " car_life_years";
    if (!missing.empty())
        throw ValidationError(origin + ": missing required keys:" + missing);
    if (!(cfg.fuel_price > 0)) throw ValidationError(origin + ": fuel_price must be > 0");
    if (!(cfg.interest_rate > 0)) throw ValidationError(origin + ": interest_rate must be > 0");
    if (!(cfg.car_life_years > 0)) throw ValidationError(origin + ": car_life_years must be > 0");
    return cfg;
}

MarketConfig load_market_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_market_config(buf.str(), path);
}

std::string render_market_config(const MarketConfig& cfg) {
    std::ostringstream out;
    out << "fuel_price = " << csv::format_double(cfg.fuel_price) << "\n";
    out << "interest_rate = " << csv::format_double(cfg.interest_rate) << "\n";
    out << "car_life_years = " << csv::format_double(cfg.car_life_years) << "\n";
    out << "use_ascs = " << (cfg.use_ascs ? "true" : "false") << "\n";
    if (cfg.usd_conversion > 0)
        out << "usd_conversion = " << csv::format_double(cfg.usd_conversion) << "\n";
    if (!cfg.currency_unit.empty())
        out << "currency_unit = \"" << cfg.currency_unit << "\"\n";
    if (!cfg.scalings.empty()) {
        out << "\n[scalings]\n";
        for (const auto& [k, v] : cfg.scalings)
            out << k << " = " << csv::format_double(v) << "\n";
    }
    if (!cfg.formula.empty()) {
        out << "\n[formula]\nterms = [";
        for (size_t i = 0; i < cfg.formula.size(); ++i) {
            if (i) out << ", ";
            out << '"' << cfg.formula[i].name << '"';
        }
        out << "]\n";
    }
    return out.str();
}

} // namespace dclogit
