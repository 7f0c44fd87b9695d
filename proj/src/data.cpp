#include "dclogit/data.hpp"

#include "dclogit/csv.hpp"
#include "dclogit/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace dclogit {

double annualize_price(double price, double interest_rate, double life_years) {
    if (!(price > 0)) throw DomainError("annualize_price: price must be > 0");
    if (!(interest_rate > 0)) throw DomainError("annualize_price: interest rate must be > 0");
    if (!(life_years > 0)) throw DomainError("annualize_price: life must be > 0");
    return price * interest_rate / (1.0 - std::pow(1.0 + interest_rate, -life_years));
}

double operating_cost(double fuel_price, double fuel_economy) {
    if (!(fuel_price > 0)) throw DomainError("operating_cost: fuel price must be > 0");
    if (!(fuel_economy > 0)) throw DomainError("operating_cost: fuel economy must be > 0");
    return fuel_price / fuel_economy;
}

std::vector<double> compute_choice_based_weights(const std::vector<int>& chosen,
                                                 const std::vector<double>& sales_count) {
    const size_t n = chosen.size();
    const size_t j = sales_count.size();
    if (n == 0) throw ValidationError("weights: no households");
    if (j == 0) throw ValidationError("weights: no vehicles");

    std::vector<double> sample_count(j, 0.0);
    for (int c : chosen) {
        if (c < 0 || static_cast<size_t>(c) >= j)
            throw ValidationError("weights: chosen index out of range");
        sample_count[c] += 1.0;
    }
    double total_sales = 0.0;
    for (double s : sales_count) {
        if (s < 0) throw ValidationError("weights: negative sales count");
        total_sales += s;
    }
    if (!(total_sales > 0)) throw ValidationError("weights: total sales is zero");

    std::vector<double> ratio(j, 0.0);
    for (size_t m = 0; m < j; ++m) {
        if (sample_count[m] == 0) continue;
        if (!(sales_count[m] > 0))
            throw ValidationError("weights: model with sample observations has zero sales");
        ratio[m] = (sales_count[m] / total_sales) / (sample_count[m] / static_cast<double>(n));
    }
    std::vector<double> w(n);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) { w[i] = ratio[chosen[i]]; sum += w[i]; }
    const double norm = static_cast<double>(n) / sum;
    for (double& wi : w) wi *= norm;
    return w;
}

double PreparedDataset::total_weight() const {
    double s = 0.0;
    for (double w : weight) s += w;
    return s;
}

std::vector<double> PreparedDataset::weighted_choice_shares() const {
    std::vector<double> share(j(), 0.0);
    for (size_t i = 0; i < n(); ++i) share[chosen[i]] += weight[i];
    const double tw = total_weight();
    for (double& s : share) s /= tw;
    return share;
}

namespace {

struct IssueList {
    std::vector<std::string> items;
    void add(const std::string& s) { items.push_back(s); }
    void raise_if_any(const std::string& what) const {
        if (items.empty()) return;
        std::ostringstream msg;
        msg << what << ": " << items.size() << " problem(s)";
        size_t shown = std::min<size_t>(items.size(), 20);
        for (size_t i = 0; i < shown; ++i) msg << "\n  " << items[i];
        if (shown < items.size()) msg << "\n  ... and " << (items.size() - shown) << " more";
        throw ValidationError(msg.str());
    }
};

double scaled(const MarketConfig& cfg, const std::string& var, double value) {
    auto it = cfg.scalings.find(var);
    return it == cfg.scalings.end() ? value : value / it->second;
}

double household_var(const HouseholdRow& h, const std::string& var) {
    if (var == "income") return h.income;
    if (var == "age") return h.age;
    if (var == "female") return h.female;
    if (var == "n_cars") return h.n_cars;
    if (var == "family_size") return h.family_size;
    throw ValidationError("unknown household variable '" + var + "'");
}

double vehicle_var(const VehicleRow& v, const std::string& var, IssueList& issues) {
    if (var == "retail_price") return v.retail_price;
    if (var == "fuel_economy") return v.fuel_economy;
    if (var == "engine_displacement") return v.engine_displacement;
    if (var == "volume") {
        if (!v.volume) { issues.add("vehicle " + v.model_id + ": formula needs volume but it is missing"); return 0.0; }
        return *v.volume;
    }
    if (var == "kerb_weight") {
        if (!v.kerb_weight) { issues.add("vehicle " + v.model_id + ": formula needs kerb_weight but it is missing"); return 0.0; }
        return *v.kerb_weight;
    }
    throw ValidationError("unknown vehicle variable '" + var + "'");
}

} // namespace

PreparedDataset build_dataset(std::vector<VehicleRow> vehicles,
                              std::vector<HouseholdRow> households,
                              MarketConfig config) {
    IssueList issues;
    if (vehicles.empty()) issues.add("no vehicles");
    if (households.empty()) issues.add("no households");
    issues.raise_if_any("dataset");

    std::sort(vehicles.begin(), vehicles.end(),
              [](const VehicleRow& a, const VehicleRow& b) { return a.model_id < b.model_id; });
    std::sort(households.begin(), households.end(),
              [](const HouseholdRow& a, const HouseholdRow& b) { return a.household_id < b.household_id; });

    std::map<std::string, int> model_index;
    for (size_t m = 0; m < vehicles.size(); ++m) {
        const auto& v = vehicles[m];
        if (v.model_id.empty()) issues.add("vehicle row " + std::to_string(m + 1) + ": empty model_id");
        if (!model_index.emplace(v.model_id, static_cast<int>(m)).second)
            issues.add("duplicate model_id '" + v.model_id + "'");
        if (!(v.retail_price > 0)) issues.add("vehicle " + v.model_id + ": retail_price must be > 0");
        if (!(v.fuel_economy > 0)) issues.add("vehicle " + v.model_id + ": fuel_economy must be > 0");
        if (v.sales_count < 0) issues.add("vehicle " + v.model_id + ": negative sales_count");
        if (v.make.empty()) issues.add("vehicle " + v.model_id + ": empty make");
        if (v.segment.empty()) issues.add("vehicle " + v.model_id + ": empty segment");
    }
    issues.raise_if_any("vehicles");

    PreparedDataset ds;
    ds.config = std::move(config);
    ds.vehicles = std::move(vehicles);
    ds.households = std::move(households);

    const size_t n = ds.households.size();
    const size_t j = ds.vehicles.size();

    ds.annual_rent.resize(j);
    ds.op_cost.resize(j);
    for (size_t m = 0; m < j; ++m) {
        ds.annual_rent[m] = annualize_price(ds.vehicles[m].retail_price,
                                            ds.config.interest_rate, ds.config.car_life_years);
        ds.op_cost[m] = operating_cost(ds.config.fuel_price, ds.vehicles[m].fuel_economy);
    }

    std::set<std::string> hh_ids;
    ds.chosen.resize(n);
    ds.log_km.resize(n);
    bool any_weight = false, all_weight = true;
    for (size_t i = 0; i < n; ++i) {
        const auto& h = ds.households[i];
        if (h.household_id.empty()) issues.add("household row " + std::to_string(i + 1) + ": empty household_id");
        if (!hh_ids.insert(h.household_id).second)
            issues.add("duplicate household_id '" + h.household_id + "'");
        if (!(h.income > 0)) issues.add("household " + h.household_id + ": income must be > 0");
        if (!(h.annual_km > 0)) issues.add("household " + h.household_id + ": annual_km must be > 0");
        auto it = model_index.find(h.chosen_model_id);
        if (it == model_index.end()) {
            issues.add("household " + h.household_id + ": chosen_model_id '" + h.chosen_model_id + "' not in vehicle table");
            ds.chosen[i] = 0;
        } else {
            ds.chosen[i] = it->second;
        }
        if (h.weight) {
            any_weight = true;
            if (!(*h.weight > 0)) issues.add("household " + h.household_id + ": weight must be > 0");
        } else {
            all_weight = false;
        }
        ds.log_km[i] = h.annual_km > 0 ? std::log(h.annual_km) : 0.0;
    }
    if (any_weight && !all_weight)
        issues.add("weight column must be filled for every household or absent entirely");
    issues.raise_if_any("households");

    if (any_weight) {
        ds.weights_supplied = true;
        ds.weight.resize(n);
        for (size_t i = 0; i < n; ++i) ds.weight[i] = *ds.households[i].weight;
    } else {
        std::vector<double> sales(j);
        for (size_t m = 0; m < j; ++m) sales[m] = ds.vehicles[m].sales_count;
        ds.weight = compute_choice_based_weights(ds.chosen, sales);
        for (size_t i = 0; i < n; ++i) ds.households[i].weight = ds.weight[i];
    }

    std::set<std::string> make_set, segment_set;
    for (const auto& v : ds.vehicles) { make_set.insert(v.make); segment_set.insert(v.segment); }
    ds.makes.assign(make_set.begin(), make_set.end());
    ds.segments.assign(segment_set.begin(), segment_set.end());
    ds.make_code.resize(j);
    ds.segment_code.resize(j);
    for (size_t m = 0; m < j; ++m) {
        ds.make_code[m] = static_cast<int>(std::lower_bound(ds.makes.begin(), ds.makes.end(), ds.vehicles[m].make) - ds.makes.begin());
        ds.segment_code[m] = static_cast<int>(std::lower_bound(ds.segments.begin(), ds.segments.end(), ds.vehicles[m].segment) - ds.segments.begin());
    }

    // Design columns: formula terms, then dummies with reference level 0 omitted.
    const size_t n_make_dummies = ds.config.use_ascs && ds.makes.size() > 1 ? ds.makes.size() - 1 : 0;
    const size_t n_seg_dummies = ds.config.use_ascs && ds.segments.size() > 1 ? ds.segments.size() - 1 : 0;
    ds.K = ds.config.formula.size() + n_make_dummies + n_seg_dummies;
    ds.gamma_names.clear();
    for (const auto& t : ds.config.formula) ds.gamma_names.push_back(t.name);
    for (size_t m = 1; m <= n_make_dummies; ++m) ds.gamma_names.push_back("asc_make:" + ds.makes[m]);
    for (size_t s = 1; s <= n_seg_dummies; ++s) ds.gamma_names.push_back("asc_segment:" + ds.segments[s]);

    ds.hh_factor.assign(n * ds.K, 1.0);
    ds.veh_factor.assign(j * ds.K, 1.0);
    for (size_t k = 0; k < ds.config.formula.size(); ++k) {
        const auto& t = ds.config.formula[k];
        if (t.household)
            for (size_t i = 0; i < n; ++i)
                ds.hh_factor[i * ds.K + k] = scaled(ds.config, *t.household, household_var(ds.households[i], *t.household));
        if (t.vehicle)
            for (size_t m = 0; m < j; ++m)
                ds.veh_factor[m * ds.K + k] = scaled(ds.config, *t.vehicle, vehicle_var(ds.vehicles[m], *t.vehicle, issues));
    }
    for (size_t m = 0; m < j; ++m) {
        for (size_t d = 1; d <= n_make_dummies; ++d)
            ds.veh_factor[m * ds.K + ds.config.formula.size() + (d - 1)] =
                ds.make_code[m] == static_cast<int>(d) ? 1.0 : 0.0;
        for (size_t d = 1; d <= n_seg_dummies; ++d)
            ds.veh_factor[m * ds.K + ds.config.formula.size() + n_make_dummies + (d - 1)] =
                ds.segment_code[m] == static_cast<int>(d) ? 1.0 : 0.0;
    }
    issues.raise_if_any("design");
    return ds;
}

namespace {

double field_number(const csv::Table& t, size_t row, int col, const std::string& what, IssueList& issues) {
    const std::string& s = t.rows[row][col];
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        issues.add(what + " row " + std::to_string(row + 2) + ": bad number '" + s + "'");
        return 0.0;
    }
}

int require_column(const csv::Table& t, const std::string& name, const std::string& what, IssueList& issues) {
    int c = t.column(name);
    if (c < 0) issues.add(what + ": missing column '" + name + "'");
    return c;
}

} // namespace

PreparedDataset load_dataset(const std::string& vehicles_csv,
                             const std::string& households_csv,
                             const MarketConfig& config) {
    IssueList issues;
    csv::Table vt = csv::read_file(vehicles_csv);
    csv::Table ht = csv::read_file(households_csv);

    int v_id = require_column(vt, "model_id", "vehicles", issues);
    int v_make = require_column(vt, "make", "vehicles", issues);
    int v_seg = require_column(vt, "segment", "vehicles", issues);
    int v_price = require_column(vt, "retail_price", "vehicles", issues);
    int v_fe = require_column(vt, "fuel_economy", "vehicles", issues);
    int v_disp = require_column(vt, "engine_displacement", "vehicles", issues);
    int v_sales = require_column(vt, "sales_count", "vehicles", issues);
    int v_vol = vt.column("volume");
    int v_kerb = vt.column("kerb_weight");

    int h_id = require_column(ht, "household_id", "households", issues);
    int h_inc = require_column(ht, "income", "households", issues);
    int h_age = require_column(ht, "age", "households", issues);
    int h_fem = require_column(ht, "female", "households", issues);
    int h_ncars = require_column(ht, "n_cars", "households", issues);
    int h_fam = require_column(ht, "family_size", "households", issues);
    int h_chosen = require_column(ht, "chosen_model_id", "households", issues);
    int h_km = require_column(ht, "annual_km", "households", issues);
    int h_w = ht.column("weight");
    issues.raise_if_any("schema");

    std::vector<VehicleRow> vrows(vt.rows.size());
    for (size_t r = 0; r < vt.rows.size(); ++r) {
        VehicleRow& v = vrows[r];
        v.model_id = vt.rows[r][v_id];
        v.make = vt.rows[r][v_make];
        v.segment = vt.rows[r][v_seg];
        v.retail_price = field_number(vt, r, v_price, "vehicles", issues);
        v.fuel_economy = field_number(vt, r, v_fe, "vehicles", issues);
        v.engine_displacement = field_number(vt, r, v_disp, "vehicles", issues);
        v.sales_count = field_number(vt, r, v_sales, "vehicles", issues);
        if (v_vol >= 0 && !vt.rows[r][v_vol].empty()) v.volume = field_number(vt, r, v_vol, "vehicles", issues);
        if (v_kerb >= 0 && !vt.rows[r][v_kerb].empty()) v.kerb_weight = field_number(vt, r, v_kerb, "vehicles", issues);
    }
    std::vector<HouseholdRow> hrows(ht.rows.size());
    for (size_t r = 0; r < ht.rows.size(); ++r) {
        HouseholdRow& h = hrows[r];
        h.household_id = ht.rows[r][h_id];
        h.income = field_number(ht, r, h_inc, "households", issues);
        h.age = field_number(ht, r, h_age, "households", issues);
        h.female = field_number(ht, r, h_fem, "households", issues);
        h.n_cars = field_number(ht, r, h_ncars, "households", issues);
        h.family_size = field_number(ht, r, h_fam, "households", issues);
        h.chosen_model_id = ht.rows[r][h_chosen];
        h.annual_km = field_number(ht, r, h_km, "households", issues);
        if (h_w >= 0 && !ht.rows[r][h_w].empty()) h.weight = field_number(ht, r, h_w, "households", issues);
    }
    issues.raise_if_any("parse");
    return build_dataset(std::move(vrows), std::move(hrows), config);
}

void save_dataset(const PreparedDataset& ds,
                  const std::string& vehicles_csv,
                  const std::string& households_csv) {
    csv::Table vt;
    vt.header = {"model_id", "make", "segment", "retail_price", "fuel_economy",
                 "engine_displacement", "volume", "kerb_weight", "sales_count"};
    for (const auto& v : ds.vehicles) {
        vt.rows.push_back({v.model_id, v.make, v.segment,
                           csv::format_double(v.retail_price),
                           csv::format_double(v.fuel_economy),
                           csv::format_double(v.engine_displacement),
                           v.volume ? csv::format_double(*v.volume) : "",
                           v.kerb_weight ? csv::format_double(*v.kerb_weight) : "",
                           csv::format_double(v.sales_count)});
    }
    csv::write_file(vehicles_csv, vt);

    csv::Table ht;
    ht.header = {"household_id", "income", "age", "female", "n_cars", "family_size",
                 "chosen_model_id", "annual_km", "weight"};
    for (size_t i = 0; i < ds.households.size(); ++i) {
        const auto& h = ds.households[i];
        ht.rows.push_back({h.household_id,
                           csv::format_double(h.income),
                           csv::format_double(h.age),
                           csv::format_double(h.female),
                           csv::format_double(h.n_cars),
                           csv::format_double(h.family_size),
                           h.chosen_model_id,
                           csv::format_double(h.annual_km),
                           csv::format_double(ds.weight[i])});
    }
    csv::write_file(households_csv, ht);
}

} // namespace dclogit
