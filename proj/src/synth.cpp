#include "dclogit/synth.hpp"

#include "dclogit/choice.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/errors.hpp"
#include "dclogit/rand.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

namespace dclogit {

namespace {

double standard_normal(std::mt19937_64& g) {
    double u;
    do { u = rng::uniform01(g); } while (u <= 0.0);
    return to_standard_normal(u);
}

double open_uniform(std::mt19937_64& g) {
    double u;
    do { u = rng::uniform01(g); } while (u <= 0.0);
    return u;
}

// Substream namespace for the choice pass, disjoint from the covariate pass.
constexpr uint64_t kChoiceStream = 1ULL << 32;

} // namespace

SyntheticResult generate(const SyntheticSpec& spec) {
    const size_t n = spec.n_households;
    if (n == 0) throw ValidationError("synth: n_households must be > 0");
    if (spec.vehicles.empty()) throw ValidationError("synth: no vehicles");
    if (spec.sd_beta < 0 || spec.sd_alpha < 0 || spec.sd_eta < 0)
        throw ValidationError("synth: mixing sds must be >= 0");
    if (!(spec.scale_mu > 0)) throw ValidationError("synth: scale_mu must be > 0");
    if (!(spec.income_log_sd >= 0)) throw ValidationError("synth: income_log_sd must be >= 0");

    const int width = static_cast<int>(std::to_string(n).size());
    std::vector<HouseholdRow> hh(n);
    for (size_t i = 0; i < n; ++i) {
        std::mt19937_64 g(rng::substream(spec.seed, i));
        auto& h = hh[i];
        std::ostringstream id;
        id << "h" << std::setw(width) << std::setfill('0') << (i + 1);
        h.household_id = id.str();
        h.income = std::exp(spec.income_log_mean + spec.income_log_sd * standard_normal(g));
        h.age = 20.0 + static_cast<double>(rng::below(g, 51));
        h.female = rng::uniform01(g) < 0.5 ? 1.0 : 0.0;
        h.n_cars = static_cast<double>(rng::below(g, 3));
        h.family_size = 1.0 + static_cast<double>(rng::below(g, 6));
        h.chosen_model_id = spec.vehicles.front().model_id;
        h.annual_km = 1.0;  // placeholder until the choice pass runs
    }

    // First build pins down the design columns, rents and operating costs.
    std::vector<VehicleRow> veh = spec.vehicles;
    for (auto& v : veh) v.sales_count = 1.0;
    PreparedDataset base = build_dataset(veh, hh, spec.config);

    Theta truth;
    truth.mu_beta = spec.mu_beta;
    truth.sd_beta = spec.sd_beta;
    truth.mu_alpha = spec.mu_alpha;
    truth.sd_alpha = spec.sd_alpha;
    truth.sd_eta = spec.sd_eta;
    truth.scale_mu = spec.scale_mu;
    truth.gamma.resize(base.K);
    std::set<std::string> known;
    for (size_t k = 0; k < base.K; ++k) {
        known.insert(base.gamma_names[k]);
        auto it = spec.gamma.find(base.gamma_names[k]);
        if (it == spec.gamma.end())
            throw ValidationError("synth: no coefficient for design column '" +
                                  base.gamma_names[k] + "'");
        truth.gamma[k] = it->second;
    }
    for (const auto& [name, value] : spec.gamma) {
        (void)value;
        if (!known.count(name))
            throw ValidationError("synth: coefficient '" + name +
                                  "' matches no design column");
    }

    std::map<std::string, size_t> gen_index;
    for (size_t i = 0; i < n; ++i) gen_index[hh[i].household_id] = i;

    const size_t J = base.j();
    std::vector<double> gx(J);
    std::map<std::string, double> count;
    for (size_t si = 0; si < n; ++si) {
        const size_t gi = gen_index.at(base.households[si].household_id);
        std::mt19937_64 g(rng::substream(spec.seed, kChoiceStream + gi));
        const double beta = std::exp(spec.mu_beta + spec.sd_beta * standard_normal(g));
        const double alpha = -std::exp(spec.mu_alpha + spec.sd_alpha * standard_normal(g));
        const double eta = spec.sd_eta * standard_normal(g);
        const double y = base.households[si].income;

        size_t best = 0;
        double best_u = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < J; ++j) {
            double a = 0.0;
            for (size_t k = 0; k < base.K; ++k) a += truth.gamma[k] * base.x(si, j, k);
            gx[j] = a;
            const double u =
                systematic_utility(beta, alpha, eta, y - base.annual_rent[j], a, base.op_cost[j]) -
                spec.scale_mu * std::log(-std::log(open_uniform(g)));
            if (u > best_u) { best_u = u; best = j; }
        }
        auto& h = hh[gi];
        h.chosen_model_id = base.vehicles[best].model_id;
        h.annual_km = std::max(
            std::exp(log_vkt(beta, alpha, eta, y - base.annual_rent[best], gx[best],
                             base.op_cost[best])),
            1e-300);
        count[h.chosen_model_id] += 1.0;
    }

    veh = spec.vehicles;
    for (auto& v : veh) {
        auto it = count.find(v.model_id);
        v.sales_count = it == count.end() ? 0.0 : it->second;
    }
    SyntheticResult out;
    out.data = build_dataset(std::move(veh), std::move(hh), spec.config);
    out.truth = std::move(truth);
    return out;
}

SyntheticSpec demo_spec(std::size_t n_households, std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n_households = n_households;
    spec.seed = seed;

    MarketConfig cfg;
    cfg.fuel_price = 6.0;
    cfg.interest_rate = 0.085;
    cfg.car_life_years = 18.0;
    cfg.use_ascs = true;
    cfg.usd_conversion = 1.0;
    cfg.currency_unit = "price units";
    cfg.scalings["age"] = 100.0;
    for (const char* term : {"age", "female", "n_cars", "family_size",
                             "family_size*engine_displacement"})
        cfg.formula.push_back(parse_formula_term(term));
    spec.config = std::move(cfg);

    auto car = [](std::string id, std::string make, std::string seg, double price,
                  double fe, double disp) {
        VehicleRow v;
        v.model_id = std::move(id);
        v.make = std::move(make);
        v.segment = std::move(seg);
        v.retail_price = price;
        v.fuel_economy = fe;
        v.engine_displacement = disp;
        return v;
    };
    spec.vehicles = {
        car("m01", "make_a", "compact", 0.35, 18.0, 0.8),
        car("m02", "make_a", "compact", 0.45, 17.0, 1.0),
        car("m03", "make_b", "compact", 0.55, 16.5, 1.0),
        car("m04", "make_b", "midsize", 0.80, 15.0, 1.2),
        car("m05", "make_a", "midsize", 0.95, 14.0, 1.4),
        car("m06", "make_c", "midsize", 1.20, 13.5, 1.5),
        car("m07", "make_b", "suv", 1.60, 12.5, 1.8),
        car("m08", "make_c", "suv", 2.00, 11.5, 2.2),
        car("m09", "make_c", "suv", 2.60, 10.5, 2.5),
        car("m10", "make_a", "suv", 3.00, 10.0, 2.8),
    };

    spec.gamma = {
        {"age", -0.33},
        {"female", -0.13},
        {"n_cars", 0.09},
        {"family_size", 0.035},
        {"family_size*engine_displacement", 0.05},
        {"asc_make:make_b", 0.25},
        {"asc_make:make_c", -0.20},
        {"asc_segment:midsize", 0.30},
        {"asc_segment:suv", -0.35},
    };
    spec.mu_beta = -1.0;
    spec.sd_beta = 0.4;
    spec.mu_alpha = -1.6;
    spec.sd_alpha = 0.9;
    spec.sd_eta = 0.5;
    spec.scale_mu = 2.0;
    spec.income_log_mean = 0.0;
    spec.income_log_sd = 0.65;
    return spec;
}

GaussHermite gauss_hermite(int n) {
    if (n < 1) throw DomainError("gauss_hermite: need at least one node");
    // Golub-Welsch on the symmetric Jacobi matrix of the Hermite recurrence;
    // off-diagonal k is sqrt(k/2).
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        const double b = std::sqrt(0.5 * k);
        jac(k, k - 1) = b;
        jac(k - 1, k) = b;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
    if (es.info() != Eigen::Success) throw DomainError("gauss_hermite: eigensolve failed");
    GaussHermite gh;
    gh.node.resize(n);
    gh.weight.resize(n);
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
        const double v0 = es.eigenvectors()(0, k);
        gh.node[k] = std::sqrt(2.0) * es.eigenvalues()(k);  // physicists' root -> N(0,1)
        gh.weight[k] = v0 * v0;
        total += gh.weight[k];
    }
    for (double& w : gh.weight) w /= total;
    return gh;
}

double quadrature_loglik(const Theta& theta, const PreparedDataset& ds, int nodes_per_dim) {
    const size_t N = ds.n();
    const size_t J = ds.j();
    if (N > 100 || J > 6)
        throw ValidationError("quadrature_loglik: restricted to at most 100 households "
                              "and 6 models");
    if (nodes_per_dim < 31)
        throw ValidationError("quadrature_loglik: need at least 31 nodes per dimension");
    if (theta.gamma.size() != ds.K) throw DomainError("quadrature_loglik: gamma size mismatch");
    if (!(theta.sd_eta > 0)) throw DomainError("quadrature_loglik: sd_eta must be > 0");
    if (!(theta.scale_mu > 0)) throw DomainError("quadrature_loglik: scale_mu must be > 0");
    if (theta.sd_beta < 0 || theta.sd_alpha < 0)
        throw DomainError("quadrature_loglik: coefficient sds must be >= 0");

    const GaussHermite gh = gauss_hermite(nodes_per_dim);
    const double sd2 = theta.sd_eta * theta.sd_eta;
    const double phi_norm = 1.0 / (std::sqrt(2.0 * M_PI) * theta.sd_eta);

    std::vector<double> gx(J), v(J);
    double total = 0.0;
    for (size_t i = 0; i < N; ++i) {
        for (size_t j = 0; j < J; ++j) {
            double a = 0.0;
            for (size_t k = 0; k < ds.K; ++k) a += theta.gamma[k] * ds.x(i, j, k);
            gx[j] = a;
        }
        const double y = ds.households[i].income;
        const size_t jstar = static_cast<size_t>(ds.chosen[i]);
        double li = 0.0;
        for (int a = 0; a < nodes_per_dim; ++a) {
            const double beta = std::exp(theta.mu_beta + theta.sd_beta * gh.node[a]);
            for (int b = 0; b < nodes_per_dim; ++b) {
                const double alpha = -std::exp(theta.mu_alpha + theta.sd_alpha * gh.node[b]);
                const double eta = ds.log_km[i] - (beta * (y - ds.annual_rent[jstar]) +
                                                   gx[jstar] + alpha * ds.op_cost[jstar]);
                double vmax = -std::numeric_limits<double>::infinity();
                for (size_t j = 0; j < J; ++j) {
                    const double u =
                        -(1.0 / beta) *
                            std::exp(-beta * (y - ds.annual_rent[j]) - gx[j] - eta) -
                        (1.0 / alpha) * std::exp(alpha * ds.op_cost[j]);
                    v[j] = u / theta.scale_mu;
                    vmax = std::max(vmax, v[j]);
                }
                double z = 0.0;
                for (size_t j = 0; j < J; ++j) z += std::exp(v[j] - vmax);
                const double pj = std::exp(v[jstar] - vmax) / z;
                const double phi = phi_norm * std::exp(-0.5 * eta * eta / sd2);
                li += gh.weight[a] * gh.weight[b] * pj * phi;
            }
        }
        total += ds.weight[i] * std::log(li);
    }
    return total;
}

FleetState closed_form_fleet(const Theta& theta, const PreparedDataset& ds, const Scenario& sc) {
    if (theta.sd_beta != 0.0 || theta.sd_alpha != 0.0 || theta.sd_eta != 0.0)
        throw DomainError("closed_form_fleet: needs fully degenerate mixing "
                          "(sd_beta = sd_alpha = sd_eta = 0)");
    if (theta.gamma.size() != ds.K) throw DomainError("closed_form_fleet: gamma size mismatch");
    if (!(theta.scale_mu > 0)) throw DomainError("closed_form_fleet: scale_mu must be > 0");
    const size_t N = ds.n();
    const size_t J = ds.j();
    if (sc.annual_rent.size() != J || sc.op_cost.size() != J || sc.fuel_economy.size() != J ||
        sc.income.size() != N)
        throw DomainError("closed_form_fleet: scenario dimensions do not match dataset");

    const double beta = std::exp(theta.mu_beta);
    const double alpha = -std::exp(theta.mu_alpha);

    FleetState st;
    st.share_mass.assign(J, 0.0);
    st.usage.assign(J, 0.0);
    std::vector<double> gx(J), v(J);
    for (size_t i = 0; i < N; ++i) {
        const double y = sc.income[i];
        double vmax = -std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < J; ++j) {
            double a = 0.0;
            for (size_t k = 0; k < ds.K; ++k) a += theta.gamma[k] * ds.x(i, j, k);
            gx[j] = a;
            const double u = -(1.0 / beta) *
                                 std::exp(-beta * (y - sc.annual_rent[j]) - gx[j]) -
                             (1.0 / alpha) * std::exp(alpha * sc.op_cost[j]);
            v[j] = u / theta.scale_mu;
            vmax = std::max(vmax, v[j]);
        }
        double z = 0.0;
        for (size_t j = 0; j < J; ++j) z += std::exp(v[j] - vmax);
        const double w = ds.weight[i];
        for (size_t j = 0; j < J; ++j) {
            const double pj = std::exp(v[j] - vmax) / z;
            const double km = std::exp(beta * (y - sc.annual_rent[j]) + gx[j] +
                                       alpha * sc.op_cost[j]);
            st.share_mass[j] += w * pj;
            st.usage[j] += w * pj * km;
        }
    }
    st.total_weight = ds.total_weight();
    st.share.resize(J);
    st.mean_vkt.resize(J);
    st.fuel.resize(J);
    double mass = 0.0, fe_mass = 0.0;
    for (size_t j = 0; j < J; ++j) mass += st.share_mass[j];
    for (size_t j = 0; j < J; ++j) {
        st.share[j] = st.share_mass[j] / mass;
        st.mean_vkt[j] = st.share_mass[j] > 0 ? st.usage[j] / st.share_mass[j] : 0.0;
        st.fuel[j] = st.usage[j] / sc.fuel_economy[j];
        st.total_vkt += st.usage[j];
        st.total_fuel += st.fuel[j];
        fe_mass += st.share_mass[j] * sc.fuel_economy[j];
    }
    st.fleet_fuel_economy = fe_mass / mass;
    return st;
}

} // namespace dclogit
