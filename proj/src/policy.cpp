#include "dclogit/policy.hpp"

#include "dclogit/errors.hpp"
#include "dclogit/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace dclogit {

Scenario baseline_scenario(const PreparedDataset& ds) {
    Scenario sc;
    sc.annual_rent = ds.annual_rent;
    sc.op_cost = ds.op_cost;
    sc.fuel_economy.resize(ds.j());
    for (size_t j = 0; j < ds.j(); ++j) sc.fuel_economy[j] = ds.vehicles[j].fuel_economy;
    sc.income.resize(ds.n());
    for (size_t i = 0; i < ds.n(); ++i) sc.income[i] = ds.households[i].income;
    return sc;
}

FleetState simulate_fleet(const Theta& theta, const PreparedDataset& ds,
                          const DrawSet& draws, const Scenario& sc, int threads) {
    const size_t N = ds.n();
    const size_t J = ds.j();
    const size_t K = ds.K;
    const size_t R = draws.r;
    if (theta.gamma.size() != K) throw DomainError("simulate_fleet: gamma size mismatch");
    if (draws.n != N) throw DomainError("simulate_fleet: draw set does not match dataset");
    if (sc.annual_rent.size() != J || sc.op_cost.size() != J || sc.fuel_economy.size() != J ||
        sc.income.size() != N)
        throw DomainError("simulate_fleet: scenario dimensions do not match dataset");
    if (!(theta.scale_mu > 0)) throw DomainError("simulate_fleet: scale_mu must be > 0");
    if (theta.sd_eta < 0) throw DomainError("simulate_fleet: sd_eta must be >= 0");

    constexpr size_t kBlock = 256;
    const size_t n_blocks = (N + kBlock - 1) / kBlock;

    struct BlockAcc {
        std::vector<double> share, usage;
        long clamps = 0;
    };
    std::vector<BlockAcc> blocks(n_blocks);

    parallel_for(n_blocks, threads, [&](size_t b) {
        BlockAcc& acc = blocks[b];
        acc.share.assign(J, 0.0);
        acc.usage.assign(J, 0.0);
        NumericFlags flags;
        std::vector<double> gx(J), u(J), probs(J), psum(J), kmsum(J);
        const size_t lo = b * kBlock, hi = std::min(N, lo + kBlock);
        for (size_t i = lo; i < hi; ++i) {
            const double* hhf = &ds.hh_factor[i * K];
            for (size_t j = 0; j < J; ++j) {
                double a = 0.0;
                const double* vf = &ds.veh_factor[j * K];
                for (size_t k = 0; k < K; ++k) a += theta.gamma[k] * hhf[k] * vf[k];
                gx[j] = a;
            }
            const double y = sc.income[i];
            std::fill(psum.begin(), psum.end(), 0.0);
            std::fill(kmsum.begin(), kmsum.end(), 0.0);
            for (size_t rep = 0; rep < R; ++rep) {
                const double beta = std::exp(theta.mu_beta + theta.sd_beta * draws.at(i, rep, 0));
                const double alpha = -std::exp(theta.mu_alpha + theta.sd_alpha * draws.at(i, rep, 1));
                const double eta = theta.sd_eta * draws.at(i, rep, 2);
                for (size_t j = 0; j < J; ++j)
                    u[j] = systematic_utility(beta, alpha, eta, y - sc.annual_rent[j], gx[j],
                                              sc.op_cost[j], &flags);
                choice_probabilities(u, theta.scale_mu, probs);
                for (size_t j = 0; j < J; ++j) {
                    psum[j] += probs[j];
                    kmsum[j] += expected_vkt(beta, alpha, y - sc.annual_rent[j], gx[j],
                                             sc.op_cost[j], theta.sd_eta, &flags);
                }
            }
            const double w = ds.weight[i];
            const double invr = 1.0 / static_cast<double>(R);
            for (size_t j = 0; j < J; ++j) {
                const double pbar = psum[j] * invr;
                const double kmbar = kmsum[j] * invr;
                acc.share[j] += w * pbar;
                acc.usage[j] += w * pbar * kmbar;
            }
        }
        acc.clamps = flags.clamp_count;
    });

    FleetState st;
    st.share_mass.assign(J, 0.0);
    st.usage.assign(J, 0.0);
    for (size_t b = 0; b < n_blocks; ++b) {
        for (size_t j = 0; j < J; ++j) {
            st.share_mass[j] += blocks[b].share[j];
            st.usage[j] += blocks[b].usage[j];
        }
        st.flags.clamp_count += blocks[b].clamps;
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

FleetState baseline_fleet_state(const Theta& theta, const PreparedDataset& ds,
                                const DrawSet& draws, int threads) {
    return simulate_fleet(theta, ds, draws, baseline_scenario(ds), threads);
}

double short_run_elasticity_from_means(const Theta& theta, double mean_exposure,
                                       ShockKind kind) {
    if (!(mean_exposure > 0))
        throw DomainError("short_run_elasticity_from_means: mean exposure must be > 0");
    return kind == ShockKind::FuelPrice ? theta.mean_alpha() * mean_exposure
                                        : theta.mean_beta() * mean_exposure;
}

double short_run_vkt_elasticity(const Theta& theta, const PreparedDataset& ds,
                                ShockKind kind) {
    if (kind == ShockKind::FuelPrice) {
        double sales = 0.0, pcost = 0.0;
        for (size_t j = 0; j < ds.j(); ++j) {
            sales += ds.vehicles[j].sales_count;
            pcost += ds.vehicles[j].sales_count * ds.op_cost[j];
        }
        if (!(sales > 0)) throw DomainError("short_run_vkt_elasticity: no sales mass");
        return short_run_elasticity_from_means(theta, pcost / sales, kind);
    }
    double w = 0.0, y = 0.0;
    for (size_t i = 0; i < ds.n(); ++i) {
        w += ds.weight[i];
        y += ds.weight[i] * ds.households[i].income;
    }
    return short_run_elasticity_from_means(theta, y / w, kind);
}

namespace {

double arc(double post, double base, double shock) {
    const double diff = post - base;
    if (diff == 0.0) return 0.0;
    return diff / base / shock;
}

// Fuel consumption with per-model usage frozen at the baseline level while
// shares and fuel economies take their post-shock values:
//   F = sum_j share'_j * mean_vkt_base_j / fe'_j.
double fuel_frozen_usage(const FleetState& post, const FleetState& base,
                         const std::vector<double>& post_fe) {
    double f = 0.0;
    for (size_t j = 0; j < post.share_mass.size(); ++j)
        f += post.share_mass[j] * base.mean_vkt[j] / post_fe[j];
    return f;
}

} // namespace

ElasticityReport long_run_elasticity(const Theta& theta, const PreparedDataset& ds,
                                     const DrawSet& draws, ShockKind kind,
                                     double shock, int threads) {
    Scenario base_sc = baseline_scenario(ds);
    Scenario post_sc = base_sc;
    if (kind == ShockKind::FuelPrice) {
        for (double& p : post_sc.op_cost) p *= 1.0 + shock;
    } else {
        for (double& y : post_sc.income) y *= 1.0 + shock;
    }
    FleetState base = simulate_fleet(theta, ds, draws, base_sc, threads);
    FleetState post = simulate_fleet(theta, ds, draws, post_sc, threads);

    ElasticityReport rep;
    rep.shock = shock;
    rep.elasticity = arc(post.total_fuel, base.total_fuel, shock);
    rep.vkt_elasticity = arc(post.total_vkt, base.total_vkt, shock);
    rep.elasticity_no_rebound =
        arc(fuel_frozen_usage(post, base, post_sc.fuel_economy), base.total_fuel, shock);
    return rep;
}

ElasticityReport segment_elasticity(const Theta& theta, const PreparedDataset& ds,
                                    const DrawSet& draws, const std::string& segment,
                                    SegmentShock kind, double shock, int threads) {
    const size_t J = ds.j();
    std::vector<size_t> members;
    for (size_t j = 0; j < J; ++j)
        if (ds.vehicles[j].segment == segment) members.push_back(j);
    if (members.empty())
        throw ValidationError("segment_elasticity: unknown segment '" + segment + "'");

    Scenario base_sc = baseline_scenario(ds);
    Scenario post_sc = base_sc;
    for (size_t j : members) {
        if (kind == SegmentShock::RetailPrice) {
            post_sc.annual_rent[j] = annualize_price(ds.vehicles[j].retail_price * (1.0 + shock),
                                                     ds.config.interest_rate,
                                                     ds.config.car_life_years);
        } else {
            post_sc.fuel_economy[j] = ds.vehicles[j].fuel_economy * (1.0 + shock);
            post_sc.op_cost[j] = operating_cost(ds.config.fuel_price, post_sc.fuel_economy[j]);
        }
    }
    FleetState base = simulate_fleet(theta, ds, draws, base_sc, threads);
    FleetState post = simulate_fleet(theta, ds, draws, post_sc, threads);

    double base_share = 0.0, post_share = 0.0;
    double base_fuel = 0.0, post_fuel = 0.0, post_fuel_frozen = 0.0;
    double base_vkt = 0.0, post_vkt = 0.0;
    for (size_t j : members) {
        base_share += base.share[j];
        post_share += post.share[j];
        base_fuel += base.fuel[j];
        post_fuel += post.fuel[j];
        post_fuel_frozen += post.share_mass[j] * base.mean_vkt[j] / post_sc.fuel_economy[j];
        base_vkt += base.usage[j];
        post_vkt += post.usage[j];
    }
    ElasticityReport rep;
    rep.shock = shock;
    rep.elasticity = arc(post_fuel, base_fuel, shock);
    rep.elasticity_no_rebound = arc(post_fuel_frozen, base_fuel, shock);
    rep.vkt_elasticity = arc(post_vkt, base_vkt, shock);
    rep.share_elasticity = arc(post_share, base_share, shock);
    return rep;
}

double rebound(double e_with, double e_without) {
    if (e_without == 0.0) throw DomainError("rebound: baseline elasticity is zero");
    return 1.0 - e_with / e_without;
}

} // namespace dclogit
