#include "commands.hpp"

#include "dclogit/csv.hpp"
#include "dclogit/data.hpp"
#include "dclogit/draws.hpp"
#include "dclogit/errors.hpp"
#include "dclogit/estimation.hpp"
#include "dclogit/feebate.hpp"
#include "dclogit/likelihood.hpp"
#include "dclogit/policy.hpp"
#include "dclogit/rand.hpp"
#include "dclogit/synth.hpp"
#include "dclogit/theta.hpp"

#include "CLI11.hpp"
#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace dclogit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// A subcommand was invoked with arguments that cannot be acted on. Reported
// like a parse error (exit kUsage) rather than as a data problem.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Global {
    std::string config_path;
    std::string out_dir = ".";
    uint64_t seed = 1;
    size_t r_draws = 500;
    int threads = 0;  // <= 0 uses every hardware thread
    std::vector<std::string> argv;
};

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string file_digest(const std::string& path) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(read_file_bytes(path))));
    return buf;
}

std::string iso_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

json config_echo(const MarketConfig& cfg) {
    json scal = json::object();
    for (const auto& [k, v] : cfg.scalings) scal[k] = v;
    json formula = json::array();
    for (const auto& term : cfg.formula) formula.push_back(term.name);
    return json{{"fuel_price", cfg.fuel_price},
                {"interest_rate", cfg.interest_rate},
                {"car_life_years", cfg.car_life_years},
                {"use_ascs", cfg.use_ascs},
                {"usd_conversion", cfg.usd_conversion},
                {"currency_unit", cfg.currency_unit},
                {"scalings", scal},
                {"formula", formula}};
}

// Every run leaves a manifest.json next to its outputs: what ran, on which
// inputs (content digests), under which settings, and which files it wrote.
// Output entries are file names relative to the output directory, so a rerun
// into a fresh directory produces byte-identical product files.
void write_manifest(const Global& g, const std::string& subcommand, const MarketConfig* cfg,
                    const std::vector<std::pair<std::string, std::string>>& inputs,
                    const std::vector<std::string>& outputs) {
    json m;
    m["subcommand"] = subcommand;
    m["argv"] = g.argv;
    if (cfg) m["config"] = config_echo(*cfg);
    json in = json::object();
    for (const auto& [label, path] : inputs) in[label] = file_digest(path);
    m["inputs"] = in;
    m["seed"] = g.seed;
    m["r_draws"] = g.r_draws;
    m["threads"] = g.threads;
    m["outputs"] = outputs;
    m["timestamp"] = iso_utc_now();
    write_text((fs::path(g.out_dir) / "manifest.json").string(), m.dump(2) + "\n");
}

std::string out_path(const Global& g, const std::string& name) {
    return (fs::path(g.out_dir) / name).string();
}

MarketConfig need_config(const Global& g) {
    if (g.config_path.empty()) throw UsageError("--config is required for this subcommand");
    return load_market_config(g.config_path);
}

std::string significance_stars(double z) {
    const double az = std::fabs(z);
    if (az > 2.576) return "***";
    if (az > 1.96) return "**";
    if (az > 1.645) return "*";
    return "";
}

void write_fit_table(const EstimationResult& er, const std::string& path) {
    const auto names = free_names(er.gamma_names);
    const auto values = reported_values(er.theta);
    csv::Table t;
    t.header = {"parameter", "estimate", "std_error", "z_value", "stars"};
    for (size_t p = 0; p < names.size(); ++p) {
        const double se = p < er.std_errors.size() ? er.std_errors[p] : 0.0;
        const double z = se > 0 ? values[p] / se : std::numeric_limits<double>::quiet_NaN();
        t.rows.push_back({names[p], csv::format_double(values[p]), csv::format_double(se),
                          csv::format_double(z), significance_stars(z)});
    }
    csv::write_file(path, t);
}

// Parametric bootstrap of a vector functional, sharing one set of parameter
// draws across all components so each draw simulates the market once.
// Returns the per-component standard deviation; NaN where fewer than two
// draws produced finite values.
std::vector<double> propagate_vector(const EstimationResult& fit,
                                     const std::function<std::vector<double>(const Theta&)>& fn,
                                     size_t dim, int n_draws, uint64_t seed) {
    const size_t P = fit.n_free();
    Eigen::MatrixXd S(P, P);
    for (size_t a = 0; a < P; ++a)
        for (size_t b = 0; b < P; ++b) S(a, b) = fit.cov(a, b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    Eigen::MatrixXd L = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    std::mt19937_64 g(rng::substream(seed, 0xB00Du));
    std::vector<std::vector<double>> samples(dim);
    for (int k = 0; k < n_draws; ++k) {
        Eigen::VectorXd z(P);
        for (size_t p = 0; p < P; ++p) {
            double u = (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
            z(p) = to_standard_normal(u);
        }
        Eigen::VectorXd step = L * z;
        std::vector<double> xfree(fit.free);
        for (size_t p = 0; p < P; ++p) xfree[p] += step(p);
        try {
            const auto vals = fn(from_free(xfree, fit.theta.gamma.size()));
            if (vals.size() != dim) continue;
            bool finite = true;
            for (double v : vals) finite = finite && std::isfinite(v);
            if (!finite) continue;
            for (size_t d = 0; d < dim; ++d) samples[d].push_back(vals[d]);
        } catch (const std::exception&) {
            // a parameter draw outside the usable domain is skipped, like the
            // scalar version does
        }
    }
    std::vector<double> sd(dim, std::numeric_limits<double>::quiet_NaN());
    for (size_t d = 0; d < dim; ++d) {
        const auto& v = samples[d];
        if (v.size() < 2) continue;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        sd[d] = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return sd;
}

EstimationResult load_fit_for(const PreparedDataset& ds, const std::string& model_path) {
    EstimationResult fit = load_result(model_path);
    if (fit.gamma_names != ds.gamma_names)
        throw ValidationError("model file " + model_path +
                              " was fitted on a different design (covariate columns differ)");
    return fit;
}

std::string fmt(double v) { return csv::format_double(v); }

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
    std::string vehicles, households;
    int starts = 1;
    double tol = 1e-5;
    int max_iter = 1000;
    double fd_step = 1e-4;
};

int cmd_estimate(const Global& g, const EstimateArgs& a) {
    const MarketConfig cfg = need_config(g);
    const PreparedDataset ds = load_dataset(a.vehicles, a.households, cfg);

    EstimateConfig ec;
    ec.r_draws = g.r_draws;
    ec.seed = g.seed;
    ec.starts = a.starts;
    ec.tol = a.tol;
    ec.max_iter = a.max_iter;
    ec.threads = g.threads;
    ec.fd_step = a.fd_step;
    const EstimationResult er = estimate(ds, ec);

    ensure_out_dir(g.out_dir);
    save_result(er, out_path(g, "fit.json"));
    write_fit_table(er, out_path(g, "fit_table.csv"));
    write_manifest(g, "estimate", &cfg,
                   {{"config", g.config_path},
                    {"vehicles", a.vehicles},
                    {"households", a.households}},
                   {"fit.json", "fit_table.csv"});

    std::printf("households: %zu   models: %zu   draws per household: %zu\n", ds.n(), ds.j(),
                g.r_draws);
    std::printf("log likelihood: %.6f   iterations: %d   gradient max-norm: %.3e\n", er.loglik,
                er.iterations, er.grad_max_norm);
    std::printf("mean price coefficient (beta): %.6f   mean cost coefficient (alpha): %.6f\n",
                er.theta.mean_beta(), er.theta.mean_alpha());
    std::printf("wrote %s and %s\n", out_path(g, "fit.json").c_str(),
                out_path(g, "fit_table.csv").c_str());
    if (!er.converged) {
        std::fprintf(stderr,
                     "warning: optimizer stopped before meeting the convergence criteria "
                     "(gradient max-norm %.3e after %d iterations); outputs were still written\n",
                     er.grad_max_norm, er.iterations);
        return kEstimateNotConverged;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// elasticity

struct ElasticityArgs {
    std::string vehicles, households, model;
    double shock = 0.05;
    int se_draws = 100;
};

int cmd_elasticity(const Global& g, const ElasticityArgs& a) {
    const MarketConfig cfg = need_config(g);
    const PreparedDataset ds = load_dataset(a.vehicles, a.households, cfg);
    const EstimationResult fit = load_fit_for(ds, a.model);
    const DrawSet draws = make_draws(ds.n(), g.r_draws, g.seed);
    const int th = g.threads;

    ensure_out_dir(g.out_dir);

    csv::Table sr;
    sr.header = {"shock", "elasticity", "std_error"};
    for (ShockKind kind : {ShockKind::FuelPrice, ShockKind::Income}) {
        const double e = short_run_vkt_elasticity(fit.theta, ds, kind);
        std::string se = "";
        if (a.se_draws > 0) {
            const Propagated p = propagate_uncertainty(
                fit, [&](const Theta& t) { return short_run_vkt_elasticity(t, ds, kind); },
                a.se_draws, g.seed);
            se = fmt(p.std_error);
        }
        sr.rows.push_back({kind == ShockKind::FuelPrice ? "fuel_price" : "income", fmt(e), se});
    }
    csv::write_file(out_path(g, "short_run.csv"), sr);

    csv::Table lr;
    lr.header = {"shock",           "shock_size", "fuel_elasticity", "fuel_se",
                 "vkt_elasticity",  "vkt_se",     "no_rebound_elasticity", "no_rebound_se",
                 "rebound_share"};
    for (ShockKind kind : {ShockKind::FuelPrice, ShockKind::Income}) {
        const ElasticityReport rep =
            long_run_elasticity(fit.theta, ds, draws, kind, a.shock, th);
        std::vector<double> se(3, std::numeric_limits<double>::quiet_NaN());
        if (a.se_draws > 0) {
            se = propagate_vector(
                fit,
                [&](const Theta& t) {
                    const auto r = long_run_elasticity(t, ds, draws, kind, a.shock, th);
                    return std::vector<double>{r.elasticity, r.vkt_elasticity,
                                               r.elasticity_no_rebound.value_or(
                                                   std::numeric_limits<double>::quiet_NaN())};
                },
                3, a.se_draws, g.seed);
        }
        const double nr = rep.elasticity_no_rebound.value_or(std::numeric_limits<double>::quiet_NaN());
        lr.rows.push_back({kind == ShockKind::FuelPrice ? "fuel_price" : "income", fmt(a.shock),
                           fmt(rep.elasticity), a.se_draws > 0 ? fmt(se[0]) : "",
                           fmt(rep.vkt_elasticity), a.se_draws > 0 ? fmt(se[1]) : "", fmt(nr),
                           a.se_draws > 0 ? fmt(se[2]) : "",
                           fmt(rebound(rep.elasticity, nr))});
    }
    csv::write_file(out_path(g, "long_run.csv"), lr);

    csv::Table seg;
    seg.header = {"segment", "shock",   "shock_size",      "share_elasticity", "share_se",
                  "vkt_elasticity", "vkt_se", "fuel_elasticity", "fuel_se",
                  "no_rebound_elasticity", "no_rebound_se", "rebound_share"};
    for (const std::string& s : ds.segments) {
        for (SegmentShock kind : {SegmentShock::RetailPrice, SegmentShock::FuelEconomy}) {
            const ElasticityReport rep =
                segment_elasticity(fit.theta, ds, draws, s, kind, a.shock, th);
            std::vector<double> se(4, std::numeric_limits<double>::quiet_NaN());
            if (a.se_draws > 0) {
                se = propagate_vector(
                    fit,
                    [&](const Theta& t) {
                        const auto r = segment_elasticity(t, ds, draws, s, kind, a.shock, th);
                        const double qnan = std::numeric_limits<double>::quiet_NaN();
                        return std::vector<double>{r.share_elasticity.value_or(qnan),
                                                   r.vkt_elasticity, r.elasticity,
                                                   r.elasticity_no_rebound.value_or(qnan)};
                    },
                    4, a.se_draws, g.seed);
            }
            const double qnan = std::numeric_limits<double>::quiet_NaN();
            const double nr = rep.elasticity_no_rebound.value_or(qnan);
            seg.rows.push_back({s,
                                kind == SegmentShock::RetailPrice ? "retail_price" : "fuel_economy",
                                fmt(a.shock), fmt(rep.share_elasticity.value_or(qnan)),
                                a.se_draws > 0 ? fmt(se[0]) : "", fmt(rep.vkt_elasticity),
                                a.se_draws > 0 ? fmt(se[1]) : "", fmt(rep.elasticity),
                                a.se_draws > 0 ? fmt(se[2]) : "", fmt(nr),
                                a.se_draws > 0 ? fmt(se[3]) : "",
                                fmt(rebound(rep.elasticity, nr))});
        }
    }
    csv::write_file(out_path(g, "segments.csv"), seg);

    write_manifest(g, "elasticity", &cfg,
                   {{"config", g.config_path},
                    {"vehicles", a.vehicles},
                    {"households", a.households},
                    {"model", a.model}},
                   {"short_run.csv", "long_run.csv", "segments.csv"});

    std::printf("wrote %s, %s, %s\n", out_path(g, "short_run.csv").c_str(),
                out_path(g, "long_run.csv").c_str(), out_path(g, "segments.csv").c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// feebate

struct FeebateArgs {
    std::string vehicles, households, model;
    double anchor = -1.0;  // <= 0 means "use the sales-weighted fleet mean"
    double rebate_rate = 0.0;
    double tolerance = 1e-3;
};

int cmd_feebate(const Global& g, const FeebateArgs& a) {
    const MarketConfig cfg = need_config(g);
    const PreparedDataset ds = load_dataset(a.vehicles, a.households, cfg);
    const EstimationResult fit = load_fit_for(ds, a.model);
    const DrawSet draws = make_draws(ds.n(), g.r_draws, g.seed);

    const double anchor = a.anchor > 0 ? a.anchor : default_anchor(ds);
    const FeebateOutcome out =
        solve_revenue_neutral(fit.theta, ds, draws, anchor, a.rebate_rate, a.tolerance, g.threads);
    const FeebateReport rep = feebate_report(out, ds);

    ensure_out_dir(g.out_dir);

    csv::Table sum;
    sum.header = {"metric", "value"};
    sum.rows = {
        {"anchor_km_per_l", fmt(out.policy.anchor)},
        {"rebate_rate", fmt(out.policy.rebate_rate)},
        {"fee_rate", fmt(out.policy.fee_rate)},
        {"total_fees", fmt(out.total_fees)},
        {"total_rebates", fmt(out.total_rebates)},
        {"net_revenue", fmt(out.net_revenue)},
        {"neutrality_gap", fmt(out.neutrality_gap)},
        {"fleet_fe_change_pct", fmt(out.fleet_fe_change_pct)},
        {"fuel_savings_pct", fmt(out.fuel_savings_pct)},
        {"fuel_savings_no_rebound_pct", fmt(out.fuel_savings_no_rebound_pct)},
        {"rebound_share", fmt(out.rebound_share)},
        {"mean_fee_pct_of_price", fmt(rep.mean_fee_pct_of_price)},
        {"mean_rebate_pct_of_price", fmt(rep.mean_rebate_pct_of_price)},
        {"solver_iterations", std::to_string(out.iterations)},
    };
    csv::write_file(out_path(g, "feebate_summary.csv"), sum);

    csv::Table st;
    st.header = {"segment", "base_share", "post_share", "share_change_pct", "fuel_change_pct",
                 "fuel_change_no_rebound_pct"};
    for (const auto& row : rep.segments)
        st.rows.push_back({row.segment, fmt(row.base_share), fmt(row.post_share),
                           fmt(row.share_change_pct), fmt(row.fuel_change_pct),
                           fmt(row.fuel_change_no_rebound_pct)});
    csv::write_file(out_path(g, "feebate_segments.csv"), st);

    write_manifest(g, "feebate", &cfg,
                   {{"config", g.config_path},
                    {"vehicles", a.vehicles},
                    {"households", a.households},
                    {"model", a.model}},
                   {"feebate_summary.csv", "feebate_segments.csv"});

    std::printf("anchor %.4f km/l   rebate rate %.6g   balancing fee rate %.6g\n",
                out.policy.anchor, out.policy.rebate_rate, out.policy.fee_rate);
    std::printf("fees %.6g   rebates %.6g   |net|/rebates %.3e (%d bisection steps)\n",
                out.total_fees, out.total_rebates, out.neutrality_gap, out.iterations);
    std::printf("fleet fuel economy %+.4f%%   fuel use %+.4f%% (no-rebound %+.4f%%)\n",
                out.fleet_fe_change_pct, -out.fuel_savings_pct, -out.fuel_savings_no_rebound_pct);
    std::printf("wrote %s and %s\n", out_path(g, "feebate_summary.csv").c_str(),
                out_path(g, "feebate_segments.csv").c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// fit-report

struct FitReportArgs {
    std::string vehicles, households, model;
    std::string segment;
    bool segment_given = false;
};

int cmd_fit_report(const Global& g, const FitReportArgs& a) {
    const MarketConfig cfg = need_config(g);
    const PreparedDataset ds = load_dataset(a.vehicles, a.households, cfg);
    const EstimationResult fit = load_fit_for(ds, a.model);
    const DrawSet draws = make_draws(ds.n(), g.r_draws, g.seed);
    const FleetState st = baseline_fleet_state(fit.theta, ds, draws, g.threads);

    const size_t S = ds.segments.size();
    std::vector<double> obs_mass(S, 0.0), obs_km(S, 0.0);
    for (size_t i = 0; i < ds.n(); ++i) {
        const int s = ds.segment_code[ds.chosen[i]];
        obs_mass[s] += ds.weight[i];
        obs_km[s] += ds.weight[i] * std::exp(ds.log_km[i]);
    }
    std::vector<double> pred_mass(S, 0.0), pred_usage(S, 0.0);
    for (size_t j = 0; j < ds.j(); ++j) {
        pred_mass[ds.segment_code[j]] += st.share_mass[j];
        pred_usage[ds.segment_code[j]] += st.usage[j];
    }
    const double W = ds.total_weight();

    csv::Table t;
    t.header = {"segment", "observed_share", "predicted_share", "observed_mean_vkt",
                "predicted_mean_vkt"};
    double chi2 = 0.0;
    bool matched = false;
    for (size_t s = 0; s < S; ++s) {
        const double obs_share = obs_mass[s] / W;
        const double pred_share = pred_mass[s] / st.total_weight;
        if (pred_share > 0) chi2 += W * (obs_share - pred_share) * (obs_share - pred_share) / pred_share;
        if (a.segment_given && ds.segments[s] != a.segment) continue;
        matched = true;
        t.rows.push_back({ds.segments[s], fmt(obs_share), fmt(pred_share),
                          fmt(obs_mass[s] > 0 ? obs_km[s] / obs_mass[s] : 0.0),
                          fmt(pred_mass[s] > 0 ? pred_usage[s] / pred_mass[s] : 0.0)});
    }
    if (a.segment_given && !matched)
        throw ValidationError("unknown segment \"" + a.segment + "\"; the data has: " + [&] {
            std::string all;
            for (const auto& s : ds.segments) all += (all.empty() ? "" : ", ") + s;
            return all;
        }());

    ensure_out_dir(g.out_dir);
    csv::write_file(out_path(g, "fit_report.csv"), t);
    write_manifest(g, "fit-report", &cfg,
                   {{"config", g.config_path},
                    {"vehicles", a.vehicles},
                    {"households", a.households},
                    {"model", a.model}},
                   {"fit_report.csv"});

    std::printf("segments reported: %zu   share chi-square (all segments): %.4f\n", t.rows.size(),
                chi2);
    std::printf("wrote %s\n", out_path(g, "fit_report.csv").c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
    size_t n = 1000;
};

int cmd_synth(const Global& g, const SynthArgs& a) {
    SyntheticSpec spec = demo_spec(a.n, g.seed);
    const SyntheticResult res = generate(spec);

    ensure_out_dir(g.out_dir);
    save_dataset(res.data, out_path(g, "vehicles.csv"), out_path(g, "households.csv"));
    write_text(out_path(g, "market.toml"), render_market_config(res.data.config));

    json truth;
    truth["gamma_names"] = res.data.gamma_names;
    truth["gamma"] = res.truth.gamma;
    truth["mu_beta"] = res.truth.mu_beta;
    truth["sd_beta"] = res.truth.sd_beta;
    truth["mu_alpha"] = res.truth.mu_alpha;
    truth["sd_alpha"] = res.truth.sd_alpha;
    truth["sd_eta"] = res.truth.sd_eta;
    truth["scale_mu"] = res.truth.scale_mu;
    truth["n_households"] = a.n;
    truth["seed"] = g.seed;
    write_text(out_path(g, "truth.json"), truth.dump(2) + "\n");

    write_manifest(g, "synth", &res.data.config, {},
                   {"vehicles.csv", "households.csv", "market.toml", "truth.json"});

    std::printf("generated %zu households over %zu models (seed %llu)\n", res.data.n(),
                res.data.j(), static_cast<unsigned long long>(g.seed));
    std::printf("wrote vehicles.csv, households.csv, market.toml, truth.json under %s\n",
                g.out_dir.c_str());
    return kOk;
}

// ---------------------------------------------------------------------------
// check-gradient

struct CheckGradientArgs {
    std::string vehicles, households;
    int points = 3;
    double tol_grad = 1e-6;
};

int cmd_check_gradient(const Global& g, const CheckGradientArgs& a) {
    PreparedDataset ds;
    std::vector<std::pair<std::string, std::string>> inputs;
    MarketConfig cfg;
    bool have_cfg = false;
    if (!a.vehicles.empty() || !a.households.empty()) {
        if (a.vehicles.empty() || a.households.empty())
            throw UsageError("--vehicles and --households must be given together");
        cfg = need_config(g);
        have_cfg = true;
        ds = load_dataset(a.vehicles, a.households, cfg);
        inputs = {{"config", g.config_path}, {"vehicles", a.vehicles}, {"households", a.households}};
    } else {
        // a small synthetic market keeps the finite-difference sweep quick
        ds = generate(demo_spec(50, g.seed)).data;
    }
    const DrawSet draws = make_draws(ds.n(), g.r_draws, g.seed);

    EvalOptions opts;
    opts.gradient = true;
    opts.threads = g.threads;
    EvalOptions val_only;
    val_only.gradient = false;
    val_only.threads = g.threads;

    std::mt19937_64 rg(rng::substream(g.seed, 0xC4ADu));
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * rng::uniform01(rg); };

    csv::Table t;
    t.header = {"point", "max_rel_err", "worst_parameter"};
    double worst = 0.0;
    const auto names = free_names(ds.gamma_names);
    for (int pt = 0; pt < a.points; ++pt) {
        Theta th = default_start(ds.gamma_names.size());
        if (pt > 0) {
            for (auto& gmm : th.gamma) gmm = uniform(-0.3, 0.3);
            th.mu_beta = uniform(-1.4, -0.6);
            th.mu_alpha = uniform(-1.4, -0.6);
            th.sd_beta = uniform(0.2, 0.8);
            th.sd_alpha = uniform(0.2, 0.8);
            th.sd_eta = uniform(0.2, 0.8);
            th.scale_mu = uniform(0.7, 2.0);
        }
        const std::vector<double> x0 = to_free(th);
        const LikelihoodReport rep = wll(th, ds, draws, opts);

        double max_rel = 0.0;
        size_t argmax = 0;
        for (size_t p = 0; p < x0.size(); ++p) {
            const double h = 1e-5 * std::max(1.0, std::fabs(x0[p]));
            std::vector<double> xp = x0, xm = x0;
            xp[p] += h;
            xm[p] -= h;
            const double fp = wll(from_free(xp, ds.gamma_names.size()), ds, draws, val_only).value;
            const double fm = wll(from_free(xm, ds.gamma_names.size()), ds, draws, val_only).value;
            const double fd = (fp - fm) / (2 * h);
            const double rel = std::fabs(rep.gradient[p] - fd) /
                               std::max(1.0, std::fabs(rep.gradient[p]));
            if (rel > max_rel) {
                max_rel = rel;
                argmax = p;
            }
        }
        worst = std::max(worst, max_rel);
        t.rows.push_back({std::to_string(pt), fmt(max_rel), names[argmax]});
        std::printf("point %d: max relative gradient error %.3e (%s)\n", pt, max_rel,
                    names[argmax].c_str());
    }

    ensure_out_dir(g.out_dir);
    csv::write_file(out_path(g, "check_gradient.csv"), t);
    write_manifest(g, "check-gradient", have_cfg ? &cfg : nullptr, inputs,
                   {"check_gradient.csv"});

    if (worst <= a.tol_grad) {
        std::printf("gradient check passed: %.3e <= %.3e over %d points\n", worst, a.tol_grad,
                    a.points);
        return kOk;
    }
    std::fprintf(stderr, "gradient check FAILED: %.3e > %.3e\n", worst, a.tol_grad);
    return kInternal;
}

}  // namespace

int run(int argc, char** argv) {
    Global g;
    g.argv.assign(argv, argv + argc);

    CLI::App app{"joint vehicle choice and usage model: estimation and policy simulation"};
    app.require_subcommand(1);
    app.add_option("--config", g.config_path, "market config (TOML)");
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--r", g.r_draws, "simulation draws per household")->capture_default_str();
    app.add_option("--threads", g.threads, "worker threads; 0 uses all hardware threads")
        ->capture_default_str();
    app.add_option("--out-dir", g.out_dir, "directory for outputs")->capture_default_str();

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "fit the model by weighted simulated maximum likelihood");
    est->fallthrough();
    est->add_option("--vehicles", ea.vehicles, "vehicle table CSV")->required();
    est->add_option("--households", ea.households, "household table CSV")->required();
    est->add_option("--starts", ea.starts, "optimizer starts (first is deterministic)")
        ->capture_default_str();
    est->add_option("--tol", ea.tol, "gradient max-norm tolerance")->capture_default_str();
    est->add_option("--max-iter", ea.max_iter, "optimizer iteration cap")->capture_default_str();
    est->add_option("--fd-step", ea.fd_step, "Hessian finite-difference step")
        ->capture_default_str();

    ElasticityArgs la;
    auto* ela = app.add_subcommand("elasticity", "short-run, long-run and per-segment elasticities");
    ela->fallthrough();
    ela->add_option("--vehicles", la.vehicles, "vehicle table CSV")->required();
    ela->add_option("--households", la.households, "household table CSV")->required();
    ela->add_option("--model", la.model, "fitted model JSON from `estimate`")->required();
    ela->add_option("--shock", la.shock, "proportional shock for arc elasticities")
        ->capture_default_str();
    ela->add_option("--se-draws", la.se_draws,
                    "parameter draws for simulated standard errors; 0 skips them")
        ->capture_default_str();

    FeebateArgs fa;
    auto* fee = app.add_subcommand("feebate", "revenue-neutral feebate analysis");
    fee->fallthrough();
    fee->add_option("--vehicles", fa.vehicles, "vehicle table CSV")->required();
    fee->add_option("--households", fa.households, "household table CSV")->required();
    fee->add_option("--model", fa.model, "fitted model JSON from `estimate`")->required();
    fee->add_option("--rebate-rate", fa.rebate_rate, "currency per km/l above the anchor")
        ->required();
    fee->add_option("--anchor", fa.anchor,
                    "km/l pivot; defaults to the sales-weighted fleet fuel economy");
    fee->add_option("--tolerance", fa.tolerance, "revenue neutrality tolerance, |net|/rebates")
        ->capture_default_str();

    FitReportArgs fra;
    auto* fr = app.add_subcommand("fit-report", "observed versus predicted shares and usage");
    fr->fallthrough();
    fr->add_option("--vehicles", fra.vehicles, "vehicle table CSV")->required();
    fr->add_option("--households", fra.households, "household table CSV")->required();
    fr->add_option("--model", fra.model, "fitted model JSON from `estimate`")->required();
    auto* seg_opt = fr->add_option("--segment", fra.segment, "restrict the report to one segment");

    SynthArgs sa;
    auto* syn = app.add_subcommand("synth", "generate a synthetic market with known parameters");
    syn->fallthrough();
    syn->add_option("--n", sa.n, "number of households")->capture_default_str();

    CheckGradientArgs ca;
    auto* chk = app.add_subcommand("check-gradient",
                                   "compare the analytic likelihood gradient to finite differences");
    chk->fallthrough();
    chk->add_option("--vehicles", ca.vehicles, "vehicle table CSV (synthetic market if omitted)");
    chk->add_option("--households", ca.households, "household table CSV");
    chk->add_option("--points", ca.points, "parameter points to test")->capture_default_str();
    chk->add_option("--tol-grad", ca.tol_grad, "maximum relative error accepted")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        fra.segment_given = seg_opt->count() > 0;
        if (est->parsed()) return cmd_estimate(g, ea);
        if (ela->parsed()) return cmd_elasticity(g, la);
        if (fee->parsed()) return cmd_feebate(g, fa);
        if (fr->parsed()) return cmd_fit_report(g, fra);
        if (syn->parsed()) return cmd_synth(g, sa);
        if (chk->parsed()) return cmd_check_gradient(g, ca);
        std::fprintf(stderr, "no subcommand given\n");
        return kUsage;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return kIo;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kValidation;
    } catch (const ConvergenceError& e) {
        std::fprintf(stderr, "solver did not converge: %s\n", e.what());
        return kFeebateNotConverged;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kInternal;
    }
}

}  // namespace dclogit::cli
