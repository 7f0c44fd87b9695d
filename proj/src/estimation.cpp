#include "dclogit/estimation.hpp"

#include "dclogit/errors.hpp"
#include "dclogit/rand.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

namespace dclogit {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double max_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

bool finite(double v) { return std::isfinite(v); }

bool finite(const std::vector<double>& v) {
    for (double x : v) if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

// Minimization form internally: f = -objective. Strong Wolfe line search,
// cubic interpolation in the zoom stage (Nocedal & Wright alg. 3.5/3.6).
OptimResult maximize(const Objective& fn, std::vector<double> x0, const OptimOptions& opts) {
    const size_t P = x0.size();
    const double c1 = 1e-4, c2 = 0.9;
    int evals = 0;

    auto eval = [&](const std::vector<double>& x, std::vector<double>& g) {
        ++evals;
        double v = fn(x, g);
        for (double& gi : g) gi = -gi;
        return -v;
    };

    std::vector<double> x = std::move(x0), g(P), xt(P), gt(P);
    double f = eval(x, g);
    if (!finite(f) || !finite(g))
        throw DomainError("maximize: objective not finite at the start point");

    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    OptimResult res;
    res.converged = false;

    int it = 0;
    for (; it < opts.max_iter; ++it) {
        const double gmax = max_norm(g);
        if (gmax < opts.tol && it > 0) { res.converged = true; break; }
        if (gmax < opts.tol && it == 0) { res.converged = true; break; }

        // two-loop recursion
        std::vector<double> d(g);
        std::vector<double> alpha_hist(s_hist.size());
        for (size_t k = s_hist.size(); k-- > 0;) {
            alpha_hist[k] = rho_hist[k] * dot(s_hist[k], d);
            for (size_t p = 0; p < P; ++p) d[p] -= alpha_hist[k] * y_hist[k][p];
        }
        if (!s_hist.empty()) {
            const auto& s = s_hist.back();
            const auto& yv = y_hist.back();
            const double scale = dot(s, yv) / dot(yv, yv);
            for (double& dp : d) dp *= scale;
        }
        for (size_t k = 0; k < s_hist.size(); ++k) {
            const double betak = rho_hist[k] * dot(y_hist[k], d);
            for (size_t p = 0; p < P; ++p) d[p] += s_hist[k][p] * (alpha_hist[k] - betak);
        }
        for (double& dp : d) dp = -dp;  // descent direction for f

        double dg0 = dot(d, g);
        if (!(dg0 < 0)) {  // not a descent direction; restart from steepest
            s_hist.clear(); y_hist.clear(); rho_hist.clear();
            for (size_t p = 0; p < P; ++p) d[p] = -g[p];
            dg0 = dot(d, g);
            if (!(dg0 < 0)) break;  // gradient is exactly zero
        }

        // strong Wolfe search on phi(a) = f(x + a d)
        const double phi0 = f, dphi0 = dg0;
        bool found = false;
        double f_new = phi0;

        // interior cubic minimizer of the Hermite interpolant; bisection when
        // the data do not pin one down inside the interval
        auto interp = [](double a0, double p0, double d0, double a1, double p1, double d1) {
            const double h = a1 - a0;
            double aj = a0 + 0.5 * h;
            const double t1 = d0 + d1 - 3.0 * (p1 - p0) / h;
            const double disc = t1 * t1 - d0 * d1;
            if (disc >= 0) {
                const double t2 = std::copysign(std::sqrt(disc), h);
                const double denom = d1 - d0 + 2.0 * t2;
                if (denom != 0.0) aj = a1 - h * (d1 + t2 - t1) / denom;
            }
            const double lo = std::min(a0, a1), hi = std::max(a0, a1);
            const double margin = 0.1 * (hi - lo);
            if (!(aj > lo + margin && aj < hi - margin)) aj = a0 + 0.5 * h;
            return aj;
        };

        double a_lo = 0.0, phi_lo = phi0, dphi_lo = dphi0;
        double a_hi = 0.0, phi_hi = 0.0, dphi_hi = 0.0;
        bool bracketed = false;

        double a_prev = 0.0, phi_prev = phi0, dphi_prev = dphi0;
        double a = it == 0 ? std::min(1.0, 1.0 / std::max(1.0, max_norm(g))) : 1.0;
        for (int ls = 0; ls < 25 && !found; ++ls) {
            for (size_t p = 0; p < P; ++p) xt[p] = x[p] + a * d[p];
            double phi = eval(xt, gt);
            double dphi = finite(phi) && finite(gt) ? dot(gt, d) : std::numeric_limits<double>::quiet_NaN();
            if (!finite(phi) || !finite(dphi)) {
                a = a_prev + 0.25 * (a - a_prev);  // back toward the last good point
                continue;
            }
            if (phi > phi0 + c1 * a * dphi0 || (ls > 0 && phi >= phi_prev)) {
                a_lo = a_prev; phi_lo = phi_prev; dphi_lo = dphi_prev;
                a_hi = a; phi_hi = phi; dphi_hi = dphi;
                bracketed = true; break;
            }
            if (std::fabs(dphi) <= -c2 * dphi0) { found = true; f_new = phi; break; }
            if (dphi >= 0) {
                a_lo = a; phi_lo = phi; dphi_lo = dphi;
                a_hi = a_prev; phi_hi = phi_prev; dphi_hi = dphi_prev;
                bracketed = true; break;
            }
            a_prev = a; phi_prev = phi; dphi_prev = dphi;
            a *= 2.0;
        }
        if (bracketed && !found) {
            for (int zi = 0; zi < 30 && !found; ++zi) {
                const double aj = interp(a_lo, phi_lo, dphi_lo, a_hi, phi_hi, dphi_hi);
                for (size_t p = 0; p < P; ++p) xt[p] = x[p] + aj * d[p];
                double phi = eval(xt, gt);
                double dphi = finite(phi) && finite(gt) ? dot(gt, d) : std::numeric_limits<double>::quiet_NaN();
                if (!finite(phi) || !finite(dphi)) {
                    a_hi = aj;  // poison the far end; interp degrades to bisection
                    phi_hi = std::numeric_limits<double>::infinity();
                    dphi_hi = 0.0;
                } else if (phi > phi0 + c1 * aj * dphi0 || phi >= phi_lo) {
                    a_hi = aj; phi_hi = phi; dphi_hi = dphi;
                } else {
                    if (std::fabs(dphi) <= -c2 * dphi0) { found = true; f_new = phi; break; }
                    if (dphi * (a_hi - a_lo) >= 0) { a_hi = a_lo; phi_hi = phi_lo; dphi_hi = dphi_lo; }
                    a_lo = aj; phi_lo = phi; dphi_lo = dphi;
                }
                if (std::fabs(a_hi - a_lo) < 1e-14 * std::max(1.0, std::fabs(a_lo))) {
                    // interval collapsed; settle for the best interior point
                    if (phi_lo < phi0 && a_lo > 0) {
                        for (size_t p = 0; p < P; ++p) xt[p] = x[p] + a_lo * d[p];
                        f_new = eval(xt, gt);
                        found = finite(f_new) && finite(gt);
                    }
                    break;
                }
            }
        }
        if (!found) {
            // Sufficient-decrease fallback: plain backtracking from a = 1.
            a = 1.0;
            bool ok = false;
            for (int bt = 0; bt < 40; ++bt) {
                for (size_t p = 0; p < P; ++p) xt[p] = x[p] + a * d[p];
                double phi = eval(xt, gt);
                if (finite(phi) && finite(gt) && phi < phi0 + c1 * a * dphi0) { ok = true; f_new = phi; break; }
                a *= 0.5;
            }
            if (!ok) break;  // no descent possible; stop at current point
        }

        // accept xt
        std::vector<double> s_new(P), y_new(P);
        for (size_t p = 0; p < P; ++p) {
            s_new[p] = xt[p] - x[p];
            y_new[p] = gt[p] - g[p];
        }
        const double sy = dot(s_new, y_new);
        if (sy > 1e-12 * std::sqrt(dot(s_new, s_new)) * std::sqrt(dot(y_new, y_new))) {
            s_hist.push_back(s_new);
            y_hist.push_back(y_new);
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
                s_hist.pop_front(); y_hist.pop_front(); rho_hist.pop_front();
            }
        }
        const double rel = std::fabs(f_new - f) / std::max(1.0, std::fabs(f_new));
        x.swap(xt);
        g.swap(gt);
        f = f_new;
        if (max_norm(g) < opts.tol && rel < opts.rel_tol) { ++it; res.converged = true; break; }
    }

    res.x = std::move(x);
    res.value = -f;
    res.grad_max_norm = max_norm(g);
    res.iterations = it;
    res.evaluations = evals;
    if (res.grad_max_norm < opts.tol) res.converged = true;
    return res;
}

Theta default_start(size_t n_gamma) {
    Theta t;
    t.gamma.assign(n_gamma, 0.0);
    t.mu_beta = -1.0;
    t.sd_beta = 0.5;
    t.mu_alpha = -1.0;
    t.sd_alpha = 0.5;
    t.sd_eta = 0.5;
    t.scale_mu = 1.0;
    return t;
}

namespace {

Eigen::MatrixXd fd_hessian(const PreparedDataset& ds, const DrawSet& draws,
                           const std::vector<double>& free, double h, int threads) {
    const size_t P = free.size();
    Eigen::MatrixXd H(P, P);
    EvalOptions opts;
    opts.gradient = true;
    opts.threads = threads;
    for (size_t p = 0; p < P; ++p) {
        std::vector<double> xp(free), xm(free);
        xp[p] += h;
        xm[p] -= h;
        auto gp = wll(from_free(xp, ds.K), ds, draws, opts).gradient;
        auto gm = wll(from_free(xm, ds.K), ds, draws, opts).gradient;
        for (size_t q = 0; q < P; ++q) H(q, p) = (gp[q] - gm[q]) / (2.0 * h);
    }
    return 0.5 * (H + H.transpose());
}

} // namespace

std::vector<double> sandwich_covariance(const Theta& theta, const PreparedDataset& ds,
                                        const DrawSet& draws, double fd_step, int threads,
                                        double* condition, bool* singular) {
    const size_t P = theta.n_free();
    const auto free = to_free(theta);
    Eigen::MatrixXd H = fd_hessian(ds, draws, free, fd_step, threads);

    EvalOptions opts;
    opts.gradient = false;
    opts.scores = true;
    opts.threads = threads;
    auto repo = wll(theta, ds, draws, opts);
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(P, P);
    for (size_t i = 0; i < ds.n(); ++i) {
        Eigen::Map<const Eigen::VectorXd> gi(&repo.scores[i * P], P);
        G.noalias() += ds.weight[i] * ds.weight[i] * gi * gi.transpose();
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    const auto& ev = es.eigenvalues();
    const double emax = ev.cwiseAbs().maxCoeff();
    const double cutoff = emax * 1e-12;
    bool sing = false;
    Eigen::VectorXd inv(P);
    for (size_t p = 0; p < P; ++p) {
        if (std::fabs(ev(p)) <= cutoff || emax == 0.0) { inv(p) = 0.0; sing = true; }
        else inv(p) = 1.0 / ev(p);
    }
    if (condition) {
        double emin = std::numeric_limits<double>::infinity();
        for (size_t p = 0; p < P; ++p) emin = std::min(emin, std::fabs(ev(p)));
        *condition = emin > 0 ? emax / emin : std::numeric_limits<double>::infinity();
    }
    if (singular) *singular = sing;

    Eigen::MatrixXd Hinv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    Eigen::MatrixXd S = Hinv * G * Hinv;
    S = 0.5 * (S + S.transpose());
    std::vector<double> out(P * P);
    for (size_t a = 0; a < P; ++a)
        for (size_t b = 0; b < P; ++b) out[a * P + b] = S(a, b);
    return out;
}

EstimationResult estimate_with_draws(const PreparedDataset& ds, const DrawSet& draws,
                                     const EstimateConfig& cfg) {
    const size_t P = ds.K + 6;
    EvalOptions eopts;
    eopts.gradient = true;
    eopts.threads = cfg.threads;

    long clamp_total = 0, floor_total = 0;
    Objective obj = [&](const std::vector<double>& x, std::vector<double>& grad) {
        auto r = wll(from_free(x, ds.K), ds, draws, eopts);
        grad = r.gradient;
        clamp_total += r.flags.clamp_count;
        floor_total += r.flags.floor_count;
        return r.value;
    };

    OptimOptions oopts;
    oopts.tol = cfg.tol;
    oopts.rel_tol = cfg.rel_tol;
    oopts.max_iter = cfg.max_iter;

    OptimResult best;
    bool have_best = false;
    std::mt19937_64 g(rng::substream(cfg.seed, 0x5741u));
    for (int s = 0; s < std::max(1, cfg.starts); ++s) {
        auto x0 = to_free(default_start(ds.K));
        if (s > 0)
            for (double& xp : x0) xp += (rng::uniform01(g) - 0.5);
        OptimResult r = maximize(obj, std::move(x0), oopts);
        if (!have_best || (r.value > best.value && finite(r.value))) {
            best = std::move(r);
            have_best = true;
        }
    }

    EstimationResult out;
    out.theta = from_free(best.x, ds.K);
    out.gamma_names = ds.gamma_names;
    out.free = best.x;
    out.loglik = best.value;
    out.grad_max_norm = best.grad_max_norm;
    out.iterations = best.iterations;
    out.converged = best.converged;
    out.clamp_count = clamp_total;
    out.floor_count = floor_total;
    out.r_draws = draws.r;
    out.seed = draws.seed;
    out.covariance = sandwich_covariance(out.theta, ds, draws, cfg.fd_step, cfg.threads,
                                         &out.hessian_condition, &out.hessian_singular);
    auto jac = free_to_reported_jacobian(out.theta);
    out.std_errors.resize(P);
    for (size_t p = 0; p < P; ++p) {
        double v = out.covariance[p * P + p];
        out.std_errors[p] = jac[p] * std::sqrt(std::max(0.0, v));
    }
    return out;
}

EstimationResult estimate(const PreparedDataset& ds, const EstimateConfig& cfg) {
    // estimate_with_draws stays permissive for callers supplying their own
    // draw sets; the config-driven entry holds the documented floor
    if (cfg.r_draws < 50)
        throw ValidationError("estimate: r_draws must be >= 50, got " +
                              std::to_string(cfg.r_draws));
    DrawSet draws = make_draws(ds.n(), cfg.r_draws, cfg.seed);
    return estimate_with_draws(ds, draws, cfg);
}

Propagated propagate_uncertainty(const EstimationResult& fit,
                                 const std::function<double(const Theta&)>& functional,
                                 int n_draws, uint64_t seed) {
    const size_t P = fit.n_free();
    Propagated out;
    out.value = functional(fit.theta);

    Eigen::MatrixXd S(P, P);
    for (size_t a = 0; a < P; ++a)
        for (size_t b = 0; b < P; ++b) S(a, b) = fit.cov(a, b);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    Eigen::VectorXd sq = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    Eigen::MatrixXd L = es.eigenvectors() * sq.asDiagonal();

    std::mt19937_64 g(rng::substream(seed, 0xB007u));
    std::vector<double> vals;
    vals.reserve(n_draws);
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
            double v = functional(from_free(xfree, fit.theta.gamma.size()));
            if (std::isfinite(v)) vals.push_back(v);
            else ++out.n_failed;
        } catch (const std::exception&) {
            ++out.n_failed;
        }
    }
    out.n_used = static_cast<int>(vals.size());
    if (vals.size() >= 2) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        out.std_error = std::sqrt(ss / (vals.size() - 1));
    } else {
        out.std_error = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

std::string result_to_json(const EstimationResult& r) {
    nlohmann::json j;
    j["gamma_names"] = r.gamma_names;
    j["theta"] = {
        {"gamma", r.theta.gamma},
        {"mu_beta", r.theta.mu_beta},
        {"sd_beta", r.theta.sd_beta},
        {"mu_alpha", r.theta.mu_alpha},
        {"sd_alpha", r.theta.sd_alpha},
        {"sd_eta", r.theta.sd_eta},
        {"scale_mu", r.theta.scale_mu},
    };
    j["free"] = r.free;
    const size_t P = r.n_free();
    nlohmann::json cov = nlohmann::json::array();
    for (size_t a = 0; a < P; ++a) {
        nlohmann::json row = nlohmann::json::array();
        for (size_t b = 0; b < P; ++b) row.push_back(r.covariance[a * P + b]);
        cov.push_back(row);
    }
    j["covariance_free"] = cov;
    j["std_errors"] = r.std_errors;
    j["loglik"] = r.loglik;
    j["convergence"] = {
        {"converged", r.converged},
        {"iterations", r.iterations},
        {"grad_max_norm", r.grad_max_norm},
        {"hessian_condition", r.hessian_condition},
        {"hessian_singular", r.hessian_singular},
        {"clamp_count", r.clamp_count},
        {"floor_count", r.floor_count},
    };
    j["r_draws"] = r.r_draws;
    j["seed"] = r.seed;
    return j.dump(2);
}

EstimationResult result_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    EstimationResult r;
    r.gamma_names = j.at("gamma_names").get<std::vector<std::string>>();
    const auto& t = j.at("theta");
    r.theta.gamma = t.at("gamma").get<std::vector<double>>();
    r.theta.mu_beta = t.at("mu_beta").get<double>();
    r.theta.sd_beta = t.at("sd_beta").get<double>();
    r.theta.mu_alpha = t.at("mu_alpha").get<double>();
    r.theta.sd_alpha = t.at("sd_alpha").get<double>();
    r.theta.sd_eta = t.at("sd_eta").get<double>();
    r.theta.scale_mu = t.at("scale_mu").get<double>();
    r.free = j.at("free").get<std::vector<double>>();
    const auto& cov = j.at("covariance_free");
    const size_t P = r.free.size();
    r.covariance.assign(P * P, 0.0);
    for (size_t a = 0; a < P; ++a)
        for (size_t b = 0; b < P; ++b) r.covariance[a * P + b] = cov.at(a).at(b).get<double>();
    r.std_errors = j.at("std_errors").get<std::vector<double>>();
    r.loglik = j.at("loglik").get<double>();
    const auto& c = j.at("convergence");
    r.converged = c.at("converged").get<bool>();
    r.iterations = c.at("iterations").get<int>();
    r.grad_max_norm = c.at("grad_max_norm").get<double>();
    r.hessian_condition = c.at("hessian_condition").get<double>();
    r.hessian_singular = c.at("hessian_singular").get<bool>();
    r.clamp_count = c.at("clamp_count").get<long>();
    r.floor_count = c.at("floor_count").get<long>();
    r.r_draws = j.at("r_draws").get<size_t>();
    r.seed = j.at("seed").get<uint64_t>();
    return r;
}

void save_result(const EstimationResult& r, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << result_to_json(r) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

EstimationResult load_result(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return result_from_json(buf.str());
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

} // namespace dclogit
