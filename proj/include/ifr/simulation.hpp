#pragma once

#include <boost/math/special_functions/erf.hpp>

#include <Eigen/Cholesky>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <sstream>
#include <vector>

#include "direction.hpp"
#include "index_fit.hpp"
#include "inference.hpp"
#include "metric_spaces.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace ifr {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(Errc::invalid_input, "normal quantile needs p in (0,1)");
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

inline double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

enum class Scenario { dist_setting1, dist_setting2, adjacency, euclidean };
enum class Link { identity, square, exponential, expit };
enum class PredictorDesign { copula, truncated_normal };

inline const char* scenario_name(Scenario s) {
    switch (s) {
    case Scenario::dist_setting1: return "setting1";
    case Scenario::dist_setting2: return "setting2";
    case Scenario::adjacency: return "adjacency";
    case Scenario::euclidean: return "euclidean";
    }
    return "?";
}

inline Scenario parse_scenario(const std::string& s) {
    if (s == "setting1") return Scenario::dist_setting1;
    if (s == "setting2") return Scenario::dist_setting2;
    if (s == "adjacency") return Scenario::adjacency;
    if (s == "euclidean") return Scenario::euclidean;
    throw Error(Errc::invalid_input, "unknown scenario '" + s + "'");
}

inline const char* link_name(Link l) {
    switch (l) {
    case Link::identity: return "identity";
    case Link::square: return "square";
    case Link::exponential: return "exp";
    case Link::expit: return "expit";
    }
    return "?";
}

inline Link parse_link(const std::string& s) {
    if (s == "identity") return Link::identity;
    if (s == "square") return Link::square;
    if (s == "exp") return Link::exponential;
    if (s == "expit") return Link::expit;
    throw Error(Errc::invalid_input, "unknown link '" + s + "'");
}

inline double apply_link(Link l, double t) {
    switch (l) {
    case Link::identity: return t;
    case Link::square: return t * t;
    case Link::exponential: return std::exp(t);
    case Link::expit: return expit(t);
    }
    return t;
}

struct SimSpec {
    Scenario scenario = Scenario::dist_setting1;
    Link link = Link::identity;
    Index n = 100;
    Index p = 4;
    DirectionParam theta0;
    double rho = 0.25;
    std::uint64_t seed = 0;
    PredictorDesign design = PredictorDesign::copula;
    GridPtr grid;          // distribution scenarios; default 101 points on [0.005, 0.995]
    Index nodes = 10;      // adjacency
    double noise_sd = 0.5; // euclidean
};

// Balanced default truth (1, ..., 1)/sqrt(p).
inline DirectionParam default_theta0(Index p) { return direction_from_vector(VectorXd::Ones(p)); }

inline void validate_spec(const SimSpec& s) {
    if (s.n < 10) throw Error(Errc::invalid_input, "simulation needs n >= 10");
    if (s.p < 2) throw Error(Errc::invalid_input, "simulation needs p >= 2");
    if (s.theta0.p() != s.p) throw Error(Errc::dimension, "theta0 does not have p components");
    if (std::abs(s.theta0.full.norm() - 1.0) > 1e-10 || !(s.theta0.full[0] > 0.0))
        throw Error(Errc::invalid_input, "theta0 must be a unit vector with positive first entry");
    if ((s.link == Link::expit) != (s.scenario == Scenario::adjacency))
        throw Error(Errc::invalid_input, "the expit link goes with the adjacency scenario only");
    if (s.scenario == Scenario::adjacency && s.nodes < 2) throw Error(Errc::invalid_input, "adjacency needs m >= 2");
    if (s.scenario == Scenario::euclidean && !(s.noise_sd >= 0.0)) throw Error(Errc::invalid_input, "noise sd must be >= 0");
}

// Equicorrelated Gaussian Z pushed through 2Φ(Z) - 1.
inline MatrixXd gen_predictors(Index n, Index p, double rho, Rng& rng) {
    if (p < 1 || n < 1) throw Error(Errc::invalid_input, "gen_predictors needs n, p >= 1");
    double lo = p > 1 ? -1.0 / static_cast<double>(p - 1) : -1.0;
    if (!(rho > lo && rho < 1.0)) throw Error(Errc::covariance, "rho outside the valid equicorrelation range");
    MatrixXd cov = MatrixXd::Constant(p, p, rho);
    cov.diagonal().setOnes();
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw Error(Errc::covariance, "equicorrelation matrix is not positive definite");
    MatrixXd l = llt.matrixL();
    std::normal_distribution<double> g;
    MatrixXd x(n, p);
    VectorXd z(p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) z[j] = g(rng);
        VectorXd c = l * z;
        for (Index j = 0; j < p; ++j) x(i, j) = 2.0 * normal_cdf(c[j]) - 1.0;
    }
    return x;
}

// Mean-zero multivariate normal with every component truncated to [-bound, bound],
// drawn by rejection of whole rows.
inline MatrixXd gen_predictors_truncated(Index n, const MatrixXd& cov, double bound, Rng& rng) {
    Eigen::LLT<MatrixXd> llt(cov);
    if (cov.rows() != cov.cols() || llt.info() != Eigen::Success)
        throw Error(Errc::covariance, "predictor covariance is not positive definite");
    MatrixXd l = llt.matrixL();
    const Index p = cov.rows();
    std::normal_distribution<double> g;
    MatrixXd x(n, p);
    VectorXd z(p);
    for (Index i = 0; i < n; ++i) {
        for (int tries = 0;; ++tries) {
            if (tries > 100000) throw Error(Errc::covariance, "truncation region has negligible mass");
            for (Index j = 0; j < p; ++j) z[j] = g(rng);
            VectorXd c = l * z;
            if (c.cwiseAbs().maxCoeff() <= bound) {
                x.row(i) = c.transpose();
                break;
            }
        }
    }
    return x;
}

// p = 5, variances 0.1, corr(X1,X2) = corr(X1,X3) = 0.5, corr(X2,X3) = 0.25; truncation 10.
inline MatrixXd euclidean_design_covariance() {
    MatrixXd c = MatrixXd::Identity(5, 5);
    c(0, 1) = c(1, 0) = 0.5;
    c(0, 2) = c(2, 0) = 0.5;
    c(1, 2) = c(2, 1) = 0.25;
    return 0.1 * c;
}

// p = 4, variances 0.25, corr 0.3 among X1..X3, corr(X1,X4) = corr(X2,X4) = -0.4; truncation 5.
inline MatrixXd adjacency_design_covariance() {
    MatrixXd c = MatrixXd::Identity(4, 4);
    c(0, 1) = c(1, 0) = 0.3;
    c(0, 2) = c(2, 0) = 0.3;
    c(1, 2) = c(2, 1) = 0.3;
    c(0, 3) = c(3, 0) = -0.4;
    c(1, 3) = c(3, 1) = -0.4;
    return 0.25 * c;
}

namespace detail {
inline VectorXd grid_quantiles(const GridPtr& grid) {
    VectorXd z(grid->size());
    for (Index k = 0; k < z.size(); ++k) z[k] = normal_quantile(grid->probs()[static_cast<std::size_t>(k)]);
    return z;
}
inline GridPtr grid_or_default(const GridPtr& g) { return g ? g : ProbGrid::equispaced(); }
} // namespace detail

// mu ~ N(zeta(t), var 0.25), sigma ~ Exp with mean expit(t); Q = mu + sigma Φ^{-1}.
inline QuantileFunction gen_response_setting1(double t, Link link, const GridPtr& grid, Rng& rng) {
    GridPtr gp = detail::grid_or_default(grid);
    std::normal_distribution<double> mu_d(apply_link(link, t), 0.5);
    std::exponential_distribution<double> sig_d(1.0 / expit(t));
    double mu = mu_d(rng);
    double sigma = sig_d(rng);
    return QuantileFunction{gp, (mu + sigma * detail::grid_quantiles(gp).array()).matrix()};
}

inline double transport(int k, double a) { return a - std::sin(k * a) / std::abs(k); }

// N(mu, 0.1^2) quantiles pushed through T_k, k uniform on {±1, ±2, ±3}.
inline QuantileFunction gen_response_setting2(double t, Link link, const GridPtr& grid, Rng& rng) {
    GridPtr gp = detail::grid_or_default(grid);
    static constexpr std::array<int, 6> ks{-3, -2, -1, 1, 2, 3};
    std::normal_distribution<double> mu_d(apply_link(link, t), 0.5);
    std::uniform_int_distribution<int> k_d(0, 5);
    double mu = mu_d(rng);
    int k = ks[static_cast<std::size_t>(k_d(rng))];
    VectorXd q = mu + 0.1 * detail::grid_quantiles(gp).array();
    for (Index i = 0; i < q.size(); ++i) q[i] = transport(k, q[i]);
    return QuantileFunction{gp, q};
}

// zeta I + eps with zeta = expit(t), eps symmetric i.i.d. uniform on
// [max(0, -zeta), min(1, 1 - zeta)].
inline SymMatrix gen_response_adjacency(double t, Index m, Rng& rng) {
    if (m < 2) throw Error(Errc::invalid_input, "adjacency needs m >= 2");
    double zeta = expit(t);
    std::uniform_real_distribution<double> u(std::max(0.0, -zeta), std::min(1.0, 1.0 - zeta));
    MatrixXd y(m, m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i <= j; ++i) {
            double e = u(rng);
            y(i, j) = e;
            y(j, i) = e;
        }
    y.diagonal().array() += zeta;
    return SymMatrix{y.cwiseMin(1.0).cwiseMax(0.0), MatrixConstraint::unit_box};
}

inline EuclideanVec gen_response_euclidean(double t, Link link, double sd, Rng& rng) {
    VectorXd v(1);
    v[0] = apply_link(link, t);
    if (sd > 0.0) v[0] += std::normal_distribution<double>(0.0, sd)(rng);
    return EuclideanVec{v};
}

// Conditional Fréchet mean at index value t.
inline ObjectValue true_object(const SimSpec& s, double t) {
    switch (s.scenario) {
    case Scenario::dist_setting1: {
        GridPtr g = detail::grid_or_default(s.grid);
        return QuantileFunction{g, (apply_link(s.link, t) + expit(t) * detail::grid_quantiles(g).array()).matrix()};
    }
    case Scenario::dist_setting2: {
        GridPtr g = detail::grid_or_default(s.grid);
        return QuantileFunction{g, (apply_link(s.link, t) + 0.1 * detail::grid_quantiles(g).array()).matrix()};
    }
    case Scenario::adjacency: {
        double zeta = expit(t);
        double lo = std::max(0.0, -zeta), hi = std::min(1.0, 1.0 - zeta);
        MatrixXd y = MatrixXd::Constant(s.nodes, s.nodes, 0.5 * (lo + hi));
        y.diagonal().array() += zeta;
        return SymMatrix{y, MatrixConstraint::unit_box};
    }
    case Scenario::euclidean: {
        VectorXd v(1);
        v[0] = apply_link(s.link, t);
        return EuclideanVec{v};
    }
    }
    return EuclideanVec{};
}

inline MetricSpaceKind scenario_kind(Scenario s) {
    switch (s) {
    case Scenario::dist_setting1:
    case Scenario::dist_setting2: return MetricSpaceKind::wasserstein2;
    case Scenario::adjacency: return MetricSpaceKind::frobenius;
    case Scenario::euclidean: return MetricSpaceKind::euclidean;
    }
    return MetricSpaceKind::euclidean;
}

struct SimData {
    MatrixXd x;
    ResponseSet y;
    std::vector<double> index; // x_i' theta0
};

inline SimData simulate(const SimSpec& s, Rng& rng) {
    validate_spec(s);
    SimData d;
    if (s.design == PredictorDesign::copula) {
        d.x = gen_predictors(s.n, s.p, s.rho, rng);
    } else if (s.p == 5) {
        d.x = gen_predictors_truncated(s.n, euclidean_design_covariance(), 10.0, rng);
    } else if (s.p == 4) {
        d.x = gen_predictors_truncated(s.n, adjacency_design_covariance(), 5.0, rng);
    } else {
        throw Error(Errc::invalid_input, "truncated-normal design is defined for p = 4 or p = 5");
    }
    d.index = project_rows(d.x, s.theta0.full);
    GridPtr g = detail::grid_or_default(s.grid);
    std::vector<ObjectValue> ys;
    ys.reserve(static_cast<std::size_t>(s.n));
    for (double t : d.index) {
        switch (s.scenario) {
        case Scenario::dist_setting1: ys.push_back(gen_response_setting1(t, s.link, g, rng)); break;
        case Scenario::dist_setting2: ys.push_back(gen_response_setting2(t, s.link, g, rng)); break;
        case Scenario::adjacency: ys.push_back(gen_response_adjacency(t, s.nodes, rng)); break;
        case Scenario::euclidean: ys.push_back(gen_response_euclidean(t, s.link, s.noise_sd, rng)); break;
        }
    }
    d.y = ResponseSet::from_objects(ys, scenario_kind(s.scenario));
    return d;
}

struct BiasDev {
    double bias = 0.0;
    double dev = 0.0;
};

// Angle from the intrinsic sphere mean of the estimates to theta0, and the sample
// variance of the angles between each estimate and that mean.
inline BiasDev bias_dev(const std::vector<DirectionParam>& estimates, const DirectionParam& theta0) {
    if (estimates.empty()) throw Error(Errc::invalid_input, "bias_dev needs at least one estimate");
    const Index p = theta0.p();
    const Index n = static_cast<Index>(estimates.size());
    MatrixXd y(p, n);
    for (Index i = 0; i < n; ++i) {
        if (estimates[static_cast<std::size_t>(i)].p() != p) throw Error(Errc::dimension, "estimate has wrong length");
        y.col(i) = estimates[static_cast<std::size_t>(i)].full;
    }
    ObjectShape shape{MetricSpaceKind::sphere_geodesic, nullptr, p, MatrixConstraint::psd};
    VectorXd mean = frechet_mean_coords(shape, y, VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
    BiasDev r;
    r.bias = sphere_angle(mean, theta0.full);
    if (n > 1) {
        VectorXd a(n);
        for (Index i = 0; i < n; ++i) a[i] = sphere_angle(y.col(i), mean);
        r.dev = (a.array() - a.mean()).square().sum() / static_cast<double>(n - 1);
    }
    return r;
}

inline double msd(const std::vector<ObjectValue>& fit, const std::vector<ObjectValue>& truth, MetricSpaceKind kind) {
    if (fit.size() != truth.size()) throw Error(Errc::length_mismatch, "msd needs equal-length lists");
    if (fit.empty()) throw Error(Errc::invalid_input, "msd needs at least one object");
    double s = 0.0;
    for (std::size_t i = 0; i < fit.size(); ++i) {
        double d = distance(fit[i], truth[i], kind);
        s += d * d;
    }
    return s / static_cast<double>(fit.size());
}

inline double rmpe(const std::vector<ObjectValue>& pred, const std::vector<ObjectValue>& test, MetricSpaceKind kind) {
    return std::sqrt(msd(pred, test, kind));
}

struct McRun {
    bool ok = false;
    DirectionParam estimate;
    double msd_ifr = 0.0;
    std::optional<double> msd_gfr;
    double bandwidth = 0.0;
    int bins = 0;
};

struct McReport {
    std::vector<DirectionParam> estimates;
    double bias = 0.0;
    double dev = 0.0;
    std::vector<double> msd_ifr;
    std::vector<double> msd_gfr; // empty unless requested
    std::vector<std::size_t> failed_runs;
    std::vector<McRun> runs;
};

inline std::uint64_t run_data_seed(std::uint64_t seed, std::size_t run) {
    return stream_seed(stream_seed(seed, streams::data), run);
}

inline std::uint64_t run_fit_seed(std::uint64_t seed, std::size_t run) {
    return stream_seed(stream_seed(seed, streams::directions), run);
}

// One generate -> fit run; MSDs are taken at the fit's bin representatives.
inline McRun mc_run(const SimSpec& spec, const FitConfig& base, std::size_t run, bool with_gfr) {
    Rng rng = make_stream(run_data_seed(spec.seed, run), 0);
    SimData d = simulate(spec, rng);
    FitConfig c = base;
    c.seed = run_fit_seed(spec.seed, run);
    c.workers = 1;
    IfrFit fit = fit_ifr(d.x, d.y, c);
    McRun r;
    r.ok = true;
    r.estimate = fit.direction;
    r.bandwidth = fit.bandwidth;
    r.bins = fit.bins_requested;
    std::vector<ObjectValue> truth;
    MatrixXd xr(fit.effective_bins(), d.x.cols());
    for (int l = 0; l < fit.effective_bins(); ++l) {
        Index i = fit.bins.rep_index[static_cast<std::size_t>(l)];
        truth.push_back(true_object(spec, d.index[static_cast<std::size_t>(i)]));
        xr.row(l) = d.x.row(i);
    }
    r.msd_ifr = msd(fit.fitted, truth, fit.kind);
    if (with_gfr) r.msd_gfr = msd(gfr_fit(d.x, d.y, xr), truth, fit.kind);
    return r;
}

inline McReport run_mc_study(const SimSpec& spec, std::size_t runs, const FitConfig& config, unsigned workers = 1,
                             bool with_gfr = false) {
    validate_spec(spec);
    if (runs < 1) throw Error(Errc::invalid_input, "runs must be >= 1");
    std::vector<McRun> out(runs);
    parallel_for(runs, workers, [&](std::size_t r) {
        try {
            out[r] = mc_run(spec, config, r, with_gfr);
        } catch (const Error& e) {
            if (e.is_input_error()) throw;
            out[r] = McRun{};
        }
    });
    McReport rep;
    for (std::size_t r = 0; r < runs; ++r) {
        if (!out[r].ok) {
            rep.failed_runs.push_back(r);
            continue;
        }
        rep.estimates.push_back(out[r].estimate);
        rep.msd_ifr.push_back(out[r].msd_ifr);
        if (out[r].msd_gfr) rep.msd_gfr.push_back(*out[r].msd_gfr);
    }
    if (!rep.estimates.empty()) {
        BiasDev bd = bias_dev(rep.estimates, spec.theta0);
        rep.bias = bd.bias;
        rep.dev = bd.dev;
    }
    rep.runs = std::move(out);
    return rep;
}

struct PowerRow {
    double delta = 0.0;
    int rejections = 0;
    int completed = 0;
    int failures = 0;
    double rate() const { return completed > 0 ? static_cast<double>(rejections) / completed : 0.0; }
};

struct PowerTable {
    double alpha = 0.05;
    std::vector<PowerRow> rows;
};

// Empirical rejection rate of the bootstrap Wald test of H0: theta = 0 under
// theta0 = lift((delta, ..., delta)). Runs at different deltas share their data
// seeds, so the predictors and noise draws are common across the table.
inline PowerTable run_size_power_study(const SimSpec& spec, const std::vector<double>& deltas, std::size_t runs,
                                       double alpha, const FitConfig& config, int bootstrap_b, unsigned workers = 1) {
    if (runs < 1) throw Error(Errc::invalid_input, "runs must be >= 1");
    for (double delta : deltas)
        if (!(static_cast<double>(spec.p - 1) * delta * delta < 1.0)) {
            std::ostringstream msg;
            msg << "delta = " << delta << " puts the alternative outside the unit ball for p = " << spec.p;
            throw Error(Errc::out_of_ball, msg.str());
        }
    PowerTable table;
    table.alpha = alpha;
    for (double delta : deltas) {
        SimSpec s = spec;
        s.theta0 = lift(VectorXd::Constant(spec.p - 1, delta));
        validate_spec(s);
        std::vector<int> outcome(runs, -1); // -1 failed, 0 accept, 1 reject
        parallel_for(runs, workers, [&](std::size_t r) {
            try {
                Rng rng = make_stream(run_data_seed(s.seed, r), 0);
                SimData d = simulate(s, rng);
                FitConfig c = config;
                c.seed = run_fit_seed(s.seed, r);
                c.workers = 1;
                IfrFit fit = fit_ifr(d.x, d.y, c);
                BootstrapResult br = bootstrap_lambda(d.x, d.y, fit, c, bootstrap_b, stream_seed(c.seed, 7));
                const Index k = s.p - 1;
                TestResult t = wald_test(fit.direction.reduced, MatrixXd::Identity(k, k), VectorXd::Zero(k), br.lambda,
                                         fit.effective_bins(), alpha);
                outcome[r] = t.reject ? 1 : 0;
            } catch (const Error& e) {
                if (e.is_input_error()) throw;
                outcome[r] = -1;
            }
        });
        PowerRow row;
        row.delta = delta;
        for (int o : outcome) {
            if (o < 0) ++row.failures;
            else {
                ++row.completed;
                row.rejections += o;
            }
        }
        table.rows.push_back(row);
    }
    return table;
}

} // namespace ifr
