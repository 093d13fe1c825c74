#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "chi_square.hpp"
#include "direction.hpp"
#include "index_fit.hpp"
#include "parallel.hpp"

namespace ifr {

// The fit's bin representatives and tuning, reused to evaluate
// f_l(theta) = d^2(Y_l, m(X_l' r(theta), r(theta))) at shifted directions.
struct DifferenceContext {
    const MatrixXd* x = nullptr;
    const ResponseSet* y = nullptr;
    std::vector<Index> reps;
    double bandwidth = 0.0;
    KernelFamily kernel = KernelFamily::epanechnikov;
    unsigned workers = 1;
    Index m() const { return static_cast<Index>(reps.size()); }
};

inline DifferenceContext difference_context(const IfrFit& fit, const MatrixXd& x, const ResponseSet& y,
                                            unsigned workers = 1) {
    return DifferenceContext{&x, &y, fit.bins.rep_index, fit.bandwidth, fit.kernel, workers};
}

inline double default_step(Index m) { return std::pow(static_cast<double>(m), -0.2); }

inline VectorXd f_values(const DifferenceContext& ctx, const VectorXd& theta) {
    DirectionParam d = lift(theta);
    std::vector<double> proj = project_rows(*ctx.x, d.full);
    KernelSpec kernel{ctx.kernel, ctx.bandwidth};
    VectorXd f(ctx.m());
    for (Index l = 0; l < ctx.m(); ++l) {
        Index r = ctx.reps[static_cast<std::size_t>(l)];
        VectorXd fit = llfr_coords(*ctx.y, proj, proj[static_cast<std::size_t>(r)], kernel);
        f[l] = squared_distance(ctx.y->shape(), ctx.y->coords().col(r), fit);
    }
    return f;
}

namespace detail {

inline bool inside_ball(const VectorXd& t) { return t.squaredNorm() < 1.0; }

// +1 for a forward step along e_r, -1 for backward when the forward point (reach*h
// away) leaves the unit ball.
inline VectorXd step_signs(const VectorXd& theta, double h, double reach) {
    VectorXd s(theta.size());
    for (Index r = 0; r < theta.size(); ++r) {
        VectorXd t = theta;
        t[r] += reach * h;
        if (inside_ball(t)) {
            s[r] = 1.0;
            continue;
        }
        t[r] = theta[r] - reach * h;
        if (!inside_ball(t)) throw Error(Errc::step, "finite-difference step leaves the unit ball; shrink h");
        s[r] = -1.0;
    }
    return s;
}

inline VectorXd shifted(const VectorXd& theta, Index r, double dr, Index s = -1, double ds = 0.0) {
    VectorXd t = theta;
    t[r] += dr;
    if (s >= 0) t[s] += ds;
    if (!inside_ball(t)) throw Error(Errc::step, "finite-difference step leaves the unit ball; shrink h");
    return t;
}

// Per-bin values f_l(theta); the finite-difference estimators below only need this.
using BinFunction = std::function<VectorXd(const VectorXd&)>;

// Difference quotients q(l, r) = sigma_r (f_l(theta + sigma_r h e_r) - f_l(theta)) / h.
inline MatrixXd first_quotients(const BinFunction& f, const VectorXd& theta, double h, unsigned workers) {
    if (!(h > 0.0)) throw Error(Errc::invalid_input, "finite-difference step must be positive");
    const Index k = theta.size();
    VectorXd sg = step_signs(theta, h, 1.0);
    VectorXd f0 = f(theta);
    MatrixXd q(f0.size(), k);
    std::vector<VectorXd> fr(static_cast<std::size_t>(k));
    parallel_for(static_cast<std::size_t>(k), workers, [&](std::size_t r) {
        fr[r] = f(shifted(theta, static_cast<Index>(r), sg[static_cast<Index>(r)] * h));
    });
    for (Index r = 0; r < k; ++r) q.col(r) = sg[r] * (fr[static_cast<std::size_t>(r)] - f0) / h;
    return q;
}

inline VectorXd forward_gradient(const BinFunction& f, const VectorXd& theta, double h, unsigned workers = 1) {
    return first_quotients(f, theta, h, workers).colwise().mean().transpose();
}

// (1/(h^2 M)) sum_l of second forward differences, symmetrized.
inline MatrixXd forward_hessian(const BinFunction& f, const VectorXd& theta, double h, unsigned workers = 1) {
    if (!(h > 0.0)) throw Error(Errc::invalid_input, "finite-difference step must be positive");
    const Index k = theta.size();
    VectorXd sg = step_signs(theta, h, 2.0);
    VectorXd v0 = f(theta);
    const double f0 = v0.sum();
    const double m = static_cast<double>(v0.size());
    std::vector<double> f1(static_cast<std::size_t>(k));
    parallel_for(static_cast<std::size_t>(k), workers, [&](std::size_t r) {
        Index ri = static_cast<Index>(r);
        f1[r] = f(shifted(theta, ri, sg[ri] * h)).sum();
    });
    std::vector<std::pair<Index, Index>> pairs;
    for (Index r = 0; r < k; ++r)
        for (Index s = r; s < k; ++s) pairs.emplace_back(r, s);
    std::vector<double> f2(pairs.size());
    parallel_for(pairs.size(), workers, [&](std::size_t i) {
        auto [r, s] = pairs[i];
        f2[i] = f(shifted(theta, r, sg[r] * h, s, sg[s] * h)).sum();
    });
    MatrixXd hm(k, k);
    const double scale = 1.0 / (h * h * m);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        auto [r, s] = pairs[i];
        double v = (f2[i] - f1[static_cast<std::size_t>(r)] - f1[static_cast<std::size_t>(s)] + f0) * scale /
                   (sg[r] * sg[s]);
        hm(r, s) = v;
        hm(s, r) = v;
    }
    return (hm + hm.transpose()) * 0.5;
}

// Sample covariance (divisor M) of the first difference quotients over bins.
inline MatrixXd quotient_covariance(const BinFunction& f, const VectorXd& theta, double h, unsigned workers = 1) {
    MatrixXd q = first_quotients(f, theta, h, workers);
    VectorXd mean = q.colwise().mean().transpose();
    MatrixXd s = (q.transpose() * q) / static_cast<double>(q.rows()) - mean * mean.transpose();
    return (s + s.transpose()) * 0.5;
}

} // namespace detail

inline detail::BinFunction bin_function(const DifferenceContext& ctx) {
    return [&ctx](const VectorXd& theta) { return f_values(ctx, theta); };
}

inline VectorXd grad_vn(const DifferenceContext& ctx, const VectorXd& theta, double h) {
    return detail::forward_gradient(bin_function(ctx), theta, h, ctx.workers);
}

inline MatrixXd hess_vn(const DifferenceContext& ctx, const VectorXd& theta, double h) {
    return detail::forward_hessian(bin_function(ctx), theta, h, ctx.workers);
}

inline MatrixXd sigma_hat(const DifferenceContext& ctx, const VectorXd& theta, double h) {
    return detail::quotient_covariance(bin_function(ctx), theta, h, ctx.workers);
}

inline double condition_number(const MatrixXd& a) {
    Eigen::JacobiSVD<MatrixXd> svd(a);
    const VectorXd& sv = svd.singularValues();
    if (sv.size() == 0) return 1.0;
    double lo = sv[sv.size() - 1];
    return lo > 0.0 ? sv[0] / lo : std::numeric_limits<double>::infinity();
}

inline MatrixXd lambda_plugin(const MatrixXd& sigma, const MatrixXd& hess) {
    if (sigma.rows() != hess.rows() || hess.rows() != hess.cols() || sigma.rows() != sigma.cols())
        throw Error(Errc::dimension, "sigma and hessian must be square of equal size");
    MatrixXd hs = (hess + hess.transpose()) * 0.5;
    if (!(condition_number(hs) < 1e12)) throw Error(Errc::singular, "hessian is singular; use the bootstrap");
    MatrixXd hinv = hs.inverse();
    MatrixXd l = hinv * sigma * hinv;
    return (l + l.transpose()) * 0.5;
}

// d full / d reduced for full = (sqrt(1 - |theta|^2), theta).
inline MatrixXd direction_jacobian(const VectorXd& theta) {
    const Index k = theta.size();
    double r2 = theta.squaredNorm();
    if (!(r2 < 1.0)) throw Error(Errc::out_of_ball, "reduced direction must satisfy |theta| < 1");
    MatrixXd j = MatrixXd::Zero(k + 1, k);
    j.row(0) = -theta.transpose() / std::sqrt(1.0 - r2);
    j.bottomRows(k).setIdentity();
    return j;
}

enum class CovarianceSource { plugin, bootstrap };

struct CovarianceEstimate {
    MatrixXd sigma_hat;
    MatrixXd hess;
    MatrixXd lambda;
    CovarianceSource source = CovarianceSource::bootstrap;
    MatrixXd jacobian;
    double step = 0.0; // finite-difference step actually used (plugin only)
};

inline CovarianceEstimate plugin_covariance(const DifferenceContext& ctx, const VectorXd& theta,
                                            std::optional<double> h = std::nullopt) {
    double step = h ? *h : default_step(ctx.m());
    CovarianceEstimate ce;
    // Halve the step until every shifted direction stays inside the unit ball.
    for (int tries = 0;; ++tries) {
        try {
            ce.sigma_hat = sigma_hat(ctx, theta, step);
            ce.hess = hess_vn(ctx, theta, step);
            break;
        } catch (const Error& e) {
            if (e.code() != Errc::step || tries >= 30) throw;
            step *= 0.5;
        }
    }
    ce.step = step;
    ce.lambda = lambda_plugin(ce.sigma_hat, ce.hess);
    ce.source = CovarianceSource::plugin;
    ce.jacobian = direction_jacobian(theta);
    return ce;
}

struct BootstrapResult {
    MatrixXd lambda;
    std::vector<VectorXd> replicates; // successful replicates, in replicate order
    int requested = 0;
    int failures = 0;
};

// Generic bootstrap: `estimate(sample_indices, replicate)` returns the reduced
// direction re-estimated on the resample, or throws ifr::Error on failure.
template <class Estimator>
BootstrapResult bootstrap_lambda_with(Index n, const VectorXd& theta_hat, int m, int b, std::uint64_t seed,
                                      unsigned workers, Estimator&& estimate) {
    if (b < 50) throw Error(Errc::invalid_input, "bootstrap needs B >= 50");
    if (n < 1 || m < 1) throw Error(Errc::invalid_input, "bootstrap needs n >= 1 and M >= 1");
    const std::uint64_t root = stream_seed(seed, streams::bootstrap);
    std::vector<std::optional<VectorXd>> reps(static_cast<std::size_t>(b));
    parallel_for(static_cast<std::size_t>(b), workers, [&](std::size_t r) {
        Rng rng = make_stream(root, r);
        std::uniform_int_distribution<Index> pick(0, n - 1);
        std::vector<Index> idx(static_cast<std::size_t>(n));
        for (auto& i : idx) i = pick(rng);
        try {
            VectorXd th = estimate(idx, r);
            if (th.size() != theta_hat.size()) throw Error(Errc::dimension, "bootstrap estimate has wrong size");
            reps[r] = std::move(th);
        } catch (const Error&) {
            reps[r].reset();
        }
    });
    BootstrapResult out;
    out.requested = b;
    const Index k = theta_hat.size();
    MatrixXd acc = MatrixXd::Zero(k, k);
    for (auto& r : reps) {
        if (!r) {
            ++out.failures;
            continue;
        }
        VectorXd d = *r - theta_hat;
        acc.noalias() += d * d.transpose();
        out.replicates.push_back(*r);
    }
    if (out.failures > 0.2 * b)
        throw Error(Errc::bootstrap_failure,
                    std::to_string(out.failures) + " of " + std::to_string(b) + " bootstrap replicates failed");
    MatrixXd l = acc * (static_cast<double>(m) / static_cast<double>(out.replicates.size()));
    out.lambda = (l + l.transpose()) * 0.5;
    return out;
}

// Bootstrap of the IFR direction with (b*, M*) and the direction-grid seed held fixed.
inline BootstrapResult bootstrap_lambda(const MatrixXd& x, const ResponseSet& y, const IfrFit& fit,
                                        const FitConfig& config, int b, std::uint64_t seed) {
    FitConfig c = config;
    c.fixed_bandwidth = fit.bandwidth;
    c.fixed_bins = fit.bins_requested;
    c.workers = 1;
    return bootstrap_lambda_with(x.rows(), fit.direction.reduced, fit.effective_bins(), b, seed, config.workers,
                                 [&](const std::vector<Index>& idx, std::size_t) {
                                     MatrixXd xb(static_cast<Index>(idx.size()), x.cols());
                                     for (std::size_t i = 0; i < idx.size(); ++i)
                                         xb.row(static_cast<Index>(i)) = x.row(idx[i]);
                                     return fit_ifr(xb, y.subset(idx), c).direction.reduced;
                                 });
}

struct TestResult {
    double statistic = 0.0;
    int df = 0;
    double p_value = 1.0;
    double alpha = 0.05;
    bool reject = false;
};

inline TestResult test_from_statistic(double t, int df, double alpha) {
    if (df < 1) throw Error(Errc::invalid_input, "df must be >= 1");
    if (!(t >= 0.0)) throw Error(Errc::invalid_input, "test statistic must be >= 0");
    TestResult r;
    r.statistic = t;
    r.df = df;
    r.alpha = alpha;
    r.p_value = chi2_sf(t, df);
    r.reject = r.p_value < alpha;
    return r;
}

// T = (B theta - zeta)' (B (Lambda/M) B')^{-1} (B theta - zeta), df = rows of B.
inline TestResult wald_test(const VectorXd& theta_sub, const MatrixXd& bmat, const VectorXd& zeta,
                            const MatrixXd& lambda_sub, int m, double alpha = 0.05) {
    const Index k = theta_sub.size(), q = bmat.rows();
    if (bmat.cols() != k || zeta.size() != q || lambda_sub.rows() != k || lambda_sub.cols() != k)
        throw Error(Errc::dimension, "hypothesis dimensions do not match the parameter");
    if (q < 1 || q > k) throw Error(Errc::rank, "hypothesis matrix must have 1..k rows");
    Eigen::FullPivLU<MatrixXd> lu(bmat);
    if (lu.rank() < q) throw Error(Errc::rank, "hypothesis matrix is rank deficient");
    if (m < 1) throw Error(Errc::invalid_input, "M must be >= 1");
    MatrixXd v = bmat * (lambda_sub / static_cast<double>(m)) * bmat.transpose();
    v = (v + v.transpose()) * 0.5;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(v);
    double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin >= 1e12) throw Error(Errc::singular, "B (Lambda/M) B' is not invertible");
    VectorXd r = bmat * theta_sub - zeta;
    VectorXd u = es.eigenvectors().transpose() * r;
    double t = (u.array().square() / es.eigenvalues().array()).sum();
    return test_from_statistic(std::max(0.0, t), static_cast<int>(q), alpha);
}

struct ConfidenceRegion {
    VectorXd center;
    MatrixXd shape; // (Lambda/M)^{-1}
    double threshold = 0.0;
    double level = 0.95;

    double quadratic_form(const VectorXd& theta) const {
        VectorXd d = center - theta;
        return d.dot(shape * d);
    }
    bool contains(const VectorXd& theta) const {
        return theta.squaredNorm() < 1.0 && quadratic_form(theta) <= threshold;
    }
    // Boundary of a 2-D region: center + sqrt(c) Q D^{-1/2} (cos a, sin a).
    std::vector<VectorXd> boundary(std::size_t count) const {
        if (center.size() != 2) throw Error(Errc::dimension, "ellipse boundary needs a 2-D region");
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(shape);
        MatrixXd a = es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
        std::vector<VectorXd> pts;
        pts.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            double ang = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(count);
            VectorXd u(2);
            u << std::cos(ang), std::sin(ang);
            pts.push_back(center + std::sqrt(threshold) * (a * u));
        }
        return pts;
    }
};

inline ConfidenceRegion confidence_region(const VectorXd& theta_sub, const MatrixXd& lambda_sub, int m,
                                          double gamma) {
    const Index k = theta_sub.size();
    if (lambda_sub.rows() != k || lambda_sub.cols() != k) throw Error(Errc::dimension, "lambda size mismatch");
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error(Errc::invalid_input, "gamma must lie in (0,1)");
    MatrixXd cov = (lambda_sub + lambda_sub.transpose()) * (0.5 / static_cast<double>(m));
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov);
    double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin >= 1e12) throw Error(Errc::degenerate_region, "Lambda/M is not positive definite");
    ConfidenceRegion cr;
    cr.center = theta_sub;
    cr.shape = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    cr.shape = (cr.shape + cr.shape.transpose()) * 0.5;
    cr.threshold = chi2_quantile(1.0 - gamma, static_cast<double>(k));
    cr.level = 1.0 - gamma;
    return cr;
}

// Power against theta_delta = (delta, ..., delta) in R^{p-1}.
inline double power_at(double delta, int m, int p, const MatrixXd& lambda_delta, double alpha = 0.05) {
    if (p < 2) throw Error(Errc::invalid_input, "power_at needs p >= 2");
    const Index k = p - 1;
    if (lambda_delta.rows() != k || lambda_delta.cols() != k) throw Error(Errc::dimension, "lambda must be (p-1)x(p-1)");
    MatrixXd ls = (lambda_delta + lambda_delta.transpose()) * 0.5;
    if (!(condition_number(ls) < 1e12)) throw Error(Errc::singular, "lambda is singular");
    VectorXd th = VectorXd::Constant(k, delta);
    double rho = static_cast<double>(m) * th.dot(ls.ldlt().solve(th));
    double crit = chi2_quantile(1.0 - alpha, static_cast<double>(k));
    return noncentral_chi2_sf(crit, static_cast<double>(k), std::max(0.0, rho));
}

struct StepwiseCandidate {
    Index column = 0;
    double statistic = 0.0;
    double p_value = 1.0;
    bool failed = false;
};

struct StepwiseStep {
    std::vector<Index> model;
    std::vector<StepwiseCandidate> candidates;
    std::optional<Index> entered;
};

struct StepwiseReport {
    std::vector<StepwiseStep> steps;
    std::vector<Index> model;
};

// Forward selection: at each step every remaining column is added in turn, the
// model is refit and the bootstrap Wald test of its coefficient = 0 is computed;
// the smallest p-value enters if below alpha_enter.
inline StepwiseReport stepwise_select(const MatrixXd& x, const ResponseSet& y, const FitConfig& config, int b,
                                      double alpha_enter, std::uint64_t seed, std::vector<Index> initial = {0}) {
    if (initial.empty()) throw Error(Errc::invalid_input, "stepwise needs an initial column");
    StepwiseReport rep;
    rep.model = initial;
    for (;;) {
        StepwiseStep step;
        step.model = rep.model;
        for (Index c = 0; c < x.cols(); ++c) {
            if (std::find(rep.model.begin(), rep.model.end(), c) != rep.model.end()) continue;
            StepwiseCandidate cand;
            cand.column = c;
            std::vector<Index> cols = rep.model;
            cols.push_back(c);
            MatrixXd xs(x.rows(), static_cast<Index>(cols.size()));
            for (std::size_t j = 0; j < cols.size(); ++j) xs.col(static_cast<Index>(j)) = x.col(cols[j]);
            try {
                IfrFit fit = fit_ifr(xs, y, config);
                BootstrapResult br = bootstrap_lambda(xs, y, fit, config, b, seed);
                const Index k = fit.direction.reduced.size();
                MatrixXd bm = MatrixXd::Zero(1, k);
                bm(0, k - 1) = 1.0;
                TestResult t = wald_test(fit.direction.reduced, bm, VectorXd::Zero(1), br.lambda,
                                         fit.effective_bins(), alpha_enter);
                cand.statistic = t.statistic;
                cand.p_value = t.p_value;
            } catch (const Error& e) {
                if (e.is_input_error()) throw;
                cand.failed = true;
            }
            step.candidates.push_back(cand);
        }
        const StepwiseCandidate* best = nullptr;
        for (const auto& c : step.candidates)
            if (!c.failed && c.p_value < alpha_enter && (!best || c.p_value < best->p_value)) best = &c;
        if (best) {
            step.entered = best->column;
            rep.model.push_back(best->column);
        }
        bool stop = !best || step.candidates.size() <= 1;
        rep.steps.push_back(std::move(step));
        if (stop) break;
    }
    return rep;
}

} // namespace ifr
