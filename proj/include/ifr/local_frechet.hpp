#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "direction.hpp"
#include "metric_spaces.hpp"
#include "parallel.hpp"

namespace ifr {

enum class KernelFamily { epanechnikov, gaussian_truncated };

inline const char* kernel_name(KernelFamily k) {
    return k == KernelFamily::epanechnikov ? "epanechnikov" : "gaussian";
}

inline KernelFamily parse_kernel(const std::string& s) {
    if (s == "epanechnikov") return KernelFamily::epanechnikov;
    if (s == "gaussian") return KernelFamily::gaussian_truncated;
    throw Error(Errc::invalid_input, "unknown kernel '" + s + "'");
}

struct KernelSpec {
    KernelFamily family = KernelFamily::epanechnikov;
    double bandwidth = 1.0;

    // Half-width of the support in units of u.
    double support() const { return family == KernelFamily::epanechnikov ? 1.0 : 4.0; }

    double unit(double u) const {
        double a = std::abs(u);
        if (family == KernelFamily::epanechnikov) return a <= 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
        if (a > 4.0) return 0.0;
        // standard normal density renormalized over [-4, 4]
        static const double c = 1.0 / (std::sqrt(2.0 * M_PI) * std::erf(4.0 / std::sqrt(2.0)));
        return c * std::exp(-0.5 * u * u);
    }

    // K_b(d) = K(d/b)/b
    double operator()(double d) const { return unit(d / bandwidth) / bandwidth; }
};

struct LocalWeights {
    double mu0 = 0, mu1 = 0, mu2 = 0;
    double sigma0_sq = 0;
    VectorXd s;
};

// Empirical local linear weights at t. Entries excluded by `include` (when given)
// get weight 0 and do not count towards n.
inline LocalWeights empirical_weights(const std::vector<double>& proj, double t, const KernelSpec& kernel,
                                      const std::vector<char>* include = nullptr) {
    if (!(kernel.bandwidth > 0.0)) throw Error(Errc::invalid_input, "bandwidth must be positive");
    const std::size_t n_all = proj.size();
    LocalWeights lw;
    lw.s = VectorXd::Zero(static_cast<Index>(n_all));
    std::size_t n = 0;
    bool all_at_t = true;
    for (std::size_t i = 0; i < n_all; ++i) {
        if (include && !(*include)[i]) continue;
        ++n;
        double d = proj[i] - t;
        double k = kernel(d);
        lw.s[static_cast<Index>(i)] = k;
        if (k > 0.0) {
            lw.mu0 += k;
            lw.mu1 += k * d;
            lw.mu2 += k * d * d;
            all_at_t = all_at_t && d == 0.0;
        }
    }
    if (n < 2 || lw.mu0 <= 0.0) throw LocalDataError(t, kernel.bandwidth);
    const double inv_n = 1.0 / static_cast<double>(n);
    lw.mu0 *= inv_n;
    lw.mu1 *= inv_n;
    lw.mu2 *= inv_n;
    lw.sigma0_sq = lw.mu2 * lw.mu0 - lw.mu1 * lw.mu1;
    if (all_at_t) {
        // Every point with kernel mass sits at t: the local line is unidentified but
        // its value at t is not, and the weights reduce to K_b(0)/mu0.
        lw.s /= lw.mu0;
        return lw;
    }
    if (lw.sigma0_sq <= 1e-12 || lw.sigma0_sq <= 1e-10 * lw.mu0 * lw.mu2) throw LocalDataError(t, kernel.bandwidth);
    for (std::size_t i = 0; i < n_all; ++i) {
        double& s = lw.s[static_cast<Index>(i)];
        if (s != 0.0) s = s * (lw.mu2 - lw.mu1 * (proj[i] - t)) / lw.sigma0_sq;
    }
    return lw;
}

// Fréchet weights Ŝ_i / ΣŜ.
inline VectorXd llfr_weights(const std::vector<double>& proj, double t, const KernelSpec& kernel,
                             const std::vector<char>* include = nullptr) {
    LocalWeights lw = empirical_weights(proj, t, kernel, include);
    double total = lw.s.sum();
    if (!(std::abs(total) > 0.0)) throw LocalDataError(t, kernel.bandwidth);
    return lw.s / total;
}

inline VectorXd llfr_coords(const ResponseSet& y, const std::vector<double>& proj, double t, const KernelSpec& kernel,
                            const std::vector<char>* include = nullptr) {
    if (static_cast<Index>(proj.size()) != y.size())
        throw Error(Errc::dimension, "responses and projections differ in length");
    return frechet_mean_coords(y.shape(), y.coords(), llfr_weights(proj, t, kernel, include));
}

inline ObjectValue llfr_fit_at(const std::vector<ObjectValue>& responses, const std::vector<double>& proj, double t,
                               const KernelSpec& kernel, MetricSpaceKind kind) {
    if (responses.size() != proj.size()) throw Error(Errc::dimension, "responses and projections differ in length");
    ResponseSet y = ResponseSet::from_objects(responses, kind);
    return from_coords(y.shape(), llfr_coords(y, proj, t, kernel));
}

inline bool is_fit_failure(const Error& e) {
    switch (e.code()) {
    case Errc::insufficient_local_data:
    case Errc::degenerate_mean:
    case Errc::invalid_weights:
        return true;
    default:
        return false;
    }
}

// 10 geometric values spanning [range/20, range/2].
inline std::vector<double> default_bandwidth_grid(const std::vector<double>& proj, std::size_t count = 10) {
    if (proj.empty()) throw Error(Errc::invalid_input, "no projections");
    auto [lo, hi] = std::minmax_element(proj.begin(), proj.end());
    double range = *hi - *lo;
    if (!(range > 0.0)) throw Error(Errc::degenerate_projection, "all projections are identical");
    std::vector<double> out(count);
    double a = range / 20.0, b = range / 2.0;
    for (std::size_t k = 0; k < count; ++k)
        out[k] = count == 1 ? b : a * std::pow(b / a, static_cast<double>(k) / static_cast<double>(count - 1));
    return out;
}

struct CvResult {
    double selected = 0.0;
    std::vector<double> candidates; // ascending
    std::vector<double> scores;     // aligned with candidates; +inf marks infeasible
};

// Cross-validated squared-distance score of bandwidth b: k-fold with fold(i) = i mod
// folds when n > 30, leave-one-out otherwise.
inline double cv_bandwidth_score(const ResponseSet& y, const std::vector<double>& proj, double b, int folds,
                                 KernelFamily family) {
    const std::size_t n = proj.size();
    const bool kfold = n > 30;
    const std::size_t nf = kfold ? static_cast<std::size_t>(folds) : n;
    if (kfold && folds < 2) throw Error(Errc::invalid_input, "folds must be >= 2");
    KernelSpec kernel{family, b};
    std::vector<char> include(n);
    double total = 0.0;
    try {
        for (std::size_t f = 0; f < nf; ++f) {
            for (std::size_t i = 0; i < n; ++i) include[i] = (i % nf) != f;
            for (std::size_t i = f; i < n; i += nf) {
                VectorXd fit = llfr_coords(y, proj, proj[i], kernel, &include);
                total += squared_distance(y.shape(), y.coords().col(static_cast<Index>(i)), fit);
            }
        }
    } catch (const Error& e) {
        if (is_fit_failure(e)) return std::numeric_limits<double>::infinity();
        throw;
    }
    return total / static_cast<double>(n);
}

inline CvResult cv_bandwidth_scores(const ResponseSet& y, const std::vector<double>& proj,
                                    std::vector<double> candidates, int folds = 5,
                                    KernelFamily family = KernelFamily::epanechnikov, unsigned workers = 1) {
    if (candidates.empty()) throw Error(Errc::invalid_input, "no bandwidth candidates");
    if (static_cast<Index>(proj.size()) != y.size())
        throw Error(Errc::dimension, "responses and projections differ in length");
    for (double b : candidates)
        if (!(b > 0.0)) throw Error(Errc::invalid_input, "bandwidth candidates must be positive");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    CvResult r;
    r.candidates = candidates;
    r.scores.assign(candidates.size(), 0.0);
    parallel_for(candidates.size(), workers,
                 [&](std::size_t k) { r.scores[k] = cv_bandwidth_score(y, proj, candidates[k], folds, family); });
    double best = std::numeric_limits<double>::infinity();
    bool found = false;
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (r.scores[k] < best) {
            best = r.scores[k];
            r.selected = candidates[k];
            found = true;
        }
    if (!found) throw Error(Errc::no_feasible_bandwidth, "every bandwidth candidate failed");
    return r;
}

inline double cv_bandwidth(const MatrixXd& x, const ResponseSet& y, const DirectionParam& dir,
                           const std::vector<double>& candidates, int folds = 5,
                           KernelFamily family = KernelFamily::epanechnikov) {
    return cv_bandwidth_scores(y, project_rows(x, dir.full), candidates, folds, family).selected;
}

} // namespace ifr
