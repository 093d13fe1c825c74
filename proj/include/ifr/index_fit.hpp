#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "direction.hpp"
#include "local_frechet.hpp"
#include "metric_spaces.hpp"
#include "parallel.hpp"

namespace ifr {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct BinnedSample {
    std::vector<double> edges;          // requested + 1 values over [min, max]
    std::vector<Index> rep_index;       // one per nonempty bin
    std::vector<double> rep_projection;
    std::vector<int> bin_id;            // position of each nonempty bin among the requested ones
    int requested = 0;
    int effective() const { return static_cast<int>(rep_index.size()); }
};

inline BinnedSample make_bins(const std::vector<double>& proj, int m) {
    if (m < 1) throw Error(Errc::invalid_input, "bin count must be >= 1");
    if (proj.empty()) throw Error(Errc::invalid_input, "no projections");
    auto [lo_it, hi_it] = std::minmax_element(proj.begin(), proj.end());
    const double lo = *lo_it, hi = *hi_it;
    if (!(hi > lo)) throw Error(Errc::degenerate_projection, "all projections are identical");
    const double width = (hi - lo) / m;
    BinnedSample bs;
    bs.requested = m;
    bs.edges.resize(static_cast<std::size_t>(m) + 1);
    for (int k = 0; k < m; ++k) bs.edges[static_cast<std::size_t>(k)] = lo + k * width;
    bs.edges.back() = hi;

    std::vector<Index> best(static_cast<std::size_t>(m), -1);
    std::vector<double> best_gap(static_cast<std::size_t>(m), kInf);
    for (std::size_t i = 0; i < proj.size(); ++i) {
        int k = static_cast<int>(std::floor((proj[i] - lo) / width));
        k = std::clamp(k, 0, m - 1);
        double mid = lo + (k + 0.5) * width;
        double gap = std::abs(proj[i] - mid);
        if (gap < best_gap[static_cast<std::size_t>(k)]) {
            best_gap[static_cast<std::size_t>(k)] = gap;
            best[static_cast<std::size_t>(k)] = static_cast<Index>(i);
        }
    }
    for (int k = 0; k < m; ++k) {
        Index r = best[static_cast<std::size_t>(k)];
        if (r < 0) continue;
        bs.rep_index.push_back(r);
        bs.rep_projection.push_back(proj[static_cast<std::size_t>(r)]);
        bs.bin_id.push_back(k);
    }
    return bs;
}

inline BinnedSample make_bins(const MatrixXd& x, const DirectionParam& dir, int m) {
    return make_bins(project_rows(x, dir.full), m);
}

// {ceil(n^0.2), ceil(n^0.25), ceil(n^0.3)} without duplicates.
inline std::vector<int> default_bin_grid(Index n) {
    std::vector<int> out;
    for (double g : {0.2, 0.25, 0.3}) {
        int m = static_cast<int>(std::ceil(std::pow(static_cast<double>(n), g) - 1e-9));
        m = std::max(m, 1);
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
}

struct CriterionEval {
    double value = kInf;
    std::vector<VectorXd> fitted; // one per effective bin
};

// V_n at the given projections; throws on llfr failure.
inline CriterionEval evaluate_criterion(const ResponseSet& y, const std::vector<double>& proj, const BinnedSample& bins,
                                        const KernelSpec& kernel) {
    CriterionEval ce;
    double total = 0.0;
    ce.fitted.reserve(bins.rep_index.size());
    for (std::size_t l = 0; l < bins.rep_index.size(); ++l) {
        VectorXd fit = llfr_coords(y, proj, bins.rep_projection[l], kernel);
        total += squared_distance(y.shape(), y.coords().col(bins.rep_index[l]), fit);
        ce.fitted.push_back(std::move(fit));
    }
    ce.value = total / static_cast<double>(bins.rep_index.size());
    return ce;
}

inline double criterion_at(const ResponseSet& y, const std::vector<double>& proj, double b, int m,
                           KernelFamily family) {
    try {
        return evaluate_criterion(y, proj, make_bins(proj, m), KernelSpec{family, b}).value;
    } catch (const Error& e) {
        if (is_fit_failure(e) || e.code() == Errc::degenerate_projection) return kInf;
        throw;
    }
}

inline double criterion_vn(const MatrixXd& x, const ResponseSet& y, const DirectionParam& dir, double b, int m,
                           KernelFamily family = KernelFamily::epanechnikov) {
    if (x.rows() != y.size()) throw Error(Errc::dimension, "predictor and response counts differ");
    std::vector<double> proj = project_rows(x, dir.full);
    BinnedSample bins = make_bins(proj, m);
    try {
        return evaluate_criterion(y, proj, bins, KernelSpec{family, b}).value;
    } catch (const Error& e) {
        if (is_fit_failure(e)) return kInf;
        throw;
    }
}

struct BinCvResult {
    int selected = 0;
    std::vector<int> candidates; // ascending, deduplicated
    std::vector<double> scores;
};

// Leave-one-bin-out score: the fit at bin l omits the representative itself.
inline double cv_bins_score(const ResponseSet& y, const std::vector<double>& proj, double b, int m,
                            KernelFamily family) {
    BinnedSample bins = make_bins(proj, m);
    KernelSpec kernel{family, b};
    std::vector<char> include(proj.size(), 1);
    double total = 0.0;
    try {
        for (std::size_t l = 0; l < bins.rep_index.size(); ++l) {
            Index r = bins.rep_index[l];
            include[static_cast<std::size_t>(r)] = 0;
            VectorXd fit = llfr_coords(y, proj, bins.rep_projection[l], kernel, &include);
            include[static_cast<std::size_t>(r)] = 1;
            total += squared_distance(y.shape(), y.coords().col(r), fit);
        }
    } catch (const Error& e) {
        if (is_fit_failure(e)) return kInf;
        throw;
    }
    return total / static_cast<double>(bins.rep_index.size());
}

inline BinCvResult cv_bins_scores(const ResponseSet& y, const std::vector<double>& proj, double b,
                                  std::vector<int> candidates, KernelFamily family = KernelFamily::epanechnikov) {
    if (candidates.empty()) throw Error(Errc::invalid_input, "no bin-count candidates");
    for (int m : candidates)
        if (m < 1) throw Error(Errc::invalid_input, "bin counts must be >= 1");
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    BinCvResult r;
    r.candidates = candidates;
    double best = kInf;
    for (int m : candidates) {
        double s = cv_bins_score(y, proj, b, m, family);
        r.scores.push_back(s);
        if (s < best) {
            best = s;
            r.selected = m;
        }
    }
    if (r.selected == 0) throw Error(Errc::no_feasible_bins, "every bin-count candidate failed");
    return r;
}

inline int cv_bins(const MatrixXd& x, const ResponseSet& y, const DirectionParam& dir, double b,
                   const std::vector<int>& candidates, KernelFamily family = KernelFamily::epanechnikov) {
    return cv_bins_scores(y, project_rows(x, dir.full), b, candidates, family).selected;
}

enum class TuningMode { per_direction, cached };

struct FitConfig {
    std::size_t n_directions = 500;
    std::vector<double> bandwidths; // empty: default grid at the tuning direction
    std::vector<int> bin_counts;    // empty: default grid
    KernelFamily kernel = KernelFamily::epanechnikov;
    bool refine = false;
    int max_refine_evals = 50;
    TuningMode tuning = TuningMode::per_direction;
    int folds = 5;
    int cached_rounds = 3;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    // When both are set, cross-validation is skipped (bootstrap refits).
    std::optional<double> fixed_bandwidth;
    std::optional<int> fixed_bins;
};

struct SearchEntry {
    VectorXd direction; // full form
    double criterion = kInf;
    double bandwidth = 0.0;
    int bins = 0;
    bool refined = false;
};

struct SearchLog {
    std::vector<SearchEntry> entries;
    std::size_t best = 0;
    bool zero_variance = false;
    int tuning_rounds = 0;
};

struct IfrFit {
    DirectionParam direction;
    double bandwidth = 0.0;
    int bins_requested = 0;
    BinnedSample bins;
    double criterion = kInf;
    std::vector<ObjectValue> fitted;
    SearchLog search_log;
    KernelFamily kernel = KernelFamily::epanechnikov;
    MetricSpaceKind kind = MetricSpaceKind::euclidean;
    int effective_bins() const { return bins.effective(); }
};

namespace detail {

struct Tuning {
    double b = 0.0;
    int m = 0;
};

inline Tuning tune_at(const ResponseSet& y, const std::vector<double>& proj, const FitConfig& c) {
    if (c.fixed_bandwidth && c.fixed_bins) return {*c.fixed_bandwidth, *c.fixed_bins};
    Tuning t;
    t.b = c.fixed_bandwidth ? *c.fixed_bandwidth
                            : cv_bandwidth_scores(y, proj, c.bandwidths.empty() ? default_bandwidth_grid(proj) : c.bandwidths,
                                                  c.folds, c.kernel)
                                  .selected;
    t.m = c.fixed_bins ? *c.fixed_bins
                       : cv_bins_scores(y, proj, t.b, c.bin_counts.empty() ? default_bin_grid(y.size()) : c.bin_counts,
                                        c.kernel)
                             .selected;
    return t;
}

inline bool is_search_failure(const Error& e) {
    if (is_fit_failure(e)) return true;
    switch (e.code()) {
    case Errc::no_feasible_bandwidth:
    case Errc::no_feasible_bins:
    case Errc::degenerate_projection:
        return true;
    default:
        return false;
    }
}

inline bool constant_responses(const ResponseSet& y) {
    for (Index i = 1; i < y.size(); ++i)
        if (y.coords().col(i) != y.coords().col(0)) return false;
    return true;
}

inline std::size_t argmin_entry(const std::vector<SearchEntry>& e) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < e.size(); ++i)
        if (e[i].criterion < e[best].criterion) best = i;
    return best;
}

// Coordinate-wise golden-section polish in the reduced ball with (b, m) fixed.
// Every evaluation is appended to `log`.
inline void refine_direction(const MatrixXd& x, const ResponseSet& y, const FitConfig& c, double b, int m,
                             double half_width, std::vector<SearchEntry>& log) {
    const std::size_t start = argmin_entry(log);
    VectorXd theta = lift(log[start].direction.tail(log[start].direction.size() - 1)).reduced;
    double best = log[start].criterion;
    const Index k = theta.size();
    int evals = 0;
    auto eval = [&](const VectorXd& th) {
        DirectionParam d = lift(th);
        double v = criterion_at(y, project_rows(x, d.full), b, m, c.kernel);
        log.push_back({d.full, v, b, m, true});
        ++evals;
        return v;
    };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double half = half_width;
    while (evals < c.max_refine_evals) {
        for (Index r = 0; r < k && evals < c.max_refine_evals; ++r) {
            double others = theta.squaredNorm() - theta[r] * theta[r];
            double bound = std::sqrt(std::max(0.0, 1.0 - others)) * (1.0 - 1e-9);
            double lo = std::max(theta[r] - half, -bound), hi = std::min(theta[r] + half, bound);
            if (!(hi > lo)) continue;
            VectorXd th = theta;
            auto at = [&](double v) {
                th[r] = v;
                return eval(th);
            };
            double c1 = hi - phi * (hi - lo), c2 = lo + phi * (hi - lo);
            double f1 = at(c1), f2 = evals < c.max_refine_evals ? at(c2) : kInf;
            double arg = f1 <= f2 ? c1 : c2, fbest = std::min(f1, f2);
            for (int g = 0; g < 3 && evals < c.max_refine_evals; ++g) {
                if (f1 <= f2) {
                    hi = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = hi - phi * (hi - lo);
                    f1 = at(c1);
                    if (f1 < fbest) fbest = f1, arg = c1;
                } else {
                    lo = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = lo + phi * (hi - lo);
                    f2 = at(c2);
                    if (f2 < fbest) fbest = f2, arg = c2;
                }
            }
            if (fbest < best) {
                best = fbest;
                theta[r] = arg;
            }
        }
        half *= 0.5;
    }
}

} // namespace detail

inline IfrFit fit_ifr(const MatrixXd& x, const ResponseSet& y, const FitConfig& config) {
    const Index n = x.rows(), p = x.cols();
    if (n != y.size()) throw Error(Errc::dimension, "predictor and response counts differ");
    if (n < 10) throw Error(Errc::invalid_input, "fit_ifr needs n >= 10");
    if (p < 2) throw Error(Errc::invalid_input, "fit_ifr needs p >= 2");
    if (!x.allFinite()) throw Error(Errc::invalid_input, "non-finite predictors");
    if (config.n_directions < 1) throw Error(Errc::invalid_input, "n_directions must be >= 1");

    const std::vector<DirectionParam> dirs = sample_directions(p, config.n_directions, config.seed);
    const std::size_t nd = dirs.size();
    SearchLog log;
    log.zero_variance = detail::constant_responses(y);
    std::vector<SearchEntry> grid(nd);

    if (config.tuning == TuningMode::per_direction) {
        parallel_for(nd, config.workers, [&](std::size_t i) {
            std::vector<double> proj = project_rows(x, dirs[i].full);
            SearchEntry e{dirs[i].full, kInf, 0.0, 0, false};
            try {
                detail::Tuning t = detail::tune_at(y, proj, config);
                e.bandwidth = t.b;
                e.bins = t.m;
                e.criterion = criterion_at(y, proj, t.b, t.m, config.kernel);
            } catch (const Error& err) {
                if (!detail::is_search_failure(err)) throw;
            }
            grid[i] = std::move(e);
        });
        log.tuning_rounds = static_cast<int>(nd);
    } else {
        std::size_t pilot = 0;
        std::optional<detail::Tuning> last;
        for (int round = 0; round < std::max(1, config.cached_rounds); ++round) {
            std::optional<detail::Tuning> t;
            for (std::size_t tries = 0; tries < nd && !t; ++tries) {
                try {
                    t = detail::tune_at(y, project_rows(x, dirs[pilot].full), config);
                } catch (const Error& err) {
                    if (!detail::is_search_failure(err)) throw;
                    pilot = (pilot + 1) % nd;
                }
            }
            if (!t) throw Error(Errc::fit_failure, "tuning failed at every direction");
            if (last && last->b == t->b && last->m == t->m) break;
            last = t;
            ++log.tuning_rounds;
            parallel_for(nd, config.workers, [&](std::size_t i) {
                double v = criterion_at(y, project_rows(x, dirs[i].full), t->b, t->m, config.kernel);
                grid[i] = SearchEntry{dirs[i].full, v, t->b, t->m, false};
            });
            std::size_t best = detail::argmin_entry(grid);
            if (best == pilot) break;
            pilot = best;
        }
    }

    log.entries = std::move(grid);
    std::size_t best = detail::argmin_entry(log.entries);
    if (!std::isfinite(log.entries[best].criterion))
        throw Error(Errc::fit_failure, "criterion is infinite at every direction");

    if (config.refine && !log.zero_variance && config.max_refine_evals > 0) {
        // Start with the distance to the nearest other grid direction.
        double half = kInf;
        const VectorXd& b0 = log.entries[best].direction;
        for (std::size_t i = 0; i < nd; ++i)
            if (i != best) half = std::min(half, (log.entries[i].direction - b0).norm());
        if (!std::isfinite(half) || half <= 0.0) half = 0.1;
        half = std::clamp(half, 1e-3, 0.25);
        detail::refine_direction(x, y, config, log.entries[best].bandwidth, log.entries[best].bins, half,
                                 log.entries);
        best = detail::argmin_entry(log.entries);
    }
    log.best = best;

    const SearchEntry& win = log.entries[best];
    IfrFit fit;
    fit.direction = lift(win.direction.tail(p - 1));
    fit.bandwidth = win.bandwidth;
    fit.bins_requested = win.bins;
    fit.kernel = config.kernel;
    fit.kind = y.kind();
    std::vector<double> proj = project_rows(x, fit.direction.full);
    fit.bins = make_bins(proj, win.bins);
    CriterionEval ce = evaluate_criterion(y, proj, fit.bins, KernelSpec{config.kernel, win.bandwidth});
    fit.criterion = ce.value;
    for (auto& c : ce.fitted) fit.fitted.push_back(from_coords(y.shape(), c));
    fit.search_log = std::move(log);
    return fit;
}

struct Prediction {
    ObjectValue value;
    double projection = 0.0;
    bool extrapolated = false;
};

inline std::vector<Prediction> predict(const IfrFit& fit, const MatrixXd& x_new, const MatrixXd& x_train,
                                       const ResponseSet& y_train) {
    if (x_new.cols() != fit.direction.p() || x_train.cols() != fit.direction.p())
        throw Error(Errc::dimension, "predictor dimension does not match the fitted direction");
    std::vector<double> proj = project_rows(x_train, fit.direction.full);
    std::vector<double> q = project_rows(x_new, fit.direction.full);
    auto [lo, hi] = std::minmax_element(proj.begin(), proj.end());
    KernelSpec kernel{fit.kernel, fit.bandwidth};
    std::vector<Prediction> out;
    out.reserve(q.size());
    for (double t : q) {
        Prediction pr;
        pr.projection = t;
        pr.extrapolated = t < *lo - fit.bandwidth || t > *hi + fit.bandwidth;
        // Extrapolated rows are evaluated at the nearest end of the training range.
        double at = pr.extrapolated ? std::clamp(t, *lo, *hi) : t;
        pr.value = from_coords(y_train.shape(), llfr_coords(y_train, proj, at, kernel));
        out.push_back(std::move(pr));
    }
    return out;
}

// Global Fréchet regression: weights s_i(x)/n with s_i(x) = 1 + (X_i - X̄)' Σ̂^{-1} (x - X̄),
// Σ̂ the covariance of X with divisor n.
inline std::vector<VectorXd> gfr_coords(const MatrixXd& x, const ResponseSet& y, const MatrixXd& x_new) {
    const Index n = x.rows();
    if (n != y.size()) throw Error(Errc::dimension, "predictor and response counts differ");
    if (x_new.cols() != x.cols()) throw Error(Errc::dimension, "new predictors have the wrong dimension");
    VectorXd mean = x.colwise().mean();
    MatrixXd xc = x.rowwise() - mean.transpose();
    MatrixXd sigma = (xc.transpose() * xc) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
    double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin >= 1e12) throw Error(Errc::singular, "predictor covariance is singular");
    MatrixXd proj = xc * es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
    std::vector<VectorXd> out;
    out.reserve(static_cast<std::size_t>(x_new.rows()));
    for (Index j = 0; j < x_new.rows(); ++j) {
        VectorXd d = x_new.row(j).transpose() - mean;
        VectorXd w = (VectorXd::Ones(n) + proj * d) / static_cast<double>(n);
        out.push_back(frechet_mean_coords(y.shape(), y.coords(), w));
    }
    return out;
}

inline std::vector<ObjectValue> gfr_fit(const MatrixXd& x, const ResponseSet& y, const MatrixXd& x_new) {
    std::vector<ObjectValue> out;
    for (auto& c : gfr_coords(x, y, x_new)) out.push_back(from_coords(y.shape(), c));
    return out;
}

// Local Fréchet regression on the single predictor column `column`, bandwidth by CV.
inline std::vector<VectorXd> lfr_coords(const MatrixXd& x, Index column, const ResponseSet& y, const MatrixXd& x_new,
                                        KernelFamily family = KernelFamily::epanechnikov, int folds = 5) {
    if (column < 0 || column >= x.cols() || x_new.cols() != x.cols())
        throw Error(Errc::dimension, "bad predictor column for local Fréchet regression");
    std::vector<double> t(x.col(column).data(), x.col(column).data() + x.rows());
    double b = cv_bandwidth_scores(y, t, default_bandwidth_grid(t), folds, family).selected;
    KernelSpec kernel{family, b};
    std::vector<VectorXd> out;
    for (Index j = 0; j < x_new.rows(); ++j) out.push_back(llfr_coords(y, t, x_new(j, column), kernel));
    return out;
}

} // namespace ifr
