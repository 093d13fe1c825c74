#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace ifr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Probability grid shared by all quantile functions of a dataset, with the
// quadrature weights used by the Wasserstein-2 distance. Weights follow the
// trapezoid rule inside [p_0, p_K] and treat the quantile function as flat on the
// two end caps [0, p_0] and [p_K, 1], so they sum to one.
class ProbGrid {
public:
    explicit ProbGrid(std::vector<double> probs) : probs_(std::move(probs)) {
        const std::size_t k = probs_.size();
        if (k < 2) throw Error(Errc::invalid_input, "probability grid needs at least 2 points");
        for (std::size_t i = 0; i < k; ++i) {
            if (!std::isfinite(probs_[i]) || probs_[i] < 0.0 || probs_[i] > 1.0)
                throw Error(Errc::invalid_input, "probability grid entries must lie in [0,1]");
            if (i > 0 && !(probs_[i] > probs_[i - 1]))
                throw Error(Errc::invalid_input, "probability grid must be strictly increasing");
        }
        weights_ = VectorXd::Zero(static_cast<Index>(k));
        for (std::size_t i = 0; i + 1 < k; ++i) {
            double h = 0.5 * (probs_[i + 1] - probs_[i]);
            weights_[static_cast<Index>(i)] += h;
            weights_[static_cast<Index>(i + 1)] += h;
        }
        weights_[0] += probs_.front();
        weights_[static_cast<Index>(k - 1)] += 1.0 - probs_.back();
    }

    static std::shared_ptr<const ProbGrid> equispaced(std::size_t k = 101, double lo = 0.005, double hi = 0.995) {
        std::vector<double> p(k);
        for (std::size_t i = 0; i < k; ++i)
            p[i] = k == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(k - 1);
        return std::make_shared<const ProbGrid>(std::move(p));
    }

    const std::vector<double>& probs() const { return probs_; }
    const VectorXd& weights() const { return weights_; }
    Index size() const { return static_cast<Index>(probs_.size()); }
    bool same_as(const ProbGrid& o) const { return this == &o || probs_ == o.probs_; }

private:
    std::vector<double> probs_;
    VectorXd weights_;
};

using GridPtr = std::shared_ptr<const ProbGrid>;

enum class MetricSpaceKind { wasserstein2, frobenius, sphere_geodesic, euclidean };

// psd: symmetric positive semidefinite. correlation: psd with unit diagonal.
// unit_box: symmetric with entries in [0,1] (adjacency-type matrices).
enum class MatrixConstraint { psd, correlation, unit_box };

struct QuantileFunction {
    GridPtr grid;
    VectorXd values;
};

struct SymMatrix {
    MatrixXd entries;
    MatrixConstraint constraint = MatrixConstraint::psd;
    Index dim() const { return entries.rows(); }
    bool unit_diagonal() const { return constraint == MatrixConstraint::correlation; }
};

struct SpherePoint {
    VectorXd coords;
};

struct EuclideanVec {
    VectorXd coords;
};

using ObjectValue = std::variant<QuantileFunction, SymMatrix, SpherePoint, EuclideanVec>;

inline const char* kind_name(MetricSpaceKind k) {
    switch (k) {
    case MetricSpaceKind::wasserstein2: return "wasserstein";
    case MetricSpaceKind::frobenius: return "frobenius";
    case MetricSpaceKind::sphere_geodesic: return "sphere";
    case MetricSpaceKind::euclidean: return "euclidean";
    }
    return "?";
}

inline MetricSpaceKind parse_kind(const std::string& s) {
    if (s == "wasserstein") return MetricSpaceKind::wasserstein2;
    if (s == "frobenius") return MetricSpaceKind::frobenius;
    if (s == "sphere") return MetricSpaceKind::sphere_geodesic;
    if (s == "euclidean") return MetricSpaceKind::euclidean;
    throw Error(Errc::invalid_input, "unknown metric '" + s + "'");
}

inline const char* constraint_name(MatrixConstraint c) {
    switch (c) {
    case MatrixConstraint::psd: return "psd";
    case MatrixConstraint::correlation: return "correlation";
    case MatrixConstraint::unit_box: return "unit-box";
    }
    return "?";
}

inline MatrixConstraint parse_constraint(const std::string& s) {
    if (s == "psd") return MatrixConstraint::psd;
    if (s == "correlation") return MatrixConstraint::correlation;
    if (s == "unit-box") return MatrixConstraint::unit_box;
    throw Error(Errc::invalid_input, "unknown matrix constraint '" + s + "'");
}

// Everything needed to interpret a flat coordinate vector as an object.
struct ObjectShape {
    MetricSpaceKind kind = MetricSpaceKind::euclidean;
    GridPtr grid;  // wasserstein only
    Index dim = 0; // matrix side, vector length or grid size
    MatrixConstraint constraint = MatrixConstraint::psd;

    Index coord_size() const { return kind == MetricSpaceKind::frobenius ? dim * dim : dim; }
    bool compatible(const ObjectShape& o) const {
        if (kind != o.kind || dim != o.dim) return false;
        if (kind == MetricSpaceKind::wasserstein2) return grid && o.grid && grid->same_as(*o.grid);
        return true;
    }
};

namespace detail {

inline MetricSpaceKind natural_kind(const ObjectValue& v) {
    switch (v.index()) {
    case 0: return MetricSpaceKind::wasserstein2;
    case 1: return MetricSpaceKind::frobenius;
    case 2: return MetricSpaceKind::sphere_geodesic;
    default: return MetricSpaceKind::euclidean;
    }
}

inline void require_finite(const VectorXd& v, const char* what) {
    if (!v.allFinite()) throw Error(Errc::invalid_input, std::string("non-finite entries in ") + what);
}

inline double psd_tolerance(double max_abs_eig) { return 1e-8 * std::max(1.0, max_abs_eig); }

inline MatrixXd symmetrize(const MatrixXd& a) {
    MatrixXd s(a.rows(), a.cols());
    for (Index j = 0; j < a.cols(); ++j)
        for (Index i = 0; i < a.rows(); ++i) s(i, j) = (a(i, j) + a(j, i)) * 0.5;
    return s;
}

inline MatrixXd clip_eigen(const MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
    VectorXd lam = es.eigenvalues().cwiseMax(0.0);
    return symmetrize(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
}

inline bool is_psd(const MatrixXd& s) {
    if (s.rows() == 0) return true;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(s, Eigen::EigenvaluesOnly);
    const VectorXd& lam = es.eigenvalues();
    double scale = lam.cwiseAbs().maxCoeff();
    return lam.minCoeff() >= -psd_tolerance(scale);
}

inline MatrixXd as_matrix(const Eigen::Ref<const VectorXd>& c, Index r) {
    return Eigen::Map<const MatrixXd>(c.data(), r, r);
}

inline VectorXd as_coords(const MatrixXd& m) {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
}

} // namespace detail

// Weighted isotonic (nondecreasing) least-squares fit by pool-adjacent-violators.
// Already-monotone input is returned unchanged.
inline VectorXd isotonic_projection(const VectorXd& y, const VectorXd& w) {
    const Index n = y.size();
    bool monotone = true;
    for (Index i = 1; i < n && monotone; ++i) monotone = y[i] >= y[i - 1];
    if (monotone) return y;
    std::vector<double> val, wt;
    std::vector<Index> len;
    val.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        val.push_back(y[i]);
        wt.push_back(w[i]);
        len.push_back(1);
        while (val.size() > 1 && val[val.size() - 2] >= val.back()) {
            std::size_t b = val.size() - 1;
            double ww = wt[b - 1] + wt[b];
            val[b - 1] = (wt[b - 1] * val[b - 1] + wt[b] * val[b]) / ww;
            wt[b - 1] = ww;
            len[b - 1] += len[b];
            val.pop_back();
            wt.pop_back();
            len.pop_back();
        }
    }
    VectorXd out(n);
    Index pos = 0;
    for (std::size_t b = 0; b < val.size(); ++b)
        for (Index k = 0; k < len[b]; ++k) out[pos++] = val[b];
    return out;
}

inline MatrixXd project_psd(const MatrixXd& a) {
    MatrixXd s = detail::symmetrize(a);
    if (detail::is_psd(s)) return s;
    return detail::clip_eigen(s);
}

// Nearest correlation matrix in Frobenius norm: alternating projections between
// the PSD cone and the unit-diagonal set, with Dykstra's correction on the cone step.
inline MatrixXd project_correlation(const MatrixXd& a, int max_iter = 100, double tol = 1e-8) {
    MatrixXd y = detail::symmetrize(a);
    bool unit = true;
    for (Index i = 0; i < y.rows(); ++i) unit = unit && std::abs(y(i, i) - 1.0) <= 1e-10;
    if (unit && detail::is_psd(y)) return y;

    MatrixXd ds = MatrixXd::Zero(y.rows(), y.cols());
    for (int it = 0; it < max_iter; ++it) {
        MatrixXd r = y - ds;
        MatrixXd x = detail::clip_eigen(r);
        ds = x - r;
        MatrixXd next = x;
        next.diagonal().setOnes();
        double change = (next - y).norm() / std::max(1.0, y.norm());
        y = std::move(next);
        if (change < tol) break;
    }
    if (detail::is_psd(y)) return y;
    // Rescaling a PSD matrix by its diagonal keeps it PSD and restores unit diagonal.
    MatrixXd x = detail::clip_eigen(y);
    VectorXd s(x.rows());
    for (Index i = 0; i < x.rows(); ++i) s[i] = x(i, i) > 0 ? 1.0 / std::sqrt(x(i, i)) : 0.0;
    for (Index j = 0; j < x.cols(); ++j)
        for (Index i = 0; i < x.rows(); ++i) y(i, j) = x(i, j) * (s[i] * s[j]);
    y.diagonal().setOnes();
    return y;
}

inline MatrixXd project_unit_box(const MatrixXd& a) {
    return detail::symmetrize(a).cwiseMax(0.0).cwiseMin(1.0);
}

inline VectorXd project_sphere(const VectorXd& x) {
    double n = x.norm();
    if (!(n >= 1e-12)) throw Error(Errc::degenerate_input, "cannot normalize a zero vector onto the sphere");
    if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) return x;
    return x / n;
}

// Projection of raw coordinates onto the object space described by `shape`.
inline VectorXd project_coords(const ObjectShape& shape, const VectorXd& raw) {
    if (raw.size() != shape.coord_size()) throw Error(Errc::dimension, "raw size does not match object shape");
    switch (shape.kind) {
    case MetricSpaceKind::wasserstein2: return isotonic_projection(raw, shape.grid->weights());
    case MetricSpaceKind::frobenius: {
        MatrixXd m = detail::as_matrix(raw, shape.dim);
        switch (shape.constraint) {
        case MatrixConstraint::psd: return detail::as_coords(project_psd(m));
        case MatrixConstraint::correlation: return detail::as_coords(project_correlation(m));
        case MatrixConstraint::unit_box: return detail::as_coords(project_unit_box(m));
        }
        return raw;
    }
    case MetricSpaceKind::sphere_geodesic: return project_sphere(raw);
    case MetricSpaceKind::euclidean: return raw;
    }
    return raw;
}

inline double sphere_angle(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b) {
    return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

inline double squared_distance(const ObjectShape& shape, const Eigen::Ref<const VectorXd>& a,
                               const Eigen::Ref<const VectorXd>& b) {
    switch (shape.kind) {
    case MetricSpaceKind::wasserstein2: return shape.grid->weights().dot((a - b).cwiseAbs2());
    case MetricSpaceKind::sphere_geodesic: {
        double g = sphere_angle(a, b);
        return g * g;
    }
    default: return (a - b).squaredNorm();
    }
}

namespace detail {

inline void check_weights(const VectorXd& w) {
    if (!w.allFinite()) throw Error(Errc::invalid_weights, "non-finite weights");
    if (std::abs(w.sum() - 1.0) > 1e-8) throw Error(Errc::invalid_weights, "weights must sum to 1");
}

// y_a + sum_i w_i (y_i - y_a) with y_a the first column carrying weight; exact
// when all weighted columns coincide.
inline VectorXd anchored_average(const MatrixXd& y, const VectorXd& w) {
    Index anchor = 0;
    while (anchor < w.size() && w[anchor] == 0.0) ++anchor;
    if (anchor == w.size()) anchor = 0;
    VectorXd acc = VectorXd::Zero(y.rows());
    for (Index i = 0; i < w.size(); ++i)
        if (w[i] != 0.0 && i != anchor) acc.noalias() += w[i] * (y.col(i) - y.col(anchor));
    return y.col(anchor) + acc;
}

inline VectorXd sphere_log(const VectorXd& om, const Eigen::Ref<const VectorXd>& y) {
    VectorXd u = y - om.dot(y) * om;
    double nu = u.norm();
    if (nu < 1e-15) return VectorXd::Zero(om.size());
    return (sphere_angle(om, y) / nu) * u;
}

inline double sphere_objective(const MatrixXd& y, const VectorXd& w, const VectorXd& om) {
    double f = 0.0;
    for (Index i = 0; i < w.size(); ++i)
        if (w[i] != 0.0) {
            double g = sphere_angle(om, y.col(i));
            f += w[i] * g * g;
        }
    return f;
}

inline VectorXd sphere_polish(const MatrixXd& y, const VectorXd& w, VectorXd om, double& f_out) {
    double f = sphere_objective(y, w, om);
    for (int it = 0; it < 500; ++it) {
        VectorXd v = VectorXd::Zero(om.size());
        for (Index i = 0; i < w.size(); ++i)
            if (w[i] != 0.0) v.noalias() += w[i] * sphere_log(om, y.col(i));
        if (v.norm() < 1e-10) break;
        double t = 1.0;
        bool moved = false;
        for (int h = 0; h < 60; ++h, t *= 0.5) {
            VectorXd cand = (om + t * v).normalized();
            double fc = sphere_objective(y, w, cand);
            if (fc < f) {
                double step = (cand - om).norm();
                om = std::move(cand);
                f = fc;
                moved = step >= 1e-10;
                break;
            }
        }
        if (!moved) break;
    }
    f_out = f;
    return om;
}

inline VectorXd sphere_mean(const MatrixXd& y, const VectorXd& w) {
    VectorXd avg = anchored_average(y, w);
    double n = avg.norm();
    if (!(n >= 1e-12)) throw Error(Errc::degenerate_mean, "weighted average of sphere points is (near) zero");
    double best_f = 0.0;
    VectorXd best = sphere_polish(y, w, avg / n, best_f);
    if ((w.array() < 0.0).any()) {
        Rng rng = make_stream(0x51ab1e5eedULL, streams::restarts);
        std::normal_distribution<double> g;
        for (int r = 0; r < 5; ++r) {
            VectorXd start(y.rows());
            for (Index k = 0; k < start.size(); ++k) start[k] = g(rng);
            double f = 0.0;
            VectorXd cand = sphere_polish(y, w, start.normalized(), f);
            if (f < best_f) {
                best_f = f;
                best = std::move(cand);
            }
        }
    }
    return project_sphere(best);
}

} // namespace detail

// Minimizer of sum_i w_i d^2(y_i, .) over the object space; columns of `y` are
// object coordinates. Weights must sum to one and may be negative.
inline VectorXd frechet_mean_coords(const ObjectShape& shape, const MatrixXd& y, const VectorXd& w) {
    if (y.cols() == 0 || y.cols() != w.size()) throw Error(Errc::dimension, "weights and objects differ in count");
    detail::check_weights(w);
    if (shape.kind == MetricSpaceKind::sphere_geodesic) return detail::sphere_mean(y, w);
    VectorXd avg = detail::anchored_average(y, w);
    if (shape.kind == MetricSpaceKind::euclidean) return avg;
    return project_coords(shape, avg);
}

// ---- ObjectValue-level interface -------------------------------------------------

inline ObjectShape shape_of(const ObjectValue& v, MetricSpaceKind kind) {
    if (detail::natural_kind(v) != kind)
        throw Error(Errc::dimension, std::string("object variant does not match metric ") + kind_name(kind));
    ObjectShape s;
    s.kind = kind;
    std::visit(
        [&](const auto& o) {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, QuantileFunction>) {
                if (!o.grid) throw Error(Errc::invalid_input, "quantile function without probability grid");
                if (o.values.size() != o.grid->size()) throw Error(Errc::dimension, "quantile values do not match grid");
                s.grid = o.grid;
                s.dim = o.values.size();
            } else if constexpr (std::is_same_v<T, SymMatrix>) {
                if (o.entries.rows() != o.entries.cols()) throw Error(Errc::dimension, "matrix object is not square");
                s.dim = o.entries.rows();
                s.constraint = o.constraint;
            } else {
                s.dim = o.coords.size();
            }
        },
        v);
    return s;
}

inline VectorXd to_coords(const ObjectValue& v) {
    return std::visit(
        [](const auto& o) -> VectorXd {
            using T = std::decay_t<decltype(o)>;
            if constexpr (std::is_same_v<T, QuantileFunction>) return o.values;
            else if constexpr (std::is_same_v<T, SymMatrix>) return detail::as_coords(o.entries);
            else return o.coords;
        },
        v);
}

inline ObjectValue from_coords(const ObjectShape& shape, const VectorXd& c) {
    switch (shape.kind) {
    case MetricSpaceKind::wasserstein2: return QuantileFunction{shape.grid, c};
    case MetricSpaceKind::frobenius: return SymMatrix{detail::as_matrix(c, shape.dim), shape.constraint};
    case MetricSpaceKind::sphere_geodesic: return SpherePoint{c};
    case MetricSpaceKind::euclidean: return EuclideanVec{c};
    }
    return EuclideanVec{c};
}

// Throws invalid_input when `v` violates the invariants of its object space.
inline void validate_object(const ObjectValue& v, MetricSpaceKind kind) {
    ObjectShape s = shape_of(v, kind);
    VectorXd c = to_coords(v);
    detail::require_finite(c, "object");
    switch (kind) {
    case MetricSpaceKind::wasserstein2:
        for (Index i = 1; i < c.size(); ++i)
            if (c[i] < c[i - 1] - 1e-10) throw Error(Errc::invalid_input, "quantile values must be nondecreasing");
        break;
    case MetricSpaceKind::frobenius: {
        const MatrixXd& m = std::get<SymMatrix>(v).entries;
        if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10)
            throw Error(Errc::invalid_input, "matrix object is not symmetric");
        if (s.constraint == MatrixConstraint::unit_box) {
            if (m.minCoeff() < -1e-10 || m.maxCoeff() > 1.0 + 1e-10)
                throw Error(Errc::invalid_input, "matrix entries must lie in [0,1]");
            break;
        }
        if (!detail::is_psd(detail::symmetrize(m))) throw Error(Errc::invalid_input, "matrix object is not PSD");
        if (s.constraint == MatrixConstraint::correlation)
            for (Index i = 0; i < m.rows(); ++i)
                if (std::abs(m(i, i) - 1.0) > 1e-10)
                    throw Error(Errc::invalid_input, "correlation matrix needs unit diagonal");
        break;
    }
    case MetricSpaceKind::sphere_geodesic:
        if (std::abs(c.norm() - 1.0) > 1e-10) throw Error(Errc::invalid_input, "sphere point must have unit norm");
        break;
    case MetricSpaceKind::euclidean: break;
    }
}

inline double distance(const ObjectValue& a, const ObjectValue& b, MetricSpaceKind kind) {
    ObjectShape sa = shape_of(a, kind), sb = shape_of(b, kind);
    if (!sa.compatible(sb) || sa.constraint != sb.constraint)
        throw Error(Errc::dimension, "objects have different dimensions");
    VectorXd ca = to_coords(a), cb = to_coords(b);
    detail::require_finite(ca, "object");
    detail::require_finite(cb, "object");
    return std::sqrt(squared_distance(sa, ca, cb));
}

inline ObjectValue project_to_space(const ObjectValue& raw, MetricSpaceKind kind) {
    ObjectShape s = shape_of(raw, kind);
    VectorXd c = to_coords(raw);
    detail::require_finite(c, "raw object");
    return from_coords(s, project_coords(s, c));
}

inline ObjectValue weighted_frechet_mean(const std::vector<ObjectValue>& objects, const std::vector<double>& weights,
                                         MetricSpaceKind kind) {
    if (objects.empty()) throw Error(Errc::invalid_input, "need at least one object");
    if (objects.size() != weights.size()) throw Error(Errc::dimension, "weights and objects differ in count");
    ObjectShape s = shape_of(objects.front(), kind);
    MatrixXd y(s.coord_size(), static_cast<Index>(objects.size()));
    for (std::size_t i = 0; i < objects.size(); ++i) {
        ObjectShape si = shape_of(objects[i], kind);
        if (!s.compatible(si) || s.constraint != si.constraint)
            throw Error(Errc::dimension, "objects have different dimensions");
        y.col(static_cast<Index>(i)) = to_coords(objects[i]);
    }
    detail::require_finite(Eigen::Map<const VectorXd>(y.data(), y.size()), "objects");
    VectorXd w = Eigen::Map<const VectorXd>(weights.data(), static_cast<Index>(weights.size()));
    return from_coords(s, frechet_mean_coords(s, y, w));
}

// Second-smallest Laplacian eigenvalue of the graph with adjacency (Y - I)_+.
inline double fiedler_value(const SymMatrix& corr) {
    const MatrixXd& y = corr.entries;
    if (y.rows() != y.cols()) throw Error(Errc::dimension, "fiedler_value needs a square matrix");
    if (y.rows() < 2) throw Error(Errc::dimension, "fiedler_value needs at least 2 nodes");
    MatrixXd a = (y - MatrixXd::Identity(y.rows(), y.cols())).cwiseMax(0.0);
    MatrixXd lap = -a;
    lap.diagonal() += a.rowwise().sum();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(detail::symmetrize(lap), Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues()[1]);
}

// A dataset's responses stored column-wise as coordinates of one shape.
class ResponseSet {
public:
    ResponseSet() = default;
    ResponseSet(ObjectShape shape, MatrixXd coords) : shape_(std::move(shape)), coords_(std::move(coords)) {
        if (coords_.rows() != shape_.coord_size()) throw Error(Errc::dimension, "coordinate rows do not match shape");
        if (!coords_.allFinite()) throw Error(Errc::invalid_input, "non-finite response entries");
    }

    static ResponseSet from_objects(const std::vector<ObjectValue>& objects, MetricSpaceKind kind) {
        if (objects.empty()) throw Error(Errc::invalid_input, "no responses");
        ObjectShape s = shape_of(objects.front(), kind);
        MatrixXd c(s.coord_size(), static_cast<Index>(objects.size()));
        for (std::size_t i = 0; i < objects.size(); ++i) {
            ObjectShape si = shape_of(objects[i], kind);
            if (!s.compatible(si) || s.constraint != si.constraint)
                throw Error(Errc::dimension, "responses differ in dimension (row " + std::to_string(i) + ")");
            validate_object(objects[i], kind);
            c.col(static_cast<Index>(i)) = to_coords(objects[i]);
        }
        return ResponseSet(s, std::move(c));
    }

    const ObjectShape& shape() const { return shape_; }
    MetricSpaceKind kind() const { return shape_.kind; }
    Index size() const { return coords_.cols(); }
    const MatrixXd& coords() const { return coords_; }
    ObjectValue object(Index i) const { return from_coords(shape_, coords_.col(i)); }
    std::vector<ObjectValue> objects() const {
        std::vector<ObjectValue> out;
        out.reserve(static_cast<std::size_t>(size()));
        for (Index i = 0; i < size(); ++i) out.push_back(object(i));
        return out;
    }
    ResponseSet subset(const std::vector<Index>& idx) const {
        MatrixXd c(coords_.rows(), static_cast<Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) c.col(static_cast<Index>(k)) = coords_.col(idx[k]);
        return ResponseSet(shape_, std::move(c));
    }

private:
    ObjectShape shape_;
    MatrixXd coords_;
};

} // namespace ifr
