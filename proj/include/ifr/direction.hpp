#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace ifr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Unit direction with positive leading coordinate, stored in both full (p) and
// reduced (p-1) form. Always built through lift() so the two forms agree exactly.
struct DirectionParam {
    VectorXd full;
    VectorXd reduced;
    Index p() const { return full.size(); }
};

inline DirectionParam lift(const VectorXd& reduced) {
    double r2 = reduced.squaredNorm();
    if (!(r2 < 1.0)) throw Error(Errc::out_of_ball, "reduced direction must satisfy |theta| < 1");
    DirectionParam d;
    d.reduced = reduced;
    d.full.resize(reduced.size() + 1);
    d.full[0] = std::sqrt(1.0 - r2);
    d.full.tail(reduced.size()) = reduced;
    return d;
}

inline VectorXd reduce(const DirectionParam& d) { return d.reduced; }

// Normalizes `v`, flips it into the half-space v_1 > 0 and lifts its tail.
inline DirectionParam direction_from_vector(const VectorXd& v) {
    double n = v.norm();
    if (!(n > 0.0) || v.size() < 2) throw Error(Errc::invalid_input, "direction needs a nonzero vector with p >= 2");
    VectorXd u = v / n;
    if (u[0] < 0) u = -u;
    return lift(u.tail(u.size() - 1));
}

// Angle between two unit directions.
inline double direction_angle(const VectorXd& a, const VectorXd& b) {
    return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

// x_i' theta for every row. Products are summed in sorted order so the result
// does not depend on the order of the predictor coordinates.
inline std::vector<double> project_rows(const MatrixXd& x, const VectorXd& dir) {
    if (x.cols() != dir.size()) throw Error(Errc::dimension, "predictor columns do not match direction length");
    const Index p = x.cols();
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    std::vector<double> prod(static_cast<std::size_t>(p));
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < p; ++j) prod[static_cast<std::size_t>(j)] = x(i, j) * dir[j];
        std::sort(prod.begin(), prod.end());
        double s = 0.0;
        for (double v : prod) s += v;
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

inline double project_row(const VectorXd& x, const VectorXd& dir) {
    MatrixXd m = x.transpose();
    return project_rows(m, dir)[0];
}

// Uniform draws on the hemisphere {|theta| = 1, theta_1 > 0}; draw i uses its own
// stream so the list is a pure function of (seed, i).
inline std::vector<DirectionParam> sample_directions(Index p, std::size_t count, std::uint64_t seed) {
    if (p < 2) throw Error(Errc::invalid_input, "sample_directions needs p >= 2");
    if (count < 1) throw Error(Errc::invalid_input, "sample_directions needs count >= 1");
    std::vector<DirectionParam> out;
    out.reserve(count);
    const std::uint64_t root = stream_seed(seed, streams::directions);
    for (std::size_t i = 0; i < count; ++i) {
        Rng rng = make_stream(root, i);
        std::normal_distribution<double> g;
        for (;;) {
            VectorXd v(p);
            for (Index k = 0; k < p; ++k) v[k] = g(rng);
            v[0] = std::abs(v[0]);
            double n = v.norm();
            if (!(v[0] > 0.0) || !(n > 0.0)) continue;
            VectorXd tail = v.tail(p - 1) / n;
            if (!(tail.squaredNorm() < 1.0)) continue;
            out.push_back(lift(tail));
            break;
        }
    }
    return out;
}

} // namespace ifr
