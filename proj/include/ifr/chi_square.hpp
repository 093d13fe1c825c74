#pragma once

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>

#include "error.hpp"

namespace ifr {

inline double chi2_sf(double x, double df) {
    if (!(df > 0.0)) throw Error(Errc::invalid_input, "chi-square df must be positive");
    if (std::isnan(x)) throw Error(Errc::invalid_input, "chi-square argument is NaN");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

inline double chi2_cdf(double x, double df) {
    if (x <= 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    return boost::math::gamma_p(0.5 * df, 0.5 * x);
}

// Lower quantile: the x with cdf(x) = prob.
inline double chi2_quantile(double prob, double df) {
    if (!(df > 0.0)) throw Error(Errc::invalid_input, "chi-square df must be positive");
    if (!(prob >= 0.0 && prob <= 1.0)) throw Error(Errc::invalid_input, "probability must lie in [0,1]");
    if (prob == 0.0) return 0.0;
    if (prob == 1.0) return std::numeric_limits<double>::infinity();
    return 2.0 * boost::math::gamma_p_inv(0.5 * df, prob);
}

// Poisson(lambda/2) mixture of central survival functions, summed outward from the
// mode until the unvisited Poisson mass drops below `tol`.
inline double noncentral_chi2_sf(double x, double df, double lambda, double tol = 1e-12) {
    if (!(lambda >= 0.0)) throw Error(Errc::invalid_input, "noncentrality must be >= 0");
    if (lambda == 0.0) return chi2_sf(x, df);
    if (x <= 0.0) return 1.0;
    const double mu = 0.5 * lambda;
    const long mode = static_cast<long>(std::floor(mu));
    auto log_pmf = [&](long j) { return -mu + j * std::log(mu) - std::lgamma(static_cast<double>(j) + 1.0); };
    double mass = 0.0, sum = 0.0;
    for (long j = mode; j >= 0; --j) {
        double w = std::exp(log_pmf(j));
        mass += w;
        sum += w * chi2_sf(x, df + 2.0 * j);
        if (w < 1e-300 && j < mode) break;
    }
    for (long j = mode + 1; 1.0 - mass >= tol; ++j) {
        double w = std::exp(log_pmf(j));
        if (w == 0.0 && j > mode + 10) break;
        mass += w;
        sum += w * chi2_sf(x, df + 2.0 * j);
    }
    return std::min(1.0, std::max(0.0, sum));
}

enum class ChiSquareOp { sf, quantile, noncentral_sf };

inline double chi_square(ChiSquareOp op, double x_or_prob, double df, double lambda = 0.0) {
    switch (op) {
    case ChiSquareOp::sf: return chi2_sf(x_or_prob, df);
    case ChiSquareOp::quantile: return chi2_quantile(x_or_prob, df);
    case ChiSquareOp::noncentral_sf: return noncentral_chi2_sf(x_or_prob, df, lambda);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

} // namespace ifr
