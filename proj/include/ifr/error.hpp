#pragma once

#include <stdexcept>
#include <string>

namespace ifr {

enum class Errc {
    dimension,
    invalid_input,
    invalid_weights,
    degenerate_mean,
    degenerate_input,
    insufficient_local_data,
    no_feasible_bandwidth,
    degenerate_projection,
    no_feasible_bins,
    fit_failure,
    out_of_ball,
    step,
    singular,
    rank,
    bootstrap_failure,
    degenerate_region,
    covariance,
    length_mismatch,
    parse,
};

inline const char* errc_name(Errc c) {
    switch (c) {
    case Errc::dimension: return "dimension";
    case Errc::invalid_input: return "invalid-input";
    case Errc::invalid_weights: return "invalid-weights";
    case Errc::degenerate_mean: return "degenerate-mean";
    case Errc::degenerate_input: return "degenerate-input";
    case Errc::insufficient_local_data: return "insufficient-local-data";
    case Errc::no_feasible_bandwidth: return "no-feasible-bandwidth";
    case Errc::degenerate_projection: return "degenerate-projection";
    case Errc::no_feasible_bins: return "no-feasible-bins";
    case Errc::fit_failure: return "fit-failure";
    case Errc::out_of_ball: return "out-of-ball";
    case Errc::step: return "step";
    case Errc::singular: return "singular";
    case Errc::rank: return "rank";
    case Errc::bootstrap_failure: return "bootstrap-failure";
    case Errc::degenerate_region: return "degenerate-region";
    case Errc::covariance: return "covariance";
    case Errc::length_mismatch: return "length-mismatch";
    case Errc::parse: return "parse";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    Errc code() const noexcept { return code_; }

    // Input problems (bad files, shapes, arguments) as opposed to numerical failure.
    bool is_input_error() const noexcept {
        switch (code_) {
        case Errc::dimension:
        case Errc::invalid_input:
        case Errc::invalid_weights:
        case Errc::out_of_ball:
        case Errc::rank:
        case Errc::covariance:
        case Errc::length_mismatch:
        case Errc::parse:
            return true;
        default:
            return false;
        }
    }

private:
    Errc code_;
};

class LocalDataError : public Error {
public:
    LocalDataError(double t, double b)
        : Error(Errc::insufficient_local_data,
                "fewer than two distinct projections carry kernel mass at t=" + std::to_string(t) +
                    " b=" + std::to_string(b)),
          t_(t), b_(b) {}
    double t() const noexcept { return t_; }
    double bandwidth() const noexcept { return b_; }

private:
    double t_, b_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, std::size_t column, const std::string& msg)
        : Error(Errc::parse, source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
          line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_, column_;
};

} // namespace ifr
