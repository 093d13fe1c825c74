#pragma once

#include <json.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "index_fit.hpp"
#include "inference.hpp"
#include "metric_spaces.hpp"

namespace ifr {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// Human-readable form with 6 significant digits.
inline std::string format6(double v) {
    std::ostringstream os;
    os << std::setprecision(6) << v;
    return os.str();
}

struct TextTable {
    std::vector<std::string> header;            // empty when the file has none
    std::vector<std::vector<double>> rows;
    std::vector<std::size_t> lines;             // 1-based source line of each row
    std::vector<std::size_t> blocks;            // blank-line separated block of each row
};

namespace detail {

struct Token {
    std::string text;
    std::size_t column; // 1-based
};

inline std::vector<Token> split_line(const std::string& line) {
    std::vector<Token> out;
    const bool comma = line.find(',') != std::string::npos;
    std::size_t i = 0;
    const std::size_t n = line.size();
    auto is_sep = [&](char c) { return comma ? c == ',' : (c == ' ' || c == '\t'); };
    if (comma) {
        std::size_t start = 0;
        for (;;) {
            std::size_t end = line.find(',', start);
            std::string cell = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
            std::size_t a = cell.find_first_not_of(" \t"), b = cell.find_last_not_of(" \t");
            if (a == std::string::npos) out.push_back({"", start + 1});
            else out.push_back({cell.substr(a, b - a + 1), start + a + 1});
            if (end == std::string::npos) break;
            start = end + 1;
        }
        return out;
    }
    while (i < n) {
        while (i < n && is_sep(line[i])) ++i;
        if (i >= n) break;
        std::size_t s = i;
        while (i < n && !is_sep(line[i])) ++i;
        out.push_back({line.substr(s, i - s), s + 1});
    }
    return out;
}

inline std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    double v = 0.0;
    auto r = std::from_chars(b, e, v);
    if (r.ec != std::errc() || r.ptr != e) return std::nullopt;
    return v;
}

inline std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

} // namespace detail

// Delimited numeric text: comma separated when a line contains a comma, otherwise
// whitespace separated. A first line with a non-numeric cell is taken as header.
// '#' starts a comment line. Blank lines separate blocks.
inline TextTable read_table(const std::string& path, bool allow_header = true) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::invalid_input, "cannot open '" + path + "'");
    TextTable t;
    std::string line;
    std::size_t lineno = 0, block = 0;
    bool pending_gap = false;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        if (line.find_first_not_of(" \t,") == std::string::npos) {
            if (!t.rows.empty()) pending_gap = true;
            continue;
        }
        if (line[line.find_first_not_of(" \t")] == '#') continue;
        auto toks = detail::split_line(line);
        std::vector<double> row;
        row.reserve(toks.size());
        bool numeric = true;
        for (auto& tk : toks) {
            auto v = detail::parse_number(tk.text);
            if (!v) {
                numeric = false;
                break;
            }
            row.push_back(*v);
        }
        if (!numeric) {
            if (allow_header && t.rows.empty() && t.header.empty()) {
                for (auto& tk : toks) t.header.push_back(tk.text);
                continue;
            }
            for (auto& tk : toks)
                if (!detail::parse_number(tk.text))
                    throw ParseError(path, lineno, tk.column, "expected a number, found '" + tk.text + "'");
        }
        if (pending_gap) ++block;
        pending_gap = false;
        t.rows.push_back(std::move(row));
        t.lines.push_back(lineno);
        t.blocks.push_back(block);
    }
    return t;
}

inline void require_rectangular(const TextTable& t, const std::string& path, std::size_t from = 0) {
    if (t.rows.size() <= from) return;
    std::size_t w = t.rows[from].size();
    for (std::size_t i = from; i < t.rows.size(); ++i)
        if (t.rows[i].size() != w)
            throw ParseError(path, t.lines[i], 1,
                             "expected " + std::to_string(w) + " columns, found " + std::to_string(t.rows[i].size()));
}

inline MatrixXd read_predictors(const std::string& path) {
    TextTable t = read_table(path);
    if (t.rows.empty()) throw Error(Errc::invalid_input, "'" + path + "' contains no data rows");
    require_rectangular(t, path);
    MatrixXd x(static_cast<Index>(t.rows.size()), static_cast<Index>(t.rows[0].size()));
    for (std::size_t i = 0; i < t.rows.size(); ++i)
        for (std::size_t j = 0; j < t.rows[i].size(); ++j) x(static_cast<Index>(i), static_cast<Index>(j)) = t.rows[i][j];
    if (!x.allFinite()) throw Error(Errc::invalid_input, "'" + path + "' contains non-finite values");
    return x;
}

struct ResponseOptions {
    MatrixConstraint constraint = MatrixConstraint::psd;
    bool sqrt_transform = false;
};

namespace detail {

inline ResponseSet checked_set(std::vector<ObjectValue> objs, MetricSpaceKind kind, const std::string& path,
                               const TextTable& t, const std::vector<std::size_t>& first_row) {
    for (std::size_t i = 0; i < objs.size(); ++i) {
        try {
            validate_object(objs[i], kind);
        } catch (const Error& e) {
            throw ParseError(path, t.lines[first_row[i]], 1, e.what());
        }
    }
    return ResponseSet::from_objects(objs, kind);
}

inline ResponseSet read_long_matrices(const std::string& path, const TextTable& t, MatrixConstraint c) {
    std::vector<double> subjects;
    std::map<double, std::vector<std::size_t>> rows_of;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.rows[i].size() != 4) throw ParseError(path, t.lines[i], 1, "long format needs subject,row,col,value");
        double s = t.rows[i][0];
        if (!rows_of.count(s)) subjects.push_back(s);
        rows_of[s].push_back(i);
    }
    std::vector<ObjectValue> objs;
    std::vector<std::size_t> first;
    Index dim = -1;
    for (double s : subjects) {
        const auto& rs = rows_of[s];
        Index r = 0;
        for (std::size_t i : rs) {
            for (int k : {1, 2}) {
                double v = t.rows[i][static_cast<std::size_t>(k)];
                if (v < 1 || v != std::floor(v))
                    throw ParseError(path, t.lines[i], 1, "row/col indices must be integers >= 1");
                r = std::max(r, static_cast<Index>(v));
            }
        }
        if (dim >= 0 && r != dim) throw ParseError(path, t.lines[rs[0]], 1, "subjects have different matrix sizes");
        dim = r;
        MatrixXd m = MatrixXd::Constant(r, r, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i : rs) m(static_cast<Index>(t.rows[i][1]) - 1, static_cast<Index>(t.rows[i][2]) - 1) = t.rows[i][3];
        for (Index a = 0; a < r; ++a)
            for (Index b = 0; b < r; ++b)
                if (std::isnan(m(a, b))) m(a, b) = m(b, a);
        if (!m.allFinite()) throw ParseError(path, t.lines[rs[0]], 1, "matrix entries missing for a subject");
        objs.push_back(SymMatrix{m, c});
        first.push_back(rs[0]);
    }
    return checked_set(std::move(objs), MetricSpaceKind::frobenius, path, t, first);
}

inline ResponseSet read_block_matrices(const std::string& path, const TextTable& t, MatrixConstraint c) {
    std::vector<ObjectValue> objs;
    std::vector<std::size_t> first;
    std::size_t i = 0;
    while (i < t.rows.size()) {
        std::size_t j = i;
        while (j < t.rows.size() && t.blocks[j] == t.blocks[i]) ++j;
        const std::size_t r = j - i;
        MatrixXd m(static_cast<Index>(r), static_cast<Index>(r));
        for (std::size_t a = i; a < j; ++a) {
            if (t.rows[a].size() != r)
                throw ParseError(path, t.lines[a], 1, "matrix block must be square (" + std::to_string(r) + " columns)");
            for (std::size_t b = 0; b < r; ++b) m(static_cast<Index>(a - i), static_cast<Index>(b)) = t.rows[a][b];
        }
        objs.push_back(SymMatrix{m, c});
        first.push_back(i);
        i = j;
    }
    return checked_set(std::move(objs), MetricSpaceKind::frobenius, path, t, first);
}

} // namespace detail

inline ResponseSet read_responses(const std::string& path, MetricSpaceKind kind, const ResponseOptions& opt = {}) {
    const bool long_matrix_header = kind == MetricSpaceKind::frobenius;
    TextTable t = read_table(path, true);
    if (t.rows.empty()) throw Error(Errc::invalid_input, "'" + path + "' contains no data rows");
    std::vector<std::size_t> first;
    std::vector<ObjectValue> objs;
    switch (kind) {
    case MetricSpaceKind::wasserstein2: {
        if (t.rows.size() < 2) throw Error(Errc::invalid_input, "'" + path + "' needs a grid row and at least one subject");
        require_rectangular(t, path);
        GridPtr grid;
        try {
            grid = std::make_shared<const ProbGrid>(t.rows[0]);
        } catch (const Error& e) {
            throw ParseError(path, t.lines[0], 1, e.what());
        }
        for (std::size_t i = 1; i < t.rows.size(); ++i) {
            objs.push_back(QuantileFunction{grid, Eigen::Map<const VectorXd>(t.rows[i].data(), static_cast<Index>(t.rows[i].size()))});
            first.push_back(i);
        }
        return detail::checked_set(std::move(objs), kind, path, t, first);
    }
    case MetricSpaceKind::frobenius:
        if (long_matrix_header && t.header.size() == 4 && t.header[0] == "subject")
            return detail::read_long_matrices(path, t, opt.constraint);
        return detail::read_block_matrices(path, t, opt.constraint);
    case MetricSpaceKind::sphere_geodesic:
    case MetricSpaceKind::euclidean: {
        require_rectangular(t, path);
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            VectorXd v = Eigen::Map<const VectorXd>(t.rows[i].data(), static_cast<Index>(t.rows[i].size()));
            if (kind == MetricSpaceKind::sphere_geodesic && opt.sqrt_transform) {
                if ((v.array() < 0.0).any()) throw ParseError(path, t.lines[i], 1, "compositions must be nonnegative");
                double s = v.sum();
                if (!(s > 0.0)) throw ParseError(path, t.lines[i], 1, "composition sums to zero");
                v = (v / s).cwiseSqrt();
            }
            if (kind == MetricSpaceKind::sphere_geodesic) objs.push_back(SpherePoint{v});
            else objs.push_back(EuclideanVec{v});
            first.push_back(i);
        }
        return detail::checked_set(std::move(objs), kind, path, t, first);
    }
    }
    throw Error(Errc::invalid_input, "unknown response kind");
}

// Writes `content` to a temporary file next to `path` and renames it into place.
inline void atomic_write(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::invalid_input, "cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw Error(Errc::invalid_input, "write to '" + tmp.string() + "' failed");
    }
    std::filesystem::rename(tmp, target);
}

inline std::string join_row(const double* v, Index n) {
    std::string s;
    for (Index j = 0; j < n; ++j) {
        if (j) s += ',';
        s += format_double(v[j]);
    }
    return s;
}

inline std::string predictors_text(const MatrixXd& x) {
    std::string s;
    for (Index j = 0; j < x.cols(); ++j) s += (j ? ",x" : "x") + std::to_string(j + 1);
    s += '\n';
    for (Index i = 0; i < x.rows(); ++i) {
        VectorXd r = x.row(i).transpose();
        s += join_row(r.data(), r.size()) + '\n';
    }
    return s;
}

inline std::string responses_text(const ResponseSet& y) {
    std::string s;
    const auto& c = y.coords();
    switch (y.kind()) {
    case MetricSpaceKind::wasserstein2:
        s += join_row(y.shape().grid->probs().data(), y.shape().grid->size()) + '\n';
        for (Index i = 0; i < y.size(); ++i) s += join_row(c.col(i).data(), c.rows()) + '\n';
        break;
    case MetricSpaceKind::frobenius: {
        s += "subject,row,col,value\n";
        const Index r = y.shape().dim;
        for (Index i = 0; i < y.size(); ++i)
            for (Index a = 0; a < r; ++a)
                for (Index b = 0; b < r; ++b)
                    s += std::to_string(i + 1) + ',' + std::to_string(a + 1) + ',' + std::to_string(b + 1) + ',' +
                         format_double(c(b * r + a, i)) + '\n';
        break;
    }
    default:
        for (Index i = 0; i < y.size(); ++i) s += join_row(c.col(i).data(), c.rows()) + '\n';
    }
    return s;
}

inline void write_predictors(const std::string& path, const MatrixXd& x) { atomic_write(path, predictors_text(x)); }
inline void write_responses(const std::string& path, const ResponseSet& y) { atomic_write(path, responses_text(y)); }

// ---- configuration ------------------------------------------------------------

struct RunConfig {
    MetricSpaceKind metric = MetricSpaceKind::euclidean;
    KernelFamily kernel = KernelFamily::epanechnikov;
    std::size_t directions = 500;
    std::vector<double> bandwidths; // empty: auto
    std::vector<int> bins;          // empty: auto
    int bootstrap_b = 200;
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    TuningMode tuning = TuningMode::per_direction;
    bool refine = false;
    int folds = 5;
    MatrixConstraint matrix_constraint = MatrixConstraint::psd;
    bool sqrt_transform = false;

    FitConfig fit_config() const {
        FitConfig c;
        c.n_directions = directions;
        c.bandwidths = bandwidths;
        c.bin_counts = bins;
        c.kernel = kernel;
        c.refine = refine;
        c.tuning = tuning;
        c.folds = folds;
        c.seed = seed.value_or(0);
        c.workers = workers;
        return c;
    }
};

inline TuningMode parse_tuning(const std::string& s) {
    if (s == "per-direction") return TuningMode::per_direction;
    if (s == "cached") return TuningMode::cached;
    throw Error(Errc::invalid_input, "unknown tuning mode '" + s + "'");
}

inline const char* tuning_name(TuningMode t) { return t == TuningMode::cached ? "cached" : "per-direction"; }

namespace detail {

template <class T>
T parse_int_value(const std::string& v, const std::string& key) {
    T out{};
    auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw Error(Errc::invalid_input, "bad integer for '" + key + "': '" + v + "'");
    return out;
}

inline bool parse_bool_value(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Error(Errc::invalid_input, "bad boolean for '" + key + "': '" + v + "'");
}

template <class T, class F>
std::vector<T> parse_list(const std::string& v, F conv) {
    std::vector<T> out;
    if (v == "auto") return out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
        if (a == std::string::npos) continue;
        out.push_back(conv(item.substr(a, b - a + 1)));
    }
    return out;
}

} // namespace detail

inline void apply_config_value(RunConfig& c, const std::string& key, const std::string& v) {
    auto positive_double = [&](const std::string& s) {
        auto d = detail::parse_number(s);
        if (!d || !(*d > 0.0)) throw Error(Errc::invalid_input, "bad positive number for '" + key + "': '" + s + "'");
        return *d;
    };
    auto positive_int = [&](const std::string& s) {
        int m = detail::parse_int_value<int>(s, key);
        if (m < 1) throw Error(Errc::invalid_input, "'" + key + "' must be >= 1");
        return m;
    };
    if (key == "metric") c.metric = parse_kind(v);
    else if (key == "kernel") c.kernel = parse_kernel(v);
    else if (key == "directions") c.directions = static_cast<std::size_t>(positive_int(v));
    else if (key == "bandwidths") c.bandwidths = detail::parse_list<double>(v, positive_double);
    else if (key == "bins") c.bins = detail::parse_list<int>(v, positive_int);
    else if (key == "bootstrap_b") c.bootstrap_b = positive_int(v);
    else if (key == "seed") c.seed = detail::parse_int_value<std::uint64_t>(v, key);
    else if (key == "workers") c.workers = static_cast<unsigned>(detail::parse_int_value<unsigned>(v, key));
    else if (key == "tuning") c.tuning = parse_tuning(v);
    else if (key == "refine") c.refine = detail::parse_bool_value(v, key);
    else if (key == "folds") c.folds = positive_int(v);
    else if (key == "matrix_constraint") c.matrix_constraint = parse_constraint(v);
    else if (key == "sqrt_transform") c.sqrt_transform = detail::parse_bool_value(v, key);
    else throw Error(Errc::invalid_input, "unknown config key '" + key + "'");
}

// Flat "key = value" lines; '#' starts a comment.
inline RunConfig read_config(const std::string& path, RunConfig c = {}) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::invalid_input, "cannot open config '" + path + "'");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = detail::strip_cr(line);
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(path, lineno, 1, "expected key = value");
        auto trim = [](std::string s) {
            auto a = s.find_first_not_of(" \t"), b = s.find_last_not_of(" \t");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        try {
            apply_config_value(c, key, value);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(path, lineno, eq + 2, e.what());
        }
    }
    return c;
}

inline json config_to_json(const RunConfig& c) {
    json j;
    j["metric"] = kind_name(c.metric);
    j["kernel"] = kernel_name(c.kernel);
    j["directions"] = c.directions;
    j["bandwidths"] = c.bandwidths.empty() ? json("auto") : json(c.bandwidths);
    j["bins"] = c.bins.empty() ? json("auto") : json(c.bins);
    j["bootstrap_b"] = c.bootstrap_b;
    j["seed"] = c.seed ? json(*c.seed) : json(nullptr);
    j["tuning"] = tuning_name(c.tuning);
    j["refine"] = c.refine;
    j["folds"] = c.folds;
    j["matrix_constraint"] = constraint_name(c.matrix_constraint);
    j["sqrt_transform"] = c.sqrt_transform;
    return j;
}

inline RunConfig config_from_json(const json& j) {
    RunConfig c;
    c.metric = parse_kind(j.at("metric").get<std::string>());
    c.kernel = parse_kernel(j.at("kernel").get<std::string>());
    c.directions = j.at("directions").get<std::size_t>();
    if (j.at("bandwidths").is_array()) c.bandwidths = j.at("bandwidths").get<std::vector<double>>();
    if (j.at("bins").is_array()) c.bins = j.at("bins").get<std::vector<int>>();
    c.bootstrap_b = j.at("bootstrap_b").get<int>();
    if (!j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.tuning = parse_tuning(j.at("tuning").get<std::string>());
    c.refine = j.at("refine").get<bool>();
    c.folds = j.at("folds").get<int>();
    c.matrix_constraint = parse_constraint(j.at("matrix_constraint").get<std::string>());
    c.sqrt_transform = j.at("sqrt_transform").get<bool>();
    return c;
}

// ---- result payloads ----------------------------------------------------------

inline std::string utc_timestamp() {
    std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline json vec_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

inline VectorXd json_vec(const json& j) {
    std::vector<double> v = j.get<std::vector<double>>();
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size()));
}

inline json fit_to_json(const IfrFit& fit) {
    json j;
    j["direction"] = {{"full", vec_json(fit.direction.full)}, {"reduced", vec_json(fit.direction.reduced)}};
    j["bandwidth"] = fit.bandwidth;
    j["bins_requested"] = fit.bins_requested;
    j["bins_effective"] = fit.effective_bins();
    j["criterion"] = fit.criterion;
    j["kernel"] = kernel_name(fit.kernel);
    j["metric"] = kind_name(fit.kind);
    j["bins"] = {{"edges", fit.bins.edges}, {"rep_index", fit.bins.rep_index}, {"rep_projection", fit.bins.rep_projection}};
    json fitted = json::array();
    for (const auto& o : fit.fitted) fitted.push_back(vec_json(to_coords(o)));
    j["fitted"] = fitted;
    const SearchLog& log = fit.search_log;
    std::size_t refined = 0, infeasible = 0;
    json entries = json::array();
    for (const auto& e : log.entries) {
        refined += e.refined;
        infeasible += !std::isfinite(e.criterion);
        entries.push_back({{"direction", vec_json(e.direction)},
                           {"criterion", std::isfinite(e.criterion) ? json(e.criterion) : json(nullptr)},
                           {"bandwidth", e.bandwidth},
                           {"bins", e.bins},
                           {"refined", e.refined}});
    }
    j["search_log"] = {{"evaluated", log.entries.size()},
                       {"refined", refined},
                       {"infeasible", infeasible},
                       {"best_index", log.best},
                       {"zero_variance", log.zero_variance},
                       {"tuning_rounds", log.tuning_rounds},
                       {"entries", entries}};
    return j;
}

// Rebuilds a fit from its payload; bins and fitted objects are recomputed from the
// training data, so the criterion is checked against the stored value.
inline IfrFit fit_from_json(const json& j, const MatrixXd& x, const ResponseSet& y) {
    IfrFit fit;
    VectorXd reduced = json_vec(j.at("direction").at("reduced"));
    if (reduced.size() + 1 != x.cols()) throw Error(Errc::dimension, "fit direction does not match predictor columns");
    fit.direction = lift(reduced);
    fit.bandwidth = j.at("bandwidth").get<double>();
    fit.bins_requested = j.at("bins_requested").get<int>();
    fit.kernel = parse_kernel(j.at("kernel").get<std::string>());
    fit.kind = parse_kind(j.at("metric").get<std::string>());
    if (fit.kind != y.kind()) throw Error(Errc::invalid_input, "fit metric does not match the responses");
    std::vector<double> proj = project_rows(x, fit.direction.full);
    fit.bins = make_bins(proj, fit.bins_requested);
    CriterionEval ce = evaluate_criterion(y, proj, fit.bins, KernelSpec{fit.kernel, fit.bandwidth});
    fit.criterion = ce.value;
    for (auto& c : ce.fitted) fit.fitted.push_back(from_coords(y.shape(), c));
    return fit;
}

inline json payload(const std::string& command, json body) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["command"] = command;
    j["created"] = utc_timestamp();
    for (auto it = body.begin(); it != body.end(); ++it) j[it.key()] = it.value();
    return j;
}

inline json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::invalid_input, "cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        // e.byte is 1-based and may point one past the end on truncated input.
        std::size_t at = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < at; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string msg = e.what();
        if (auto k = msg.find("syntax error"); k != std::string::npos) msg = msg.substr(k);
        throw ParseError(path, line, col, msg);
    }
    if (!j.is_object() || !j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != kSchemaVersion)
        throw Error(Errc::invalid_input, "'" + path + "' has an unsupported schema version");
    return j;
}

inline void write_json(const std::string& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

// ---- plot data and import helpers ----------------------------------------------

struct DensityPoint {
    double x;
    double density;
};

// Density from a quantile function by reciprocal slopes: dp / max(dq, 1e-8).
inline std::vector<DensityPoint> density_from_quantiles(const QuantileFunction& q) {
    const auto& p = q.grid->probs();
    std::vector<DensityPoint> out;
    for (Index k = 0; k + 1 < q.values.size(); ++k) {
        double dq = std::max(q.values[k + 1] - q.values[k], 1e-8);
        double dp = p[static_cast<std::size_t>(k + 1)] - p[static_cast<std::size_t>(k)];
        out.push_back({0.5 * (q.values[k] + q.values[k + 1]), dp / dq});
    }
    return out;
}

// Pearson correlation between the columns of a (time points x nodes) signal matrix.
inline SymMatrix pearson_correlation(const MatrixXd& signal) {
    if (signal.rows() < 2) throw Error(Errc::invalid_input, "need at least two time points");
    MatrixXd c = signal.rowwise() - signal.colwise().mean();
    VectorXd ss = c.colwise().squaredNorm();
    for (Index j = 0; j < ss.size(); ++j)
        if (!(ss[j] > 0.0)) throw Error(Errc::degenerate_input, "constant signal in column " + std::to_string(j + 1));
    MatrixXd r = c.transpose() * c;
    for (Index a = 0; a < r.rows(); ++a)
        for (Index b = 0; b < r.cols(); ++b) r(a, b) /= std::sqrt(ss[a] * ss[b]);
    r = detail::symmetrize(r);
    r.diagonal().setOnes();
    return SymMatrix{project_correlation(r), MatrixConstraint::correlation};
}

} // namespace ifr
