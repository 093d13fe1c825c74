#include <CLI11.hpp>

#include <ifr/ifr.hpp>

#include <iostream>
#include <random>
#include <sstream>

using namespace ifr;

namespace {

// Options shared by every command; each maps onto a RunConfig key and overrides
// both the --config file and any configuration stored in an input payload.
struct Globals {
    std::string config_path;
    std::vector<std::pair<std::string, CLI::Option*>> keyed;
    std::map<std::string, std::string> values;
    bool refine = false;
    CLI::Option* refine_opt = nullptr;
};

void add_globals(CLI::App& app, Globals& g) {
    app.add_option("--config", g.config_path, "key = value configuration file");
    auto add = [&](const std::string& flag, const std::string& key, const std::string& help) {
        g.keyed.emplace_back(key, app.add_option(flag, g.values[key], help));
    };
    add("--seed", "seed", "root random seed");
    add("--workers", "workers", "worker threads");
    add("--metric", "metric", "wasserstein | frobenius | sphere | euclidean");
    add("--kernel", "kernel", "epanechnikov | gaussian");
    add("--directions", "directions", "number of sampled directions");
    add("--bootstrap-B", "bootstrap_b", "bootstrap replicates");
    add("--tuning", "tuning", "per-direction | cached");
    add("--bins", "bins", "bin-count grid, comma separated, or auto");
    add("--bandwidths", "bandwidths", "bandwidth grid, comma separated, or auto");
    add("--folds", "folds", "cross-validation folds");
    add("--matrix-constraint", "matrix_constraint", "psd | correlation | unit-box");
    g.refine_opt = app.add_flag("--refine", g.refine, "polish the best grid direction");
    g.keyed.emplace_back("sqrt_transform", app.add_flag("--sqrt-transform", "square-root transform compositions"));
}

RunConfig resolve_config(const Globals& g, RunConfig base = {}) {
    RunConfig c = g.config_path.empty() ? base : read_config(g.config_path, base);
    for (const auto& [key, opt] : g.keyed) {
        if (opt->count() == 0) continue;
        if (key == "sqrt_transform") apply_config_value(c, key, "true");
        else apply_config_value(c, key, g.values.at(key));
    }
    if (g.refine_opt->count()) c.refine = true;
    if (c.workers < 1) c.workers = 1;
    if (!c.seed) {
        c.seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
        std::cerr << "note: no --seed given; using " << *c.seed << "\n";
    }
    return c;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto a = item.find_first_not_of(" \t"), b = item.find_last_not_of(" \t");
        if (a == std::string::npos) continue;
        auto v = detail::parse_number(item.substr(a, b - a + 1));
        if (!v) throw Error(Errc::invalid_input, "bad number in " + what + ": '" + item + "'");
        out.push_back(*v);
    }
    return out;
}

VectorXd to_vec(const std::vector<double>& v) { return Eigen::Map<const VectorXd>(v.data(), static_cast<Index>(v.size())); }

std::string vec6(const VectorXd& v) {
    std::string s;
    for (Index i = 0; i < v.size(); ++i) s += (i ? " " : "") + format6(v[i]);
    return s;
}

void line(const std::string& key, const std::string& value) {
    std::cout << std::left << std::setw(16) << key << ' ' << value << '\n';
}
void line(const std::string& key, double v) { line(key, format6(v)); }

void emit_text(const std::string& path, const std::string& s) {
    if (path.empty() || path == "-") std::cout << s;
    else atomic_write(path, s);
}

struct Dataset {
    std::string x_path, y_path;
    MatrixXd x;
    ResponseSet y;
};

Dataset load_dataset(const std::string& x_path, const std::string& y_path, const RunConfig& c) {
    Dataset d{x_path, y_path, read_predictors(x_path), {}};
    d.y = read_responses(y_path, c.metric, ResponseOptions{c.matrix_constraint, c.sqrt_transform});
    if (d.y.size() != d.x.rows())
        throw Error(Errc::dimension, "predictors have " + std::to_string(d.x.rows()) + " rows but responses have " +
                                         std::to_string(d.y.size()));
    return d;
}

json data_json(const Dataset& d) {
    json j = {{"predictors", d.x_path}, {"responses", d.y_path}, {"n", d.x.rows()}, {"p", d.x.cols()}};
    if (d.y.kind() == MetricSpaceKind::wasserstein2) j["grid"] = d.y.shape().grid->probs();
    return j;
}

// A fit payload together with its training data and configuration.
struct LoadedFit {
    json payload;
    RunConfig config;
    Dataset data;
    IfrFit fit;
};

LoadedFit load_fit(const std::string& path, const Globals& g, const std::string& x_override,
                   const std::string& y_override) {
    LoadedFit lf;
    lf.payload = read_json(path);
    if (lf.payload.value("command", "") != "fit") throw Error(Errc::invalid_input, "'" + path + "' is not a fit result");
    lf.config = resolve_config(g, config_from_json(lf.payload.at("config")));
    const json& dj = lf.payload.at("data");
    lf.data = load_dataset(x_override.empty() ? dj.at("predictors").get<std::string>() : x_override,
                           y_override.empty() ? dj.at("responses").get<std::string>() : y_override, lf.config);
    lf.fit = fit_from_json(lf.payload.at("fit"), lf.data.x, lf.data.y);
    return lf;
}

// ---- fit -------------------------------------------------------------------------

struct FitArgs {
    std::string x, y, out, truth;
};

int cmd_fit(const FitArgs& a, const Globals& g) {
    RunConfig c = resolve_config(g);
    Dataset d = load_dataset(a.x, a.y, c);
    IfrFit fit = fit_ifr(d.x, d.y, c.fit_config());
    json body = {{"config", config_to_json(c)}, {"data", data_json(d)}, {"fit", fit_to_json(fit)}};
    std::optional<double> angle;
    if (!a.truth.empty()) {
        json t = read_json(a.truth);
        VectorXd th0 = json_vec(t.at("theta0"));
        if (th0.size() != fit.direction.p()) throw Error(Errc::dimension, "truth direction has the wrong length");
        angle = direction_angle(fit.direction.full, th0);
        body["angle_to_truth"] = *angle;
    }
    if (!a.out.empty()) write_json(a.out, payload("fit", body));

    std::size_t infeasible = 0, refined = 0;
    for (const auto& e : fit.search_log.entries) {
        infeasible += !std::isfinite(e.criterion);
        refined += e.refined;
    }
    line("direction", vec6(fit.direction.full));
    line("reduced", vec6(fit.direction.reduced));
    line("bandwidth", fit.bandwidth);
    line("bins", std::to_string(fit.bins_requested) + " (" + std::to_string(fit.effective_bins()) + " non-empty)");
    line("criterion", fit.criterion);
    line("directions", std::to_string(fit.search_log.entries.size()) + " evaluated, " + std::to_string(infeasible) +
                           " infeasible, " + std::to_string(refined) + " refined");
    if (fit.search_log.zero_variance) line("note", "responses are constant; every direction attains 0");
    if (angle) line("angle_to_truth", *angle);
    return 0;
}

// ---- test ------------------------------------------------------------------------

struct TestArgs {
    std::string fit, x, y, b_matrix, zeta, covariance = "bootstrap", out;
    double alpha = 0.05, gamma = 0.05;
    std::optional<double> statistic;
    std::optional<int> df;
    bool stepwise = false;
    double alpha_enter = 0.05;
    std::vector<int> initial{1};
};

void print_test(const TestResult& t) {
    line("statistic", t.statistic);
    line("df", std::to_string(t.df));
    line("p_value", t.p_value);
    std::ostringstream p3;
    p3 << std::fixed << std::setprecision(3) << t.p_value;
    line("p_value_3dp", p3.str());
    line("alpha", t.alpha);
    line("reject", t.reject ? "yes" : "no");
}

json test_json(const TestResult& t) {
    return {{"statistic", t.statistic}, {"df", t.df}, {"p_value", t.p_value}, {"alpha", t.alpha}, {"reject", t.reject}};
}

json matrix_json(const MatrixXd& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

int cmd_stepwise(const TestArgs& a, const Globals& g) {
    RunConfig c = resolve_config(g);
    Dataset d = load_dataset(a.x, a.y, c);
    std::vector<Index> initial;
    for (int col : a.initial) {
        if (col < 1 || col > d.x.cols()) throw Error(Errc::invalid_input, "initial column out of range");
        initial.push_back(col - 1);
    }
    StepwiseReport rep = stepwise_select(d.x, d.y, c.fit_config(), c.bootstrap_b, a.alpha_enter,
                                         stream_seed(*c.seed, streams::bootstrap), initial);
    json steps = json::array();
    for (const auto& s : rep.steps) {
        json cands = json::array();
        std::cout << "model {";
        for (std::size_t i = 0; i < s.model.size(); ++i) std::cout << (i ? "," : "") << s.model[i] + 1;
        std::cout << "}\n";
        for (const auto& cd : s.candidates) {
            cands.push_back({{"column", cd.column + 1},
                             {"statistic", cd.statistic},
                             {"p_value", cd.p_value},
                             {"failed", cd.failed}});
            std::cout << "  + x" << cd.column + 1 << "  "
                      << (cd.failed ? std::string("failed") : "T " + format6(cd.statistic) + "  p " + format6(cd.p_value))
                      << '\n';
        }
        std::vector<Index> model1;
        for (Index m : s.model) model1.push_back(m + 1);
        json sj = {{"model", model1}, {"candidates", cands}};
        sj["entered"] = s.entered ? json(*s.entered + 1) : json(nullptr);
        if (s.entered) std::cout << "  entered x" << *s.entered + 1 << '\n';
        steps.push_back(sj);
    }
    std::vector<Index> final1;
    for (Index m : rep.model) final1.push_back(m + 1);
    if (!a.out.empty())
        write_json(a.out, payload("test", {{"mode", "stepwise"},
                                           {"config", config_to_json(c)},
                                           {"data", data_json(d)},
                                           {"alpha_enter", a.alpha_enter},
                                           {"steps", steps},
                                           {"model", final1}}));
    return 0;
}

int cmd_test(const TestArgs& a, const Globals& g) {
    if (a.statistic || a.df) {
        if (!a.statistic || !a.df) throw Error(Errc::invalid_input, "--statistic and --df go together");
        TestResult t = test_from_statistic(*a.statistic, *a.df, a.alpha);
        print_test(t);
        if (!a.out.empty()) write_json(a.out, payload("test", {{"mode", "statistic"}, {"test", test_json(t)}}));
        return 0;
    }
    if (a.stepwise) return cmd_stepwise(a, g);
    if (a.fit.empty()) throw Error(Errc::invalid_input, "test needs --fit, --stepwise, or --statistic/--df");

    LoadedFit lf = load_fit(a.fit, g, a.x, a.y);
    const VectorXd& theta = lf.fit.direction.reduced;
    const Index k = theta.size();
    MatrixXd bm = MatrixXd::Identity(k, k);
    if (!a.b_matrix.empty()) {
        TextTable t = read_table(a.b_matrix, false);
        if (t.rows.empty()) throw Error(Errc::invalid_input, "'" + a.b_matrix + "' has no rows");
        require_rectangular(t, a.b_matrix);
        bm.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(t.rows[0].size()));
        for (std::size_t i = 0; i < t.rows.size(); ++i) bm.row(static_cast<Index>(i)) = to_vec(t.rows[i]).transpose();
        if (bm.cols() != k)
            throw Error(Errc::dimension, "hypothesis matrix has " + std::to_string(bm.cols()) +
                                             " columns; the reduced direction has " + std::to_string(k));
    }
    VectorXd zeta = a.zeta.empty() ? VectorXd::Zero(bm.rows()) : to_vec(parse_doubles(a.zeta, "--zeta"));
    if (zeta.size() != bm.rows()) throw Error(Errc::dimension, "zeta length does not match the hypothesis rows");

    json cov;
    MatrixXd lambda;
    if (a.covariance == "plugin") {
        DifferenceContext ctx = difference_context(lf.fit, lf.data.x, lf.data.y, lf.config.workers);
        CovarianceEstimate ce = plugin_covariance(ctx, theta);
        lambda = ce.lambda;
        cov = {{"source", "plugin"}, {"step", ce.step}, {"sigma_hat", matrix_json(ce.sigma_hat)}, {"hessian", matrix_json(ce.hess)}};
    } else if (a.covariance == "bootstrap") {
        FitConfig fc = lf.config.fit_config();
        BootstrapResult br = bootstrap_lambda(lf.data.x, lf.data.y, lf.fit, fc, lf.config.bootstrap_b,
                                              stream_seed(*lf.config.seed, streams::bootstrap));
        lambda = br.lambda;
        cov = {{"source", "bootstrap"}, {"requested", br.requested}, {"failures", br.failures}};
    } else {
        throw Error(Errc::invalid_input, "--covariance must be bootstrap or plugin");
    }
    cov["lambda"] = matrix_json(lambda);
    const int m = lf.fit.effective_bins();
    TestResult t = wald_test(theta, bm, zeta, lambda, m, a.alpha);

    json body = {{"mode", "wald"},
                 {"fit", a.fit},
                 {"config", config_to_json(lf.config)},
                 {"hypothesis", {{"B", matrix_json(bm)}, {"zeta", vec_json(zeta)}}},
                 {"covariance", cov},
                 {"bins", m},
                 {"test", test_json(t)}};
    line("reduced", vec6(theta));
    line("covariance", a.covariance + (cov.contains("failures") ? " (" + std::to_string(cov["failures"].get<int>()) +
                                                                       " failed replicates)"
                                                                 : ""));
    print_test(t);
    try {
        ConfidenceRegion cr = confidence_region(theta, lambda, m, a.gamma);
        body["region"] = {{"center", vec_json(cr.center)},
                          {"shape", matrix_json(cr.shape)},
                          {"threshold", cr.threshold},
                          {"level", cr.level}};
        line("region", format6(cr.level * 100) + "% ellipsoid, threshold " + format6(cr.threshold));
    } catch (const Error& e) {
        if (e.code() != Errc::degenerate_region) throw;
        line("region", "not available (Lambda/M is not positive definite)");
    }
    if (!a.out.empty()) write_json(a.out, payload("test", body));
    return 0;
}

// ---- predict ---------------------------------------------------------------------

struct PredictArgs {
    std::string fit, x_new, truth, out, report, x, y;
};

int cmd_predict(const PredictArgs& a, const Globals& g) {
    LoadedFit lf = load_fit(a.fit, g, a.x, a.y);
    MatrixXd xn = read_predictors(a.x_new);
    std::vector<Prediction> preds = predict(lf.fit, xn, lf.data.x, lf.data.y);
    std::vector<ObjectValue> values;
    json flagged = json::array();
    for (std::size_t i = 0; i < preds.size(); ++i) {
        values.push_back(preds[i].value);
        if (preds[i].extrapolated) {
            flagged.push_back(i + 1);
            std::cerr << "warning: row " << i + 1 << " projects to " << format6(preds[i].projection)
                      << ", outside the training range widened by the bandwidth\n";
        }
    }
    ResponseSet out = ResponseSet::from_objects(values, lf.data.y.kind());
    if (!a.out.empty()) write_responses(a.out, out);
    else if (a.report.empty()) std::cout << responses_text(out);

    json body = {{"fit", a.fit}, {"predictors", a.x_new}, {"count", preds.size()}, {"extrapolated", flagged}};
    line("predictions", std::to_string(preds.size()));
    line("extrapolated", std::to_string(flagged.size()));
    if (!a.truth.empty()) {
        ResponseSet truth = read_responses(a.truth, lf.data.y.kind(),
                                           ResponseOptions{lf.config.matrix_constraint, lf.config.sqrt_transform});
        if (truth.size() != out.size()) throw Error(Errc::length_mismatch, "truth and predictions differ in count");
        std::vector<ObjectValue> tv = truth.objects();
        double r = rmpe(values, tv, out.kind());
        // Baseline: the unconditional Fréchet mean of the training responses.
        const Index n = lf.data.y.size();
        ObjectValue mean = from_coords(lf.data.y.shape(), frechet_mean_coords(lf.data.y.shape(), lf.data.y.coords(),
                                                                               VectorXd::Constant(n, 1.0 / n)));
        double base = rmpe(std::vector<ObjectValue>(tv.size(), mean), tv, out.kind());
        body["rmpe"] = r;
        body["baseline_rmpe"] = base;
        line("rmpe", r);
        line("baseline_rmpe", base);
    }
    if (!a.report.empty()) write_json(a.report, payload("predict", body));
    return 0;
}

// ---- simulate / power ------------------------------------------------------------

struct SimArgs {
    std::string scenario = "setting1", link = "identity", design = "copula", theta0, out, prefix;
    Index n = 100, p = 4, nodes = 10;
    double rho = 0.25, noise_sd = 0.5;
    std::size_t runs = 0;
    bool gfr = false;
};

SimSpec make_spec(const SimArgs& a, std::uint64_t seed) {
    SimSpec s;
    s.scenario = parse_scenario(a.scenario);
    s.link = parse_link(a.link);
    s.n = a.n;
    s.p = a.p;
    s.rho = a.rho;
    s.nodes = a.nodes;
    s.noise_sd = a.noise_sd;
    s.seed = seed;
    if (a.design == "copula") s.design = PredictorDesign::copula;
    else if (a.design == "truncated") s.design = PredictorDesign::truncated_normal;
    else throw Error(Errc::invalid_input, "--design must be copula or truncated");
    if (a.theta0.empty()) s.theta0 = default_theta0(a.p);
    else {
        VectorXd v = to_vec(parse_doubles(a.theta0, "--theta0"));
        if (v.size() != a.p) throw Error(Errc::dimension, "--theta0 needs p entries");
        s.theta0 = direction_from_vector(v);
    }
    validate_spec(s);
    return s;
}

std::string scenario_metric(Scenario s) {
    switch (s) {
    case Scenario::dist_setting1:
    case Scenario::dist_setting2: return "wasserstein";
    case Scenario::adjacency: return "frobenius";
    default: return "euclidean";
    }
}

json spec_json(const SimSpec& s) {
    return {{"scenario", scenario_name(s.scenario)},
            {"metric", scenario_metric(s.scenario)},
            {"link", link_name(s.link)},
            {"n", s.n},
            {"p", s.p},
            {"rho", s.rho},
            {"design", s.design == PredictorDesign::copula ? "copula" : "truncated"},
            {"nodes", s.nodes},
            {"noise_sd", s.noise_sd},
            {"seed", s.seed},
            {"theta0", vec_json(s.theta0.full)}};
}

int cmd_simulate(const SimArgs& a, const Globals& g) {
    RunConfig c = resolve_config(g);
    SimSpec s = make_spec(a, *c.seed);
    if (a.runs == 0) {
        if (a.prefix.empty()) throw Error(Errc::invalid_input, "simulate needs --prefix to export a dataset, or --runs");
        Rng rng = make_stream(run_data_seed(s.seed, 0), 0);
        SimData d = simulate(s, rng);
        write_predictors(a.prefix + "_x.csv", d.x);
        write_responses(a.prefix + "_y.csv", d.y);
        json truth = spec_json(s);
        truth["index"] = d.index;
        write_json(a.prefix + "_truth.json", payload("simulate", truth));
        line("predictors", a.prefix + "_x.csv");
        line("responses", a.prefix + "_y.csv");
        line("truth", a.prefix + "_truth.json");
        line("theta0", vec6(s.theta0.full));
        line("metric", scenario_metric(s.scenario) + " (pass --metric to fit)");
        return 0;
    }
    McReport rep = run_mc_study(s, a.runs, c.fit_config(), c.workers, a.gfr);
    json est = json::array();
    for (const auto& e : rep.estimates) est.push_back(vec_json(e.full));
    json body = {{"spec", spec_json(s)},
                 {"config", config_to_json(c)},
                 {"runs", a.runs},
                 {"failed_runs", rep.failed_runs},
                 {"bias", rep.bias},
                 {"dev", rep.dev},
                 {"estimates", est},
                 {"msd_ifr", rep.msd_ifr}};
    if (a.gfr) body["msd_gfr"] = rep.msd_gfr;
    if (!a.out.empty()) write_json(a.out, payload("simulate", body));
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    line("runs", std::to_string(rep.estimates.size()) + " completed, " + std::to_string(rep.failed_runs.size()) + " failed");
    line("bias", rep.bias);
    line("dev", rep.dev);
    line("mean_msd_ifr", mean(rep.msd_ifr));
    if (a.gfr) line("mean_msd_gfr", mean(rep.msd_gfr));
    return 0;
}

struct PowerArgs {
    SimArgs sim;
    std::string deltas = "0,0.2,0.5", out;
    double alpha = 0.05;
};

int cmd_power(PowerArgs a, const Globals& g) {
    RunConfig c = resolve_config(g);
    if (a.sim.runs == 0) throw Error(Errc::invalid_input, "power needs --runs >= 1");
    std::vector<double> deltas = parse_doubles(a.deltas, "--deltas");
    if (deltas.empty()) throw Error(Errc::invalid_input, "power needs at least one delta");
    SimSpec s = make_spec(a.sim, *c.seed);
    PowerTable t = run_size_power_study(s, deltas, a.sim.runs, a.alpha, c.fit_config(), c.bootstrap_b, c.workers);
    json rows = json::array();
    std::cout << std::left << std::setw(10) << "delta" << std::setw(10) << "rate" << std::setw(10) << "rejected"
              << std::setw(10) << "completed" << "failed\n";
    for (const auto& r : t.rows) {
        rows.push_back({{"delta", r.delta},
                        {"rate", r.rate()},
                        {"rejections", r.rejections},
                        {"completed", r.completed},
                        {"failures", r.failures}});
        std::cout << std::left << std::setw(10) << format6(r.delta) << std::setw(10) << format6(r.rate()) << std::setw(10)
                  << r.rejections << std::setw(10) << r.completed << r.failures << '\n';
    }
    json spec = spec_json(s);
    spec.erase("theta0");
    if (!a.out.empty())
        write_json(a.out, payload("power", {{"spec", spec},
                                            {"config", config_to_json(c)},
                                            {"alpha", t.alpha},
                                            {"runs", a.sim.runs},
                                            {"rows", rows}}));
    return 0;
}

// ---- plotdata --------------------------------------------------------------------

struct PlotArgs {
    std::string what, input, responses, out, center, lambda;
    int m = 1, points = 100;
    double gamma = 0.05;
};

std::string density_rows(const std::string& label, std::size_t id, const QuantileFunction& q) {
    std::string s;
    for (const auto& pt : density_from_quantiles(q))
        s += label + ',' + std::to_string(id) + ',' + format_double(pt.x) + ',' + format_double(pt.density) + '\n';
    return s;
}

int cmd_plotdata(const PlotArgs& a, const Globals& g) {
    if (a.what == "densities") {
        std::string s = "source,id,x,density\n";
        if (!a.responses.empty()) {
            ResponseSet y = read_responses(a.responses, MetricSpaceKind::wasserstein2);
            for (Index i = 0; i < y.size(); ++i)
                s += density_rows("observed", static_cast<std::size_t>(i + 1), std::get<QuantileFunction>(y.object(i)));
        }
        if (!a.input.empty()) {
            json j = read_json(a.input);
            if (j.value("command", "") != "fit" || j.at("fit").at("metric") != "wasserstein")
                throw Error(Errc::invalid_input, "densities need a fit result on distributional responses");
            auto grid = std::make_shared<const ProbGrid>(j.at("data").at("grid").get<std::vector<double>>());
            std::size_t id = 0;
            for (const auto& f : j.at("fit").at("fitted")) s += density_rows("fitted", ++id, QuantileFunction{grid, json_vec(f)});
        }
        if (a.input.empty() && a.responses.empty()) throw Error(Errc::invalid_input, "densities need --input or --responses");
        emit_text(a.out, s);
        return 0;
    }
    if (a.what == "power") {
        json j = read_json(a.input);
        if (j.value("command", "") != "power") throw Error(Errc::invalid_input, "'" + a.input + "' is not a power table");
        std::string s = "delta,rate,rejections,completed,failures\n";
        for (const auto& r : j.at("rows"))
            s += format_double(r.at("delta").get<double>()) + ',' + format_double(r.at("rate").get<double>()) + ',' +
                 std::to_string(r.at("rejections").get<int>()) + ',' + std::to_string(r.at("completed").get<int>()) + ',' +
                 std::to_string(r.at("failures").get<int>()) + '\n';
        emit_text(a.out, s);
        return 0;
    }
    if (a.what == "ellipse") {
        ConfidenceRegion cr;
        if (!a.input.empty()) {
            json j = read_json(a.input);
            if (!j.contains("region")) throw Error(Errc::invalid_input, "'" + a.input + "' has no confidence region");
            const json& r = j.at("region");
            cr.center = json_vec(r.at("center"));
            const Index k = cr.center.size();
            cr.shape.resize(k, k);
            for (Index i = 0; i < k; ++i) cr.shape.row(i) = json_vec(r.at("shape").at(static_cast<std::size_t>(i))).transpose();
            cr.threshold = r.at("threshold").get<double>();
            cr.level = r.at("level").get<double>();
        } else {
            VectorXd c = to_vec(parse_doubles(a.center, "--center"));
            std::vector<double> l = parse_doubles(a.lambda, "--lambda");
            if (static_cast<Index>(l.size()) != c.size() * c.size())
                throw Error(Errc::dimension, "--lambda needs k*k entries for a k-vector --center");
            MatrixXd lm = Eigen::Map<const MatrixXd>(l.data(), c.size(), c.size());
            if (a.m < 1) throw Error(Errc::invalid_input, "--m must be >= 1");
            cr = confidence_region(c, lm, a.m, a.gamma);
        }
        if (cr.center.size() != 2) throw Error(Errc::dimension, "ellipse output needs a 2-D region");
        if (a.points < 3) throw Error(Errc::invalid_input, "--points must be >= 3");
        std::string s = "theta1,theta2\n";
        for (const VectorXd& p : cr.boundary(static_cast<std::size_t>(a.points)))
            s += format_double(p[0]) + ',' + format_double(p[1]) + '\n';
        emit_text(a.out, s);
        return 0;
    }
    (void)g;
    throw Error(Errc::invalid_input, "plotdata needs densities, power or ellipse");
}

void add_sim_options(CLI::App* sc, SimArgs& s) {
    sc->add_option("--scenario", s.scenario, "setting1 | setting2 | adjacency | euclidean");
    sc->add_option("--link", s.link, "identity | square | exp | expit");
    sc->add_option("--n", s.n, "sample size");
    sc->add_option("--p", s.p, "predictor dimension");
    sc->add_option("--rho", s.rho, "copula predictor correlation");
    sc->add_option("--design", s.design, "copula | truncated");
    sc->add_option("--nodes", s.nodes, "adjacency matrix size");
    sc->add_option("--noise-sd", s.noise_sd, "Euclidean noise sd");
    sc->add_option("--runs", s.runs, "Monte Carlo runs");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-index Fréchet regression"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    add_globals(app, g);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "estimate the index direction");
    fit->add_option("--x", fa.x, "predictor file")->required();
    fit->add_option("--y", fa.y, "response file")->required();
    fit->add_option("-o,--out", fa.out, "result payload (JSON)");
    fit->add_option("--truth", fa.truth, "truth payload from simulate, to report the angle");

    TestArgs ta;
    auto* test = app.add_subcommand("test", "Wald test, confidence region and stepwise selection");
    test->add_option("--fit", ta.fit, "fit result");
    test->add_option("--x", ta.x, "predictor file (overrides the fit's)");
    test->add_option("--y", ta.y, "response file (overrides the fit's)");
    test->add_option("--b-matrix", ta.b_matrix, "hypothesis matrix B, one row per line (default identity)");
    test->add_option("--zeta", ta.zeta, "hypothesis value, comma separated (default 0)");
    test->add_option("--alpha", ta.alpha, "test level");
    test->add_option("--gamma", ta.gamma, "confidence region gamma");
    test->add_option("--covariance", ta.covariance, "bootstrap | plugin");
    test->add_option("--statistic", ta.statistic, "report the p-value of a given statistic");
    test->add_option("--df", ta.df, "degrees of freedom for --statistic");
    test->add_flag("--stepwise", ta.stepwise, "forward selection by bootstrap Wald tests");
    test->add_option("--alpha-enter", ta.alpha_enter, "stepwise alpha-to-enter");
    test->add_option("--initial", ta.initial, "stepwise starting columns (1-based)")->delimiter(',');
    test->add_option("-o,--out", ta.out, "report payload (JSON)");

    PredictArgs pa;
    auto* pred = app.add_subcommand("predict", "predict responses at new predictors");
    pred->add_option("--fit", pa.fit, "fit result")->required();
    pred->add_option("--new", pa.x_new, "new predictor file")->required();
    pred->add_option("--truth", pa.truth, "observed responses at the new predictors");
    pred->add_option("--x", pa.x, "training predictors (overrides the fit's)");
    pred->add_option("--y", pa.y, "training responses (overrides the fit's)");
    pred->add_option("-o,--out", pa.out, "predicted responses file");
    pred->add_option("--report", pa.report, "report payload (JSON)");

    SimArgs sa;
    auto* sim = app.add_subcommand("simulate", "export a simulated dataset or run a Monte Carlo study");
    add_sim_options(sim, sa);
    sim->add_option("--prefix", sa.prefix, "export PREFIX_x.csv, PREFIX_y.csv, PREFIX_truth.json");
    sim->add_option("--theta0", sa.theta0, "true direction, comma separated (normalized)");
    sim->add_flag("--gfr", sa.gfr, "also compute the global Fréchet regression MSD");
    sim->add_option("-o,--out", sa.out, "study payload (JSON)");

    PowerArgs wa;
    wa.sim.scenario = "euclidean";
    wa.sim.p = 2;
    wa.sim.n = 200;
    auto* power = app.add_subcommand("power", "empirical size and power of the bootstrap Wald test");
    add_sim_options(power, wa.sim);
    power->add_option("--deltas", wa.deltas, "alternatives, comma separated");
    power->add_option("--alpha", wa.alpha, "test level");
    power->add_option("-o,--out", wa.out, "power table payload (JSON)");

    PlotArgs la;
    auto* plot = app.add_subcommand("plotdata", "plot-ready tables");
    plot->add_option("what", la.what, "densities | power | ellipse")->required();
    plot->add_option("--input", la.input, "fit, power or test payload");
    plot->add_option("--responses", la.responses, "distributional response file (densities)");
    plot->add_option("--center", la.center, "ellipse center, comma separated");
    plot->add_option("--lambda", la.lambda, "ellipse Lambda, row-major, comma separated");
    plot->add_option("--m", la.m, "bin count M for the ellipse");
    plot->add_option("--gamma", la.gamma, "ellipse gamma");
    plot->add_option("--points", la.points, "boundary points");
    plot->add_option("-o,--out", la.out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*fit) return cmd_fit(fa, g);
        if (*test) return cmd_test(ta, g);
        if (*pred) return cmd_predict(pa, g);
        if (*sim) return cmd_simulate(sa, g);
        if (*power) return cmd_power(wa, g);
        if (*plot) return cmd_plotdata(la, g);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_input_error() ? 2 : 3;
    } catch (const json::exception& e) {
        std::cerr << "error: malformed payload: " << e.what() << '\n';
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 2;
}
