#include <catch_amalgamated.hpp>

#include <ifr/simulation.hpp>

#include <algorithm>
#include <cmath>
#include <random>

using namespace ifr;
using Catch::Approx;

namespace {

double correlation(const VectorXd& a, const VectorXd& b) {
    VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
    return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

bool nondecreasing(const VectorXd& v) {
    for (Index i = 1; i < v.size(); ++i)
        if (v[i] < v[i - 1]) return false;
    return true;
}

struct Moments {
    double mean = 0.0, se = 0.0;
};

Moments moments(const std::vector<double>& v) {
    double m = 0.0, s = 0.0;
    for (double a : v) m += a;
    m /= static_cast<double>(v.size());
    for (double a : v) s += (a - m) * (a - m);
    s /= static_cast<double>(v.size() - 1);
    return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

// Unit vector at angle a from e1 towards e2 (3-sphere slice).
DirectionParam on_circle(double a) {
    VectorXd v(3);
    v << std::cos(a), std::sin(a), 0.0;
    return direction_from_vector(v);
}

} // namespace

TEST_CASE("copula predictors") {
    Rng rng(11);
    MatrixXd x = gen_predictors(100000, 3, 0.0, rng);
    CHECK(x.cwiseAbs().maxCoeff() < 1.0);
    // Each column is uniform on (-1, 1): mean 0, variance 1/3.
    for (Index j = 0; j < 3; ++j) {
        CHECK(std::abs(x.col(j).mean()) < 3 * std::sqrt(1.0 / 3.0 / 1e5));
        for (Index k = j + 1; k < 3; ++k) CHECK(std::abs(correlation(x.col(j), x.col(k))) < 3.0 / std::sqrt(1e5));
    }

    Rng rng2(12);
    MatrixXd xc = gen_predictors(100000, 4, 0.25, rng2);
    // Pearson correlation of 2Φ(Z) - 1 under a Gaussian copula: (6/π) asin(ρ/2).
    const double oracle = 6.0 / M_PI * std::asin(0.125);
    CHECK(oracle == Approx(0.2393585).margin(1e-7));
    CHECK(std::abs(correlation(xc.col(0), xc.col(1)) - oracle) < 0.01);
    CHECK(std::abs(correlation(xc.col(2), xc.col(3)) - oracle) < 0.01);

    Rng rng3(1);
    CHECK_THROWS_AS(gen_predictors(10, 4, -0.5, rng3), Error);
    CHECK_THROWS_AS(gen_predictors(10, 4, 1.0, rng3), Error);
}

TEST_CASE("setting I responses") {
    auto grid = std::make_shared<const ProbGrid>(std::vector<double>{0.005, 0.5, 0.975});
    SimSpec s;
    s.grid = grid;
    QuantileFunction q0 = std::get<QuantileFunction>(true_object(s, 0.0));
    CHECK(q0.values[0] == Approx(0.5 * -2.5758293035489).epsilon(1e-10));
    CHECK(q0.values[1] == Approx(0.0).margin(1e-14));
    CHECK(q0.values[2] == Approx(0.5 * 1.9599639845401).epsilon(1e-10));

    Rng rng(21);
    std::vector<double> med, upper;
    for (int i = 0; i < 100000; ++i) {
        QuantileFunction q = gen_response_setting1(1.0, Link::identity, grid, rng);
        REQUIRE(nondecreasing(q.values));
        med.push_back(q.values[1]);
        upper.push_back(q.values[2]);
    }
    Moments m = moments(med);
    CHECK(std::abs(m.mean - 1.0) < 3 * m.se);
    Moments u = moments(upper);
    CHECK(std::abs(u.mean - (1.0 + expit(1.0) * 1.9599639845401)) < 3 * u.se);
}

TEST_CASE("setting II responses") {
    for (int k : {1, 2, 3})
        for (double a : {-1.3, -0.2, 0.0, 0.7, 2.1}) {
            CHECK(transport(k, a) + transport(-k, a) == Approx(2 * a).margin(1e-14));
            CHECK(1.0 - std::cos(k * a) >= 0.0);
        }
    auto grid = std::make_shared<const ProbGrid>(std::vector<double>{0.005, 0.25, 0.5, 0.75, 0.995});
    Rng rng(22);
    std::vector<double> med;
    for (int i = 0; i < 100000; ++i) {
        QuantileFunction q = gen_response_setting2(0.0, Link::identity, grid, rng);
        REQUIRE(nondecreasing(q.values));
        med.push_back(q.values[2]);
    }
    Moments m = moments(med);
    CHECK(std::abs(m.mean) < 3 * m.se);
}

TEST_CASE("adjacency responses") {
    Rng rng(23);
    for (double t : {-3.0, -0.5, 0.0, 0.8, 4.0})
        for (int i = 0; i < 200; ++i) {
            SymMatrix y = gen_response_adjacency(t, 6, rng);
            CHECK(y.entries.minCoeff() >= 0.0);
            CHECK(y.entries.maxCoeff() <= 1.0);
            CHECK(y.entries == y.entries.transpose());
        }
    SymMatrix far = gen_response_adjacency(20.0, 5, rng);
    CHECK((far.entries.diagonal().array() - expit(20.0)).abs().maxCoeff() < 1e-8);

    const double t = 0.4, zeta = expit(t);
    const double mid = 0.5 * (std::max(0.0, -zeta) + std::min(1.0, 1.0 - zeta));
    std::vector<double> diag, off;
    for (int i = 0; i < 100000; ++i) {
        SymMatrix y = gen_response_adjacency(t, 3, rng);
        diag.push_back(y.entries(1, 1));
        off.push_back(y.entries(0, 2));
    }
    Moments md = moments(diag), mo = moments(off);
    CHECK(std::abs(md.mean - (zeta + mid)) < 3 * md.se);
    CHECK(std::abs(mo.mean - mid) < 3 * mo.se);
    CHECK_THROWS_AS(gen_response_adjacency(0.0, 1, rng), Error);
}

TEST_CASE("Euclidean responses") {
    Rng rng(24);
    for (double t : {-1.0, 0.3, 2.0}) {
        CHECK(gen_response_euclidean(t, Link::identity, 0.0, rng).coords[0] == t);
        CHECK(gen_response_euclidean(t, Link::square, 0.0, rng).coords[0] ==
              gen_response_euclidean(-t, Link::square, 0.0, rng).coords[0]);
    }
    const int n = 10000;
    VectorXd ts(n), ys(n);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < n; ++i) {
        ts[i] = u(rng);
        ys[i] = gen_response_euclidean(ts[i], Link::identity, 0.5, rng).coords[0];
    }
    VectorXd ct = ts.array() - ts.mean();
    double slope = ct.dot(ys) / ct.squaredNorm();
    VectorXd resid = (ys.array() - ys.mean()).matrix() - slope * ct;
    double se = std::sqrt(resid.squaredNorm() / (n - 2) / ct.squaredNorm());
    CHECK(std::abs(slope - 1.0) < 3 * se);
}

TEST_CASE("simulate validates and is deterministic") {
    SimSpec s;
    s.n = 50;
    s.p = 3;
    s.theta0 = default_theta0(3);
    s.seed = 5;
    Rng a(9), b(9);
    SimData da = simulate(s, a), db = simulate(s, b);
    CHECK(da.x == db.x);
    CHECK(da.y.coords() == db.y.coords());
    for (Index i = 0; i < s.n; ++i) CHECK(nondecreasing(da.y.coords().col(i)));
    CHECK(da.index.size() == 50);

    SimSpec bad = s;
    bad.link = Link::expit;
    CHECK_THROWS_AS(validate_spec(bad), Error);
    bad = s;
    bad.n = 9;
    CHECK_THROWS_AS(validate_spec(bad), Error);
    bad = s;
    bad.theta0 = default_theta0(4);
    CHECK_THROWS_AS(validate_spec(bad), Error);

    SimSpec e = s;
    e.scenario = Scenario::euclidean;
    e.p = 5;
    e.theta0 = default_theta0(5);
    e.design = PredictorDesign::truncated_normal;
    Rng c(3);
    SimData de = simulate(e, c);
    CHECK(de.x.cwiseAbs().maxCoeff() <= 10.0);
    e.p = 3;
    e.theta0 = default_theta0(3);
    CHECK_THROWS_AS(simulate(e, c), Error);
}

TEST_CASE("truncated normal design covariances") {
    Rng rng(31);
    MatrixXd x = gen_predictors_truncated(50000, euclidean_design_covariance(), 10.0, rng);
    MatrixXd c = x.transpose() * x / 50000.0;
    CHECK(c(0, 0) == Approx(0.1).epsilon(0.03));
    CHECK(c(0, 1) / std::sqrt(c(0, 0) * c(1, 1)) == Approx(0.5).margin(0.02));
    CHECK(c(1, 2) / std::sqrt(c(1, 1) * c(2, 2)) == Approx(0.25).margin(0.02));
    CHECK(std::abs(c(3, 4)) < 0.005);
    MatrixXd bad = MatrixXd::Ones(3, 3);
    CHECK_THROWS_AS(gen_predictors_truncated(5, bad, 1.0, rng), Error);
}

TEST_CASE("bias and deviance") {
    DirectionParam t0 = on_circle(0.0);
    BiasDev z = bias_dev({t0, t0, t0}, t0);
    CHECK(z.bias == Approx(0.0).margin(1e-12));
    CHECK(z.dev == Approx(0.0).margin(1e-20));

    const double a = 0.3;
    BiasDev sym = bias_dev({on_circle(a), on_circle(-a)}, t0);
    CHECK(sym.bias == Approx(0.0).margin(1e-9));
    CHECK(sym.dev == Approx(0.0).margin(1e-16));

    // Angles (a, 0, a) to the mean e1: sample variance a^2/3.
    BiasDev three = bias_dev({on_circle(-a), on_circle(0.0), on_circle(a)}, t0);
    CHECK(three.bias == Approx(0.0).margin(1e-9));
    CHECK(three.dev == Approx(a * a / 3).epsilon(1e-8));

    // Shifted cluster: the bias is the shift.
    BiasDev shifted = bias_dev({on_circle(0.2 - a), on_circle(0.2), on_circle(0.2 + a)}, t0);
    CHECK(shifted.bias == Approx(0.2).epsilon(1e-8));

    Rng rng(41);
    std::normal_distribution<double> g;
    std::vector<DirectionParam> est;
    for (int i = 0; i < 40; ++i) {
        VectorXd v(4);
        v << 3.0, g(rng), g(rng), g(rng);
        est.push_back(direction_from_vector(v));
    }
    DirectionParam th = default_theta0(4);
    BiasDev ref = bias_dev(est, th);
    std::shuffle(est.begin(), est.end(), rng);
    BiasDev perm = bias_dev(est, th);
    // Equal up to the sphere-mean solver's stopping tolerance (gradient norm 1e-10).
    CHECK(std::abs(perm.bias - ref.bias) < 1e-9);
    CHECK(std::abs(perm.dev - ref.dev) < 1e-9);
    CHECK_THROWS_AS(bias_dev({}, th), Error);
}

TEST_CASE("msd and rmpe") {
    auto scalar = [](double v) {
        VectorXd x(1);
        x[0] = v;
        return ObjectValue{EuclideanVec{x}};
    };
    std::vector<ObjectValue> truth{scalar(0), scalar(0)}, fit{scalar(1), scalar(1)};
    CHECK(msd(truth, truth, MetricSpaceKind::euclidean) == 0.0);
    CHECK(msd(fit, truth, MetricSpaceKind::euclidean) == Approx(1.0));
    std::vector<ObjectValue> mixed{scalar(3), scalar(-1)};
    CHECK(msd(mixed, truth, MetricSpaceKind::euclidean) == Approx(5.0));
    CHECK(rmpe(mixed, truth, MetricSpaceKind::euclidean) == Approx(std::sqrt(5.0)));
    CHECK(rmpe(truth, truth, MetricSpaceKind::euclidean) == 0.0);
    CHECK_THROWS_AS(msd(fit, {scalar(0)}, MetricSpaceKind::euclidean), Error);
}

TEST_CASE("Monte Carlo study driver") {
    SimSpec s;
    s.n = 60;
    s.p = 3;
    s.theta0 = default_theta0(3);
    s.seed = 17;
    FitConfig c;
    c.n_directions = 20;
    c.tuning = TuningMode::cached;

    McReport one = run_mc_study(s, 1, c, 1, true);
    REQUIRE(one.estimates.size() == 1);
    CHECK(std::isfinite(one.bias));
    CHECK(one.dev == 0.0);
    CHECK(one.msd_ifr.size() == 1);
    CHECK(std::isfinite(one.msd_ifr[0]));
    CHECK(one.msd_gfr.size() == 1);

    McReport a = run_mc_study(s, 4, c, 1);
    McReport b = run_mc_study(s, 4, c, 3);
    REQUIRE(a.estimates.size() == b.estimates.size());
    for (std::size_t i = 0; i < a.estimates.size(); ++i) CHECK(a.estimates[i].full == b.estimates[i].full);
    CHECK(a.bias == b.bias);
    CHECK(a.dev == b.dev);
    CHECK(a.msd_ifr == b.msd_ifr);
    CHECK(a.bias >= 0.0);
    CHECK(a.dev >= 0.0);
    // Run r uses the same data whatever the run count.
    CHECK(one.estimates[0].full == a.estimates[0].full);
    CHECK_THROWS_AS(run_mc_study(s, 0, c), Error);
}

TEST_CASE("size and power driver") {
    SimSpec s;
    s.scenario = Scenario::euclidean;
    s.n = 40;
    s.p = 2;
    s.theta0 = default_theta0(2);
    s.seed = 3;
    FitConfig c;
    c.n_directions = 10;
    c.tuning = TuningMode::cached;
    PowerTable a = run_size_power_study(s, {0.0, 0.5}, 3, 0.05, c, 50, 1);
    PowerTable b = run_size_power_study(s, {0.0, 0.5}, 3, 0.05, c, 50, 2);
    REQUIRE(a.rows.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a.rows[i].completed + a.rows[i].failures == 3);
        CHECK(a.rows[i].rejections == b.rows[i].rejections);
        CHECK(a.rows[i].failures == b.rows[i].failures);
        CHECK(a.rows[i].rate() >= 0.0);
        CHECK(a.rows[i].rate() <= 1.0);
    }
    CHECK(a.rows[1].delta == 0.5);
}
