#include <catch_amalgamated.hpp>

#include <ifr/index_fit.hpp>

#include <numeric>
#include <random>

using namespace ifr;
using Catch::Approx;

namespace {

MatrixXd uniform_x(Index n, Index p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    MatrixXd x(n, p);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    return x;
}

ResponseSet scalar_set(const VectorXd& y) {
    ObjectShape s;
    s.kind = MetricSpaceKind::euclidean;
    s.dim = 1;
    return ResponseSet(s, y.transpose());
}

VectorXd unit(std::initializer_list<double> v) {
    VectorXd out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double a : v) out[i++] = a;
    return out.normalized();
}

// Least-squares fit with intercept, evaluated at the rows of `at`.
VectorXd ols_predict(const MatrixXd& x, const VectorXd& y, const MatrixXd& at) {
    MatrixXd d(x.rows(), x.cols() + 1);
    d << VectorXd::Ones(x.rows()), x;
    VectorXd beta = d.colPivHouseholderQr().solve(y);
    MatrixXd q(at.rows(), at.cols() + 1);
    q << VectorXd::Ones(at.rows()), at;
    return q * beta;
}

} // namespace

TEST_CASE("lift examples and round trip") {
    DirectionParam z = lift(VectorXd::Zero(3));
    CHECK(z.full == VectorXd::Unit(4, 0));
    DirectionParam d = lift(VectorXd::Constant(1, 0.6));
    CHECK(d.full[0] == Approx(0.8).epsilon(1e-15));
    CHECK(d.full[1] == 0.6);
    std::mt19937_64 rng(21);
    std::normal_distribution<double> n;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 10000; ++t) {
        VectorXd th(3);
        for (Index k = 0; k < 3; ++k) th[k] = n(rng);
        th *= u(rng) * 0.999 / th.norm();
        DirectionParam dp = lift(th);
        CHECK(reduce(dp) == th);
        worst = std::max(worst, std::abs(dp.full.norm() - 1.0));
        CHECK(dp.full[0] > 0.0);
    }
    CHECK(worst < 1e-12);
    try {
        lift(VectorXd::Constant(2, 0.8));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::out_of_ball);
    }
}

TEST_CASE("bins by hand") {
    BinnedSample b = make_bins({0.0, 0.3, 0.6, 0.9}, 2);
    REQUIRE(b.edges.size() == 3);
    CHECK(b.edges[0] == 0.0);
    CHECK(b.edges[1] == Approx(0.45).epsilon(1e-15));
    CHECK(b.edges[2] == 0.9);
    REQUIRE(b.rep_index.size() == 2);
    CHECK(b.rep_projection[0] == 0.3);
    CHECK(b.rep_projection[1] == 0.6);

    BinnedSample one = make_bins({0.0, 0.45, 0.2, 1.0}, 1);
    REQUIRE(one.rep_index.size() == 1);
    CHECK(one.rep_index[0] == 1);

    std::vector<double> eq;
    for (int i = 0; i < 12; ++i) eq.push_back(i / 11.0);
    BinnedSample all = make_bins(eq, 12);
    REQUIRE(all.effective() == 12);
    for (int i = 0; i < 12; ++i) CHECK(all.rep_index[static_cast<std::size_t>(i)] == i);

    try {
        make_bins({0.5, 0.5, 0.5}, 2);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::degenerate_projection);
    }
}

TEST_CASE("bin invariants on random projections") {
    std::mt19937_64 rng(22);
    std::lognormal_distribution<double> ln(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> p(30 + rng() % 100);
        for (auto& v : p) v = ln(rng);
        int m = 1 + static_cast<int>(rng() % 40);
        BinnedSample b = make_bins(p, m);
        double w = b.edges[1] - b.edges[0];
        for (std::size_t k = 1; k + 1 < b.edges.size(); ++k) {
            CHECK(std::abs((b.edges[k + 1] - b.edges[k]) - w) <= 1e-12 * std::max(1.0, b.edges.back()));
            CHECK(b.edges[k + 1] > b.edges[k]);
        }
        CHECK(b.effective() <= m);
        for (std::size_t l = 0; l < b.rep_index.size(); ++l) {
            int k = b.bin_id[l];
            CHECK(b.rep_projection[l] >= b.edges[static_cast<std::size_t>(k)]);
            CHECK(b.rep_projection[l] <= b.edges[static_cast<std::size_t>(k) + 1]);
        }
    }
}

TEST_CASE("criterion on constant and noiseless linear data") {
    std::mt19937_64 rng(23);
    MatrixXd x = uniform_x(200, 3, rng);
    VectorXd th0 = unit({1, 1, -0.5});
    ResponseSet c = scalar_set(VectorXd::Constant(200, 2.5));
    CHECK(criterion_vn(x, c, direction_from_vector(unit({1, 0, 0})), 0.5, 6) == 0.0);
    CHECK(criterion_vn(x, c, direction_from_vector(unit({0.2, 1, 3})), 0.5, 6) == 0.0);

    ResponseSet y = scalar_set(x * th0);
    DirectionParam d0 = direction_from_vector(th0);
    double v0 = criterion_vn(x, y, d0, 0.4, 6);
    CHECK(v0 <= 1e-10);
    std::normal_distribution<double> n;
    int compared = 0;
    for (int t = 0; t < 300; ++t) {
        VectorXd v(3);
        for (Index k = 0; k < 3; ++k) v[k] = n(rng);
        DirectionParam d = direction_from_vector(v);
        if (direction_angle(d.full, d0.full) < 0.3) continue;
        double vd = criterion_vn(x, y, d, 0.4, 6);
        CHECK(v0 < vd);
        ++compared;
    }
    CHECK(compared > 100);
}

TEST_CASE("sampled directions lie on the hemisphere") {
    auto a = sample_directions(4, 200, 99), b = sample_directions(4, 200, 99);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(std::abs(a[i].full.norm() - 1.0) < 1e-12);
        CHECK(a[i].full[0] > 0.0);
        CHECK(a[i].full == b[i].full);
    }
    auto big = sample_directions(2, 100000, 7);
    double mean = 0.0;
    for (auto& d : big) mean += d.full[0];
    mean /= big.size();
    // E|cos U| for U uniform on the circle.
    double oracle = 0.0;
    const int m = 1000000;
    for (int i = 0; i < m; ++i) oracle += std::abs(std::cos(2 * M_PI * (i + 0.5) / m));
    oracle /= m;
    CHECK(oracle == Approx(2 / M_PI).epsilon(1e-9));
    CHECK(std::abs(mean - oracle) < 0.01);
}

TEST_CASE("bin CV single candidate and constant responses") {
    std::vector<double> t;
    for (int i = 0; i < 50; ++i) t.push_back(std::sin(i * 0.37));
    ResponseSet c = scalar_set(VectorXd::Constant(50, 1.0));
    CHECK(cv_bins_scores(c, t, 0.5, {7}).selected == 7);
    BinCvResult r = cv_bins_scores(c, t, 0.5, {9, 4, 6});
    CHECK(r.selected == 4);
    for (double s : r.scores) CHECK(s == 0.0);
}

TEST_CASE("bin CV on a cubic link matches direct scores") {
    const int n = 200;
    const std::vector<int> cands{3, static_cast<int>(std::floor(std::pow(n, 0.3))), n / 2};
    int interior = 0;
    for (int seed = 0; seed < 50; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        std::normal_distribution<double> e(0.0, 0.1);
        std::vector<double> t(n);
        VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            t[static_cast<std::size_t>(i)] = u(rng);
            y[i] = std::pow(t[static_cast<std::size_t>(i)], 3) + e(rng);
        }
        ResponseSet ys = scalar_set(y);
        const double b = 0.3;
        BinCvResult r = cv_bins_scores(ys, t, b, cands);

        // Direct score: representative nearest each bin midpoint, left out of its own fit.
        std::vector<double> direct;
        for (int m : cands) {
            double lo = *std::min_element(t.begin(), t.end()), hi = *std::max_element(t.begin(), t.end());
            double w = (hi - lo) / m, total = 0.0;
            int used = 0;
            for (int k = 0; k < m; ++k) {
                int best = -1;
                double gap = 1e300;
                for (int i = 0; i < n; ++i) {
                    int bin = std::min(m - 1, static_cast<int>(std::floor((t[static_cast<std::size_t>(i)] - lo) / w)));
                    double g = std::abs(t[static_cast<std::size_t>(i)] - (lo + (k + 0.5) * w));
                    if (bin == k && g < gap) gap = g, best = i;
                }
                if (best < 0) continue;
                long double s0 = 0, s1 = 0, s2 = 0, r0 = 0, r1 = 0;
                for (int i = 0; i < n; ++i) {
                    if (i == best) continue;
                    long double d = t[static_cast<std::size_t>(i)] - t[static_cast<std::size_t>(best)];
                    double uu = static_cast<double>(d) / b;
                    long double kw = std::abs(uu) <= 1 ? 0.75 * (1 - uu * uu) : 0.0;
                    s0 += kw, s1 += kw * d, s2 += kw * d * d, r0 += kw * y[i], r1 += kw * d * y[i];
                }
                double fit = static_cast<double>((s2 * r0 - s1 * r1) / (s0 * s2 - s1 * s1));
                total += (y[best] - fit) * (y[best] - fit);
                ++used;
            }
            direct.push_back(total / used);
        }
        for (std::size_t k = 0; k < cands.size(); ++k) CHECK(r.scores[k] == Approx(direct[k]).epsilon(1e-9));
        interior += r.selected == cands[1];
    }
    // The interior candidate wins on roughly 40% of seeds; the scores themselves are
    // what is pinned here.
    WARN("interior selections: " << interior << " of 50");
    CHECK(interior >= 1);
}

TEST_CASE("noiseless cubic link recovers the direction") {
    std::mt19937_64 rng(24);
    MatrixXd x = uniform_x(200, 2, rng);
    VectorXd th0 = unit({1, 2});
    VectorXd y = (x * th0).array().cube();
    ResponseSet ys = scalar_set(y);
    FitConfig c;
    c.n_directions = 100;
    c.seed = 5;
    IfrFit fit = fit_ifr(x, ys, c);
    double err = std::acos(std::clamp(fit.direction.full.dot(th0), -1.0, 1.0));
    CHECK(err < 0.1);

    // Oracle: exhaustive fine grid over the half circle at the fitted tuning.
    double best = kInf, best_angle = 0.0;
    for (int i = 0; i < 2000; ++i) {
        double a = -M_PI / 2 + M_PI * (i + 0.5) / 2000;
        VectorXd d(2);
        d << std::cos(a), std::sin(a);
        double v = criterion_at(ys, project_rows(x, d), fit.bandwidth, fit.bins_requested, c.kernel);
        if (v < best) best = v, best_angle = std::acos(std::clamp(d.dot(th0), -1.0, 1.0));
    }
    CHECK(best_angle < 0.1);
    CHECK(fit.criterion <= best + 1e-3);
}

TEST_CASE("constant responses flag zero variance and keep the first direction") {
    std::mt19937_64 rng(25);
    MatrixXd x = uniform_x(40, 3, rng);
    ResponseSet ys = scalar_set(VectorXd::Constant(40, -1.0));
    FitConfig c;
    c.n_directions = 20;
    c.refine = true;
    IfrFit fit = fit_ifr(x, ys, c);
    CHECK(fit.search_log.zero_variance);
    CHECK(fit.search_log.best == 0);
    CHECK(fit.criterion == 0.0);
    for (auto& e : fit.search_log.entries) CHECK(e.criterion == 0.0);
    CHECK(fit.direction.full == sample_directions(3, 20, 0)[0].full);
}

TEST_CASE("search log properties") {
    std::mt19937_64 rng(26);
    MatrixXd x = uniform_x(80, 3, rng);
    std::normal_distribution<double> e(0.0, 0.2);
    VectorXd th0 = unit({1, -1, 0.5});
    VectorXd y = (x * th0).array().sin() * 2.0;
    for (Index i = 0; i < y.size(); ++i) y[i] += e(rng);
    ResponseSet ys = scalar_set(y);

    for (auto mode : {TuningMode::per_direction, TuningMode::cached}) {
        FitConfig c;
        c.n_directions = 40;
        c.seed = 17;
        c.tuning = mode;
        c.refine = true;
        c.workers = 1;
        IfrFit a = fit_ifr(x, ys, c);
        c.workers = 3;
        IfrFit b = fit_ifr(x, ys, c);

        // argmin dominance
        for (auto& en : a.search_log.entries) CHECK(a.criterion <= en.criterion);
        // criterion equals a recomputation
        CHECK(std::abs(a.criterion - criterion_vn(x, ys, a.direction, a.bandwidth, a.bins_requested)) <= 1e-12);
        // worker count does not change anything
        REQUIRE(a.search_log.entries.size() == b.search_log.entries.size());
        for (std::size_t i = 0; i < a.search_log.entries.size(); ++i) {
            CHECK(a.search_log.entries[i].criterion == b.search_log.entries[i].criterion);
            CHECK(a.search_log.entries[i].direction == b.search_log.entries[i].direction);
        }
        CHECK(a.direction.full == b.direction.full);
        CHECK(a.criterion == b.criterion);
        // refinement budget
        std::size_t refined = 0;
        for (auto& en : a.search_log.entries) refined += en.refined;
        CHECK(refined >= 1);
        CHECK(refined <= 50);
        CHECK(a.search_log.entries.size() == 40 + refined);

        // permutation of predictor coordinates
        std::vector<Index> perm{2, 0, 1};
        MatrixXd xp(x.rows(), 3);
        for (Index j = 0; j < 3; ++j) xp.col(j) = x.col(perm[static_cast<std::size_t>(j)]);
        for (auto& en : a.search_log.entries) {
            VectorXd dp(3);
            for (Index j = 0; j < 3; ++j) dp[j] = en.direction[perm[static_cast<std::size_t>(j)]];
            CHECK(criterion_at(ys, project_rows(xp, dp), en.bandwidth, en.bins, c.kernel) == en.criterion);
        }
    }
}

TEST_CASE("fit preconditions") {
    std::mt19937_64 rng(27);
    MatrixXd x = uniform_x(8, 2, rng);
    CHECK_THROWS_AS(fit_ifr(x, scalar_set(VectorXd::Ones(8)), FitConfig{}), Error);
    MatrixXd x1 = uniform_x(20, 1, rng);
    CHECK_THROWS_AS(fit_ifr(x1, scalar_set(VectorXd::Ones(20)), FitConfig{}), Error);
}

TEST_CASE("predictions") {
    std::mt19937_64 rng(28);
    MatrixXd x = uniform_x(200, 3, rng);
    VectorXd th0 = unit({1, 0.5, -0.5});
    VectorXd y = x * th0;
    ResponseSet ys = scalar_set(y);
    FitConfig c;
    c.n_directions = 500;
    c.tuning = TuningMode::cached;
    c.seed = 3;
    c.refine = true;
    IfrFit fit = fit_ifr(x, ys, c);

    // training representatives reproduce the fitted objects
    MatrixXd reps(fit.bins.effective(), 3);
    for (int l = 0; l < fit.bins.effective(); ++l) reps.row(l) = x.row(fit.bins.rep_index[static_cast<std::size_t>(l)]);
    auto pr = predict(fit, reps, x, ys);
    for (std::size_t l = 0; l < pr.size(); ++l) CHECK(to_coords(pr[l].value) == to_coords(fit.fitted[l]));

    MatrixXd xn = uniform_x(100, 3, rng) * 0.8;
    auto pn = predict(fit, xn, x, ys);
    VectorXd ols = ols_predict(x, y, xn);
    double rms = 0.0;
    for (std::size_t i = 0; i < pn.size(); ++i) rms += std::pow(to_coords(pn[i].value)[0] - ols[static_cast<Index>(i)], 2);
    CHECK(std::sqrt(rms / pn.size()) < 0.05);
    for (auto& p : pn) CHECK_FALSE(p.extrapolated);

    ResponseSet cs = scalar_set(VectorXd::Constant(200, 7.0));
    IfrFit cf = fit_ifr(x, cs, c);
    for (auto& p : predict(cf, xn, x, cs)) CHECK(to_coords(p.value)[0] == 7.0);
}

TEST_CASE("predictions beyond the training range are flagged") {
    std::mt19937_64 rng(30);
    MatrixXd x = uniform_x(60, 2, rng);
    ResponseSet ys = scalar_set(x.col(0) + x.col(1));
    FitConfig c;
    c.n_directions = 10;
    c.kernel = KernelFamily::gaussian_truncated;
    IfrFit fit = fit_ifr(x, ys, c);
    std::vector<double> proj = project_rows(x, fit.direction.full);
    double hi = *std::max_element(proj.begin(), proj.end());
    // place a query just beyond max + b along the fitted direction
    MatrixXd q = (fit.direction.full * (hi + 1.5 * fit.bandwidth)).transpose();
    auto p = predict(fit, q, x, ys);
    CHECK(p[0].extrapolated);
    MatrixXd inside = (fit.direction.full * (hi + 0.5 * fit.bandwidth)).transpose();
    CHECK_FALSE(predict(fit, inside, x, ys)[0].extrapolated);

    // far outside with a compact kernel: still a value, taken at the range end
    fit.kernel = KernelFamily::epanechnikov;
    MatrixXd far = (fit.direction.full * (hi + 50.0)).transpose();
    MatrixXd edge = (fit.direction.full * hi).transpose();
    auto pf = predict(fit, far, x, ys);
    CHECK(pf[0].extrapolated);
    CHECK(to_coords(pf[0].value)[0] == Approx(to_coords(predict(fit, edge, x, ys)[0].value)[0]).epsilon(1e-12));
}

TEST_CASE("global Fréchet regression") {
    std::mt19937_64 rng(29);
    MatrixXd x = uniform_x(60, 3, rng);
    std::normal_distribution<double> e;
    VectorXd y(60);
    for (Index i = 0; i < 60; ++i) y[i] = 1 + x(i, 0) - 2 * x(i, 2) + e(rng);
    ResponseSet ys = scalar_set(y);
    MatrixXd xn = uniform_x(10, 3, rng);
    auto g = gfr_coords(x, ys, xn);
    VectorXd ols = ols_predict(x, y, xn);
    for (Index j = 0; j < 10; ++j) CHECK(std::abs(g[static_cast<std::size_t>(j)][0] - ols[j]) < 1e-8);

    MatrixXd xbar = x.colwise().mean();
    CHECK(gfr_coords(x, ys, xbar)[0][0] == Approx(y.mean()).epsilon(1e-13));

    auto grid = ProbGrid::equispaced(5, 0.1, 0.9);
    std::vector<ObjectValue> qs(60, QuantileFunction{grid, VectorXd::LinSpaced(5, 0, 1)});
    ResponseSet cq = ResponseSet::from_objects(qs, MetricSpaceKind::wasserstein2);
    for (auto& v : gfr_coords(x, cq, xn)) CHECK(v == VectorXd::LinSpaced(5, 0, 1));

    MatrixXd sing = x;
    sing.col(2) = sing.col(1);
    try {
        gfr_coords(sing, ys, xn);
        FAIL("expected an error");
    } catch (const Error& err) {
        CHECK(err.code() == Errc::singular);
    }
}
