#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ciuupi/bioassay.hpp"
#include "ciuupi/regmodel.hpp"
#include "oracles.hpp"

using namespace ciuupi;

namespace {

RegressionSpec grewal_spec() { return build_bioassay_spec(grewal_dataset(), 60.0); }

// 2-parameter toy binomial model: intercept + slope on three groups
RegressionSpec toy_spec() {
    std::vector<BinomialObservation> obs{
        {{1.0, -1.0}, 20, 6}, {{1.0, 0.0}, 25, 12}, {{1.0, 1.5}, 18, 13}};
    RegressionSpec spec;
    spec.model = std::make_shared<BinomialLogitModel>(std::move(obs), 2);
    spec.g.value = [](const Vec& b) { return b[0]; };
    spec.g.gradient = [](const Vec&) { return Vec{1.0, 0.0}; };
    spec.g.linear = true;
    spec.h.value = [](const Vec& b) { return b[1]; };
    spec.h.gradient = [](const Vec&) { return Vec{0.0, 1.0}; };
    spec.h.linear = true;
    spec.t = 0.0;
    return spec;
}

}  // namespace

TEST_CASE("fit_mle reproduces the Morphine/Amidone estimate") {
    RegressionSpec spec = grewal_spec();
    FitResult fit = fit_mle(spec);
    REQUIRE(fit.converged);
    CHECK(fit.beta_hat[0] == Catch::Approx(-2.0652).margin(1e-3));
    CHECK(fit.beta_hat[1] == Catch::Approx(3.6418).margin(1e-3));
    CHECK(fit.beta_hat[2] == Catch::Approx(-2.0968).margin(1e-3));
    CHECK(fit.beta_hat[3] == Catch::Approx(4.4581).margin(1e-3));

    // score vanishes at the optimum
    CHECK(max_abs(spec.model->score(fit.beta_hat)) <= 1e-9);
    CHECK(fit.beta_hat[1] + fit.beta_hat[3] == Catch::Approx(8.0999).margin(1e-3));

    SECTION("start-point invariance") {
        Vec s1{0.5, 1.0, -0.5, 2.0}, s2{-3.0, 5.0, -3.0, 5.0};
        FitResult f1 = fit_mle(spec, &s1);
        FitResult f2 = fit_mle(spec, &s2);
        REQUIRE(f1.converged);
        REQUIRE(f2.converged);
        for (int i = 0; i < 4; ++i) {
            CHECK(f1.beta_hat[i] == Catch::Approx(fit.beta_hat[i]).margin(1e-8));
            CHECK(f2.beta_hat[i] == Catch::Approx(fit.beta_hat[i]).margin(1e-8));
        }
    }
}

TEST_CASE("fit_mle on a balanced intercept-only group gives beta = 0") {
    std::vector<BinomialObservation> obs{{{1.0}, 40, 20}};
    RegressionSpec spec;
    spec.model = std::make_shared<BinomialLogitModel>(std::move(obs), 1);
    spec.g.value = [](const Vec& b) { return b[0]; };
    spec.g.gradient = [](const Vec&) { return Vec{1.0}; };
    spec.h = spec.g;  // unused here
    FitResult fit = fit_mle(spec);
    REQUIRE(fit.converged);
    CHECK(std::fabs(fit.beta_hat[0]) < 1e-9);
}

TEST_CASE("fit_mle matches a derivative-free brute-force maximizer") {
    RegressionSpec spec = toy_spec();
    FitResult fit = fit_mle(spec);
    REQUIRE(fit.converged);

    auto ll = [&](const std::vector<double>& b) { return spec.model->log_likelihood(b); };
    std::vector<double> brute = oracle::grid_maximize_2d(ll, -3.0, 3.0, -3.0, 3.0);
    CHECK(fit.beta_hat[0] == Catch::Approx(brute[0]).margin(1e-5));
    CHECK(fit.beta_hat[1] == Catch::Approx(brute[1]).margin(1e-5));
}

TEST_CASE("fit_mle flags separated data instead of diverging") {
    // perfectly separated: all failures below, all successes above
    std::vector<BinomialObservation> obs{{{1.0, -1.0}, 10, 0}, {{1.0, 1.0}, 10, 10}};
    RegressionSpec spec;
    spec.model = std::make_shared<BinomialLogitModel>(std::move(obs), 2);
    spec.g.value = [](const Vec& b) { return b[0]; };
    spec.g.gradient = [](const Vec&) { return Vec{1.0, 0.0}; };
    spec.h.value = [](const Vec& b) { return b[1]; };
    spec.h.gradient = [](const Vec&) { return Vec{0.0, 1.0}; };
    FitResult fit = fit_mle(spec);
    CHECK_FALSE(fit.converged);
}

TEST_CASE("fit_constrained with the linear parallelism constraint") {
    RegressionSpec spec = grewal_spec();
    FitResult fit = fit_mle(spec);
    FitResult cf = fit_constrained(spec, spec.h, 0.0, &fit.beta_hat);
    REQUIRE(cf.converged);

    SECTION("constraint holds and the fit is a constrained optimum") {
        CHECK(std::fabs(spec.h.value(cf.beta_hat)) < 1e-10);
        CHECK(cf.log_lik <= fit.log_lik);
        // KKT: score orthogonal to the constraint plane
        Vec s = spec.model->score(cf.beta_hat);
        Vec c = spec.h.gradient(cf.beta_hat);
        double lambda = dot(s, c) / dot(c, c);
        for (int i = 0; i < 4; ++i) CHECK(std::fabs(s[i] - lambda * c[i]) < 1e-8);
    }

    SECTION("agrees with an independent equal-slope reduced-model refit") {
        // 3-parameter model (intercept A, intercept B, common slope)
        std::vector<BinomialObservation> obs;
        for (const auto& row : grewal_dataset().rows) {
            obs.push_back({{1.0, 0.0, row.x}, row.n, row.r});
            obs.push_back({{0.0, 1.0, row.x}, row.n_prime, row.r_prime});
        }
        RegressionSpec reduced;
        reduced.model = std::make_shared<BinomialLogitModel>(std::move(obs), 3);
        reduced.g.value = [](const Vec& b) { return b[0]; };
        reduced.g.gradient = [](const Vec&) { return Vec{1.0, 0.0, 0.0}; };
        reduced.h.value = [](const Vec& b) { return b[2]; };
        reduced.h.gradient = [](const Vec&) { return Vec{0.0, 0.0, 1.0}; };
        FitResult rf = fit_mle(reduced);
        REQUIRE(rf.converged);
        CHECK(cf.beta_hat[0] == Catch::Approx(rf.beta_hat[0]).margin(1e-8));
        CHECK(cf.beta_hat[1] == Catch::Approx(rf.beta_hat[2]).margin(1e-8));
        CHECK(cf.beta_hat[2] == Catch::Approx(rf.beta_hat[1]).margin(1e-8));
        CHECK(cf.beta_hat[3] == Catch::Approx(rf.beta_hat[2]).margin(1e-8));
        CHECK(cf.log_lik == Catch::Approx(rf.log_lik).margin(1e-10));
    }
}

TEST_CASE("fit_constrained at the unconstrained optimum returns it") {
    RegressionSpec spec = grewal_spec();
    FitResult fit = fit_mle(spec);
    FitResult cf = fit_constrained(spec, spec.g, fit.theta_hat, &fit.beta_hat);
    REQUIRE(cf.converged);
    for (int i = 0; i < 4; ++i)
        CHECK(cf.beta_hat[i] == Catch::Approx(fit.beta_hat[i]).margin(1e-6));
}

TEST_CASE("fit_constrained with a nonlinear constraint matches a penalty oracle") {
    RegressionSpec spec = toy_spec();
    // nonlinear but monotone functional, so the constrained optimum is unique
    SmoothFunctional q;
    q.value = [](const Vec& b) { return b[0] + 0.3 * std::exp(b[1]); };
    q.gradient = [](const Vec& b) { return Vec{1.0, 0.3 * std::exp(b[1])}; };

    FitResult fit = fit_mle(spec);
    const double target = q.value(fit.beta_hat) + 0.3;
    FitResult cf = fit_constrained(spec, q, target, &fit.beta_hat);
    REQUIRE(cf.converged);
    CHECK(std::fabs(q.value(cf.beta_hat) - target) < 1e-9);

    auto ll = [&](const std::vector<double>& b) { return spec.model->log_likelihood(b); };
    auto cv = [&](const std::vector<double>& b) { return q.value(b); };
    std::vector<double> brute = oracle::penalty_maximize_2d(ll, cv, target, -3, 3, -3, 3);
    CHECK(cf.beta_hat[0] == Catch::Approx(brute[0]).margin(1e-5));
    CHECK(cf.beta_hat[1] == Catch::Approx(brute[1]).margin(1e-5));
}

TEST_CASE("expected information") {
    SECTION("golden: inverse at beta_tilde is the printed block-diagonal matrix") {
        RegressionSpec spec = grewal_spec();
        FitResult fit = fit_mle(spec);
        Vec bt = fit.beta_hat;
        double avg = 0.5 * (bt[1] + bt[3]);
        bt[1] = bt[3] = avg;
        Mat inv = chol_inverse(cholesky(expected_information(spec, bt)));
        CHECK(inv(0, 0) == Catch::Approx(0.086304).margin(1e-5));
        CHECK(inv(0, 1) == Catch::Approx(-0.142229).margin(1e-5));
        CHECK(inv(1, 1) == Catch::Approx(0.280902).margin(1e-5));
        CHECK(inv(2, 2) == Catch::Approx(0.132504).margin(1e-5));
        CHECK(inv(2, 3) == Catch::Approx(-0.216338).margin(1e-5));
        CHECK(inv(3, 3) == Catch::Approx(0.408074).margin(1e-5));
        // independent experiments: off-blocks exactly zero
        for (int i = 0; i < 2; ++i)
            for (int j = 2; j < 4; ++j) {
                CHECK(inv(i, j) == 0.0);
                CHECK(expected_information(spec, bt)(i, j) == 0.0);
            }
    }

    SECTION("single observation at psi = 1/2") {
        std::vector<BinomialObservation> obs{{{1.0}, 1, 0}};
        BinomialLogitModel m(obs, 1);
        CHECK(m.expected_information({0.0})(0, 0) == Catch::Approx(0.25).margin(1e-15));
    }

    SECTION("matches exhaustive enumeration of -E d2 loglik for small N") {
        std::vector<BinomialObservation> obs{{{1.0, -0.7}, 3, 0}, {{1.0, 1.2}, 4, 0}};
        Vec beta{0.3, -0.5};
        const double h = 1e-4;
        Mat expect(2, 2);
        // sum over all (y1, y2) outcomes of P(y) * (-d2/dbeta2 loglik)
        for (int y1 = 0; y1 <= 3; ++y1)
            for (int y2 = 0; y2 <= 4; ++y2) {
                auto data = obs;
                data[0].successes = y1;
                data[1].successes = y2;
                BinomialLogitModel m(data, 2);
                double p1 = inv_logit(dot(obs[0].x, beta)), p2 = inv_logit(dot(obs[1].x, beta));
                auto choose = [](int n, int k) {
                    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                                    std::lgamma(n - k + 1.0));
                };
                double prob = choose(3, y1) * std::pow(p1, y1) * std::pow(1 - p1, 3 - y1) *
                              choose(4, y2) * std::pow(p2, y2) * std::pow(1 - p2, 4 - y2);
                // central second differences of the log-likelihood
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        Vec bpp = beta, bpm = beta, bmp = beta, bmm = beta;
                        bpp[i] += h; bpp[j] += h;
                        bpm[i] += h; bpm[j] -= h;
                        bmp[i] -= h; bmp[j] += h;
                        bmm[i] -= h; bmm[j] -= h;
                        double d2 = (m.log_likelihood(bpp) - m.log_likelihood(bpm) -
                                     m.log_likelihood(bmp) + m.log_likelihood(bmm)) /
                                    (4.0 * h * h);
                        expect(i, j) += prob * (-d2);
                    }
            }
        BinomialLogitModel m(obs, 2);
        Mat info = m.expected_information(beta);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                CHECK(info(i, j) == Catch::Approx(expect(i, j)).margin(1e-6));
    }

    SECTION("observed equals expected under the canonical link") {
        RegressionSpec spec = toy_spec();
        Vec beta{0.4, -0.9};
        Mat expected = spec.model->expected_information(beta);
        // observed information from finite differences of the score
        const double h = 1e-6;
        for (int j = 0; j < 2; ++j) {
            Vec bp = beta, bm = beta;
            bp[j] += h;
            bm[j] -= h;
            Vec sp = spec.model->score(bp), sm = spec.model->score(bm);
            for (int i = 0; i < 2; ++i) {
                double obs_ij = -(sp[i] - sm[i]) / (2.0 * h);
                CHECK(obs_ij == Catch::Approx(expected(i, j)).margin(1e-5));
            }
        }
    }
}

TEST_CASE("asymptotic summary") {
    SECTION("golden Morphine/Amidone values at beta_tilde") {
        RegressionSpec spec = grewal_spec();
        FitResult fit = fit_mle(spec);
        Vec bt = fit.beta_hat;
        double avg = 0.5 * (bt[1] + bt[3]);
        bt[1] = bt[3] = avg;
        AsymptoticSummary s = asymptotic_summary(spec, bt);
        CHECK(s.avar_theta == Catch::Approx(0.002333).margin(1e-5));
        CHECK(s.avar_tau == Catch::Approx(0.688976).margin(1e-5));
        CHECK(s.acov == Catch::Approx(-0.01603).margin(1e-4));
        CHECK(s.rho == Catch::Approx(-0.399855).margin(1e-4));
        CHECK(std::fabs(s.rho) < 1.0);
    }

    SECTION("diagonal information with coordinate functionals decorrelates") {
        RegressionSpec spec = toy_spec();
        // orthogonalized design: use a model with diagonal information
        std::vector<BinomialObservation> obs{{{1.0, 0.0}, 30, 14}, {{0.0, 1.0}, 30, 18}};
        spec.model = std::make_shared<BinomialLogitModel>(std::move(obs), 2);
        AsymptoticSummary s = asymptotic_summary(spec, {0.1, 0.2});
        CHECK(s.acov == Catch::Approx(0.0).margin(1e-14));
        CHECK(s.rho == Catch::Approx(0.0).margin(1e-14));
    }

    SECTION("rho is invariant to positive rescaling of g") {
        RegressionSpec spec = grewal_spec();
        FitResult fit = fit_mle(spec);
        AsymptoticSummary base = asymptotic_summary(spec, fit.beta_hat);
        RegressionSpec scaled = spec;
        auto g0 = spec.g;
        scaled.g.value = [g0](const Vec& b) { return 37.5 * g0.value(b); };
        scaled.g.gradient = [g0](const Vec& b) {
            Vec g = g0.gradient(b);
            for (double& v : g) v *= 37.5;
            return g;
        };
        AsymptoticSummary s = asymptotic_summary(scaled, fit.beta_hat);
        CHECK(s.rho == Catch::Approx(base.rho).margin(1e-10));
    }
}

TEST_CASE("bioassay functionals") {
    SECTION("golden ED values on the parallelism line") {
        Vec b0{-2.0652, 4.0499, -2.0968, 4.0499};
        BioassayFunctionals f = bioassay_functionals(60.0);
        CHECK(ed_z(b0, 60.0, true) == Catch::Approx(0.6101).margin(1e-3));
        CHECK(ed_z(b0, 60.0, false) == Catch::Approx(0.6178).margin(1e-3));
        CHECK(f.g.value(b0) == Catch::Approx(-0.0078).margin(1e-3));

        Vec b25{-2.0652, 5.0874, -2.0968, 3.0124};
        CHECK(f.g.value(b25) == Catch::Approx(-0.345).margin(1e-3));
        CHECK(ed_z(b25, 60.0, true) == Catch::Approx(0.4856).margin(1e-3));
        CHECK(ed_z(b25, 60.0, false) == Catch::Approx(0.8306).margin(1e-3));
    }

    SECTION("identical curves give theta = 0") {
        Vec b{-1.3, 2.4, -1.3, 2.4};
        CHECK(bioassay_functionals(37.0).g.value(b) == 0.0);
    }

    SECTION("degenerate slopes are rejected") {
        BioassayFunctionals f = bioassay_functionals(60.0);
        CHECK_THROWS_AS(f.g.value({0.0, 1e-12, 0.0, 1.0}), DegenerateSlope);
        CHECK_THROWS_AS(ed_z({0.0, 0.0, 0.0, 1.0}, 60.0, true), DegenerateSlope);
        CHECK_THROWS_AS(bioassay_functionals(0.0), std::domain_error);
        CHECK_THROWS_AS(bioassay_functionals(100.0), std::domain_error);
    }

    SECTION("analytic gradients match finite differences") {
        BioassayFunctionals f = bioassay_functionals(60.0);
        Vec beta{-2.0652, 3.6418, -2.0968, 4.4581};
        const double h = 1e-6;
        for (const SmoothFunctional* fn : {&f.g, &f.h}) {
            Vec grad = fn->gradient(beta);
            for (int i = 0; i < 4; ++i) {
                Vec bp = beta, bm = beta;
                bp[i] += h;
                bm[i] -= h;
                double fd = (fn->value(bp) - fn->value(bm)) / (2.0 * h);
                CHECK(grad[i] == Catch::Approx(fd).epsilon(1e-6).margin(1e-9));
            }
        }
    }
}

TEST_CASE("dataset parsing") {
    SECTION("two-compound format round trip") {
        std::istringstream in(
            "# comment line\n"
            "x n r n_prime r_prime\n"
            "0.18 103 19 60 14\n"
            "0.48 120 53 110 54\n"
            "0.78 123 83 100 81\n");
        BioassayDataset d = parse_bioassay_dataset(in);
        REQUIRE(d.rows.size() == 3);
        CHECK(d.rows[1].n_prime == 110);
        CHECK(d.rows[2].r == 83);
    }

    SECTION("malformed row reports the line number") {
        std::istringstream in("x n r n_prime r_prime\n0.18 103 19 60 14\n0.48 oops\n");
        try {
            parse_bioassay_dataset(in);
            FAIL("expected a parse error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }

    SECTION("count invariants enforced") {
        std::istringstream in("x n r n_prime r_prime\n0.18 10 19 60 14\n0.48 120 53 110 54\n");
        CHECK_THROWS_AS(parse_bioassay_dataset(in), std::domain_error);
    }

    SECTION("generic binomial format") {
        std::istringstream in("n y x1 x2\n20 6 1.0 -1.0\n25 12 1.0 0.0\n18 13 1.0 1.5\n");
        auto model = parse_binomial_dataset(in);
        REQUIRE(model->dim() == 2);
        CHECK(model->observations().size() == 3);
    }
}

TEST_CASE("resampling is reproducible and distributionally sane") {
    RegressionSpec spec = grewal_spec();
    FitResult fit = fit_mle(spec);

    RngStream r1(11, 0), r2(11, 0);
    auto m1 = spec.model->resample(fit.beta_hat, r1);
    auto m2 = spec.model->resample(fit.beta_hat, r2);
    auto* b1 = dynamic_cast<const BinomialLogitModel*>(m1.get());
    auto* b2 = dynamic_cast<const BinomialLogitModel*>(m2.get());
    REQUIRE(b1 != nullptr);
    for (std::size_t i = 0; i < b1->observations().size(); ++i)
        CHECK(b1->observations()[i].successes == b2->observations()[i].successes);

    // mean response over many resamples tracks n * psi
    RngStream r(13, 1);
    double total = 0.0;
    const int reps = 4000;
    for (int k = 0; k < reps; ++k) {
        auto m = spec.model->resample(fit.beta_hat, r);
        total += dynamic_cast<const BinomialLogitModel*>(m.get())->observations()[0].successes;
    }
    double psi = inv_logit(dot(Vec{1.0, 0.18, 0.0, 0.0}, fit.beta_hat));
    double expect = 103.0 * psi;
    double se = std::sqrt(103.0 * psi * (1 - psi) / reps);
    CHECK(std::fabs(total / reps - expect) < 4 * se);
}
