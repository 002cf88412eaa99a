#include <doctest.h>

#include <cmath>

#include "mcf/corruption.hpp"
#include "mcf/rng.hpp"
#include "test_utils.hpp"

using namespace mcf;

namespace {

CorruptionSpec make_spec(CorruptionKind kind, double param, int d = 4) {
    CorruptionSpec spec = CorruptionSpec::uniform(kind, d, param);
    if (kind == CorruptionKind::Multinomial) spec.n_categories = d;
    return spec;
}

double corrupted_value_at(const SparseRow& row, int d) {
    for (const auto& f : row)
        if (f.index == d) return f.value;
    return 0.0;
}

// Draws of the corrupted scalar at feature 0 given clean value x.
double draw(const CorruptionSpec& spec, double x, std::uint64_t seed) {
    SparseRow row;
    if (x != 0.0) row.push_back({0, x});
    return corrupted_value_at(sample_corrupted(spec, row, 4, seed), 0);
}

}  // namespace

TEST_CASE("mgf at t = 0 is exactly 1 for every kind") {
    for (auto kind : {CorruptionKind::None, CorruptionKind::Dropout, CorruptionKind::Blankout,
                      CorruptionKind::Gaussian, CorruptionKind::Laplace, CorruptionKind::Poisson}) {
        const CorruptionSpec spec = make_spec(kind, 0.37);
        for (double x : {0.0, 0.5, 2.0, 17.0}) {
            CHECK(mgf(spec, 0.0, x, 0) == 1.0);
            CHECK(log_mgf(spec, 0.0, x, 0) == 0.0);
        }
    }
    const double t[4] = {0.0, 0.0, 0.0, 0.0};
    CHECK(log_mgf_block(0.3, 4, t, 1, 1.0) == 0.0);
}

TEST_CASE("moments closed forms") {
    CHECK(moments(make_spec(CorruptionKind::Gaussian, 0.0), 3.0, 0).mean == 3.0);
    CHECK(moments(make_spec(CorruptionKind::Gaussian, 0.0), 3.0, 0).variance == 0.0);

    const Moments blankout = moments(make_spec(CorruptionKind::Blankout, 0.5), 2.0, 0);
    CHECK(blankout.mean == 2.0);
    CHECK(blankout.variance == doctest::Approx(4.0).epsilon(1e-15));

    const Moments poisson = moments(make_spec(CorruptionKind::Poisson, 0.0), 2.0, 0);
    CHECK(poisson.mean == 2.0);
    CHECK(poisson.variance == 2.0);

    const Moments dropout = moments(make_spec(CorruptionKind::Dropout, 0.25), 2.0, 0);
    CHECK(dropout.mean == 1.5);
    CHECK(dropout.variance == doctest::Approx(0.25 * 0.75 * 4.0));

    CHECK(moments(make_spec(CorruptionKind::Laplace, 0.3), 1.0, 0).variance == doctest::Approx(0.18));
    CHECK_THROWS_AS(moments(make_spec(CorruptionKind::Poisson, 0.0), -1.0, 0), std::domain_error);
    CHECK_THROWS_AS(moments(make_spec(CorruptionKind::Multinomial, 0.1), 1.0, 0), std::invalid_argument);
}

TEST_CASE("mgf closed forms at reference points") {
    CHECK(mgf(make_spec(CorruptionKind::Blankout, 0.5), -1.0, 1.0, 0) ==
          doctest::Approx(0.5 + 0.5 * std::exp(-2.0)).epsilon(1e-12));
    CHECK(mgf(make_spec(CorruptionKind::Poisson, 0.0), -0.7, 0.0, 0) == 1.0);
    CHECK(mgf(make_spec(CorruptionKind::Gaussian, 2.0), 0.5, 1.0, 0) ==
          doctest::Approx(std::exp(0.5 + 0.5 * 4.0 * 0.25)));
    // Laplace pole is an explicit extended real, never a silent clamp.
    CHECK(std::isinf(mgf(make_spec(CorruptionKind::Laplace, 2.0), 0.5, 1.0, 0)));
    CHECK(mgf(make_spec(CorruptionKind::Laplace, 0.5), 0.5, 1.0, 0) ==
          doctest::Approx(std::exp(0.5) / (1.0 - 0.0625)));
}

TEST_CASE("mgf_dw reference values") {
    CHECK(mgf_dw(make_spec(CorruptionKind::Gaussian, 0.0), 1.0, 0.0, 2.0, 0) == doctest::Approx(-2.0));
    CHECK(mgf_dw(make_spec(CorruptionKind::Poisson, 0.0), 1.0, 0.0, 3.0, 0) == doctest::Approx(-3.0));
    CHECK(mgf_dw(make_spec(CorruptionKind::Blankout, 0.0), 1.0, 1.0, 1.0, 0) ==
          doctest::Approx(-std::exp(-1.0)).epsilon(1e-12));
    CHECK_THROWS_AS(mgf_dw(make_spec(CorruptionKind::Laplace, 2.0), 1.0, 0.5, 1.0, 0), std::domain_error);
}

TEST_CASE("mgf_dw matches central finite differences of mgf") {
    Rng rng(20240917);
    const CorruptionKind kinds[] = {CorruptionKind::Dropout, CorruptionKind::Blankout, CorruptionKind::Gaussian,
                                    CorruptionKind::Laplace, CorruptionKind::Poisson};
    const double h = 1e-6;
    int tested = 0, informative = 0;
    while (tested < 1000) {
        const CorruptionKind kind = kinds[rng.uniform_int(5)];
        const double param = kind == CorruptionKind::Dropout || kind == CorruptionKind::Blankout
                                 ? rng.uniform() * 0.9
                                 : 0.1 + rng.uniform();
        const CorruptionSpec spec = make_spec(kind, param);
        const double y = rng.uniform() < 0.5 ? 1.0 : -1.0;
        const double w = rng.normal(0.0, 1.0);
        const double x = kind == CorruptionKind::Poisson ? static_cast<double>(rng.poisson(3.0))
                                                         : rng.normal(0.0, 1.5);
        if (kind == CorruptionKind::Laplace && param * std::abs(w) > 0.8) continue;  // stay off the pole
        ++tested;

        // Log-domain check. Central differences carry an absolute noise floor
        // of about eps/h, so a derivative far below that floor can only be
        // checked for consistency, not relative accuracy.
        const double t = -y * w;
        const double fd_log = (log_mgf(spec, t + h, x, 0) - log_mgf(spec, t - h, x, 0)) / (2.0 * h);
        const double d_log = dlog_mgf_dt(spec, t, x, 0);
        if (std::abs(d_log) >= 1e-3) {
            CHECK(std::abs(fd_log - d_log) / (std::abs(fd_log) + std::abs(d_log) + 1e-12) < 1e-5);
        } else {
            CHECK(std::abs(fd_log) < 2e-3);
        }

        // The raw-MGF difference is only meaningful while the derivative is
        // not vanishingly small against the MGF value itself.
        const double value = mgf(spec, t, x, 0);
        const double analytic = mgf_dw(spec, y, w, x, 0);
        if (std::abs(analytic) < 1e-4 * (value + 1e-12)) continue;
        ++informative;
        const double fd = (mgf(spec, -y * (w + h), x, 0) - mgf(spec, -y * (w - h), x, 0)) / (2.0 * h);
        const double rel = std::abs(fd - analytic) / (std::abs(fd) + std::abs(analytic) + 1e-12);
        CHECK(rel < 1e-5);
    }
    CHECK(informative > 700);
}

TEST_CASE("samplers are unbiased and match the closed-form variance") {
    struct Case {
        CorruptionKind kind;
        double param, x;
    };
    const Case cases[] = {
        {CorruptionKind::Blankout, 0.5, 2.0},  {CorruptionKind::Blankout, 0.8, -1.5},
        {CorruptionKind::Gaussian, 0.7, 1.0},  {CorruptionKind::Laplace, 0.6, -2.0},
        {CorruptionKind::Poisson, 0.0, 3.0},
    };
    const std::size_t m = 1000000;
    for (const auto& c : cases) {
        CAPTURE(static_cast<int>(c.kind));
        const CorruptionSpec spec = make_spec(c.kind, c.param);
        const Moments mom = moments(spec, c.x, 0);
        double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double v = draw(spec, c.x, hash_seed(42, i));
            const double dev = v - mom.mean;
            sum += v;
            sum2 += dev * dev;
            sum4 += dev * dev * dev * dev;
        }
        const double mean = sum / m;
        const double var = sum2 / m;
        const double se_mean = std::sqrt(mom.variance / m);
        const double se_var = std::sqrt(std::max(0.0, sum4 / m - var * var) / m);
        CHECK(std::abs(mean - c.x) <= 4.0 * se_mean);            // unbiasedness
        CHECK(std::abs(var - mom.variance) <= 4.0 * se_var);     // variance match
    }
}

TEST_CASE("dropout sampler matches its biased mean") {
    const CorruptionSpec spec = make_spec(CorruptionKind::Dropout, 0.3);
    const auto est =
        test_utils::monte_carlo(400000, [&](std::size_t i) { return draw(spec, 2.0, hash_seed(7, i)); });
    CHECK(std::abs(est.mean - 0.7 * 2.0) <= 4.0 * est.se);
}

TEST_CASE("mgf equals the Monte-Carlo average of exp(t x~)") {
    struct Case {
        CorruptionKind kind;
        double param, t, x;
    };
    const Case cases[] = {
        {CorruptionKind::Blankout, 0.5, -1.0, 1.0}, {CorruptionKind::Dropout, 0.3, 0.8, 1.2},
        {CorruptionKind::Gaussian, 0.5, -0.6, 2.0}, {CorruptionKind::Laplace, 0.45, -1.2, 1.0},
        {CorruptionKind::Poisson, 0.0, 0.4, 2.0},   {CorruptionKind::None, 0.0, 1.3, 0.7},
    };
    for (const auto& c : cases) {
        CAPTURE(static_cast<int>(c.kind));
        const CorruptionSpec spec = make_spec(c.kind, c.param);
        if (c.kind == CorruptionKind::Laplace) REQUIRE(c.param * std::abs(c.t) <= 0.9);
        const auto est = test_utils::monte_carlo(
            200000, [&](std::size_t i) { return std::exp(c.t * draw(spec, c.x, hash_seed(11, i))); });
        CHECK(std::abs(est.mean - mgf(spec, c.t, c.x, 0)) <= 4.0 * est.se);
    }
}

TEST_CASE("multinomial block mgf matches Monte Carlo and has exact q=0 behaviour") {
    const int k = 4;
    CorruptionSpec spec = CorruptionSpec::uniform(CorruptionKind::Multinomial, k, 0.25);
    spec.n_categories = k;
    SparseRow row{{1, 1.0}};  // active slot 1 of the single block

    SUBCASE("q=0 leaves the block unchanged") {
        CorruptionSpec clean = spec;
        clean.params.setZero();
        for (int i = 0; i < 20; ++i) {
            const SparseRow out = sample_corrupted(clean, row, k, hash_seed(5, i));
            REQUIRE(out.size() == 1);
            CHECK(out[0].index == 1);
            CHECK(out[0].value == 1.0);
        }
    }
    SUBCASE("block mgf vs sampling") {
        const double t[4] = {0.3, -0.9, 0.1, 1.1};
        const double closed = log_mgf_block(0.25, k, t, 1, 1.0);
        const auto est = test_utils::monte_carlo(300000, [&](std::size_t i) {
            const SparseRow out = sample_corrupted(spec, row, k, hash_seed(13, i));
            double dot = 0.0;
            for (const auto& f : out) dot += t[f.index] * f.value;
            return std::exp(dot);
        });
        CHECK(std::abs(est.mean - std::exp(closed)) <= 4.0 * est.se);
    }
    SUBCASE("block gradient matches finite differences") {
        double t[4] = {0.3, -0.9, 0.1, 1.1};
        double grad[4];
        dlog_mgf_block_dt(0.25, k, t, 1, 1.5, grad);
        for (int j = 0; j < k; ++j) {
            const double h = 1e-6;
            t[j] += h;
            const double up = log_mgf_block(0.25, k, t, 1, 1.5);
            t[j] -= 2.0 * h;
            const double down = log_mgf_block(0.25, k, t, 1, 1.5);
            t[j] += h;
            CHECK(grad[j] == doctest::Approx((up - down) / (2.0 * h)).epsilon(1e-5));
        }
    }
    SUBCASE("two active slots in one block are rejected") {
        CorruptionSpec heavy = spec;
        heavy.params.setConstant(0.95);
        const SparseRow bad{{0, 1.0}, {1, 1.0}};
        bool threw = false;
        for (int i = 0; i < 50 && !threw; ++i) {
            try {
                sample_corrupted(heavy, bad, k, hash_seed(99, i));
            } catch (const std::invalid_argument&) {
                threw = true;
            }
        }
        CHECK(threw);
    }
}

TEST_CASE("blankout near total deletion survival rate") {
    const double q = 0.999;
    const CorruptionSpec spec = make_spec(CorruptionKind::Blankout, q);
    const std::size_t m = 100000;
    std::size_t survived = 0;
    for (std::size_t i = 0; i < m; ++i) survived += draw(spec, 1.0, hash_seed(3, i)) != 0.0;
    const double p_hat = static_cast<double>(survived) / m;
    CHECK(std::abs(p_hat - (1.0 - q)) <= 3.0 * std::sqrt(q * (1.0 - q) / m));
}

TEST_CASE("sampling determinism and the none kind") {
    const SparseRow row{{0, 1.0}, {2, -2.0}};
    const CorruptionSpec gaussian = make_spec(CorruptionKind::Gaussian, 0.5);
    const SparseRow a = sample_corrupted(gaussian, row, 4, 777);
    const SparseRow b = sample_corrupted(gaussian, row, 4, 777);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].index == b[i].index);
        CHECK(a[i].value == b[i].value);
    }
    const SparseRow c = sample_corrupted(CorruptionSpec::none(), row, 4, 777);
    REQUIRE(c.size() == row.size());
    CHECK(c[1].value == -2.0);
}

TEST_CASE("additive noise reaches structural zeros; multiplicative noise does not") {
    const SparseRow empty;
    const SparseRow gauss = sample_corrupted(make_spec(CorruptionKind::Gaussian, 1.0), empty, 4, 123);
    CHECK(gauss.size() == 4);  // all coordinates perturbed (a.s. nonzero)
    const SparseRow blank = sample_corrupted(make_spec(CorruptionKind::Blankout, 0.5), empty, 4, 123);
    CHECK(blank.empty());
    const SparseRow pois = sample_corrupted(make_spec(CorruptionKind::Poisson, 0.0), empty, 4, 123);
    CHECK(pois.empty());
}

TEST_CASE("the corruption mask shields the bias coordinate everywhere") {
    CorruptionSpec spec = CorruptionSpec::uniform(CorruptionKind::Blankout, 3, 0.9, 2);
    CHECK(!spec.corrupts(2));
    CHECK(moments(spec, 1.0, 2).variance == 0.0);
    CHECK(mgf(spec, -1.0, 1.0, 2) == doctest::Approx(std::exp(-1.0)));
    const SparseRow row{{2, 1.0}};
    for (int i = 0; i < 200; ++i) {
        const SparseRow out = sample_corrupted(spec, row, 3, hash_seed(1, i));
        REQUIRE(out.size() == 1);
        CHECK(out[0].value == 1.0);
    }

    CorruptionSpec gspec = CorruptionSpec::uniform(CorruptionKind::Gaussian, 3, 2.0, 2);
    for (int i = 0; i < 50; ++i) {
        const SparseRow out = sample_corrupted(gspec, row, 3, hash_seed(2, i));
        CHECK(corrupted_value_at(out, 2) == 1.0);
    }
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(make_spec(CorruptionKind::Blankout, 1.0).validate(4), std::invalid_argument);
    CHECK_THROWS_AS(make_spec(CorruptionKind::Gaussian, -0.1).validate(4), std::invalid_argument);
    CHECK_NOTHROW(make_spec(CorruptionKind::Blankout, 0.0).validate(4));

    CorruptionSpec multi = CorruptionSpec::uniform(CorruptionKind::Multinomial, 9, 0.1, 8);
    multi.n_categories = 4;
    CHECK_NOTHROW(multi.validate(9));  // two blocks of 4 plus a masked bias
    multi.n_categories = 3;
    CHECK_THROWS_AS(multi.validate(9), std::invalid_argument);  // 8 % 3 != 0
}

TEST_CASE("poisson domain errors") {
    const CorruptionSpec spec = make_spec(CorruptionKind::Poisson, 0.0);
    CHECK_THROWS_AS(log_mgf(spec, 0.5, -2.0, 0), std::domain_error);
    SparseRow row{{0, -1.0}};
    CHECK_THROWS_AS(sample_corrupted(spec, row, 4, 1), std::domain_error);
}
