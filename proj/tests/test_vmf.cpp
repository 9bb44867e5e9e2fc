#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "sphereloc/geometry.hpp"
#include "sphereloc/rng.hpp"
#include "sphereloc/vmf.hpp"

using namespace sphereloc;
using test_helpers::check_close;

namespace {

// Closed-form marginal CDF of t = mu . x under vMF(kappa), written in the
// overflow-safe form F(t) = (e^{kappa (t - 1)} - e^{-2 kappa}) / (1 - e^{-2 kappa}).
double marginal_cdf(double kappa, double t) {
    return (std::exp(kappa * (t - 1.0)) - std::exp(-2.0 * kappa)) /
           (1.0 - std::exp(-2.0 * kappa));
}

// Kolmogorov distribution complement: P(D > observed) for sample size n,
// with the Stephens small-sample correction on the statistic.
double ks_p_value(double d, std::size_t n) {
    double sn = std::sqrt(static_cast<double>(n));
    double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double p = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
        p += (k % 2 == 1) ? term : -term;
    }
    return std::max(p, 0.0);
}

// Langevin function L(kappa) = coth(kappa) - 1/kappa = E[mu . x]; its
// inverse (by Newton from the standard moment start) is the concentration
// estimator used as the sampler oracle.
double langevin(double kappa) { return 1.0 / std::tanh(kappa) - 1.0 / kappa; }

double estimate_kappa(double rbar) {
    double k = rbar * (3.0 - rbar * rbar) / (1.0 - rbar * rbar);
    for (int i = 0; i < 20; ++i) {
        double f = langevin(k) - rbar;
        double csch = 1.0 / std::sinh(k);
        double deriv = 1.0 / (k * k) - csch * csch;
        k -= f / deriv;
    }
    return k;
}

CartesianPoint normalized(double z, double x, double y) {
    double n = std::sqrt(z * z + x * x + y * y);
    return {z / n, x / n, y / n};
}

}  // namespace

TEST_CASE("log_sinh matches log(sinh) and stays finite for large arguments") {
    for (double k : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0})
        check_close(log_sinh(k), std::log(std::sinh(k)), 1e-12);
    // sinh(1000) overflows; log form must not. Frozen value: 1000 - log 2.
    check_close(log_sinh(1000.0), 999.3068528194401, 1e-10);
    CHECK(std::isfinite(log_sinh(5000.0)));
}

TEST_CASE("vmf_log_density evaluates the density formula") {
    VmfComponent c{CartesianPoint{1.0, 0.0, 0.0}, 2.0};  // mu at the north pole
    SphericalPoint p(0.3, 0.7);
    double expected =
        std::log(2.0) - std::log(2.0 * kPi) - std::log(std::sinh(2.0)) + 2.0 * std::sin(0.7);
    check_close(vmf_log_density(c, p), expected, 1e-12);
}

TEST_CASE("vMF sampler at kappa = 50: direction, concentration, and KS test") {
    CartesianPoint mu = normalized(0.3, -0.5, 0.8);
    double kappa = 50.0;
    std::size_t n = 100000;

    Rng rng(2024);
    double sz = 0, sx = 0, sy = 0;
    std::vector<double> ts;
    ts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SphericalPoint p = sample_vmf(mu, kappa, rng);
        CartesianPoint c = to_cartesian(p);
        check_close(dot(c, c), 1.0, 1e-12);
        double t = dot(mu, c);
        CHECK(t >= -1.0);
        CHECK(t <= 1.0);
        ts.push_back(t);
        sz += c.z;
        sx += c.x;
        sy += c.y;
    }

    // Mean direction within 0.02 rad of mu.
    CartesianPoint mean_dir = normalized(sz, sx, sy);
    double angle = std::acos(std::clamp(dot(mean_dir, mu), -1.0, 1.0));
    CAPTURE(angle);
    CHECK(angle < 0.02);

    // Mean resultant length inverts to kappa within 10%.
    double rbar = std::sqrt(sz * sz + sx * sx + sy * sy) / static_cast<double>(n);
    double kappa_hat = estimate_kappa(rbar);
    CAPTURE(kappa_hat);
    CHECK(kappa_hat > 45.0);
    CHECK(kappa_hat < 55.0);

    // Kolmogorov-Smirnov against the closed-form marginal of t = mu . x.
    std::sort(ts.begin(), ts.end());
    double d = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double f = marginal_cdf(kappa, ts[i]);
        d = std::max(d, std::abs(f - static_cast<double>(i) / static_cast<double>(n)));
        d = std::max(d, std::abs(static_cast<double>(i + 1) / static_cast<double>(n) - f));
    }
    double p = ks_p_value(d, n);
    CAPTURE(d);
    CAPTURE(p);
    CHECK(p > 0.001);
}

TEST_CASE("vMF azimuth is symmetric around mu") {
    // Project draws onto a direction orthogonal to mu: positive and negative
    // sides are equally likely, so the count is binomial(n, 1/2).
    CartesianPoint mu = normalized(0.2, 0.9, -0.1);
    CartesianPoint ortho = normalized(0.9 * 0.9 + 0.1 * 0.1, -0.2 * 0.9, 0.2 * 0.1);
    check_close(dot(mu, ortho), 0.0, 1e-12);

    Rng rng(77);
    std::size_t n = 100000;
    long positive = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (dot(to_cartesian(sample_vmf(mu, 4.0, rng)), ortho) > 0.0) ++positive;
    double dev = std::abs(static_cast<double>(positive) - 0.5 * static_cast<double>(n));
    CHECK(dev <= 3.0 * 0.5 * std::sqrt(static_cast<double>(n)));
}

TEST_CASE("vMF sampler survives extreme concentrations") {
    CartesianPoint mu{0.0, 1.0, 0.0};
    Rng rng(5);
    double max_angle = 0;
    for (int i = 0; i < 2000; ++i) {
        SphericalPoint p = sample_vmf(mu, 5000.0, rng);  // the kappa > 700 branch
        CHECK(std::isfinite(p.lon));
        CHECK(std::isfinite(p.lat));
        max_angle = std::max(max_angle, central_angle(p, SphericalPoint(0, 0)));
    }
    CHECK(max_angle < 0.2);  // draws hug the mean direction

    // Tiny kappa stays valid too.
    for (int i = 0; i < 200; ++i) CHECK(std::isfinite(sample_vmf(mu, 1e-6, rng).lat));
}

TEST_CASE("sample_uniform_sphere is area-uniform") {
    Rng rng(6);
    std::size_t n = 100000;
    double sz = 0;
    long north = 0;
    for (std::size_t i = 0; i < n; ++i) {
        SphericalPoint p = sample_uniform_sphere(rng);
        CHECK(p.lon >= -kPi);
        CHECK(p.lon < kPi);
        CHECK(std::abs(p.lat) <= kPi / 2);
        sz += std::sin(p.lat);
        if (p.lat > 0) ++north;
    }
    // z = sin(lat) is U(-1, 1): mean 0 with sd 1/sqrt(3n); hemisphere counts
    // are binomial(n, 1/2).
    CHECK(std::abs(sz / static_cast<double>(n)) < 3.0 / std::sqrt(3.0 * static_cast<double>(n)));
    CHECK(std::abs(static_cast<double>(north) - 0.5 * static_cast<double>(n)) <=
          3.0 * 0.5 * std::sqrt(static_cast<double>(n)));
}

TEST_CASE("stratified centers fill their latitude bands south to north") {
    Rng rng(7);
    int bands = 5, per_band = 2;
    std::vector<SphericalPoint> centers = sample_stratified_centers(bands, per_band, rng);
    REQUIRE(centers.size() == static_cast<std::size_t>(bands * per_band));
    for (int b = 0; b < bands; ++b) {
        double lo = -kPi / 2 + b * kPi / bands;
        double hi = lo + kPi / bands;
        for (int j = 0; j < per_band; ++j) {
            double lat = centers[static_cast<std::size_t>(b * per_band + j)].lat;
            CHECK(lat >= lo);
            CHECK(lat <= hi);
        }
    }
}

TEST_CASE("generate: counts, splits, kappa range, and ids") {
    MvMFSpec spec;
    spec.placement = Placement::stratified;
    spec.classes = 10;
    spec.n_mu = 5;
    spec.c_mu = 2;
    spec.samples_per_class = 37;  // odd count exercises the floor/remainder split
    spec.kappa_min = 1.0;
    spec.kappa_max = 8.0;
    spec.seed = 99;

    Dataset ds = generate(spec);
    REQUIRE(ds.records.size() == 370);
    CHECK(ds.num_classes == 10);
    REQUIRE(ds.provenance.has_value());
    REQUIRE(ds.provenance->components.size() == 10);

    // kappa = r^2 with r uniform in [kappa_min, kappa_max].
    for (const auto& c : ds.provenance->components) {
        CHECK(c.kappa >= 1.0);
        CHECK(c.kappa <= 64.0);
        check_close(dot(c.mu, c.mu), 1.0, 1e-12);
    }

    // Ids are the class-major draw order.
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(ds.records[i].point_id == static_cast<std::int64_t>(i));
        CHECK(ds.records[i].class_id == static_cast<int>(i / 37));
    }

    // 80/10/10 per class: floor(0.8 * 37) = 29 train, floor(0.1 * 37) = 3 val,
    // remainder 5 test.
    for (int cls = 0; cls < 10; ++cls) {
        int tr = 0, va = 0, te = 0;
        for (int s = 0; s < 37; ++s) {
            switch (ds.records[static_cast<std::size_t>(cls * 37 + s)].split) {
                case Split::train: ++tr; break;
                case Split::val: ++va; break;
                case Split::test: ++te; break;
            }
        }
        CHECK(tr == 29);
        CHECK(va == 3);
        CHECK(te == 5);
    }
    CHECK(ds.split_records(Split::train).size() == 290);
    CHECK(ds.split_records(Split::val).size() == 30);
    CHECK(ds.split_records(Split::test).size() == 50);
}

TEST_CASE("generate is deterministic in the seed and sensitive to it") {
    MvMFSpec spec;
    spec.classes = 6;
    spec.samples_per_class = 20;
    spec.kappa_min = 1.0;
    spec.kappa_max = 10.0;
    spec.seed = 4;

    Dataset a = generate(spec);
    Dataset b = generate(spec);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].point.lon == b.records[i].point.lon);
        CHECK(a.records[i].point.lat == b.records[i].point.lat);
        CHECK(a.records[i].split == b.records[i].split);
    }

    spec.seed = 5;
    Dataset c = generate(spec);
    bool any_differs = false;
    for (std::size_t i = 0; i < a.records.size(); ++i)
        if (a.records[i].point.lon != c.records[i].point.lon) any_differs = true;
    CHECK(any_differs);
}

TEST_CASE("generate with explicit components uses them as-is") {
    MvMFSpec spec;
    spec.classes = 2;
    spec.samples_per_class = 50;
    spec.seed = 11;
    spec.components = {VmfComponent{CartesianPoint{1.0, 0.0, 0.0}, 30.0},
                       VmfComponent{CartesianPoint{-1.0, 0.0, 0.0}, 30.0}};

    Dataset ds = generate(spec);
    REQUIRE(ds.provenance.has_value());
    CHECK(ds.provenance->components[0].kappa == 30.0);
    CHECK(ds.provenance->components[1].mu.z == -1.0);
    // Class 0 hugs the north pole, class 1 the south.
    for (const auto& r : ds.records) {
        if (r.class_id == 0)
            CHECK(r.point.lat > 0);
        else
            CHECK(r.point.lat < 0);
    }

    MvMFSpec bad = spec;
    bad.classes = 3;
    CHECK_THROWS_AS(generate(bad), std::invalid_argument);
}

TEST_CASE("generate validates its parameters") {
    MvMFSpec spec;
    spec.classes = 0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    spec.classes = 4;
    spec.samples_per_class = 0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    spec.samples_per_class = 5;
    spec.kappa_min = 0.0;
    spec.kappa_max = 1.0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    spec.kappa_min = 2.0;
    spec.kappa_max = 1.0;
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);

    spec.kappa_min = 1.0;
    spec.kappa_max = 4.0;
    spec.placement = Placement::stratified;
    spec.n_mu = 3;
    spec.c_mu = 2;  // 3 * 2 != 4
    CHECK_THROWS_AS(generate(spec), std::invalid_argument);
}

TEST_CASE("oracle_classify picks the highest log-density, lowest id on ties") {
    MvMFSpec spec;
    spec.classes = 2;
    spec.components = {VmfComponent{CartesianPoint{1.0, 0.0, 0.0}, 5.0},
                       VmfComponent{CartesianPoint{-1.0, 0.0, 0.0}, 5.0}};
    CHECK(oracle_classify(spec, SphericalPoint(0.4, 0.1)) == 0);
    CHECK(oracle_classify(spec, SphericalPoint(0.4, -0.1)) == 1);
    // Equidistant with equal kappa: densities tie exactly, lowest id wins.
    CHECK(oracle_classify(spec, SphericalPoint(0.4, 0.0)) == 0);

    // Same center twice: always a tie, always class 0.
    MvMFSpec twin;
    twin.classes = 2;
    twin.components = {VmfComponent{CartesianPoint{0.0, 1.0, 0.0}, 3.0},
                       VmfComponent{CartesianPoint{0.0, 1.0, 0.0}, 3.0}};
    Rng rng(31);
    for (int i = 0; i < 50; ++i)
        CHECK(oracle_classify(twin, sample_uniform_sphere(rng)) == 0);

    // Against a direct argmax over vmf_log_density on random mixtures.
    MvMFSpec mix;
    mix.classes = 5;
    mix.samples_per_class = 1;
    mix.kappa_min = 1.0;
    mix.kappa_max = 6.0;
    mix.seed = 17;
    Dataset ds = generate(mix);
    const MvMFSpec& realized = *ds.provenance;
    for (int i = 0; i < 500; ++i) {
        SphericalPoint p = sample_uniform_sphere(rng);
        int best = 0;
        double best_val = -std::numeric_limits<double>::infinity();
        for (int c = 0; c < 5; ++c) {
            double v = vmf_log_density(realized.components[static_cast<std::size_t>(c)], p);
            if (v > best_val) {
                best_val = v;
                best = c;
            }
        }
        CHECK(oracle_classify(realized, p) == best);
    }
}

TEST_CASE("splits partition every class") {
    MvMFSpec spec;
    spec.classes = 3;
    spec.samples_per_class = 10;
    spec.kappa_min = 1.0;
    spec.kappa_max = 3.0;
    spec.seed = 8;
    Dataset ds = generate(spec);
    // sp = 10: exactly 8 / 1 / 1 per class.
    for (int cls = 0; cls < 3; ++cls) {
        int counts[3] = {0, 0, 0};
        for (const auto& r : ds.records)
            if (r.class_id == cls) ++counts[static_cast<int>(r.split)];
        CHECK(counts[0] == 8);
        CHECK(counts[1] == 1);
        CHECK(counts[2] == 1);
    }
}
