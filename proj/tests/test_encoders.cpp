#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "sphereloc/encoders.hpp"
#include "sphereloc/geometry.hpp"
#include "sphereloc/rng.hpp"

using namespace sphereloc;
using test_helpers::check_close;
using test_helpers::check_vec;

namespace {

SphericalPoint random_point(Rng& rng) {
    return SphericalPoint(rng.uniform(-kPi, kPi), std::asin(rng.uniform(-1.0, 1.0)));
}

double encoding_distance(const std::vector<double>& a, const std::vector<double>& b) {
    REQUIRE(a.size() == b.size());
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

const std::vector<Family> kAllFamilies{
    Family::tile,     Family::wrap,     Family::xyz,          Family::rbf,
    Family::rff,      Family::grid,     Family::theory,       Family::nerf,
    Family::dfs,      Family::sphere_c, Family::sphere_m,     Family::sphere_c_plus,
    Family::sphere_m_plus};

EncoderSpec spec_for(Family f, int scales = 3) {
    switch (f) {
        case Family::tile: return EncoderSpec::make_tile(8, 4);
        case Family::wrap:
        case Family::xyz: return EncoderSpec::single(f);
        case Family::rbf:
            return EncoderSpec::make_rbf(
                {SphericalPoint(0, 0), SphericalPoint(1, 0.5), SphericalPoint(-2, -1)}, 0.7);
        case Family::rff: return EncoderSpec::make_rff(10, 1.5, 42);
        case Family::nerf: return EncoderSpec::nerf(scales);
        default: return EncoderSpec::multi_scale(f, scales, 0.05, 1.0);
    }
}

}  // namespace

TEST_CASE("family names round trip") {
    for (Family f : kAllFamilies) CHECK(family_from_name(family_name(f)) == f);
    CHECK(family_name(Family::sphere_c_plus) == "sphereC+");
    CHECK(family_name(Family::sphere_m_plus) == "sphereM+");
    CHECK_THROWS_AS(family_from_name("nope"), std::invalid_argument);
}

TEST_CASE("scale schedule is geometric from r_min to r_max") {
    ScaleSchedule sch(4, 0.01, 1.0);
    // Frozen from r_min * (r_max / r_min)^(s / (S - 1)).
    std::vector<double> expected{0.01, 0.04641588833612779, 0.21544346900318834, 1.0};
    for (int s = 0; s < 4; ++s) {
        CAPTURE(s);
        CHECK(sch.scale_at(s) == doctest::Approx(expected[s]).epsilon(1e-14));
    }
    CHECK(sch.scale_at(0) == 0.01);
    CHECK(sch.scale_at(3) == 1.0);

    // A single-scale schedule keeps the unscaled end.
    ScaleSchedule one(1, 0.01, 1.0);
    CHECK(one.scale_at(0) == 1.0);

    CHECK_THROWS_AS(ScaleSchedule(0, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ScaleSchedule(2, 0.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ScaleSchedule(2, -0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(ScaleSchedule(2, 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("output dimensions follow the family formulas") {
    int S = 5;
    CHECK(EncoderSpec::multi_scale(Family::grid, S, 0.01).output_dim() == 4 * S);
    CHECK(EncoderSpec::multi_scale(Family::sphere_c, S, 0.01).output_dim() == 3 * S);
    CHECK(EncoderSpec::multi_scale(Family::sphere_m, S, 0.01).output_dim() == 5 * S);
    CHECK(EncoderSpec::multi_scale(Family::sphere_c_plus, S, 0.01).output_dim() == 7 * S);
    CHECK(EncoderSpec::multi_scale(Family::sphere_m_plus, S, 0.01).output_dim() == 9 * S);
    CHECK(EncoderSpec::multi_scale(Family::theory, S, 0.01).output_dim() == 6 * S);
    CHECK(EncoderSpec::multi_scale(Family::dfs, S, 0.01).output_dim() == 4 * S * S + 4 * S);
    CHECK(EncoderSpec::nerf(S).output_dim() == 6 * S);
    CHECK(EncoderSpec::single(Family::wrap).output_dim() == 4);
    CHECK(EncoderSpec::single(Family::xyz).output_dim() == 3);
    CHECK(EncoderSpec::make_tile(8, 4).output_dim() == 32);
    CHECK(spec_for(Family::rbf).output_dim() == 3);
    CHECK(EncoderSpec::make_rff(10, 1.0, 1).output_dim() == 10);

    for (Family f : kAllFamilies) {
        EncoderSpec spec = spec_for(f);
        CHECK(static_cast<int>(encode(spec, SphericalPoint(0.3, 0.7)).size()) ==
              spec.output_dim());
    }
}

// Every frozen vector below was computed independently from the documented
// term layout at p = (lon 0.3, lat 0.7), scales {0.1, 1}.
TEST_CASE("grid encoding matches frozen values") {
    SphericalPoint p(0.3, 0.7);
    ScaleSchedule sch(2, 0.1, 1.0);
    check_vec(encode_grid(sch, p),
              {0.6569865987187884, 0.7539022543433053, 0.14112000805986766, -0.9899924966004454,
               0.644217687237691, 0.7648421872844885, 0.29552020666133955, 0.955336489125606},
              1e-12);
    // At the origin with one scale: [sin 0, cos 0, sin 0, cos 0].
    check_vec(encode_grid(ScaleSchedule(1, 1.0, 1.0), SphericalPoint(0, 0)), {0, 1, 0, 1}, 0);
}

TEST_CASE("sphereC encoding matches frozen values and equals xyz at one scale") {
    SphericalPoint p(0.3, 0.7);
    check_vec(encode_sphere_c(ScaleSchedule(2, 0.1, 1.0), p),
              {0.6569865987187884, -0.7463575749700327, 0.10639069220927963, 0.644217687237691,
               0.7306816499355124, 0.22602632124962302},
              1e-12);
    check_vec(encode_xyz(p), {0.644217687237691, 0.7306816499355124, 0.22602632124962302},
              1e-12);

    Rng rng(21);
    ScaleSchedule one(1, 0.5, 1.0);
    for (int i = 0; i < 200; ++i) {
        SphericalPoint q = random_point(rng);
        check_vec(encode_sphere_c(one, q), encode_xyz(q), 0);
    }
}

TEST_CASE("sphereM encoding matches frozen values (bare lon/lat stay unscaled)") {
    SphericalPoint p(0.3, 0.7);
    check_vec(encode_sphere_m(ScaleSchedule(2, 0.1, 1.0), p),
              {0.6569865987187884, 0.7202303328082129, -0.7571880264951162, 0.22279335000598335,
               0.10793453563411383, 0.644217687237691, 0.7306816499355124, 0.7306816499355124,
               0.22602632124962302, 0.22602632124962302},
              1e-12);
    // At the unit scale the five terms collapse onto sphereC's last two.
    check_vec(encode_sphere_m(ScaleSchedule(1, 1.0, 1.0), SphericalPoint(0, 0)),
              {0, 1, 1, 0, 0}, 0);
}

TEST_CASE("theory encoding matches frozen values") {
    check_vec(encode_theory(ScaleSchedule(1, 1.0, 1.0), SphericalPoint(0.3, 0.7)),
              {0.29552020666133955, 0.955336489125606, 0.4405558743698922, 0.8977251926721116,
               -0.6861750367477477, 0.7274364707273255},
              1e-12);
}

TEST_CASE("nerf encoding matches frozen values") {
    check_vec(encode_nerf(2, SphericalPoint(0.3, 0.7)),
              {0.8991061045116752, -0.4377307538085948, 0.7486931735952473, -0.6629166854227436,
               0.6518964325077724, 0.7583080121452227, -0.7871327857636096, -0.6167835743403188,
               -0.9926423940767923, -0.12108293637624647, 0.9886765757190625,
               0.15006208256727857},
              1e-12);
}

TEST_CASE("dfs encoding matches frozen values (singles then interactions)") {
    check_vec(encode_dfs(ScaleSchedule(2, 0.1, 1.0), SphericalPoint(0.3, 0.7)),
              {0.6569865987187884,  0.7539022543433053,  0.644217687237691,
               0.7648421872844885,  0.14112000805986766, -0.9899924966004454,
               0.29552020666133955, 0.955336489125606,   -0.7463575749700327,
               0.10639069220927963, -0.6504118030986483, 0.09271395410642046,
               0.7202303328082129,  0.22279335000598335, 0.6276432706225806,
               0.1941528154271069,  -0.7571880264951162, 0.10793453563411383,
               -0.6377706765426067, 0.09091200521529226, 0.7306816499355124,
               0.22602632124962302, 0.6154446635582734,  0.19037934406737264},
              1e-12);
    check_vec(encode_dfs(ScaleSchedule(1, 1.0, 1.0), SphericalPoint(0, 0)),
              {0, 1, 0, 1, 1, 0, 0, 0}, 0);
}

TEST_CASE("wrap encoding doubles the latitude angle") {
    check_vec(encode_wrap(SphericalPoint(0.3, 0.7)),
              {0.29552020666133955, 0.955336489125606, 0.9854497299884601, 0.16996714290024104},
              1e-12);
    // Both poles map to the same wrap features regardless of longitude:
    // sin(2 lat) = 0, cos(2 lat) = -1 at lat = +-pi/2.
    std::vector<double> north = encode_wrap(SphericalPoint(1.0, kPi / 2));
    std::vector<double> south = encode_wrap(SphericalPoint(1.0, -kPi / 2));
    check_close(north[2], 0.0, 1e-12);
    check_close(north[3], -1.0, 1e-12);
    check_close(south[2], 0.0, 1e-12);
    check_close(south[3], -1.0, 1e-12);
}

TEST_CASE("the plus variants are plain concatenations") {
    Rng rng(22);
    ScaleSchedule sch(3, 0.05, 1.0);
    for (int i = 0; i < 100; ++i) {
        SphericalPoint p = random_point(rng);
        std::vector<double> grid = encode_grid(sch, p);

        std::vector<double> expect_c = encode_sphere_c(sch, p);
        expect_c.insert(expect_c.end(), grid.begin(), grid.end());
        check_vec(encode_sphere_c_plus(sch, p), expect_c, 0);

        std::vector<double> expect_m = encode_sphere_m(sch, p);
        expect_m.insert(expect_m.end(), grid.begin(), grid.end());
        check_vec(encode_sphere_m_plus(sch, p), expect_m, 0);
    }
}

TEST_CASE("rbf encoding evaluates the kernel of the chosen metric") {
    std::vector<SphericalPoint> anchors{SphericalPoint(0, 0)};
    SphericalPoint p(0.3, 0.7);
    // Frozen: exp(-chord^2 / (2 * 0.8^2)) and exp(-(lon^2 + lat^2) / (2 * 0.8^2)).
    check_vec(encode_rbf(RbfParams{anchors, 0.8, RbfMetric::chord}, p), {0.656514878601102},
              1e-12);
    check_vec(encode_rbf(RbfParams{anchors, 0.8, RbfMetric::lonlat}, p), {0.6356386738260521},
              1e-12);
    // At an anchor the response peaks at exactly 1.
    check_vec(encode_rbf(RbfParams{anchors, 0.8, RbfMetric::chord}, SphericalPoint(0, 0)), {1.0},
              0);

    CHECK_THROWS_AS(EncoderSpec::make_rbf({}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(EncoderSpec::make_rbf(anchors, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(EncoderSpec::make_rbf(anchors, -1.0), std::invalid_argument);
}

TEST_CASE("rff spec freezes its random features from the seed") {
    EncoderSpec a = EncoderSpec::make_rff(16, 1.25, 99);
    EncoderSpec b = EncoderSpec::make_rff(16, 1.25, 99);
    EncoderSpec c = EncoderSpec::make_rff(16, 1.25, 100);
    REQUIRE(a.rff.has_value());
    CHECK(a.rff->directions == b.rff->directions);
    CHECK(a.rff->offsets == b.rff->offsets);
    CHECK(a.rff->directions != c.rff->directions);
    for (double o : a.rff->offsets) {
        CHECK(o >= 0.0);
        CHECK(o < 2 * kPi);
    }
    SphericalPoint p(0.6, -0.2);
    check_vec(encode(a, p), encode(b, p), 0);

    CHECK_THROWS_AS(EncoderSpec::make_rff(0, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(EncoderSpec::make_rff(4, 0.0, 1), std::invalid_argument);
}

TEST_CASE("rff features are a Monte-Carlo estimate of the Gaussian kernel") {
    // sqrt(2/D) cos(w.x + b) features satisfy E[phi(x).phi(y)] =
    // exp(-|x - y|^2 / (2 bw^2)) in raw (lon, lat) coordinates, with the
    // expectation over redraws of (w, b). Averaging the feature dot product
    // over many independently seeded specs must approach the closed form
    // within a few standard errors.
    SphericalPoint x(0.4, 0.2), y(-0.3, -0.35);
    double bw = 1.0;
    double dl = x.lon - y.lon, dp = x.lat - y.lat;
    double kernel = std::exp(-(dl * dl + dp * dp) / (2 * bw * bw));

    int redraws = 2000;
    int dim = 64;
    double sum = 0, sum_sq = 0;
    for (int i = 0; i < redraws; ++i) {
        EncoderSpec spec = EncoderSpec::make_rff(dim, bw, 1000 + static_cast<std::uint64_t>(i));
        std::vector<double> fx = encode(spec, x), fy = encode(spec, y);
        double d = 0;
        for (int j = 0; j < dim; ++j) d += fx[j] * fy[j];
        sum += d;
        sum_sq += d * d;
    }
    double mean = sum / redraws;
    double var = (sum_sq / redraws - mean * mean) / (redraws - 1);
    double se = std::sqrt(std::max(var, 0.0));
    CAPTURE(mean);
    CAPTURE(kernel);
    CAPTURE(se);
    CHECK(std::abs(mean - kernel) < 4 * se + 1e-6);
}

TEST_CASE("tile index walks row-major with latitude slow") {
    TileParams t2{2, 2};
    CHECK(tile_index(t2, SphericalPoint(-kPi, -kPi / 2)) == 0);
    CHECK(tile_index(t2, SphericalPoint(-0.1, -0.1)) == 0);
    CHECK(tile_index(t2, SphericalPoint(0.1, -0.1)) == 1);
    CHECK(tile_index(t2, SphericalPoint(-0.1, 0.1)) == 2);
    CHECK(tile_index(t2, SphericalPoint(0.1, 0.1)) == 3);
    // The lat = pi/2 edge folds into the top row.
    CHECK(tile_index(t2, SphericalPoint(0.5, kPi / 2)) == 3);
    // lon = pi wraps to -pi, the first column.
    CHECK(tile_index(t2, SphericalPoint(kPi, 0.2)) == 2);
    // Internal edges are half-open: the boundary belongs to the upper cell.
    CHECK(tile_index(t2, SphericalPoint(0.0, -0.1)) == 1);
    CHECK(tile_index(t2, SphericalPoint(-0.1, 0.0)) == 2);

    // Frozen from floor((lon + pi) / w), floor((lat + pi/2) / h) on 36 x 18.
    CHECK(tile_index(TileParams{36, 18}, SphericalPoint(0.3, 0.7)) == 487);

    std::vector<double> hot = encode_tile(t2, SphericalPoint(0.1, 0.1));
    check_vec(hot, {0, 0, 0, 1}, 0);

    CHECK_THROWS_AS(EncoderSpec::make_tile(0, 4), std::invalid_argument);
    CHECK_THROWS_AS(EncoderSpec::make_tile(4, 0), std::invalid_argument);
}

TEST_CASE("every tile cell is reachable and hit counts cover the grid") {
    TileParams t{8, 4};
    std::set<int> seen;
    Rng rng(23);
    for (int i = 0; i < 5000; ++i) {
        int idx = tile_index(t, random_point(rng));
        CHECK(idx >= 0);
        CHECK(idx < 32);
        seen.insert(idx);
    }
    CHECK(seen.size() == 32);
}

TEST_CASE("encoders stay finite at poles, the date line, and random points") {
    std::vector<SphericalPoint> pts{
        SphericalPoint(0, 0),           SphericalPoint(-kPi, 0),
        SphericalPoint(kPi, 0.3),       SphericalPoint(0.7, kPi / 2),
        SphericalPoint(-2.1, -kPi / 2), SphericalPoint(kPi - 1e-12, 1e-12)};
    Rng rng(24);
    for (int i = 0; i < 200; ++i) pts.push_back(random_point(rng));

    for (Family f : kAllFamilies) {
        EncoderSpec spec = spec_for(f);
        for (const auto& p : pts) {
            for (double v : encode(spec, p)) CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("encode dispatch, determinism, and batch layout agree") {
    Rng rng(25);
    for (Family f : kAllFamilies) {
        EncoderSpec spec = spec_for(f);
        std::vector<SphericalPoint> pts;
        for (int i = 0; i < 7; ++i) pts.push_back(random_point(rng));

        Eigen::MatrixXd m = encode_batch(spec, pts);
        REQUIRE(m.rows() == spec.output_dim());
        REQUIRE(m.cols() == 7);
        for (int c = 0; c < 7; ++c) {
            std::vector<double> one = encode(spec, pts[static_cast<std::size_t>(c)]);
            std::vector<double> two = encode(spec, pts[static_cast<std::size_t>(c)]);
            check_vec(one, two, 0);  // pure function of (spec, point)
            for (int r = 0; r < m.rows(); ++r) CHECK(m(r, c) == one[static_cast<std::size_t>(r)]);
        }
    }
}

TEST_CASE("single-scale sphereC dot products follow the central angle") {
    ScaleSchedule one(1, 1.0, 1.0);
    Rng rng(26);
    for (int i = 0; i < 500; ++i) {
        SphericalPoint a = random_point(rng), b = random_point(rng);
        std::vector<double> ea = encode_sphere_c(one, a), eb = encode_sphere_c(one, b);
        double d = 0;
        for (std::size_t j = 0; j < ea.size(); ++j) d += ea[j] * eb[j];
        double angle = central_angle(a, b);
        check_close(d, std::cos(angle), 1e-12);
        check_close(encoding_distance(ea, eb), 2 * std::sin(angle / 2), 1e-12);
    }
}

TEST_CASE("spec builders reject invalid shapes") {
    CHECK_THROWS_AS(EncoderSpec::multi_scale(Family::grid, 0, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(EncoderSpec::multi_scale(Family::wrap, 3, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(EncoderSpec::multi_scale(Family::nerf, 3, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(EncoderSpec::nerf(0), std::invalid_argument);
    CHECK_THROWS_AS(EncoderSpec::single(Family::grid), std::invalid_argument);
}
