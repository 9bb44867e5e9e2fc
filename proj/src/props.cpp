#include "sphereloc/props.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "sphereloc/geometry.hpp"
#include "sphereloc/rng.hpp"
#include "sphereloc/vmf.hpp"

namespace sphereloc {

namespace {

double feature_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double feature_dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// A point at central angle `angle` from p, in a random tangent direction.
SphericalPoint offset_point(const SphericalPoint& p, double angle, Rng& rng) {
    CartesianPoint c = to_cartesian(p);
    Eigen::Vector3d u(c.x, c.y, c.z);
    Eigen::Vector3d t;
    do {
        t = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
        t -= t.dot(u) * u;
    } while (t.norm() < 1e-6);
    t.normalize();
    Eigen::Vector3d q = std::cos(angle) * u + std::sin(angle) * t;
    q.normalize();
    double z = std::clamp(q.z(), -1.0, 1.0);
    return SphericalPoint(std::atan2(q.y(), q.x()), std::asin(z));
}

PropertyResult worst_row(std::vector<PropertyResult> rows) {
    PropertyResult worst = rows.front();
    bool pass = true;
    for (const auto& r : rows) {
        pass = pass && r.pass;
        if (r.max_error - r.tolerance > worst.max_error - worst.tolerance) worst = r;
    }
    worst.pass = pass;
    return worst;
}

PropertyResult make_row(std::string id, long trials, double max_error, double tolerance,
                        std::uint64_t seed) {
    return PropertyResult{std::move(id), trials, max_error, tolerance,
                          max_error <= tolerance, seed};
}

}  // namespace

std::vector<PropertyResult> distance_identity_rows(long trials, std::uint64_t seed) {
    EncoderSpec spec = EncoderSpec::multi_scale(Family::sphere_c, 1, 1.0, 1.0);
    Rng rng(seed);
    double err_dot = 0.0, err_norm = 0.0;
    for (long i = 0; i < trials; ++i) {
        SphericalPoint p1 = sample_uniform_sphere(rng);
        SphericalPoint p2 = sample_uniform_sphere(rng);
        double angle = central_angle(p1, p2);
        std::vector<double> e1 = encode(spec, p1), e2 = encode(spec, p2);
        err_dot = std::max(err_dot, std::abs(feature_dot(e1, e2) - std::cos(angle)));
        err_norm = std::max(err_norm,
                            std::abs(feature_distance(e1, e2) - 2.0 * std::sin(angle / 2.0)));
    }
    double err_small = 0.0;
    for (long i = 0; i < trials; ++i) {
        SphericalPoint p1 = sample_uniform_sphere(rng);
        double angle = rng.uniform(1e-6, 1e-3);
        SphericalPoint p2 = offset_point(p1, angle, rng);
        double exact = central_angle(p1, p2);
        err_small = std::max(
            err_small, std::abs(feature_distance(encode(spec, p1), encode(spec, p2)) - exact));
    }
    return {make_row("sphere-dot-vs-central-angle", trials, err_dot, 1e-9, seed),
            make_row("sphere-norm-vs-central-angle", trials, err_norm, 1e-9, seed),
            make_row("sphere-small-angle-linearity", trials, err_small, 1e-9, seed)};
}

std::vector<PropertyResult> injectivity_rows(long trials, std::uint64_t seed) {
    const Family families[] = {Family::dfs, Family::sphere_c, Family::sphere_c_plus,
                               Family::sphere_m, Family::sphere_m_plus};
    constexpr double kFloor = 1e-12;
    std::vector<PropertyResult> rows;
    std::uint64_t stream = 0;
    for (Family f : families) {
        EncoderSpec spec = EncoderSpec::multi_scale(f, 8, 1e-2, 1.0);
        std::uint64_t row_seed = derive_seed(seed, stream++);
        Rng rng(row_seed);
        double min_dist = std::numeric_limits<double>::infinity();
        for (long i = 0; i < trials; ++i) {
            SphericalPoint p1 = sample_uniform_sphere(rng);
            SphericalPoint p2 = sample_uniform_sphere(rng);
            if (same_location(p1, p2)) {
                --i;
                continue;
            }
            min_dist = std::min(min_dist, feature_distance(encode(spec, p1), encode(spec, p2)));
        }
        rows.push_back(make_row("injectivity-" + family_name(f), trials,
                                std::max(0.0, kFloor - min_dist), 0.0, row_seed));
    }
    return rows;
}

std::vector<PropertyResult> grid_pathology_rows(long trials, std::uint64_t seed) {
    std::vector<PropertyResult> rows;
    const ScaleSchedule schedules[] = {ScaleSchedule(1, 1.0, 1.0), ScaleSchedule(4, 0.1, 1.0),
                                       ScaleSchedule(8, 1e-2, 1.0)};

    // Closed forms for dot product and squared distance, all schedules.
    Rng rng(seed);
    double err_dot = 0.0, err_norm = 0.0;
    for (const auto& sch : schedules) {
        EncoderSpec spec = EncoderSpec::multi_scale(Family::grid, sch.scales, sch.r_min,
                                                    sch.r_max);
        for (long i = 0; i < trials; ++i) {
            SphericalPoint p1 = sample_uniform_sphere(rng);
            SphericalPoint p2 = sample_uniform_sphere(rng);
            double closed_dot = 0.0;
            for (int s = 0; s < sch.scales; ++s) {
                double r = sch.scale_at(s);
                closed_dot += std::cos((p1.lat - p2.lat) / r) + std::cos((p1.lon - p2.lon) / r);
            }
            std::vector<double> e1 = encode(spec, p1), e2 = encode(spec, p2);
            err_dot = std::max(err_dot, std::abs(feature_dot(e1, e2) - closed_dot));
            double d = feature_distance(e1, e2);
            err_norm = std::max(err_norm,
                                std::abs(d * d - (4.0 * sch.scales - 2.0 * closed_dot)));
        }
    }
    rows.push_back(make_row("grid-dot-closed-form", trials * 3, err_dot, 1e-9, seed));
    rows.push_back(make_row("grid-norm-closed-form", trials * 3, err_norm, 1e-9, seed));

    // Constant-latitude sweep: two meridians 0.8 rad apart, latitude from
    // -85 to +85 degrees. Grid distance must not move; the real separation
    // must collapse toward the poles; single-scale sphereC must shrink
    // monotonically toward each pole.
    EncoderSpec grid_spec = EncoderSpec::multi_scale(Family::grid, 8, 1e-2, 1.0);
    EncoderSpec c_spec = EncoderSpec::multi_scale(Family::sphere_c, 1, 1.0, 1.0);
    const double lon1 = 0.3, lon2 = 1.1;
    std::vector<double> lats;
    for (int deg = -85; deg <= 85; deg += 5) lats.push_back(deg * kPi / 180.0);

    double grid_ref = -1.0, grid_dev = 0.0;
    double gc_min = std::numeric_limits<double>::infinity(), gc_max = 0.0;
    std::vector<double> c_dist(lats.size());
    for (std::size_t i = 0; i < lats.size(); ++i) {
        SphericalPoint a(lon1, lats[i]), b(lon2, lats[i]);
        double gd = feature_distance(encode(grid_spec, a), encode(grid_spec, b));
        if (grid_ref < 0) grid_ref = gd;
        grid_dev = std::max(grid_dev, std::abs(gd - grid_ref));
        double gc = great_circle_distance(a, b);
        gc_min = std::min(gc_min, gc);
        gc_max = std::max(gc_max, gc);
        c_dist[i] = feature_distance(encode(c_spec, a), encode(c_spec, b));
    }
    long sweep = static_cast<long>(lats.size());
    rows.push_back(make_row("grid-constant-lat-distance", sweep, grid_dev, 1e-9, seed));
    double variation = (gc_max - gc_min) / gc_max;
    rows.push_back(
        make_row("grid-great-circle-variation", sweep, std::max(0.0, 0.5 - variation), 0.0, seed));

    // Split the sweep at the equator; within each half, distance must fall
    // as |lat| grows.
    double worst_rise = 0.0;
    for (std::size_t i = 0; i + 1 < lats.size(); ++i) {
        bool increasing_abs = std::abs(lats[i + 1]) > std::abs(lats[i]);
        if (increasing_abs) worst_rise = std::max(worst_rise, c_dist[i + 1] - c_dist[i]);
        else worst_rise = std::max(worst_rise, c_dist[i] - c_dist[i + 1]);
    }
    rows.push_back(make_row("sphereC-pole-monotone", sweep, worst_rise, 1e-12, seed));
    return rows;
}

std::vector<PropertyResult> nerf_identity_rows(long trials, std::uint64_t seed) {
    std::vector<PropertyResult> rows;
    const int scale_counts[] = {1, 4, 8};
    std::uint64_t stream = 0;
    for (int S : scale_counts) {
        std::uint64_t row_seed = derive_seed(seed, stream++);
        Rng rng(row_seed);
        double err = 0.0;
        for (long i = 0; i < trials; ++i) {
            SphericalPoint p1 = sample_uniform_sphere(rng);
            SphericalPoint p2 = sample_uniform_sphere(rng);
            CartesianPoint c1 = to_cartesian(p1), c2 = to_cartesian(p2);
            double closed = 0.0;
            for (int s = 0; s < S; ++s) {
                double f = std::ldexp(kPi, s - 1);  // 2^{s-1} * pi
                double sz = std::sin(f * (c1.z - c2.z));
                double sx = std::sin(f * (c1.x - c2.x));
                double sy = std::sin(f * (c1.y - c2.y));
                closed += 4.0 * (sz * sz + sx * sx + sy * sy);
            }
            double d = feature_distance(encode_nerf(S, p1), encode_nerf(S, p2));
            err = std::max(err, std::abs(d * d - closed));
        }
        rows.push_back(make_row("nerf-norm-closed-form-S" + std::to_string(S), trials, err, 1e-9,
                                row_seed));
    }

    // The six axis endpoints pair up into three antipodal collisions.
    const SphericalPoint axis_pairs[3][2] = {
        {SphericalPoint(0.0, kPi / 2), SphericalPoint(0.0, -kPi / 2)},   // +z / -z
        {SphericalPoint(0.0, 0.0), SphericalPoint(-kPi, 0.0)},           // +x / -x
        {SphericalPoint(kPi / 2, 0.0), SphericalPoint(-kPi / 2, 0.0)},   // +y / -y
    };
    double worst = 0.0;
    for (const auto& pair : axis_pairs)
        worst = std::max(worst, feature_distance(encode_nerf(8, pair[0]), encode_nerf(8, pair[1])));
    rows.push_back(make_row("nerf-antipodal-collisions", 3, worst, 1e-12, seed));
    return rows;
}

PropertyResult check_distance_identity(long trials, std::uint64_t seed) {
    return worst_row(distance_identity_rows(trials, seed));
}

PropertyResult check_injectivity(long trials, std::uint64_t seed) {
    return worst_row(injectivity_rows(trials, seed));
}

PropertyResult check_grid_pathology(long trials, std::uint64_t seed) {
    return worst_row(grid_pathology_rows(trials, seed));
}

PropertyResult check_nerf_identities(long trials, std::uint64_t seed) {
    return worst_row(nerf_identity_rows(trials, seed));
}

std::vector<PropertyResult> run_all_properties(long trials, std::uint64_t seed) {
    std::vector<PropertyResult> rows;
    auto extend = [&rows](std::vector<PropertyResult> more) {
        for (auto& r : more) rows.push_back(std::move(r));
    };
    extend(distance_identity_rows(trials, derive_seed(seed, 1)));
    extend(injectivity_rows(trials, derive_seed(seed, 2)));
    extend(grid_pathology_rows(trials, derive_seed(seed, 3)));
    extend(nerf_identity_rows(trials, derive_seed(seed, 4)));
    return rows;
}

bool all_pass(const std::vector<PropertyResult>& rows) {
    return std::all_of(rows.begin(), rows.end(), [](const PropertyResult& r) { return r.pass; });
}

}  // namespace sphereloc
