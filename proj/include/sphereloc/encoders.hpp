#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sphereloc/geometry.hpp"
#include "sphereloc/rng.hpp"

namespace sphereloc {

// Deterministic fixed-form position encoders for points on the sphere.
// Every family is a pure function of (spec, point): no state, no learned
// parts. The learnable part of a model always lives downstream in the net.
enum class Family {
    tile,
    wrap,
    xyz,
    rbf,
    rff,
    grid,
    theory,
    nerf,
    dfs,
    sphere_c,
    sphere_m,
    sphere_c_plus,
    sphere_m_plus,
};

// Canonical family names as used by the CLI and all serialized specs:
// tile wrap xyz rbf rff grid theory nerf dfs sphereC sphereM sphereC+ sphereM+
const std::string& family_name(Family f);
Family family_from_name(const std::string& name);

// Geometric scale grid r^(s), s = 0..scales-1, spaced so that
//   r^(s) = r_min * g^(s / (scales-1)),  g = r_max / r_min,
// i.e. r^(0) = r_min and r^(scales-1) = r_max. A single-scale schedule
// degenerates to r^(0) = r_max (the unscaled end is the one kept).
struct ScaleSchedule {
    int scales = 1;
    double r_min = 1.0;
    double r_max = 1.0;

    ScaleSchedule() = default;
    ScaleSchedule(int scales_, double r_min_, double r_max_);
    double scale_at(int s) const;
};

enum class RbfMetric { chord, lonlat };

struct RbfParams {
    std::vector<SphericalPoint> anchors;
    double sigma = 1.0;
    RbfMetric metric = RbfMetric::chord;
};

struct RffParams {
    // directions[i] = (w_lon, w_lat); one row per output feature.
    std::vector<std::array<double, 2>> directions;
    std::vector<double> offsets;  // in [0, 2*pi)
    double bandwidth = 1.0;
};

struct TileParams {
    int lon_cells = 1;
    int lat_cells = 1;
};

// A fully-specified encoder: the family plus whatever frozen randomness or
// grid layout it needs. Specs serialize losslessly (see io.hpp) so that a
// checkpoint pins its encoder down to the last anchor coordinate.
struct EncoderSpec {
    Family family = Family::grid;
    ScaleSchedule schedule;
    std::optional<RbfParams> rbf;
    std::optional<RffParams> rff;
    std::optional<TileParams> tile;

    int output_dim() const;

    // Multi-scale families: grid, theory, dfs, sphereC, sphereM, sphereC+,
    // sphereM+. nerf accepts only the scale count (its frequencies are the
    // fixed octaves 2^s).
    static EncoderSpec multi_scale(Family f, int scales, double r_min, double r_max = 1.0);
    static EncoderSpec nerf(int scales);
    static EncoderSpec single(Family f);  // wrap, xyz
    static EncoderSpec make_tile(int lon_cells, int lat_cells);
    // Anchors must be non-empty; sigma > 0.
    static EncoderSpec make_rbf(std::vector<SphericalPoint> anchors, double sigma,
                                RbfMetric metric = RbfMetric::chord);
    // Freezes dim direction/offset pairs drawn from the given seed.
    // Directions are N(0, I/bandwidth^2) per axis; offsets U[0, 2*pi).
    static EncoderSpec make_rff(int dim, double bandwidth, std::uint64_t seed);
};

// --- individual families ---------------------------------------------------
//
// Shared conventions. lambda = lon, phi = lat, both radians. The scaled
// coordinates at schedule step s are lambda^(s) = lambda / r^(s) and
// phi^(s) = phi / r^(s). Output layout is scale-major: all terms for s = 0,
// then s = 1, ... Term order within one scale is documented per family and
// is part of the format (checkpoints depend on it).

// tile: index of the equal-interval lon/lat cell containing p, row-major
// with latitude as the slow axis: id = lat_idx * lon_cells + lon_idx.
// Cells are half-open in both axes; the lat = pi/2 edge folds into the top
// row (longitude has no closing edge since lon lives in [-pi, pi)).
int tile_index(const TileParams& t, const SphericalPoint& p);

// tile encoding: one-hot over lon_cells * lat_cells cells.
std::vector<double> encode_tile(const TileParams& t, const SphericalPoint& p);

// wrap: [sin lambda, cos lambda, sin 2*phi, cos 2*phi].
std::vector<double> encode_wrap(const SphericalPoint& p);

// xyz: the unit-sphere embedding [sin phi, cos phi cos lambda, cos phi sin lambda].
std::vector<double> encode_xyz(const SphericalPoint& p);

// rbf: exp(-d(p, anchor_m)^2 / (2 sigma^2)) per anchor. d is the 3-D chord
// distance between unit-sphere embeddings (RbfMetric::chord, default) or the
// raw Euclidean distance in (lon, lat) coordinates (RbfMetric::lonlat).
std::vector<double> encode_rbf(const RbfParams& r, const SphericalPoint& p);

// rff: sqrt(2/D) * cos(w_i . (lambda, phi) + b_i) per frozen pair (w_i, b_i).
std::vector<double> encode_rff(const RffParams& r, const SphericalPoint& p);

// grid: per scale [sin phi^(s), cos phi^(s), sin lambda^(s), cos lambda^(s)].
std::vector<double> encode_grid(const ScaleSchedule& sch, const SphericalPoint& p);

// theory: per scale, for each of the three unit directions
//   a_1 = [1, 0], a_2 = [-1/2, sqrt(3)/2], a_3 = [-1/2, -sqrt(3)/2],
// the pair [sin <x^(s), a_j>, cos <x^(s), a_j>] with x^(s) = (lambda, phi)/r^(s).
std::vector<double> encode_theory(const ScaleSchedule& sch, const SphericalPoint& p);

// nerf: with (z, x, y) = to_cartesian(p), per octave s the terms
// [sin(2^s pi z), cos(2^s pi z), sin(2^s pi x), cos(2^s pi x),
//  sin(2^s pi y), cos(2^s pi y)].
std::vector<double> encode_nerf(int scales, const SphericalPoint& p);

// dfs: the double Fourier sphere basis. Layout:
//   for n in 0..S-1: [sin phi^(n), cos phi^(n)]
//   for m in 0..S-1: [sin lambda^(m), cos lambda^(m)]
//   for n in 0..S-1: for m in 0..S-1:
//     [cos phi^(n) cos lambda^(m), cos phi^(n) sin lambda^(m),
//      sin phi^(n) cos lambda^(m), sin phi^(n) sin lambda^(m)]
std::vector<double> encode_dfs(const ScaleSchedule& sch, const SphericalPoint& p);

// sphereC: per scale [sin phi^(s), cos phi^(s) cos lambda^(s), cos phi^(s) sin lambda^(s)].
// At scales = 1, r_max = 1 this is exactly encode_xyz.
std::vector<double> encode_sphere_c(const ScaleSchedule& sch, const SphericalPoint& p);

// sphereM: per scale
//   [sin phi^(s), cos phi^(s) cos lambda, cos phi cos lambda^(s),
//    cos phi^(s) sin lambda, cos phi sin lambda^(s)]
// (lambda and phi unscaled where written bare).
std::vector<double> encode_sphere_m(const ScaleSchedule& sch, const SphericalPoint& p);

// sphereC+ / sphereM+: plain concatenation [sphereC | grid] and
// [sphereM | grid] over the same schedule. The shared sin/cos(phi^(s))
// terms are kept on both sides, so dims are 7S and 9S.
std::vector<double> encode_sphere_c_plus(const ScaleSchedule& sch, const SphericalPoint& p);
std::vector<double> encode_sphere_m_plus(const ScaleSchedule& sch, const SphericalPoint& p);

// Dispatch on spec.family.
std::vector<double> encode(const EncoderSpec& spec, const SphericalPoint& p);

// Encodes a batch into a column-per-point matrix (output_dim x n).
Eigen::MatrixXd encode_batch(const EncoderSpec& spec, const std::vector<SphericalPoint>& pts);

}  // namespace sphereloc
