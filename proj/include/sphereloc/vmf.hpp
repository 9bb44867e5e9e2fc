#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sphereloc/geometry.hpp"
#include "sphereloc/rng.hpp"

namespace sphereloc {

// Synthetic classification benchmarks: each class is one von Mises-Fisher
// component on the unit sphere, with density
//   f(x; mu, kappa) = kappa / (2 pi sinh kappa) * exp(kappa mu . x).

struct VmfComponent {
    CartesianPoint mu;   // unit mean direction
    double kappa = 1.0;  // concentration, > 0
};

enum class Placement { uniform, stratified };

// Mixture-of-vMF generator spec. `components` is the realized mixture; when
// left empty, generate() draws it from the placement parameters and the
// seed, and the returned dataset's provenance carries the realized list.
struct MvMFSpec {
    Placement placement = Placement::uniform;
    int classes = 1;            // C
    int samples_per_class = 1;  // SP
    double kappa_min = 1.0;
    double kappa_max = 1.0;
    int n_mu = 0;  // stratified: latitude bands
    int c_mu = 0;  // stratified: centers per band (classes == n_mu * c_mu)
    std::uint64_t seed = 0;
    std::vector<VmfComponent> components;
};

enum class Split { train, val, test };
const std::string& split_name(Split s);
Split split_from_name(const std::string& name);

struct DataRecord {
    std::int64_t point_id = 0;
    SphericalPoint point;
    int class_id = 0;
    Split split = Split::train;
};

struct Dataset {
    std::vector<DataRecord> records;
    int num_classes = 0;
    std::optional<MvMFSpec> provenance;

    std::vector<DataRecord> split_records(Split s) const;
};

// One vMF draw. Exact inverse-CDF sampling of t = mu . x:
//   t = 1 + log(u + (1 - u) e^{-2 kappa}) / kappa,  u ~ U(0, 1],
// a uniform azimuth in the tangent plane, then rotation of the pole frame
// onto mu. Above kappa = 700 the e^{-2 kappa} term is dropped (it underflows
// long before that), leaving the stable form t = 1 + log(u) / kappa.
SphericalPoint sample_vmf(const CartesianPoint& mu, double kappa, Rng& rng);
std::vector<SphericalPoint> sample_vmf(const CartesianPoint& mu, double kappa, int n, Rng& rng);

// Area-uniform sphere point: sin(lat) ~ U(-1, 1), lon ~ U(-pi, pi).
SphericalPoint sample_uniform_sphere(Rng& rng);
std::vector<SphericalPoint> sample_uniform_sphere(int n, Rng& rng);

// Stratified centers: n_bands equal-width latitude intervals; within band
// [lo, hi], sin(lat) ~ U(sin lo, sin hi) (area-uniform within the band) and
// lon ~ U(-pi, pi). Returns bands south to north, per_band points each.
std::vector<SphericalPoint> sample_stratified_centers(int n_bands, int per_band, Rng& rng);

// log(sinh(kappa)) without overflow for large kappa.
double log_sinh(double kappa);

// Log-density of vMF(mu, kappa) at p.
double vmf_log_density(const VmfComponent& c, const SphericalPoint& p);

// Draw order (pinned; rerunning a spec is byte-identical): centers, then
// kappas (kappa_i = r^2 with r ~ U(kappa_min, kappa_max)), then class 0's
// samples, class 1's samples, ..., then per-class split shuffles. Splits are
// 80/10/10 per class (floor for train and val, remainder to test). Points
// are numbered class-major in draw order. If spec.components is non-empty
// the center/kappa draws are skipped and the given mixture is used as-is.
Dataset generate(const MvMFSpec& spec);

// Bayes-optimal classifier for a known mixture with equal class priors:
// argmax_i log f(p; mu_i, kappa_i), ties resolved to the lowest class id.
int oracle_classify(const MvMFSpec& spec, const SphericalPoint& p);

}  // namespace sphereloc
