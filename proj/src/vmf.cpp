#include "sphereloc/vmf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace sphereloc {

namespace {

Eigen::Vector3d as_vec(const CartesianPoint& c) { return {c.x, c.y, c.z}; }

SphericalPoint from_vec(const Eigen::Vector3d& v) {
    double z = std::clamp(v.z(), -1.0, 1.0);
    return SphericalPoint(std::atan2(v.y(), v.x()), std::asin(z));
}

// Rotation taking the +z pole onto mu (Rodrigues form; the antipodal case
// falls back to a 180-degree flip about x).
Eigen::Matrix3d pole_to(const Eigen::Vector3d& mu) {
    Eigen::Vector3d pole(0.0, 0.0, 1.0);
    double c = pole.dot(mu);
    if (c > 1.0 - 1e-15) return Eigen::Matrix3d::Identity();
    if (c < -1.0 + 1e-15) {
        Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
        flip(1, 1) = -1.0;
        flip(2, 2) = -1.0;
        return flip;
    }
    Eigen::Vector3d v = pole.cross(mu);
    Eigen::Matrix3d vx;
    vx << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return Eigen::Matrix3d::Identity() + vx + vx * vx / (1.0 + c);
}

void check_component(const VmfComponent& c) {
    if (!(c.kappa > 0.0)) throw std::invalid_argument("vMF concentration must be > 0");
    double n2 = c.mu.z * c.mu.z + c.mu.x * c.mu.x + c.mu.y * c.mu.y;
    if (std::abs(n2 - 1.0) > 1e-9)
        throw std::invalid_argument("vMF mean direction must be a unit vector");
}

}  // namespace

const std::string& split_name(Split s) {
    static const std::string names[3] = {"train", "val", "test"};
    return names[static_cast<int>(s)];
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::train;
    if (name == "val") return Split::val;
    if (name == "test") return Split::test;
    throw std::invalid_argument("unknown split: " + name);
}

std::vector<DataRecord> Dataset::split_records(Split s) const {
    std::vector<DataRecord> out;
    for (const auto& r : records)
        if (r.split == s) out.push_back(r);
    return out;
}

SphericalPoint sample_vmf(const CartesianPoint& mu, double kappa, Rng& rng) {
    if (!(kappa > 0.0)) throw std::invalid_argument("vMF concentration must be > 0");
    double u = rng.uniform_pos();
    double t;
    if (kappa > 700.0) {
        t = 1.0 + std::log(u) / kappa;
    } else {
        t = 1.0 + std::log(u + (1.0 - u) * std::exp(-2.0 * kappa)) / kappa;
    }
    t = std::clamp(t, -1.0, 1.0);
    double theta = rng.uniform(0.0, 2.0 * kPi);
    double sin_alpha = std::sqrt(std::max(0.0, 1.0 - t * t));
    Eigen::Vector3d local(sin_alpha * std::cos(theta), sin_alpha * std::sin(theta), t);
    return from_vec(pole_to(as_vec(mu).normalized()) * local);
}

std::vector<SphericalPoint> sample_vmf(const CartesianPoint& mu, double kappa, int n, Rng& rng) {
    std::vector<SphericalPoint> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sample_vmf(mu, kappa, rng));
    return out;
}

SphericalPoint sample_uniform_sphere(Rng& rng) {
    double z = rng.uniform(-1.0, 1.0);
    double lon = rng.uniform(-kPi, kPi);
    return SphericalPoint(lon, std::asin(z));
}

std::vector<SphericalPoint> sample_uniform_sphere(int n, Rng& rng) {
    std::vector<SphericalPoint> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sample_uniform_sphere(rng));
    return out;
}

std::vector<SphericalPoint> sample_stratified_centers(int n_bands, int per_band, Rng& rng) {
    if (n_bands < 1 || per_band < 1)
        throw std::invalid_argument("stratified placement needs n_bands >= 1 and per_band >= 1");
    std::vector<SphericalPoint> out;
    out.reserve(static_cast<std::size_t>(n_bands) * per_band);
    for (int b = 0; b < n_bands; ++b) {
        double lat_lo = -kPi / 2 + kPi * b / n_bands;
        double lat_hi = -kPi / 2 + kPi * (b + 1) / n_bands;
        double z_lo = std::sin(lat_lo), z_hi = std::sin(lat_hi);
        for (int j = 0; j < per_band; ++j) {
            double z = std::clamp(rng.uniform(z_lo, z_hi), -1.0, 1.0);
            double lon = rng.uniform(-kPi, kPi);
            out.emplace_back(lon, std::asin(z));
        }
    }
    return out;
}

double log_sinh(double kappa) {
    // sinh(k) = e^k (1 - e^{-2k}) / 2
    return kappa + std::log1p(-std::exp(-2.0 * kappa)) - std::log(2.0);
}

double vmf_log_density(const VmfComponent& c, const SphericalPoint& p) {
    check_component(c);
    return std::log(c.kappa) - std::log(2.0 * kPi) - log_sinh(c.kappa) +
           c.kappa * dot(c.mu, to_cartesian(p));
}

Dataset generate(const MvMFSpec& spec) {
    if (spec.classes < 1) throw std::invalid_argument("class count must be >= 1");
    if (spec.samples_per_class < 1) throw std::invalid_argument("samples per class must be >= 1");
    if (spec.components.empty() && !(spec.kappa_min > 0.0 && spec.kappa_max >= spec.kappa_min))
        throw std::invalid_argument("need 0 < kappa_min <= kappa_max");

    Rng rng(spec.seed);
    MvMFSpec realized = spec;

    if (realized.components.empty()) {
        std::vector<SphericalPoint> centers;
        if (spec.placement == Placement::uniform) {
            centers = sample_uniform_sphere(spec.classes, rng);
        } else {
            if (spec.n_mu < 1 || spec.c_mu < 1 || spec.n_mu * spec.c_mu != spec.classes)
                throw std::invalid_argument(
                    "stratified placement needs classes == n_mu * c_mu with both >= 1");
            centers = sample_stratified_centers(spec.n_mu, spec.c_mu, rng);
        }
        // All centers are drawn before any kappa so that placement mode alone
        // decides the center stream.
        for (const auto& c : centers) {
            double r = rng.uniform(spec.kappa_min, spec.kappa_max);
            realized.components.push_back(VmfComponent{to_cartesian(c), r * r});
        }
    } else if (static_cast<int>(realized.components.size()) != spec.classes) {
        throw std::invalid_argument("component list size must equal the class count");
    }

    Dataset ds;
    ds.num_classes = spec.classes;
    std::int64_t next_id = 0;
    for (int cls = 0; cls < spec.classes; ++cls) {
        const auto& comp = realized.components[static_cast<std::size_t>(cls)];
        check_component(comp);
        for (int s = 0; s < spec.samples_per_class; ++s)
            ds.records.push_back(
                DataRecord{next_id++, sample_vmf(comp.mu, comp.kappa, rng), cls, Split::train});
    }

    // 80/10/10 per class: shuffle each class's sample slots, floor counts
    // for train and val, remainder to test.
    int sp = spec.samples_per_class;
    int n_train = sp * 8 / 10;
    int n_val = sp / 10;
    for (int cls = 0; cls < spec.classes; ++cls) {
        std::vector<int> idx(static_cast<std::size_t>(sp));
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        for (int j = 0; j < sp; ++j) {
            Split s = j < n_train ? Split::train : (j < n_train + n_val ? Split::val : Split::test);
            ds.records[static_cast<std::size_t>(cls) * sp + idx[static_cast<std::size_t>(j)]]
                .split = s;
        }
    }

    ds.provenance = std::move(realized);
    return ds;
}

int oracle_classify(const MvMFSpec& spec, const SphericalPoint& p) {
    if (spec.components.empty()) throw std::invalid_argument("spec has no realized components");
    CartesianPoint x = to_cartesian(p);
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < spec.components.size(); ++i) {
        const auto& c = spec.components[i];
        double score = std::log(c.kappa) - std::log(2.0 * kPi) - log_sinh(c.kappa) +
                       c.kappa * dot(c.mu, x);
        if (score > best_score) {
            best_score = score;
            best = static_cast<int>(i);
        }
    }
    return best;
}

}  // namespace sphereloc
