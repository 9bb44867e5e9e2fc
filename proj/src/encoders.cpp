#include "sphereloc/encoders.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace sphereloc {

namespace {

const std::array<std::pair<Family, const char*>, 13> kFamilyNames = {{
    {Family::tile, "tile"},
    {Family::wrap, "wrap"},
    {Family::xyz, "xyz"},
    {Family::rbf, "rbf"},
    {Family::rff, "rff"},
    {Family::grid, "grid"},
    {Family::theory, "theory"},
    {Family::nerf, "nerf"},
    {Family::dfs, "dfs"},
    {Family::sphere_c, "sphereC"},
    {Family::sphere_m, "sphereM"},
    {Family::sphere_c_plus, "sphereC+"},
    {Family::sphere_m_plus, "sphereM+"},
}};

void append_grid_terms(const ScaleSchedule& sch, const SphericalPoint& p,
                       std::vector<double>& out) {
    for (int s = 0; s < sch.scales; ++s) {
        double r = sch.scale_at(s);
        double phi = p.lat / r, lam = p.lon / r;
        out.push_back(std::sin(phi));
        out.push_back(std::cos(phi));
        out.push_back(std::sin(lam));
        out.push_back(std::cos(lam));
    }
}

void append_sphere_c_terms(const ScaleSchedule& sch, const SphericalPoint& p,
                           std::vector<double>& out) {
    for (int s = 0; s < sch.scales; ++s) {
        double r = sch.scale_at(s);
        double phi = p.lat / r, lam = p.lon / r;
        double cphi = std::cos(phi);
        out.push_back(std::sin(phi));
        out.push_back(cphi * std::cos(lam));
        out.push_back(cphi * std::sin(lam));
    }
}

void append_sphere_m_terms(const ScaleSchedule& sch, const SphericalPoint& p,
                           std::vector<double>& out) {
    double cphi0 = std::cos(p.lat);
    double clam0 = std::cos(p.lon), slam0 = std::sin(p.lon);
    for (int s = 0; s < sch.scales; ++s) {
        double r = sch.scale_at(s);
        double phi = p.lat / r, lam = p.lon / r;
        double cphi = std::cos(phi);
        out.push_back(std::sin(phi));
        out.push_back(cphi * clam0);
        out.push_back(cphi0 * std::cos(lam));
        out.push_back(cphi * slam0);
        out.push_back(cphi0 * std::sin(lam));
    }
}

}  // namespace

const std::string& family_name(Family f) {
    static const std::unordered_map<Family, std::string> names = [] {
        std::unordered_map<Family, std::string> m;
        for (const auto& [fam, name] : kFamilyNames) m.emplace(fam, name);
        return m;
    }();
    return names.at(f);
}

Family family_from_name(const std::string& name) {
    for (const auto& [fam, fname] : kFamilyNames)
        if (name == fname) return fam;
    throw std::invalid_argument("unknown encoder family: " + name);
}

ScaleSchedule::ScaleSchedule(int scales_, double r_min_, double r_max_)
    : scales(scales_), r_min(r_min_), r_max(r_max_) {
    if (scales < 1) throw std::invalid_argument("scale count must be >= 1");
    if (!(r_min > 0.0) || !(r_max > 0.0))
        throw std::invalid_argument("scale lengths must be > 0");
    if (r_min > r_max) throw std::invalid_argument("r_min must be <= r_max");
}

double ScaleSchedule::scale_at(int s) const {
    if (s < 0 || s >= scales) throw std::out_of_range("scale index out of range");
    if (scales == 1) return r_max;
    double g = r_max / r_min;
    return r_min * std::pow(g, static_cast<double>(s) / (scales - 1));
}

int EncoderSpec::output_dim() const {
    int S = schedule.scales;
    switch (family) {
        case Family::tile: return tile->lon_cells * tile->lat_cells;
        case Family::wrap: return 4;
        case Family::xyz: return 3;
        case Family::rbf: return static_cast<int>(rbf->anchors.size());
        case Family::rff: return static_cast<int>(rff->directions.size());
        case Family::grid: return 4 * S;
        case Family::theory: return 6 * S;
        case Family::nerf: return 6 * S;
        case Family::dfs: return 4 * S * S + 4 * S;
        case Family::sphere_c: return 3 * S;
        case Family::sphere_m: return 5 * S;
        case Family::sphere_c_plus: return 7 * S;
        case Family::sphere_m_plus: return 9 * S;
    }
    throw std::logic_error("unhandled family");
}

EncoderSpec EncoderSpec::multi_scale(Family f, int scales, double r_min, double r_max) {
    switch (f) {
        case Family::grid:
        case Family::theory:
        case Family::dfs:
        case Family::sphere_c:
        case Family::sphere_m:
        case Family::sphere_c_plus:
        case Family::sphere_m_plus: break;
        default: throw std::invalid_argument(family_name(f) + " is not a multi-scale family");
    }
    EncoderSpec spec;
    spec.family = f;
    spec.schedule = ScaleSchedule(scales, r_min, r_max);
    return spec;
}

EncoderSpec EncoderSpec::nerf(int scales) {
    EncoderSpec spec;
    spec.family = Family::nerf;
    spec.schedule = ScaleSchedule(scales, 1.0, 1.0);
    return spec;
}

EncoderSpec EncoderSpec::single(Family f) {
    if (f != Family::wrap && f != Family::xyz)
        throw std::invalid_argument(family_name(f) + " needs family parameters");
    EncoderSpec spec;
    spec.family = f;
    return spec;
}

EncoderSpec EncoderSpec::make_tile(int lon_cells, int lat_cells) {
    if (lon_cells < 1 || lat_cells < 1) throw std::invalid_argument("tile cells must be >= 1");
    EncoderSpec spec;
    spec.family = Family::tile;
    spec.tile = TileParams{lon_cells, lat_cells};
    return spec;
}

EncoderSpec EncoderSpec::make_rbf(std::vector<SphericalPoint> anchors, double sigma,
                                  RbfMetric metric) {
    if (anchors.empty()) throw std::invalid_argument("rbf needs at least one anchor");
    if (!(sigma > 0.0)) throw std::invalid_argument("rbf bandwidth must be > 0");
    EncoderSpec spec;
    spec.family = Family::rbf;
    spec.rbf = RbfParams{std::move(anchors), sigma, metric};
    return spec;
}

EncoderSpec EncoderSpec::make_rff(int dim, double bandwidth, std::uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("rff dim must be >= 1");
    if (!(bandwidth > 0.0)) throw std::invalid_argument("rff bandwidth must be > 0");
    RffParams params;
    params.bandwidth = bandwidth;
    Rng rng(seed);
    double scale = 1.0 / bandwidth;
    for (int i = 0; i < dim; ++i)
        params.directions.push_back({scale * rng.normal(), scale * rng.normal()});
    for (int i = 0; i < dim; ++i) params.offsets.push_back(rng.uniform(0.0, 2.0 * kPi));
    EncoderSpec spec;
    spec.family = Family::rff;
    spec.rff = std::move(params);
    return spec;
}

int tile_index(const TileParams& t, const SphericalPoint& p) {
    double lon_step = 2.0 * kPi / t.lon_cells;
    double lat_step = kPi / t.lat_cells;
    int li = static_cast<int>(std::floor((p.lon + kPi) / lon_step));
    int pi = static_cast<int>(std::floor((p.lat + kPi / 2) / lat_step));
    if (li >= t.lon_cells) li = t.lon_cells - 1;
    if (pi >= t.lat_cells) pi = t.lat_cells - 1;  // lat = pi/2 folds into the top row
    return pi * t.lon_cells + li;
}

std::vector<double> encode_tile(const TileParams& t, const SphericalPoint& p) {
    std::vector<double> out(static_cast<std::size_t>(t.lon_cells) * t.lat_cells, 0.0);
    out[static_cast<std::size_t>(tile_index(t, p))] = 1.0;
    return out;
}

std::vector<double> encode_wrap(const SphericalPoint& p) {
    return {std::sin(p.lon), std::cos(p.lon), std::sin(2.0 * p.lat), std::cos(2.0 * p.lat)};
}

std::vector<double> encode_xyz(const SphericalPoint& p) {
    CartesianPoint c = to_cartesian(p);
    return {c.z, c.x, c.y};
}

std::vector<double> encode_rbf(const RbfParams& r, const SphericalPoint& p) {
    std::vector<double> out;
    out.reserve(r.anchors.size());
    double inv = 1.0 / (2.0 * r.sigma * r.sigma);
    for (const auto& a : r.anchors) {
        double d2;
        if (r.metric == RbfMetric::chord) {
            double d = chord_distance(p, a);
            d2 = d * d;
        } else {
            double dlon = p.lon - a.lon, dlat = p.lat - a.lat;
            d2 = dlon * dlon + dlat * dlat;
        }
        out.push_back(std::exp(-d2 * inv));
    }
    return out;
}

std::vector<double> encode_rff(const RffParams& r, const SphericalPoint& p) {
    std::vector<double> out;
    out.reserve(r.directions.size());
    double amp = std::sqrt(2.0 / static_cast<double>(r.directions.size()));
    for (std::size_t i = 0; i < r.directions.size(); ++i)
        out.push_back(amp * std::cos(r.directions[i][0] * p.lon + r.directions[i][1] * p.lat +
                                     r.offsets[i]));
    return out;
}

std::vector<double> encode_grid(const ScaleSchedule& sch, const SphericalPoint& p) {
    std::vector<double> out;
    out.reserve(4 * sch.scales);
    append_grid_terms(sch, p, out);
    return out;
}

std::vector<double> encode_theory(const ScaleSchedule& sch, const SphericalPoint& p) {
    static const double kHalfRoot3 = std::sqrt(3.0) / 2.0;
    static const double a[3][2] = {{1.0, 0.0}, {-0.5, kHalfRoot3}, {-0.5, -kHalfRoot3}};
    std::vector<double> out;
    out.reserve(6 * sch.scales);
    for (int s = 0; s < sch.scales; ++s) {
        double r = sch.scale_at(s);
        double lam = p.lon / r, phi = p.lat / r;
        for (const auto& aj : a) {
            double t = lam * aj[0] + phi * aj[1];
            out.push_back(std::sin(t));
            out.push_back(std::cos(t));
        }
    }
    return out;
}

std::vector<double> encode_nerf(int scales, const SphericalPoint& p) {
    if (scales < 1) throw std::invalid_argument("scale count must be >= 1");
    CartesianPoint c = to_cartesian(p);
    const double q[3] = {c.z, c.x, c.y};
    std::vector<double> out;
    out.reserve(6 * scales);
    for (int s = 0; s < scales; ++s) {
        double f = std::ldexp(kPi, s);  // 2^s * pi
        for (double v : q) {
            out.push_back(std::sin(f * v));
            out.push_back(std::cos(f * v));
        }
    }
    return out;
}

std::vector<double> encode_dfs(const ScaleSchedule& sch, const SphericalPoint& p) {
    int S = sch.scales;
    std::vector<double> sp(S), cp(S), sl(S), cl(S);
    for (int s = 0; s < S; ++s) {
        double r = sch.scale_at(s);
        sp[s] = std::sin(p.lat / r);
        cp[s] = std::cos(p.lat / r);
        sl[s] = std::sin(p.lon / r);
        cl[s] = std::cos(p.lon / r);
    }
    std::vector<double> out;
    out.reserve(4 * S * S + 4 * S);
    for (int n = 0; n < S; ++n) {
        out.push_back(sp[n]);
        out.push_back(cp[n]);
    }
    for (int m = 0; m < S; ++m) {
        out.push_back(sl[m]);
        out.push_back(cl[m]);
    }
    for (int n = 0; n < S; ++n)
        for (int m = 0; m < S; ++m) {
            out.push_back(cp[n] * cl[m]);
            out.push_back(cp[n] * sl[m]);
            out.push_back(sp[n] * cl[m]);
            out.push_back(sp[n] * sl[m]);
        }
    return out;
}

std::vector<double> encode_sphere_c(const ScaleSchedule& sch, const SphericalPoint& p) {
    std::vector<double> out;
    out.reserve(3 * sch.scales);
    append_sphere_c_terms(sch, p, out);
    return out;
}

std::vector<double> encode_sphere_m(const ScaleSchedule& sch, const SphericalPoint& p) {
    std::vector<double> out;
    out.reserve(5 * sch.scales);
    append_sphere_m_terms(sch, p, out);
    return out;
}

std::vector<double> encode_sphere_c_plus(const ScaleSchedule& sch, const SphericalPoint& p) {
    std::vector<double> out;
    out.reserve(7 * sch.scales);
    append_sphere_c_terms(sch, p, out);
    append_grid_terms(sch, p, out);
    return out;
}

std::vector<double> encode_sphere_m_plus(const ScaleSchedule& sch, const SphericalPoint& p) {
    std::vector<double> out;
    out.reserve(9 * sch.scales);
    append_sphere_m_terms(sch, p, out);
    append_grid_terms(sch, p, out);
    return out;
}

std::vector<double> encode(const EncoderSpec& spec, const SphericalPoint& p) {
    switch (spec.family) {
        case Family::tile: return encode_tile(*spec.tile, p);
        case Family::wrap: return encode_wrap(p);
        case Family::xyz: return encode_xyz(p);
        case Family::rbf: return encode_rbf(*spec.rbf, p);
        case Family::rff: return encode_rff(*spec.rff, p);
        case Family::grid: return encode_grid(spec.schedule, p);
        case Family::theory: return encode_theory(spec.schedule, p);
        case Family::nerf: return encode_nerf(spec.schedule.scales, p);
        case Family::dfs: return encode_dfs(spec.schedule, p);
        case Family::sphere_c: return encode_sphere_c(spec.schedule, p);
        case Family::sphere_m: return encode_sphere_m(spec.schedule, p);
        case Family::sphere_c_plus: return encode_sphere_c_plus(spec.schedule, p);
        case Family::sphere_m_plus: return encode_sphere_m_plus(spec.schedule, p);
    }
    throw std::logic_error("unhandled family");
}

Eigen::MatrixXd encode_batch(const EncoderSpec& spec, const std::vector<SphericalPoint>& pts) {
    Eigen::MatrixXd m(spec.output_dim(), static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        std::vector<double> f = encode(spec, pts[i]);
        m.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
    }
    return m;
}

}  // namespace sphereloc
