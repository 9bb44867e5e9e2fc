#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sphereloc/encoders.hpp"

namespace sphereloc {

// Randomized checks of the geometric guarantees the encoder families are
// built around. Every check is seeded and reports its worst observed error
// against a pinned tolerance; pass means max_error <= tolerance. For
// threshold-style properties (injectivity floors, required variation) the
// error is the shortfall below the threshold, clamped at zero, with
// tolerance zero.
struct PropertyResult {
    std::string id;
    long trials = 0;
    double max_error = 0;
    double tolerance = 0;
    bool pass = false;
    std::uint64_t seed = 0;
};

// Single-scale sphereC against the closed forms, over random point pairs
// with central angle d:
//   dot(PE(x1), PE(x2)) = cos(d)
//   |PE(x1) - PE(x2)|   = 2 sin(d / 2)
// plus, on dedicated pairs with d < 1e-3, the linearization |dPE| ~ d
// (third-order error d^3/24, far under the 1e-9 gate).
std::vector<PropertyResult> distance_identity_rows(long trials, std::uint64_t seed);

// Injectivity floor: for each of dfs, sphereC, sphereC+, sphereM, sphereM+
// (r_max = 1), distinct random pairs must stay at encoding distance
// > 1e-12. Reported error is the shortfall below that floor.
std::vector<PropertyResult> injectivity_rows(long trials, std::uint64_t seed);

// The grid family's closed forms and its polar pathology:
//   dot(PE1, PE2)   = sum_s cos(dphi / r_s) + cos(dlam / r_s)
//   |PE1 - PE2|^2   = 4 S - 2 sum_s (cos(dphi / r_s) + cos(dlam / r_s))
// so two meridians at a fixed longitude gap keep a constant grid distance
// at every latitude, while their real separation collapses near the poles
// (the sweep must show > 50% great-circle variation). sphereC's distance
// over the same sweep must fall monotonically toward each pole.
std::vector<PropertyResult> grid_pathology_rows(long trials, std::uint64_t seed);

// nerf (octave) encoding: for S in {1, 4, 8},
//   |PE1 - PE2|^2 = sum_s 4 (sin^2(2^{s-1} pi dz) + sin^2(2^{s-1} pi dx)
//                            + sin^2(2^{s-1} pi dy)),
// and the three antipodal axis pairs collide (encoding distance <= 1e-12).
std::vector<PropertyResult> nerf_identity_rows(long trials, std::uint64_t seed);

// Aggregates: the row with the least margin, with pass = all rows pass.
PropertyResult check_distance_identity(long trials, std::uint64_t seed);
PropertyResult check_injectivity(long trials, std::uint64_t seed);
PropertyResult check_grid_pathology(long trials, std::uint64_t seed);
PropertyResult check_nerf_identities(long trials, std::uint64_t seed);

// Every row from every check, each with its own derived seed.
std::vector<PropertyResult> run_all_properties(long trials, std::uint64_t seed);
bool all_pass(const std::vector<PropertyResult>& rows);

}  // namespace sphereloc
