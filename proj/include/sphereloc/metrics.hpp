#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>

#include "sphereloc/geometry.hpp"
#include "sphereloc/train.hpp"
#include "sphereloc/vmf.hpp"

namespace sphereloc {

// Rank of the true class under pessimistic tie handling: 1 plus the number
// of classes scoring strictly higher plus the number of other classes tied
// with the truth. A flat score vector therefore ranks the truth dead last.
int rank_of_truth(const Eigen::VectorXd& scores, int truth);

// Fraction of ranks <= k. Throws on an empty rank list or k < 1.
double top_k(const std::vector<int>& ranks, int k);

// Mean reciprocal rank. Throws on an empty rank list.
double mrr(const std::vector<int>& ranks);

struct RankedPoint {
    SphericalPoint point;
    int rank = 1;
};

struct BandRow {
    double lat_lo = 0, lat_hi = 0;
    long n = 0;
    std::optional<double> mrr;  // absent when the band is empty
};

struct CellRow {
    double lon_lo = 0, lon_hi = 0;
    double lat_lo = 0, lat_hi = 0;
    long n = 0;
    std::optional<double> mrr;  // absent when the cell is empty
};

// Per-latitude-band MRR. Edges must be strictly increasing and span exactly
// [-pi/2, pi/2]. A point sitting on an internal edge belongs to the band
// above it; the closing pi/2 edge folds into the top band. Bands with no
// points get n = 0 and no MRR. Default edges: 10-degree bands.
std::vector<BandRow> band_report(const std::vector<RankedPoint>& items,
                                 const std::vector<double>& edges);
std::vector<double> default_band_edges();  // every 10 degrees

// Per-cell MRR on an equal-interval lon/lat grid, lon as the fast axis,
// same edge rule as band_report. Default grid: 15 x 15 degree cells.
std::vector<CellRow> cell_report(const std::vector<RankedPoint>& items, int lon_cells,
                                 int lat_cells);

struct BandDelta {
    double lat_lo = 0, lat_hi = 0;
    long n_a = 0, n_b = 0;
    double delta_mrr = 0;  // a minus b
};

struct CellDelta {
    double lon_lo = 0, lon_hi = 0;
    double lat_lo = 0, lat_hi = 0;
    long n_a = 0, n_b = 0;
    double delta_mrr = 0;  // a minus b
};

// Elementwise MRR difference (a minus b) over identically-partitioned
// reports. Throws if the partitions differ; rows empty on either side are
// dropped from the output.
std::vector<BandDelta> delta_report(const std::vector<BandRow>& a, const std::vector<BandRow>& b);
std::vector<CellDelta> delta_report(const std::vector<CellRow>& a, const std::vector<CellRow>& b);

struct EvalReport {
    int format_version = 1;
    std::string split;
    long n = 0;
    double top1 = 0, top3 = 0, top5 = 0;
    double mean_reciprocal_rank = 0;
    std::vector<BandRow> bands;
    std::vector<CellRow> cells;
};

// Image scores for fusion, keyed by point id; each row holds one
// nonnegative score per class.
using ImgScores = std::unordered_map<std::int64_t, std::vector<double>>;

// Scores the checkpoint's model on one split of a dataset (eval mode).
// When img_scores is given, every evaluated point id must have a row of
// exactly num_classes scores; ranking then uses the elementwise product of
// location and image scores. Reports Top-1/3/5, MRR, the default latitude
// bands, and the default cell grid.
EvalReport evaluate(const Checkpoint& ckpt, const Dataset& data, Split split,
                    const ImgScores* img_scores = nullptr);

}  // namespace sphereloc
