#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sphereloc/train.hpp"
#include "sphereloc/vmf.hpp"

namespace sphereloc {

// End-to-end synthetic benchmark: generate mixture datasets, train every
// requested encoder on each, and tabulate test Top-1 across seeds.
//
// Dataset presets (all 50 classes, 100 samples per class, kappa_min = 1;
// kappa ranges are concentration-root bounds, kappa = r^2):
//   U1..U4    uniform centers, kappa_max = 16 / 32 / 64 / 128
//   Si.j      stratified centers with 5 / 10 / 25 / 50 bands (i = 1..4)
//             and kappa_max = 16 / 32 / 64 / 128 (j = 1..4)
//
// Encoder presets share the desk-scale net (one hidden layer, width 256,
// embedding 256, dropout 0.5). Schedule-bearing families run 32 scales,
// r_min = 0.01, r_max = 1, except dfs (8 scales; its feature count is
// quadratic in the scale count) and nerf (8 octaves). rbf uses 200 anchors
// drawn from the train split with unit bandwidth; rff uses 256 features at
// unit bandwidth; tile uses a 36 x 18 grid. wrap runs on the residual net,
// wrap+ffn on the plain net, everything else on the plain net.
std::vector<std::string> bench_dataset_names();
std::vector<std::string> bench_encoder_names();

// `count` anchor points drawn without replacement from the train split
// (all of them when the split is smaller). Used to freeze rbf encoders.
std::vector<SphericalPoint> sample_anchor_points(const Dataset& data, std::size_t count,
                                                 std::uint64_t seed);

struct BenchOptions {
    std::vector<std::string> datasets;      // empty selects every preset
    std::vector<std::string> encoders;      // empty selects every preset
    std::vector<std::uint64_t> seeds{1, 2, 3};
    TrainConfig train;  // per-cell seeds are derived; the seed field is ignored
};

struct BenchCell {
    std::string dataset;
    std::string encoder;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;  // set when ok is false
    double val_top1 = 0;
    double test_top1 = 0;
    int best_epoch = 0;
    double seconds = 0;
};

struct BenchRow {
    std::string dataset;
    std::string encoder;
    int n_ok = 0;
    double test_top1_mean = 0;
    double test_top1_stddev = 0;  // sample stddev over seeds
    double val_top1_mean = 0;
    bool is_baseline = false;
    // Versus the dataset's best baseline row (best overall row when the run
    // holds no baseline encoders). Absent when no reference exists or every
    // seed failed.
    std::optional<double> delta_top1;
    std::optional<double> err_reduction;
    std::string baseline;
};

struct BenchReport {
    std::vector<BenchCell> cells;
    std::vector<BenchRow> rows;
};

// Runs the full (dataset x encoder x seed) grid, serially, cells in listing
// order. One dataset instance per (preset, seed) pair — every encoder sees
// the same draw — with all cell seeds derived from the preset indices, so
// any subset selection reproduces the same numbers. A failing cell is
// recorded with its error and the run continues.
BenchReport run_bench(const BenchOptions& options);

// CSV table of the aggregate rows, then a cell-level appendix.
std::string bench_csv(const BenchReport& report, const std::string& flags);

}  // namespace sphereloc
