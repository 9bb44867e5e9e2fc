#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sphereloc/encoders.hpp"
#include "sphereloc/net.hpp"
#include "sphereloc/vmf.hpp"

namespace sphereloc {

enum class OptimizerKind { adam, sgd };
const std::string& optimizer_name(OptimizerKind k);
OptimizerKind optimizer_from_name(const std::string& name);

struct TrainConfig {
    double lr = 1e-3;
    int epochs = 100;
    int batch_size = 512;
    OptimizerKind optimizer = OptimizerKind::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    // beta <= 0 means "use the class count" (the default weighting).
    double beta = 0.0;
    int negatives_per_sample = 1;
    int eval_every = 1;  // epochs between validation passes
};

struct EpochStats {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    // Validation Top-1; absent on epochs where no eval ran.
    std::optional<double> val_top1;
};

struct Checkpoint {
    int format_version = 1;
    EncoderSpec encoder;
    ModelParams model;
    NetShape shape;
    TrainConfig config;
    int num_classes = 0;
    int best_epoch = 0;        // 1-based epoch of the kept parameters
    double best_val_top1 = 0;  // its validation Top-1
    std::vector<EpochStats> history;
};

// Thrown when a batch produces a non-finite loss; carries enough context to
// find the batch again.
class TrainDiverged : public std::runtime_error {
public:
    TrainDiverged(int epoch, int batch_index, double value);
    int epoch;
    int batch_index;
};

// Fraction of `points` whose true class outranks every other class
// (strictly; a tie with any other class does not count as Top-1).
double top1_accuracy(const EncoderSpec& enc, const ModelParams& params,
                     const std::vector<SphericalPoint>& points, const std::vector<int>& labels);

// Adam/SGD training with uniformly sampled negatives. Per epoch: shuffle the
// train split, step per mini-batch (last batch may be short), and every
// eval_every epochs (plus the final epoch) score Top-1 on the val split in
// eval mode. The returned checkpoint holds the parameters from the epoch
// with the best val Top-1 (earlier epoch wins ties) and the full history.
// All randomness (init, shuffles, negatives, dropout) comes from config.seed.
Checkpoint train(const Dataset& data, const EncoderSpec& enc, const NetShape& shape,
                 const TrainConfig& config);

// --- hyperparameter grid search ---------------------------------------------

struct GridAxes {
    std::vector<double> lr;
    std::vector<int> scales;
    std::vector<double> r_min;
    std::vector<int> hidden_layers;
    std::vector<int> width;
};

struct GridCell {
    double lr = 0;
    int scales = 0;
    double r_min = 0;
    int hidden_layers = 0;
    int width = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;  // set when ok is false
    double best_val_top1 = 0;
    int best_epoch = 0;
};

struct GridSearchResult {
    std::vector<GridCell> cells;  // one per combination, axis-nested order
    std::optional<Checkpoint> best;
    int best_cell = -1;
};

// Full cartesian product of the axes (lr outermost, width innermost). An
// empty axis means "keep the base value". Each cell trains with seed
// derive_seed(base.seed, cell_index), so cells are independent and a
// parallel runner would reproduce these exact results; this runner is
// serial. A cell that throws is recorded as failed and the search
// continues. Ties on val Top-1 keep the earlier cell. The scales / r_min
// axes rebuild the encoder spec for schedule-bearing families (scales only,
// for nerf) and collapse to the base spec for the rest.
GridSearchResult grid_search(const Dataset& data, const EncoderSpec& base_spec,
                             const NetShape& base_shape, const TrainConfig& base,
                             const GridAxes& axes);

}  // namespace sphereloc
