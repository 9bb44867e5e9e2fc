#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "sphereloc/encoders.hpp"
#include "sphereloc/geometry.hpp"
#include "sphereloc/rng.hpp"

namespace sphereloc {

// Location embedding nets. A model is Enc(x) = NN(PE(x)) followed by a
// class-score head s_i(x) = sigmoid(Enc(x) . T[:, i]). Scores are per-class
// sigmoids, not a softmax: each class fires independently.

struct DenseLayer {
    Eigen::MatrixXd w;  // (out x in)
    Eigen::VectorXd b;  // (out)
};

// Plain feed-forward net: `hidden.size()` hidden layers of ReLU units with
// inverted dropout after each activation, then a linear projection to the
// embedding dimension (no output activation).
struct FfnParams {
    std::vector<DenseLayer> hidden;  // first maps input_dim -> width, rest width -> width
    DenseLayer output;               // width -> embedding_dim
    double dropout_rate = 0.5;
};

// Residual net: input linear + ReLU to the working width, then blocks of
//   y = relu(W2 (dropout(relu(W1 a + b1))) + b2),  a <- a + y,
// then a linear projection to the embedding dimension.
struct ResidualBlock {
    DenseLayer first;
    DenseLayer second;
};

struct ResidualNetParams {
    DenseLayer input;  // input_dim -> width
    std::vector<ResidualBlock> blocks;
    DenseLayer output;  // width -> embedding_dim
    double dropout_rate = 0.5;
};

using NetParams = std::variant<FfnParams, ResidualNetParams>;

// Class embedding matrix T (embedding_dim x classes), no bias.
struct ClassMatrix {
    Eigen::MatrixXd t;
};

struct ModelParams {
    NetParams net;
    ClassMatrix classes;

    int input_dim() const;
    int embedding_dim() const;
    int num_classes() const { return static_cast<int>(classes.t.cols()); }
};

enum class NetKind { ffn, residual };
const std::string& net_kind_name(NetKind k);
NetKind net_kind_from_name(const std::string& name);

struct NetShape {
    NetKind kind = NetKind::ffn;
    int hidden_layers = 1;    // h
    int width = 256;          // k
    int embedding_dim = 256;  // d
    double dropout_rate = 0.5;
};

// Weight init: every weight matrix entry ~ U(-a, a) with
// a = sqrt(6 / (fan_in + fan_out)); biases zero. Matrices are filled
// row-major, layers in declaration order, the class matrix last, all from
// one stream, so a seed pins the full parameter vector.
ModelParams init_model(const NetShape& shape, int input_dim, int num_classes, Rng& rng);
NetKind net_kind(const ModelParams& params);

// Forward pass. In train mode, dropout masks are drawn from `rng` (inverted
// dropout: kept units scale by 1/(1-rate)); in eval mode dropout is the
// identity and `rng` may be null. Input is one encoded point per column.
struct ForwardCache;  // opaque to callers; holds pre-activations and masks
Eigen::MatrixXd forward(const NetParams& net, const Eigen::MatrixXd& features, bool train_mode,
                        Rng* rng, ForwardCache* cache = nullptr);

// Per-class sigmoid scores (classes x n), columns aligned with `features`.
Eigen::MatrixXd class_scores(const ModelParams& params, const Eigen::MatrixXd& features);

// Score fusion for ranking: elementwise product of two nonnegative score
// sets of identical shape.
Eigen::MatrixXd fuse(const Eigen::MatrixXd& loc_scores, const Eigen::MatrixXd& img_scores);

struct LossConfig {
    double beta = 1.0;             // weight on the positive-class term
    int negatives_per_sample = 1;  // |N(x)|
    double log_floor = 1e-12;      // clamp on every log argument
};

// Gradients mirror ModelParams layout.
struct ModelGrads {
    NetParams net;  // same shapes, gradient values
    Eigen::MatrixXd class_matrix;
};

struct LossResult {
    double value = 0.0;  // minimized objective (negated fit term)
    ModelGrads grads;
};

// Sampled-negative loss over one batch. For each labeled point x with class
// y and each of its sampled negatives x-:
//   beta * log s_y(x) + sum_{i != y} log(1 - s_i(x)) + sum_i log(1 - s_i(x-))
// summed over the batch; the returned value is the negation (we minimize).
// Log arguments clamp at log_floor; a clamped term contributes zero
// gradient. `negatives` must hold batch_size * negatives_per_sample points,
// grouped per positive. Gradients are exact backprop through both the
// positive and negative paths (shared net weights).
LossResult loss_with_negatives(const EncoderSpec& enc, const ModelParams& params,
                               const std::vector<SphericalPoint>& points,
                               const std::vector<int>& labels,
                               const std::vector<SphericalPoint>& negatives,
                               const LossConfig& config, bool train_mode, Rng* dropout_rng);

// Convenience wrapper: draws the negatives area-uniformly from `rng`
// (negatives_per_sample per point, grouped per positive) and delegates.
LossResult loss(const EncoderSpec& enc, const ModelParams& params,
                const std::vector<SphericalPoint>& points, const std::vector<int>& labels,
                const LossConfig& config, bool train_mode, Rng& rng);

// Flat views over every parameter (or gradient) tensor, in the fixed
// serialization order (per layer: weights then bias; class matrix last).
// Optimizers and the finite-difference tests iterate these.
struct ParamView {
    double* data;
    std::ptrdiff_t size;
};
struct ConstParamView {
    const double* data;
    std::ptrdiff_t size;
};
std::vector<ParamView> param_views(ModelParams& params);
std::vector<ConstParamView> param_views(const ModelParams& params);
std::vector<ParamView> param_views(ModelGrads& grads);
std::vector<ConstParamView> param_views(const ModelGrads& grads);

}  // namespace sphereloc
