#include "sphereloc/net.hpp"

#include <cmath>
#include <stdexcept>

#include "sphereloc/vmf.hpp"

namespace sphereloc {

namespace {

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

Eigen::ArrayXXd relu_gate(const Eigen::MatrixXd& z) {
    return (z.array() > 0.0).cast<double>();
}

Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
    return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// Inverted-dropout mask: entries are 0 or 1/(1-rate). Drawn in storage
// (column-major) order so a seed pins the mask bytes.
Eigen::MatrixXd draw_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
    Eigen::MatrixXd m(rows, cols);
    double keep = 1.0 - rate;
    double scale = 1.0 / keep;
    double* p = m.data();
    for (Eigen::Index i = 0; i < rows * cols; ++i) p[i] = rng.uniform() < keep ? scale : 0.0;
    return m;
}

DenseLayer zeros_like(const DenseLayer& l) {
    return {Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()),
            Eigen::VectorXd::Zero(l.b.size())};
}

void fill_uniform(Eigen::MatrixXd& w, Rng& rng) {
    double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i)
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-a, a);
}

DenseLayer init_layer(Eigen::Index out, Eigen::Index in, Rng& rng) {
    DenseLayer l{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    fill_uniform(l.w, rng);
    return l;
}

}  // namespace

struct ForwardCache {
    bool train_mode = false;
    Eigen::MatrixXd x;  // input features
    // ffn: z/a/m per hidden layer. residual: z holds each block's first
    // pre-activation, z2 the second, a the running activations a_0..a_h,
    // m the per-block masks; z_in is the input layer's pre-activation.
    std::vector<Eigen::MatrixXd> z, z2, a, m;
    Eigen::MatrixXd z_in;
};

int ModelParams::input_dim() const {
    if (const auto* f = std::get_if<FfnParams>(&net))
        return static_cast<int>(f->hidden.empty() ? f->output.w.cols() : f->hidden[0].w.cols());
    return static_cast<int>(std::get<ResidualNetParams>(net).input.w.cols());
}

int ModelParams::embedding_dim() const {
    if (const auto* f = std::get_if<FfnParams>(&net)) return static_cast<int>(f->output.w.rows());
    return static_cast<int>(std::get<ResidualNetParams>(net).output.w.rows());
}

const std::string& net_kind_name(NetKind k) {
    static const std::string names[2] = {"ffn", "residual"};
    return names[static_cast<int>(k)];
}

NetKind net_kind_from_name(const std::string& name) {
    if (name == "ffn") return NetKind::ffn;
    if (name == "residual") return NetKind::residual;
    throw std::invalid_argument("unknown net kind: " + name);
}

NetKind net_kind(const ModelParams& params) {
    return std::holds_alternative<FfnParams>(params.net) ? NetKind::ffn : NetKind::residual;
}

ModelParams init_model(const NetShape& shape, int input_dim, int num_classes, Rng& rng) {
    if (shape.hidden_layers < 1) throw std::invalid_argument("need at least one hidden layer");
    if (shape.width < 1 || shape.embedding_dim < 1)
        throw std::invalid_argument("net width and embedding dim must be >= 1");
    if (!(shape.dropout_rate >= 0.0 && shape.dropout_rate < 1.0))
        throw std::invalid_argument("dropout rate must lie in [0, 1)");
    if (input_dim < 1 || num_classes < 1)
        throw std::invalid_argument("input dim and class count must be >= 1");

    ModelParams params;
    if (shape.kind == NetKind::ffn) {
        FfnParams f;
        f.dropout_rate = shape.dropout_rate;
        for (int l = 0; l < shape.hidden_layers; ++l)
            f.hidden.push_back(init_layer(shape.width, l == 0 ? input_dim : shape.width, rng));
        f.output = init_layer(shape.embedding_dim, shape.width, rng);
        params.net = std::move(f);
    } else {
        ResidualNetParams r;
        r.dropout_rate = shape.dropout_rate;
        r.input = init_layer(shape.width, input_dim, rng);
        for (int l = 0; l < shape.hidden_layers; ++l)
            r.blocks.push_back(ResidualBlock{init_layer(shape.width, shape.width, rng),
                                             init_layer(shape.width, shape.width, rng)});
        r.output = init_layer(shape.embedding_dim, shape.width, rng);
        params.net = std::move(r);
    }
    params.classes.t = Eigen::MatrixXd(shape.embedding_dim, num_classes);
    fill_uniform(params.classes.t, rng);
    return params;
}

Eigen::MatrixXd forward(const NetParams& net, const Eigen::MatrixXd& features, bool train_mode,
                        Rng* rng, ForwardCache* cache) {
    if (train_mode && rng == nullptr)
        throw std::invalid_argument("train-mode forward needs an rng for dropout");
    if (cache) {
        *cache = ForwardCache{};
        cache->train_mode = train_mode;
        cache->x = features;
    }

    if (const auto* f = std::get_if<FfnParams>(&net)) {
        Eigen::MatrixXd cur = features;
        for (const auto& layer : f->hidden) {
            Eigen::MatrixXd z = (layer.w * cur).colwise() + layer.b;
            Eigen::MatrixXd a = relu(z);
            if (train_mode && f->dropout_rate > 0.0) {
                Eigen::MatrixXd mask = draw_mask(a.rows(), a.cols(), f->dropout_rate, *rng);
                a = a.cwiseProduct(mask);
                if (cache) cache->m.push_back(std::move(mask));
            } else if (cache) {
                cache->m.emplace_back();
            }
            if (cache) {
                cache->z.push_back(std::move(z));
                cache->a.push_back(a);
            }
            cur = std::move(a);
        }
        return (f->output.w * cur).colwise() + f->output.b;
    }

    const auto& r = std::get<ResidualNetParams>(net);
    Eigen::MatrixXd z_in = (r.input.w * features).colwise() + r.input.b;
    Eigen::MatrixXd a = relu(z_in);
    if (cache) {
        cache->z_in = z_in;
        cache->a.push_back(a);
    }
    for (const auto& block : r.blocks) {
        Eigen::MatrixXd z1 = (block.first.w * a).colwise() + block.first.b;
        Eigen::MatrixXd u = relu(z1);
        if (train_mode && r.dropout_rate > 0.0) {
            Eigen::MatrixXd mask = draw_mask(u.rows(), u.cols(), r.dropout_rate, *rng);
            u = u.cwiseProduct(mask);
            if (cache) cache->m.push_back(std::move(mask));
        } else if (cache) {
            cache->m.emplace_back();
        }
        Eigen::MatrixXd z2 = (block.second.w * u).colwise() + block.second.b;
        a = a + relu(z2);
        if (cache) {
            cache->z.push_back(std::move(z1));
            cache->z2.push_back(std::move(z2));
            cache->a.push_back(a);
        }
    }
    return (r.output.w * a).colwise() + r.output.b;
}

namespace {

// Backward pass for the embedding net. `upstream` is dJ/dE. Adds weight
// gradients into `grads` (which must be zero-initialized to the right
// shapes) and consumes the caches saved by forward().
void backward(const NetParams& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream,
              NetParams& grads) {
    if (const auto* f = std::get_if<FfnParams>(&net)) {
        auto& g = std::get<FfnParams>(grads);
        std::size_t h = f->hidden.size();
        const Eigen::MatrixXd& last = h == 0 ? cache.x : cache.a[h - 1];
        g.output.w += upstream * last.transpose();
        g.output.b += upstream.rowwise().sum();
        if (h == 0) return;
        Eigen::MatrixXd delta = f->output.w.transpose() * upstream;
        for (std::size_t l = h; l-- > 0;) {
            if (cache.train_mode && cache.m[l].size() > 0)
                delta = delta.cwiseProduct(cache.m[l]);
            delta = delta.cwiseProduct(relu_gate(cache.z[l]).matrix());
            const Eigen::MatrixXd& prev = l == 0 ? cache.x : cache.a[l - 1];
            g.hidden[l].w += delta * prev.transpose();
            g.hidden[l].b += delta.rowwise().sum();
            if (l > 0) delta = f->hidden[l].w.transpose() * delta;
        }
        return;
    }

    const auto& r = std::get<ResidualNetParams>(net);
    auto& g = std::get<ResidualNetParams>(grads);
    std::size_t h = r.blocks.size();
    g.output.w += upstream * cache.a[h].transpose();
    g.output.b += upstream.rowwise().sum();
    Eigen::MatrixXd delta = r.output.w.transpose() * upstream;  // dJ/da_h
    for (std::size_t j = h; j-- > 0;) {
        Eigen::MatrixXd dv = delta.cwiseProduct(relu_gate(cache.z2[j]).matrix());
        // Recreate the block's post-dropout mid activation u from the cache.
        Eigen::MatrixXd u = relu(cache.z[j]);
        if (cache.train_mode && cache.m[j].size() > 0) u = u.cwiseProduct(cache.m[j]);
        g.blocks[j].second.w += dv * u.transpose();
        g.blocks[j].second.b += dv.rowwise().sum();
        Eigen::MatrixXd du = r.blocks[j].second.w.transpose() * dv;
        if (cache.train_mode && cache.m[j].size() > 0) du = du.cwiseProduct(cache.m[j]);
        Eigen::MatrixXd dz1 = du.cwiseProduct(relu_gate(cache.z[j]).matrix());
        g.blocks[j].first.w += dz1 * cache.a[j].transpose();
        g.blocks[j].first.b += dz1.rowwise().sum();
        delta += r.blocks[j].first.w.transpose() * dz1;
    }
    Eigen::MatrixXd dz_in = delta.cwiseProduct(relu_gate(cache.z_in).matrix());
    g.input.w += dz_in * cache.x.transpose();
    g.input.b += dz_in.rowwise().sum();
}

NetParams zero_grads_like(const NetParams& net) {
    if (const auto* f = std::get_if<FfnParams>(&net)) {
        FfnParams g;
        g.dropout_rate = f->dropout_rate;
        for (const auto& l : f->hidden) g.hidden.push_back(zeros_like(l));
        g.output = zeros_like(f->output);
        return g;
    }
    const auto& r = std::get<ResidualNetParams>(net);
    ResidualNetParams g;
    g.dropout_rate = r.dropout_rate;
    g.input = zeros_like(r.input);
    for (const auto& b : r.blocks)
        g.blocks.push_back(ResidualBlock{zeros_like(b.first), zeros_like(b.second)});
    g.output = zeros_like(r.output);
    return g;
}

}  // namespace

Eigen::MatrixXd class_scores(const ModelParams& params, const Eigen::MatrixXd& features) {
    Eigen::MatrixXd emb = forward(params.net, features, false, nullptr);
    return sigmoid(params.classes.t.transpose() * emb);
}

Eigen::MatrixXd fuse(const Eigen::MatrixXd& loc_scores, const Eigen::MatrixXd& img_scores) {
    if (loc_scores.rows() != img_scores.rows() || loc_scores.cols() != img_scores.cols())
        throw std::invalid_argument("fuse needs score sets of identical shape");
    if ((loc_scores.array() < 0.0).any() || (img_scores.array() < 0.0).any())
        throw std::invalid_argument("fuse needs nonnegative scores");
    return loc_scores.cwiseProduct(img_scores);
}

LossResult loss_with_negatives(const EncoderSpec& enc, const ModelParams& params,
                               const std::vector<SphericalPoint>& points,
                               const std::vector<int>& labels,
                               const std::vector<SphericalPoint>& negatives,
                               const LossConfig& config, bool train_mode, Rng* dropout_rng) {
    if (points.empty()) throw std::invalid_argument("loss needs a non-empty batch");
    if (points.size() != labels.size())
        throw std::invalid_argument("points and labels must have equal length");
    if (config.negatives_per_sample < 0)
        throw std::invalid_argument("negatives per sample must be >= 0");
    std::size_t n_neg = points.size() * static_cast<std::size_t>(config.negatives_per_sample);
    if (negatives.size() != n_neg)
        throw std::invalid_argument("expected batch_size * negatives_per_sample negatives");
    int c = params.num_classes();
    for (int y : labels)
        if (y < 0 || y >= c) throw std::invalid_argument("label outside class range");

    Eigen::Index B = static_cast<Eigen::Index>(points.size());
    double nmult = static_cast<double>(config.negatives_per_sample);
    double floor = config.log_floor;

    ForwardCache cache_pos, cache_neg;
    Eigen::MatrixXd x_pos = encode_batch(enc, points);
    Eigen::MatrixXd e_pos = forward(params.net, x_pos, train_mode, dropout_rng, &cache_pos);
    Eigen::MatrixXd s_pos = sigmoid(params.classes.t.transpose() * e_pos);

    double value = 0.0;
    Eigen::MatrixXd g_pos(c, B);  // dJ/dz for positive-point logits
    for (Eigen::Index b = 0; b < B; ++b) {
        int y = labels[static_cast<std::size_t>(b)];
        for (int i = 0; i < c; ++i) {
            double s = s_pos(i, b);
            if (i == y) {
                value -= nmult * config.beta * std::log(std::max(s, floor));
                g_pos(i, b) = s > floor ? -nmult * config.beta * (1.0 - s) : 0.0;
            } else {
                value -= nmult * std::log(std::max(1.0 - s, floor));
                g_pos(i, b) = (1.0 - s) > floor ? nmult * s : 0.0;
            }
        }
    }

    ModelGrads grads{zero_grads_like(params.net), Eigen::MatrixXd::Zero(
                                                      params.classes.t.rows(),
                                                      params.classes.t.cols())};
    grads.class_matrix += e_pos * g_pos.transpose();
    backward(params.net, cache_pos, params.classes.t * g_pos, grads.net);

    if (n_neg > 0) {
        Eigen::MatrixXd x_neg = encode_batch(enc, negatives);
        Eigen::MatrixXd e_neg = forward(params.net, x_neg, train_mode, dropout_rng, &cache_neg);
        Eigen::MatrixXd s_neg = sigmoid(params.classes.t.transpose() * e_neg);
        Eigen::MatrixXd g_neg(c, static_cast<Eigen::Index>(n_neg));
        for (Eigen::Index j = 0; j < s_neg.cols(); ++j)
            for (int i = 0; i < c; ++i) {
                double s = s_neg(i, j);
                value -= std::log(std::max(1.0 - s, floor));
                g_neg(i, j) = (1.0 - s) > floor ? s : 0.0;
            }
        grads.class_matrix += e_neg * g_neg.transpose();
        backward(params.net, cache_neg, params.classes.t * g_neg, grads.net);
    }

    return LossResult{value, std::move(grads)};
}

LossResult loss(const EncoderSpec& enc, const ModelParams& params,
                const std::vector<SphericalPoint>& points, const std::vector<int>& labels,
                const LossConfig& config, bool train_mode, Rng& rng) {
    std::vector<SphericalPoint> negatives;
    negatives.reserve(points.size() * static_cast<std::size_t>(config.negatives_per_sample));
    for (std::size_t b = 0; b < points.size(); ++b)
        for (int j = 0; j < config.negatives_per_sample; ++j)
            negatives.push_back(sample_uniform_sphere(rng));
    return loss_with_negatives(enc, params, points, labels, negatives, config, train_mode,
                               train_mode ? &rng : nullptr);
}

namespace {

template <typename View, typename Layer>
void push_layer(std::vector<View>& out, Layer& l) {
    out.push_back(View{l.w.data(), l.w.size()});
    out.push_back(View{l.b.data(), l.b.size()});
}

template <typename View, typename Net>
void push_net(std::vector<View>& out, Net& net) {
    if (auto* f = std::get_if<FfnParams>(&net)) {
        for (auto& l : f->hidden) push_layer(out, l);
        push_layer(out, f->output);
        return;
    }
    auto& r = std::get<ResidualNetParams>(net);
    push_layer(out, r.input);
    for (auto& b : r.blocks) {
        push_layer(out, b.first);
        push_layer(out, b.second);
    }
    push_layer(out, r.output);
}

}  // namespace

std::vector<ParamView> param_views(ModelParams& params) {
    std::vector<ParamView> out;
    push_net(out, params.net);
    out.push_back(ParamView{params.classes.t.data(), params.classes.t.size()});
    return out;
}

std::vector<ConstParamView> param_views(const ModelParams& params) {
    std::vector<ConstParamView> out;
    push_net(out, params.net);
    out.push_back(ConstParamView{params.classes.t.data(), params.classes.t.size()});
    return out;
}

std::vector<ParamView> param_views(ModelGrads& grads) {
    std::vector<ParamView> out;
    push_net(out, grads.net);
    out.push_back(ParamView{grads.class_matrix.data(), grads.class_matrix.size()});
    return out;
}

std::vector<ConstParamView> param_views(const ModelGrads& grads) {
    std::vector<ConstParamView> out;
    push_net(out, grads.net);
    out.push_back(ConstParamView{grads.class_matrix.data(), grads.class_matrix.size()});
    return out;
}

}  // namespace sphereloc
