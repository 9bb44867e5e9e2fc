#include "sphereloc/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace sphereloc {

const std::string& optimizer_name(OptimizerKind k) {
    static const std::string names[2] = {"adam", "sgd"};
    return names[static_cast<int>(k)];
}

OptimizerKind optimizer_from_name(const std::string& name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "sgd") return OptimizerKind::sgd;
    throw std::invalid_argument("unknown optimizer: " + name);
}

TrainDiverged::TrainDiverged(int epoch_, int batch_index_, double value_)
    : std::runtime_error([&] {
          std::ostringstream os;
          os << "non-finite loss (" << value_ << ") at epoch " << epoch_ << ", batch "
             << batch_index_;
          return os.str();
      }()),
      epoch(epoch_),
      batch_index(batch_index_) {}

namespace {

class Optimizer {
public:
    Optimizer(const TrainConfig& config, ModelParams& params)
        : config_(config), views_(param_views(params)) {
        if (config.optimizer == OptimizerKind::adam) {
            for (const auto& v : views_) {
                m_.emplace_back(v.size, 0.0);
                s_.emplace_back(v.size, 0.0);
            }
        }
    }

    void step(const ModelGrads& grads) {
        auto gviews = param_views(grads);
        if (config_.optimizer == OptimizerKind::sgd) {
            for (std::size_t t = 0; t < views_.size(); ++t)
                for (std::ptrdiff_t i = 0; i < views_[t].size; ++i)
                    views_[t].data[i] -= config_.lr * gviews[t].data[i];
            return;
        }
        ++steps_;
        double c1 = 1.0 - std::pow(config_.adam_beta1, steps_);
        double c2 = 1.0 - std::pow(config_.adam_beta2, steps_);
        for (std::size_t t = 0; t < views_.size(); ++t) {
            double* m = m_[t].data();
            double* s = s_[t].data();
            const double* g = gviews[t].data;
            double* p = views_[t].data;
            for (std::ptrdiff_t i = 0; i < views_[t].size; ++i) {
                m[i] = config_.adam_beta1 * m[i] + (1.0 - config_.adam_beta1) * g[i];
                s[i] = config_.adam_beta2 * s[i] + (1.0 - config_.adam_beta2) * g[i] * g[i];
                p[i] -= config_.lr * (m[i] / c1) / (std::sqrt(s[i] / c2) + config_.adam_eps);
            }
        }
    }

private:
    const TrainConfig& config_;
    std::vector<ParamView> views_;
    std::vector<std::vector<double>> m_, s_;
    long steps_ = 0;
};

void split_columns(const std::vector<DataRecord>& recs, std::vector<SphericalPoint>& pts,
                   std::vector<int>& labels) {
    pts.clear();
    labels.clear();
    pts.reserve(recs.size());
    labels.reserve(recs.size());
    for (const auto& r : recs) {
        pts.push_back(r.point);
        labels.push_back(r.class_id);
    }
}

}  // namespace

double top1_accuracy(const EncoderSpec& enc, const ModelParams& params,
                     const std::vector<SphericalPoint>& points, const std::vector<int>& labels) {
    if (points.empty()) throw std::invalid_argument("top1_accuracy needs points");
    Eigen::MatrixXd scores = class_scores(params, encode_batch(enc, points));
    long hits = 0;
    for (Eigen::Index b = 0; b < scores.cols(); ++b) {
        int y = labels[static_cast<std::size_t>(b)];
        double sy = scores(y, b);
        bool top = true;
        for (Eigen::Index i = 0; i < scores.rows(); ++i)
            if (i != y && scores(i, b) >= sy) {
                top = false;
                break;
            }
        hits += top ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(scores.cols());
}

Checkpoint train(const Dataset& data, const EncoderSpec& enc, const NetShape& shape,
                 const TrainConfig& config) {
    if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (config.eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
    if (data.num_classes < 1) throw std::invalid_argument("dataset has no classes");

    std::vector<SphericalPoint> train_pts, val_pts;
    std::vector<int> train_labels, val_labels;
    split_columns(data.split_records(Split::train), train_pts, train_labels);
    split_columns(data.split_records(Split::val), val_pts, val_labels);
    if (train_pts.empty()) throw std::invalid_argument("dataset has no train records");
    if (val_pts.empty()) throw std::invalid_argument("dataset has no val records");

    LossConfig loss_config;
    loss_config.beta = config.beta > 0.0 ? config.beta : static_cast<double>(data.num_classes);
    loss_config.negatives_per_sample = config.negatives_per_sample;

    Rng rng(config.seed);
    ModelParams params = init_model(shape, enc.output_dim(), data.num_classes, rng);
    Optimizer opt(config, params);

    Checkpoint ckpt;
    ckpt.encoder = enc;
    ckpt.shape = shape;
    ckpt.config = config;
    ckpt.num_classes = data.num_classes;

    ModelParams best = params;
    double best_top1 = -1.0;
    int best_epoch = 0;

    std::vector<std::size_t> order(train_pts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::size_t bs = static_cast<std::size_t>(config.batch_size);
    std::vector<SphericalPoint> batch_pts;
    std::vector<int> batch_labels;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        long batches = 0;
        for (std::size_t start = 0; start < order.size(); start += bs) {
            std::size_t end = std::min(order.size(), start + bs);
            batch_pts.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch_pts.push_back(train_pts[order[i]]);
                batch_labels.push_back(train_labels[order[i]]);
            }
            LossResult res = loss(enc, params, batch_pts, batch_labels, loss_config, true, rng);
            if (!std::isfinite(res.value))
                throw TrainDiverged(epoch, static_cast<int>(batches), res.value);
            opt.step(res.grads);
            loss_sum += res.value;
            ++batches;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(batches);
        if (epoch % config.eval_every == 0 || epoch == config.epochs) {
            double top1 = top1_accuracy(enc, params, val_pts, val_labels);
            stats.val_top1 = top1;
            if (top1 > best_top1) {  // strict: ties keep the earlier epoch
                best_top1 = top1;
                best_epoch = epoch;
                best = params;
            }
        }
        ckpt.history.push_back(stats);
    }

    ckpt.model = std::move(best);
    ckpt.best_epoch = best_epoch;
    ckpt.best_val_top1 = best_top1;
    return ckpt;
}

GridSearchResult grid_search(const Dataset& data, const EncoderSpec& base_spec,
                             const NetShape& base_shape, const TrainConfig& base,
                             const GridAxes& axes) {
    bool has_schedule = false, scales_only = false;
    switch (base_spec.family) {
        case Family::grid:
        case Family::theory:
        case Family::dfs:
        case Family::sphere_c:
        case Family::sphere_m:
        case Family::sphere_c_plus:
        case Family::sphere_m_plus: has_schedule = true; break;
        case Family::nerf: scales_only = true; break;
        default: break;
    }

    std::vector<double> lrs = axes.lr.empty() ? std::vector<double>{base.lr} : axes.lr;
    std::vector<int> scales = (has_schedule || scales_only) && !axes.scales.empty()
                                  ? axes.scales
                                  : std::vector<int>{base_spec.schedule.scales};
    std::vector<double> r_mins = has_schedule && !axes.r_min.empty()
                                     ? axes.r_min
                                     : std::vector<double>{base_spec.schedule.r_min};
    std::vector<int> hs = axes.hidden_layers.empty() ? std::vector<int>{base_shape.hidden_layers}
                                                     : axes.hidden_layers;
    std::vector<int> ks = axes.width.empty() ? std::vector<int>{base_shape.width} : axes.width;

    GridSearchResult result;
    std::uint64_t cell_index = 0;
    for (double lr : lrs)
        for (int S : scales)
            for (double r_min : r_mins)
                for (int h : hs)
                    for (int k : ks) {
                        GridCell cell;
                        cell.lr = lr;
                        cell.scales = S;
                        cell.r_min = r_min;
                        cell.hidden_layers = h;
                        cell.width = k;
                        cell.seed = derive_seed(base.seed, cell_index);
                        try {
                            EncoderSpec spec = base_spec;
                            if (has_schedule)
                                spec = EncoderSpec::multi_scale(base_spec.family, S, r_min,
                                                                base_spec.schedule.r_max);
                            else if (scales_only)
                                spec = EncoderSpec::nerf(S);
                            NetShape shape = base_shape;
                            shape.hidden_layers = h;
                            shape.width = k;
                            TrainConfig config = base;
                            config.lr = lr;
                            config.seed = cell.seed;
                            Checkpoint ckpt = train(data, spec, shape, config);
                            cell.ok = true;
                            cell.best_val_top1 = ckpt.best_val_top1;
                            cell.best_epoch = ckpt.best_epoch;
                            if (!result.best || ckpt.best_val_top1 > result.best->best_val_top1) {
                                result.best = std::move(ckpt);
                                result.best_cell = static_cast<int>(cell_index);
                            }
                        } catch (const std::exception& e) {
                            cell.ok = false;
                            cell.error = e.what();
                        }
                        result.cells.push_back(std::move(cell));
                        ++cell_index;
                    }
    return result;
}

}  // namespace sphereloc
