#include <cmath>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "sphereloc/encoders.hpp"
#include "sphereloc/net.hpp"
#include "sphereloc/rng.hpp"
#include "sphereloc/vmf.hpp"

using namespace sphereloc;
using test_helpers::check_close;

namespace {

ModelParams zero_ffn(int input_dim, int hidden, int width, int emb, int classes) {
    FfnParams net;
    int in = input_dim;
    for (int i = 0; i < hidden; ++i) {
        net.hidden.push_back({Eigen::MatrixXd::Zero(width, in), Eigen::VectorXd::Zero(width)});
        in = width;
    }
    net.output = {Eigen::MatrixXd::Zero(emb, in), Eigen::VectorXd::Zero(emb)};
    net.dropout_rate = 0.0;
    ModelParams params;
    params.net = std::move(net);
    params.classes.t = Eigen::MatrixXd::Zero(emb, classes);
    return params;
}

struct FdSetup {
    EncoderSpec enc = EncoderSpec::multi_scale(Family::sphere_c, 2, 0.1, 1.0);
    std::vector<SphericalPoint> points;
    std::vector<int> labels;
    std::vector<SphericalPoint> negatives;

    FdSetup(int batch, int classes, int negs) {
        Rng rng(404);
        for (int i = 0; i < batch; ++i) {
            points.push_back(sample_uniform_sphere(rng));
            labels.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(classes))));
        }
        for (int i = 0; i < batch * negs; ++i) negatives.push_back(sample_uniform_sphere(rng));
    }
};

// Central finite differences over every scalar parameter, against the
// analytic gradients, in eval mode (dropout off) so the loss is a
// deterministic function of the parameters.
double max_fd_relative_error(ModelParams& params, const FdSetup& fd, const LossConfig& config) {
    LossResult res = loss_with_negatives(fd.enc, params, fd.points, fd.labels, fd.negatives,
                                         config, false, nullptr);
    std::vector<ParamView> views = param_views(params);
    std::vector<ConstParamView> grad_views = param_views(std::as_const(res.grads));
    REQUIRE(views.size() == grad_views.size());

    double eps = 1e-5;
    double worst = 0.0;
    for (std::size_t v = 0; v < views.size(); ++v) {
        REQUIRE(views[v].size == grad_views[v].size);
        for (std::ptrdiff_t i = 0; i < views[v].size; ++i) {
            double saved = views[v].data[i];
            views[v].data[i] = saved + eps;
            double up = loss_with_negatives(fd.enc, params, fd.points, fd.labels, fd.negatives,
                                            config, false, nullptr)
                            .value;
            views[v].data[i] = saved - eps;
            double down = loss_with_negatives(fd.enc, params, fd.points, fd.labels, fd.negatives,
                                              config, false, nullptr)
                              .value;
            views[v].data[i] = saved;
            double numeric = (up - down) / (2 * eps);
            double analytic = grad_views[v].data[i];
            double rel = std::abs(numeric - analytic) /
                         std::max({std::abs(numeric), std::abs(analytic), 1e-8});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("zero parameters give 0.5 scores and the closed-form loss") {
    int c = 4;
    ModelParams params = zero_ffn(6, 1, 7, 5, c);
    EncoderSpec enc = EncoderSpec::multi_scale(Family::sphere_c, 2, 0.1, 1.0);

    Eigen::MatrixXd feats = encode_batch(enc, {SphericalPoint(0.3, 0.7), SphericalPoint(-1, 0)});
    Eigen::MatrixXd emb = forward(params.net, feats, false, nullptr);
    CHECK(emb.rows() == 5);
    CHECK(emb.cols() == 2);
    CHECK(emb.cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd scores = class_scores(params, feats);
    REQUIRE(scores.rows() == c);
    REQUIRE(scores.cols() == 2);
    for (int i = 0; i < scores.size(); ++i) check_close(scores(i), 0.5, 1e-15);

    // All sigmoids at 1/2 turn every log into -log 2. With batch size B,
    // N negatives per point, beta, and c classes the loss is
    //   B * log 2 * (N * (beta + c - 1) + N * c).
    LossConfig config;
    config.beta = 1.0;
    config.negatives_per_sample = 1;
    LossResult res = loss_with_negatives(enc, params, {SphericalPoint(0.3, 0.7)}, {2},
                                         {SphericalPoint(1.0, -0.2)}, config, false, nullptr);
    check_close(res.value, 2.0 * c * std::log(2.0), 1e-12);  // frozen: 5.545177444479562
    check_close(res.value, 5.545177444479562, 1e-12);

    config.beta = 7.0;
    config.negatives_per_sample = 3;
    FdSetup fd(4, c, 3);
    LossResult res2 = loss_with_negatives(enc, params, fd.points, fd.labels, fd.negatives, config,
                                          false, nullptr);
    check_close(res2.value, 4.0 * std::log(2.0) * (3.0 * (7.0 + c - 1) + 3.0 * c), 1e-12);
}

TEST_CASE("init_model bounds, zero biases, and seed determinism") {
    NetShape shape;
    shape.kind = NetKind::ffn;
    shape.hidden_layers = 2;
    shape.width = 9;
    shape.embedding_dim = 4;

    Rng rng(3);
    ModelParams params = init_model(shape, 6, 5, rng);
    const auto& net = std::get<FfnParams>(params.net);
    REQUIRE(net.hidden.size() == 2);
    CHECK(net.hidden[0].w.rows() == 9);
    CHECK(net.hidden[0].w.cols() == 6);
    CHECK(net.hidden[1].w.cols() == 9);
    CHECK(net.output.w.rows() == 4);
    CHECK(params.classes.t.rows() == 4);
    CHECK(params.classes.t.cols() == 5);
    CHECK(params.input_dim() == 6);
    CHECK(params.embedding_dim() == 4);
    CHECK(params.num_classes() == 5);

    auto check_layer = [](const DenseLayer& l) {
        double a = std::sqrt(6.0 / static_cast<double>(l.w.rows() + l.w.cols()));
        CHECK(l.w.cwiseAbs().maxCoeff() <= a);
        CHECK(l.w.cwiseAbs().maxCoeff() > 0.0);
        CHECK(l.b.cwiseAbs().maxCoeff() == 0.0);
    };
    check_layer(net.hidden[0]);
    check_layer(net.hidden[1]);
    check_layer(net.output);
    double a_t = std::sqrt(6.0 / static_cast<double>(4 + 5));
    CHECK(params.classes.t.cwiseAbs().maxCoeff() <= a_t);

    Rng rng_b(3);
    ModelParams same = init_model(shape, 6, 5, rng_b);
    CHECK(std::get<FfnParams>(same.net).hidden[0].w == net.hidden[0].w);
    CHECK(same.classes.t == params.classes.t);

    Rng rng_c(4);
    ModelParams other = init_model(shape, 6, 5, rng_c);
    CHECK(std::get<FfnParams>(other.net).hidden[0].w != net.hidden[0].w);

    shape.kind = NetKind::residual;
    Rng rng_d(3);
    ModelParams res = init_model(shape, 6, 5, rng_d);
    const auto& rnet = std::get<ResidualNetParams>(res.net);
    REQUIRE(rnet.blocks.size() == 2);
    check_layer(rnet.input);
    check_layer(rnet.blocks[0].first);
    check_layer(rnet.blocks[1].second);
    check_layer(rnet.output);

    NetShape bad = shape;
    bad.hidden_layers = 0;
    Rng rng_e(1);
    CHECK_THROWS_AS(init_model(bad, 6, 5, rng_e), std::invalid_argument);
    bad = shape;
    bad.dropout_rate = 1.0;
    CHECK_THROWS_AS(init_model(bad, 6, 5, rng_e), std::invalid_argument);
}

TEST_CASE("a hand-built model scores points deterministically") {
    // One-hidden-layer identity-ish model over xyz features: the embedding
    // copies z = sin(lat) through a ReLU pair, so class 0's score rises with
    // latitude and class 1's falls.
    FfnParams net;
    Eigen::MatrixXd w1 = Eigen::MatrixXd::Zero(2, 3);
    w1(0, 0) = 1.0;   // units carry +z and -z so the ReLU keeps both signs
    w1(1, 0) = -1.0;
    net.hidden.push_back({w1, Eigen::VectorXd::Zero(2)});
    Eigen::MatrixXd w2(1, 2);
    w2 << 1.0, -1.0;  // reassemble z = relu(z) - relu(-z)
    net.output = {w2, Eigen::VectorXd::Zero(1)};
    net.dropout_rate = 0.0;

    ModelParams params;
    params.net = std::move(net);
    params.classes.t = Eigen::MatrixXd(1, 2);
    params.classes.t << 1.0, -1.0;

    EncoderSpec enc = EncoderSpec::single(Family::xyz);
    Eigen::MatrixXd feats =
        encode_batch(enc, {SphericalPoint(0.4, 0.9), SphericalPoint(-2.0, -0.6)});
    Eigen::MatrixXd scores = class_scores(params, feats);

    auto sigmoid = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
    check_close(scores(0, 0), sigmoid(std::sin(0.9)), 1e-12);
    check_close(scores(1, 0), sigmoid(-std::sin(0.9)), 1e-12);
    check_close(scores(0, 1), sigmoid(std::sin(-0.6)), 1e-12);
    check_close(scores(1, 1), sigmoid(-std::sin(-0.6)), 1e-12);
}

TEST_CASE("finite differences confirm the gradients (ffn and residual, both betas)") {
    FdSetup fd(5, 4, 2);
    LossConfig config;
    config.negatives_per_sample = 2;

    for (NetKind kind : {NetKind::ffn, NetKind::residual}) {
        for (double beta : {1.0, 4.0}) {  // 4 = the class count
            CAPTURE(static_cast<int>(kind));
            CAPTURE(beta);
            NetShape shape;
            shape.kind = kind;
            shape.hidden_layers = 2;
            shape.width = 7;
            shape.embedding_dim = 5;
            shape.dropout_rate = 0.0;
            Rng rng(1234);
            ModelParams params = init_model(shape, fd.enc.output_dim(), 4, rng);
            config.beta = beta;
            double worst = max_fd_relative_error(params, fd, config);
            CAPTURE(worst);
            CHECK(worst < 1e-4);
        }
    }
}

TEST_CASE("the loss is affine in beta") {
    FdSetup fd(6, 3, 1);
    NetShape shape;
    shape.width = 6;
    shape.embedding_dim = 4;
    shape.dropout_rate = 0.0;
    Rng rng(9);
    ModelParams params = init_model(shape, fd.enc.output_dim(), 3, rng);

    auto value_at = [&](double beta) {
        LossConfig config;
        config.beta = beta;
        config.negatives_per_sample = 1;
        return loss_with_negatives(fd.enc, params, fd.points, fd.labels, fd.negatives, config,
                                   false, nullptr)
            .value;
    };
    double j1 = value_at(1.0), j2 = value_at(2.0), j3 = value_at(3.0);
    check_close(j3 - j2, j2 - j1, 1e-9 * std::abs(j2));
    CHECK(j2 > j1);  // the positive term is a penalty, so more weight = more loss
}

TEST_CASE("gradient descent on a fixed batch reduces the loss") {
    FdSetup fd(16, 3, 1);
    NetShape shape;
    shape.width = 8;
    shape.embedding_dim = 6;
    shape.dropout_rate = 0.0;
    Rng rng(55);
    ModelParams params = init_model(shape, fd.enc.output_dim(), 3, rng);

    LossConfig config;
    config.beta = 3.0;
    double initial = loss_with_negatives(fd.enc, params, fd.points, fd.labels, fd.negatives,
                                         config, false, nullptr)
                         .value;
    double final_value = initial;
    for (int step = 0; step < 50; ++step) {
        LossResult res = loss_with_negatives(fd.enc, params, fd.points, fd.labels, fd.negatives,
                                             config, false, nullptr);
        final_value = res.value;
        std::vector<ParamView> views = param_views(params);
        std::vector<ConstParamView> grads = param_views(std::as_const(res.grads));
        for (std::size_t v = 0; v < views.size(); ++v)
            for (std::ptrdiff_t i = 0; i < views[v].size; ++i)
                views[v].data[i] -= 0.05 * grads[v].data[i];
    }
    CAPTURE(initial);
    CAPTURE(final_value);
    CHECK(final_value < initial);
}

TEST_CASE("train-mode dropout needs an rng and changes the forward pass") {
    NetShape shape;
    shape.width = 16;
    shape.embedding_dim = 8;
    shape.dropout_rate = 0.5;
    Rng rng(2);
    ModelParams params = init_model(shape, 4, 3, rng);
    Eigen::MatrixXd feats = Eigen::MatrixXd::Random(4, 5);

    CHECK_THROWS_AS(forward(params.net, feats, true, nullptr), std::invalid_argument);

    Eigen::MatrixXd eval_a = forward(params.net, feats, false, nullptr);
    Eigen::MatrixXd eval_b = forward(params.net, feats, false, nullptr);
    CHECK(eval_a == eval_b);  // eval mode is deterministic

    Rng drop_a(7), drop_b(7), drop_c(8);
    Eigen::MatrixXd train_a = forward(params.net, feats, true, &drop_a);
    Eigen::MatrixXd train_b = forward(params.net, feats, true, &drop_b);
    Eigen::MatrixXd train_c = forward(params.net, feats, true, &drop_c);
    CHECK(train_a == train_b);  // same mask stream, same output
    CHECK(train_a != train_c);
    CHECK(train_a != eval_a);
}

TEST_CASE("fuse multiplies elementwise and validates") {
    Eigen::MatrixXd a(2, 2), b(2, 2);
    a << 0.2, 0.4, 0.6, 0.8;
    b << 0.5, 0.25, 0.0, 2.0;
    Eigen::MatrixXd f = fuse(a, b);
    check_close(f(0, 0), 0.1, 1e-15);
    check_close(f(0, 1), 0.1, 1e-15);
    check_close(f(1, 0), 0.0, 1e-15);
    check_close(f(1, 1), 1.6, 1e-15);

    Eigen::MatrixXd wrong(2, 3);
    wrong.setZero();
    CHECK_THROWS_AS(fuse(a, wrong), std::invalid_argument);
    Eigen::MatrixXd neg(2, 2);
    neg << -0.1, 0.0, 0.0, 0.0;
    CHECK_THROWS_AS(fuse(a, neg), std::invalid_argument);
}

TEST_CASE("loss validates batch shapes and labels") {
    ModelParams params = zero_ffn(3, 1, 4, 2, 3);
    EncoderSpec enc = EncoderSpec::single(Family::xyz);
    LossConfig config;

    CHECK_THROWS_AS(loss_with_negatives(enc, params, {}, {}, {}, config, false, nullptr),
                    std::invalid_argument);
    CHECK_THROWS_AS(loss_with_negatives(enc, params, {SphericalPoint(0, 0)}, {0, 1},
                                        {SphericalPoint(0, 0)}, config, false, nullptr),
                    std::invalid_argument);
    CHECK_THROWS_AS(loss_with_negatives(enc, params, {SphericalPoint(0, 0)}, {3},
                                        {SphericalPoint(0, 0)}, config, false, nullptr),
                    std::invalid_argument);
    CHECK_THROWS_AS(loss_with_negatives(enc, params, {SphericalPoint(0, 0)}, {0}, {}, config,
                                        false, nullptr),
                    std::invalid_argument);

    // The wrapper draws its own negatives and matches an explicit call with
    // the same stream.
    Rng rng_a(21), rng_b(21);
    std::vector<SphericalPoint> pts{SphericalPoint(0.1, 0.2), SphericalPoint(-1.0, 0.4)};
    std::vector<int> labels{0, 2};
    LossResult via_wrapper = loss(enc, params, pts, labels, config, false, rng_a);
    std::vector<SphericalPoint> negs;
    for (int i = 0; i < 2; ++i) negs.push_back(sample_uniform_sphere(rng_b));
    LossResult direct =
        loss_with_negatives(enc, params, pts, labels, negs, config, false, nullptr);
    check_close(via_wrapper.value, direct.value, 0);
}
