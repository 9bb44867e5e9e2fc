#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sphereloc/bench.hpp"
#include "sphereloc/encoders.hpp"
#include "sphereloc/io.hpp"
#include "sphereloc/metrics.hpp"
#include "sphereloc/net.hpp"
#include "sphereloc/props.hpp"
#include "sphereloc/train.hpp"
#include "sphereloc/vmf.hpp"

namespace {

using namespace sphereloc;
namespace fs = std::filesystem;

// Exit codes: 0 success, 1 usage / configuration, 2 runtime failure,
// 3 property-suite failure.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// flag echo: the canonical command line stamped into every output file.
// Built from resolved values, so two invocations that mean the same run
// produce the same echo (and therefore byte-identical files).

class FlagEcho {
public:
    explicit FlagEcho(std::string command) : text_(std::move(command)) {}
    FlagEcho& add(const std::string& name, const std::string& value) {
        text_ += " --" + name + "=" + value;
        return *this;
    }
    FlagEcho& add(const std::string& name, const char* value) {
        return add(name, std::string(value));
    }
    FlagEcho& add(const std::string& name, double value) { return add(name, format_double(value)); }
    FlagEcho& add(const std::string& name, int value) { return add(name, std::to_string(value)); }
    FlagEcho& add(const std::string& name, std::uint64_t value) {
        return add(name, std::to_string(value));
    }
    FlagEcho& add(const std::string& name, bool value) {
        return add(name, value ? std::string("true") : std::string("false"));
    }
    const std::string& str() const { return text_; }

private:
    std::string text_;
};

std::string join_csv(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += v[i];
    }
    return out;
}

std::string join_csv(const std::vector<std::uint64_t>& v) {
    std::vector<std::string> s;
    s.reserve(v.size());
    for (auto x : v) s.push_back(std::to_string(x));
    return join_csv(s);
}

void prepare_parent(const fs::path& p) {
    fs::path dir = p.parent_path();
    if (!dir.empty()) fs::create_directories(dir);
}

// ---------------------------------------------------------------------------
// config files: flat `key = value` lines, full-line '#' comments. Keys are
// the long option names without the leading dashes; unknown keys are
// rejected. Values of path-valued keys are resolved relative to the config
// file's directory. A key set on the command line wins over the file.

bool is_path_key(const std::string& key) {
    static const std::vector<std::string> keys{"dataset", "out", "checkpoint", "img-scores",
                                               "metrics-out"};
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
    return s;
}

bool user_set(const std::vector<std::string>& user_tokens, const std::string& key) {
    std::string plain = "--" + key;
    std::string eq = plain + "=";
    for (const auto& t : user_tokens)
        if (t == plain || t.rfind(eq, 0) == 0) return true;
    return false;
}

std::vector<std::string> config_tokens(const fs::path& cfg_path, CLI::App* sub,
                                       const std::vector<std::string>& user_tokens) {
    std::string text;
    try {
        text = read_text_file(cfg_path);
    } catch (const std::exception& e) {
        throw UsageError(std::string("cannot read config file: ") + e.what());
    }

    std::map<std::string, std::string> values;  // last occurrence of a key wins
    std::istringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError("config " + cfg_path.string() + " line " + std::to_string(line_no) +
                             ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = unquote(trim(t.substr(eq + 1)));
        if (key.empty())
            throw UsageError("config " + cfg_path.string() + " line " + std::to_string(line_no) +
                             ": empty key");
        if (key == "config")
            throw UsageError("config " + cfg_path.string() + ": files cannot set 'config'");
        if (!sub->get_option_no_throw("--" + key))
            throw UsageError("config " + cfg_path.string() + ": unknown key '" + key + "' for " +
                             sub->get_name());
        values[key] = value;
    }

    std::vector<std::string> tokens;
    for (const auto& [key, value] : values) {
        if (user_set(user_tokens, key)) continue;  // command line wins
        std::string v = value;
        if (is_path_key(key) && !v.empty()) {
            fs::path p(v);
            if (p.is_relative()) v = (cfg_path.parent_path() / p).lexically_normal().string();
        }
        tokens.push_back("--" + key + "=" + v);
    }
    return tokens;
}

// ---------------------------------------------------------------------------
// shared encoder flags (train, encode)

struct EncoderOpts {
    std::string encoder = "sphereM+";
    int scales = 32;
    double r_min = 1e-2;
    double r_max = 1.0;
    int rbf_anchors = 200;
    double rbf_sigma = 1.0;
    std::string rbf_metric = "chord";
    int rff_dim = 256;
    double rff_bandwidth = 1.0;
    int tile_lon = 36;
    int tile_lat = 18;
};

void add_encoder_flags(CLI::App* sub, EncoderOpts& e) {
    std::string families = "tile wrap wrap+ffn xyz rbf rff grid theory nerf dfs "
                           "sphereC sphereM sphereC+ sphereM+";
    sub->add_option("--encoder", e.encoder, "encoder family: " + families)
        ->capture_default_str();
    sub->add_option("--scales", e.scales,
                    "scale count for multi-scale families; octave count for nerf")
        ->capture_default_str();
    sub->add_option("--r-min", e.r_min, "shortest scale length")->capture_default_str();
    sub->add_option("--r-max", e.r_max, "longest scale length")->capture_default_str();
    sub->add_option("--rbf-anchors", e.rbf_anchors, "rbf: anchors drawn from the train split")
        ->capture_default_str();
    sub->add_option("--rbf-sigma", e.rbf_sigma, "rbf: kernel bandwidth")->capture_default_str();
    sub->add_option("--rbf-metric", e.rbf_metric, "rbf: distance, chord or lonlat")
        ->capture_default_str();
    sub->add_option("--rff-dim", e.rff_dim, "rff: number of random features")
        ->capture_default_str();
    sub->add_option("--rff-bandwidth", e.rff_bandwidth, "rff: kernel bandwidth")
        ->capture_default_str();
    sub->add_option("--tile-lon", e.tile_lon, "tile: longitude cells")->capture_default_str();
    sub->add_option("--tile-lat", e.tile_lat, "tile: latitude cells")->capture_default_str();
}

RbfMetric rbf_metric_from_name(const std::string& name) {
    if (name == "chord") return RbfMetric::chord;
    if (name == "lonlat") return RbfMetric::lonlat;
    throw UsageError("unknown --rbf-metric '" + name + "' (chord or lonlat)");
}

// `build_seed` freezes the rbf anchor draw / rff features; pass
// derive_seed(run_seed, 7) so it matches the benchmark presets.
EncoderSpec encoder_from_opts(const EncoderOpts& e, const Dataset* data,
                              std::uint64_t build_seed) {
    std::string name = e.encoder == "wrap+ffn" ? "wrap" : e.encoder;
    Family f = family_from_name(name);
    switch (f) {
        case Family::tile:
            return EncoderSpec::make_tile(e.tile_lon, e.tile_lat);
        case Family::wrap:
        case Family::xyz:
            return EncoderSpec::single(f);
        case Family::rbf:
            if (!data)
                throw UsageError("--encoder rbf needs --dataset to draw anchor points from");
            return EncoderSpec::make_rbf(
                sample_anchor_points(*data, static_cast<std::size_t>(e.rbf_anchors), build_seed),
                e.rbf_sigma, rbf_metric_from_name(e.rbf_metric));
        case Family::rff:
            return EncoderSpec::make_rff(e.rff_dim, e.rff_bandwidth, build_seed);
        case Family::nerf:
            return EncoderSpec::nerf(e.scales);
        default:
            return EncoderSpec::multi_scale(f, e.scales, e.r_min, e.r_max);
    }
}

NetKind default_net_for(const std::string& encoder) {
    return encoder == "wrap" ? NetKind::residual : NetKind::ffn;
}

void echo_encoder(FlagEcho& echo, const EncoderOpts& e) {
    echo.add("encoder", e.encoder)
        .add("scales", e.scales)
        .add("r-min", e.r_min)
        .add("r-max", e.r_max)
        .add("rbf-anchors", e.rbf_anchors)
        .add("rbf-sigma", e.rbf_sigma)
        .add("rbf-metric", e.rbf_metric)
        .add("rff-dim", e.rff_dim)
        .add("rff-bandwidth", e.rff_bandwidth)
        .add("tile-lon", e.tile_lon)
        .add("tile-lat", e.tile_lat);
}

// ---------------------------------------------------------------------------
// synth-gen

struct SynthOpts {
    std::string placement = "uniform";
    int classes = 50;
    int n_mu = 0;
    int c_mu = 0;
    int sp = 100;
    double kappa_min = 1.0;
    double kappa_max = 128.0;
    std::uint64_t seed = 0;
    std::string out;
    bool classes_set = false;
};

int cmd_synth_gen(const SynthOpts& o) {
    MvMFSpec spec;
    if (o.placement == "uniform")
        spec.placement = Placement::uniform;
    else if (o.placement == "stratified")
        spec.placement = Placement::stratified;
    else
        throw UsageError("unknown --placement '" + o.placement + "' (uniform or stratified)");

    spec.samples_per_class = o.sp;
    spec.kappa_min = o.kappa_min;
    spec.kappa_max = o.kappa_max;
    spec.seed = o.seed;
    if (spec.placement == Placement::stratified) {
        if (o.n_mu <= 0 || o.c_mu <= 0)
            throw UsageError("stratified placement needs --n-mu and --c-mu");
        spec.n_mu = o.n_mu;
        spec.c_mu = o.c_mu;
        spec.classes = o.n_mu * o.c_mu;
        if (o.classes_set && o.classes != spec.classes)
            throw UsageError("--classes must equal --n-mu * --c-mu for stratified placement");
    } else {
        if (o.n_mu != 0 || o.c_mu != 0)
            throw UsageError("--n-mu/--c-mu apply only to stratified placement");
        spec.classes = o.classes;
    }

    FlagEcho echo("synth-gen");
    echo.add("placement", o.placement)
        .add("classes", spec.classes)
        .add("n-mu", spec.n_mu)
        .add("c-mu", spec.c_mu)
        .add("sp", o.sp)
        .add("kappa-min", o.kappa_min)
        .add("kappa-max", o.kappa_max)
        .add("seed", o.seed)
        .add("out", o.out);

    Dataset data = generate(spec);

    fs::path out(o.out);
    prepare_parent(out);
    write_dataset_csv(out, data, echo.str());
    fs::path prov = provenance_path_for(out);
    write_provenance_json(prov, *data.provenance, echo.str());

    long n_train = static_cast<long>(data.split_records(Split::train).size());
    long n_val = static_cast<long>(data.split_records(Split::val).size());
    long n_test = static_cast<long>(data.split_records(Split::test).size());
    std::cout << "generated " << data.records.size() << " points: " << spec.classes
              << " classes x " << o.sp << " samples (" << o.placement << " placement, seed "
              << o.seed << ")\n";
    std::cout << "splits: train=" << n_train << " val=" << n_val << " test=" << n_test << "\n";

    std::vector<double> kappas;
    for (const auto& c : data.provenance->components) kappas.push_back(c.kappa);
    std::sort(kappas.begin(), kappas.end());
    if (!kappas.empty()) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "kappa: min=%.3f median=%.3f max=%.3f\n", kappas.front(),
                      kappas[kappas.size() / 2], kappas.back());
        std::cout << buf;
    }
    if (data.provenance->components.size() <= 60) {
        for (std::size_t i = 0; i < data.provenance->components.size(); ++i) {
            const auto& c = data.provenance->components[i];
            double lon = std::atan2(c.mu.y, c.mu.x);
            double lat = std::asin(std::clamp(c.mu.z, -1.0, 1.0));
            char buf[160];
            std::snprintf(buf, sizeof buf,
                          "  class %3zu: kappa=%9.3f  center lon=%+9.5f lat=%+9.5f rad\n", i,
                          c.kappa, lon, lat);
            std::cout << buf;
        }
    }
    std::cout << "dataset: " << out.string() << "\nprovenance: " << prov.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
    std::string dataset;
    bool degrees = false;
    EncoderOpts enc;
    std::string net = "auto";
    int hidden_layers = 1;
    int width = 256;
    int embedding = 0;  // 0 = same as width
    double dropout = 0.5;
    double lr = 1e-3;
    int epochs = 100;
    int batch_size = 512;
    std::string optimizer = "adam";
    double beta = 0.0;  // <= 0 = class count
    int negatives = 1;
    int eval_every = 1;
    std::uint64_t seed = 0;
    std::string out;
    std::string metrics_out;
};

int cmd_train(const TrainOpts& o) {
    Dataset data = read_dataset_csv(o.dataset, o.degrees);
    EncoderSpec spec = encoder_from_opts(o.enc, &data, derive_seed(o.seed, 7));

    NetShape shape;
    shape.kind = o.net == "auto" ? default_net_for(o.enc.encoder) : net_kind_from_name(o.net);
    shape.hidden_layers = o.hidden_layers;
    shape.width = o.width;
    shape.embedding_dim = o.embedding > 0 ? o.embedding : o.width;
    shape.dropout_rate = o.dropout;

    TrainConfig config;
    config.lr = o.lr;
    config.epochs = o.epochs;
    config.batch_size = o.batch_size;
    config.optimizer = optimizer_from_name(o.optimizer);
    config.seed = o.seed;
    config.beta = o.beta;
    config.negatives_per_sample = o.negatives;
    config.eval_every = o.eval_every;

    FlagEcho echo("train");
    echo.add("dataset", o.dataset).add("degrees", o.degrees);
    echo_encoder(echo, o.enc);
    echo.add("net", net_kind_name(shape.kind))
        .add("hidden-layers", shape.hidden_layers)
        .add("width", shape.width)
        .add("embedding", shape.embedding_dim)
        .add("dropout", shape.dropout_rate)
        .add("lr", config.lr)
        .add("epochs", config.epochs)
        .add("batch-size", config.batch_size)
        .add("optimizer", o.optimizer)
        .add("beta", config.beta)
        .add("negatives", config.negatives_per_sample)
        .add("eval-every", config.eval_every)
        .add("seed", o.seed)
        .add("out", o.out);
    if (!o.metrics_out.empty()) echo.add("metrics-out", o.metrics_out);

    std::cout << "training " << o.enc.encoder << " (input dim " << spec.output_dim() << ", "
              << net_kind_name(shape.kind) << " net) on " << data.split_records(Split::train).size()
              << " train points, " << data.num_classes << " classes\n";

    Checkpoint ckpt = train(data, spec, shape, config);

    fs::path out(o.out);
    prepare_parent(out);
    save_checkpoint(out, ckpt, echo.str());
    if (!o.metrics_out.empty()) {
        fs::path hist_out(o.metrics_out);
        prepare_parent(hist_out);
        write_history_csv(hist_out, ckpt.history, echo.str());
        std::cout << "history: " << hist_out.string() << "\n";
    }

    char buf[96];
    std::snprintf(buf, sizeof buf, "best epoch %d: val top-1 %.4f\n", ckpt.best_epoch,
                  ckpt.best_val_top1);
    std::cout << buf << "checkpoint: " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
    std::string checkpoint;
    std::string dataset;
    bool degrees = false;
    std::string split = "test";
    std::string img_scores;
    std::string out;
};

int cmd_eval(const EvalOpts& o) {
    Checkpoint ckpt = load_checkpoint(o.checkpoint);
    Dataset data = read_dataset_csv(o.dataset, o.degrees);
    Split split = split_from_name(o.split);
    std::optional<ImgScores> img;
    if (!o.img_scores.empty()) img = read_img_scores_csv(o.img_scores);

    FlagEcho echo("eval");
    echo.add("checkpoint", o.checkpoint)
        .add("dataset", o.dataset)
        .add("degrees", o.degrees)
        .add("split", o.split);
    if (!o.img_scores.empty()) echo.add("img-scores", o.img_scores);
    echo.add("out", o.out);

    EvalReport report = evaluate(ckpt, data, split, img ? &*img : nullptr);

    fs::path out(o.out);
    prepare_parent(out);
    write_eval_report(out, report, echo.str());

    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "split=%s n=%ld top1=%.4f top3=%.4f top5=%.4f mrr=%.4f\n", report.split.c_str(),
                  report.n, report.top1, report.top3, report.top5, report.mean_reciprocal_rank);
    std::cout << buf;
    std::cout << "report: " << out.string() << " (+ .bands.csv, .cells.csv)\n";
    return 0;
}

// ---------------------------------------------------------------------------
// props

struct PropsOpts {
    long trials = 10000;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_props(const PropsOpts& o) {
    FlagEcho echo("props");
    echo.add("trials", static_cast<std::uint64_t>(o.trials)).add("seed", o.seed);
    if (!o.out.empty()) echo.add("out", o.out);

    std::vector<PropertyResult> rows = run_all_properties(o.trials, o.seed);
    int passed = 0;
    for (const auto& r : rows) {
        if (r.pass) ++passed;
        char buf[256];
        std::snprintf(buf, sizeof buf, "[%s] %-34s trials=%-7ld max_error=%-12.5g tolerance=%g\n",
                      r.pass ? "PASS" : "FAIL", r.id.c_str(), r.trials, r.max_error, r.tolerance);
        std::cout << buf;
    }
    std::cout << "properties: " << passed << "/" << rows.size() << " passed\n";

    if (!o.out.empty()) {
        fs::path out(o.out);
        prepare_parent(out);
        write_json_file(out, props_report_to_json(rows, o.trials, o.seed, echo.str()));
        std::cout << "report: " << out.string() << "\n";
    }
    return all_pass(rows) ? 0 : 3;
}

// ---------------------------------------------------------------------------
// encode

struct EncodeOpts {
    std::string checkpoint;
    std::string dataset;
    bool degrees = false;
    EncoderOpts enc;
    int n_lon = 64;
    int n_lat = 32;
    std::uint64_t seed = 0;
    std::string out;
    bool encoder_set = false;
};

int cmd_encode(const EncodeOpts& o) {
    if (o.n_lon < 1 || o.n_lat < 1) throw UsageError("--n-lon and --n-lat must be >= 1");
    if (!o.checkpoint.empty() && o.encoder_set)
        throw UsageError("--checkpoint and --encoder are mutually exclusive");

    std::optional<Checkpoint> ckpt;
    EncoderSpec spec = EncoderSpec::single(Family::xyz);
    if (!o.checkpoint.empty()) {
        ckpt = load_checkpoint(o.checkpoint);
        spec = ckpt->encoder;
    } else {
        std::optional<Dataset> data;
        if (!o.dataset.empty()) data = read_dataset_csv(o.dataset, o.degrees);
        spec = encoder_from_opts(o.enc, data ? &*data : nullptr, derive_seed(o.seed, 7));
    }

    FlagEcho echo("encode");
    if (!o.checkpoint.empty()) {
        echo.add("checkpoint", o.checkpoint);
    } else {
        echo_encoder(echo, o.enc);
        if (!o.dataset.empty()) echo.add("dataset", o.dataset).add("degrees", o.degrees);
        echo.add("seed", o.seed);
    }
    echo.add("n-lon", o.n_lon).add("n-lat", o.n_lat).add("out", o.out);

    // Cell centers of an n_lon x n_lat equal-interval grid, south to north,
    // longitude fastest.
    std::vector<SphericalPoint> pts;
    pts.reserve(static_cast<std::size_t>(o.n_lon) * o.n_lat);
    for (int j = 0; j < o.n_lat; ++j) {
        double lat = -kPi / 2 + (j + 0.5) * kPi / o.n_lat;
        for (int i = 0; i < o.n_lon; ++i) {
            double lon = -kPi + (i + 0.5) * 2 * kPi / o.n_lon;
            pts.push_back(SphericalPoint(lon, lat));
        }
    }

    Eigen::MatrixXd features = encode_batch(spec, pts);
    Eigen::MatrixXd values =
        ckpt ? forward(ckpt->model.net, features, false, nullptr) : std::move(features);

    std::string csv;
    csv += "# format=encode-csv version=" + std::to_string(kEncodeCsvVersion) + "\n";
    csv += "# flags: " + echo.str() + "\n";
    csv += "# mode=" + std::string(ckpt ? "embeddings" : "features") +
           " dim=" + std::to_string(values.rows()) + " rows=" + std::to_string(values.cols()) +
           "\n";
    csv += "lon_rad,lat_rad";
    for (Eigen::Index f = 0; f < values.rows(); ++f) csv += ",f_" + std::to_string(f);
    csv += "\n";
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        csv += format_double(pts[static_cast<std::size_t>(c)].lon);
        csv += ',';
        csv += format_double(pts[static_cast<std::size_t>(c)].lat);
        for (Eigen::Index f = 0; f < values.rows(); ++f) {
            csv += ',';
            csv += format_double(values(f, c));
        }
        csv += '\n';
    }

    fs::path out(o.out);
    prepare_parent(out);
    write_text_file(out, csv);
    std::cout << "wrote " << values.cols() << " grid points x " << values.rows() << " "
              << (ckpt ? "embedding" : "feature") << " columns to " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// bench-suite

struct BenchOpts {
    std::vector<std::string> datasets;
    std::vector<std::string> encoders;
    std::vector<std::uint64_t> seeds{1, 2, 3};
    double lr = 1e-3;
    int epochs = 100;
    int batch_size = 512;
    int eval_every = 1;
    int negatives = 1;
    double beta = 0.0;
    std::string out;
};

int cmd_bench(const BenchOpts& o) {
    BenchOptions options;
    options.datasets = o.datasets.empty() ? bench_dataset_names() : o.datasets;
    options.encoders = o.encoders.empty() ? bench_encoder_names() : o.encoders;
    options.seeds = o.seeds;
    options.train.lr = o.lr;
    options.train.epochs = o.epochs;
    options.train.batch_size = o.batch_size;
    options.train.eval_every = o.eval_every;
    options.train.negatives_per_sample = o.negatives;
    options.train.beta = o.beta;

    FlagEcho echo("bench-suite");
    echo.add("datasets", join_csv(options.datasets))
        .add("encoders", join_csv(options.encoders))
        .add("seeds", join_csv(options.seeds))
        .add("lr", o.lr)
        .add("epochs", o.epochs)
        .add("batch-size", o.batch_size)
        .add("eval-every", o.eval_every)
        .add("negatives", o.negatives)
        .add("beta", o.beta)
        .add("out", o.out);

    std::cout << "bench: " << options.datasets.size() << " datasets x "
              << options.encoders.size() << " encoders x " << options.seeds.size()
              << " seeds\n";

    BenchReport report = run_bench(options);

    fs::path out(o.out);
    prepare_parent(out);
    write_text_file(out, bench_csv(report, echo.str()));

    std::cout << "dataset  encoder    mean-top1  stddev   vs-baseline  err-reduction\n";
    for (const auto& r : report.rows) {
        char buf[200];
        if (r.n_ok == 0) {
            std::snprintf(buf, sizeof buf, "%-8s %-10s all %zu seeds failed\n", r.dataset.c_str(),
                          r.encoder.c_str(), o.seeds.size());
        } else if (r.delta_top1) {
            std::snprintf(buf, sizeof buf, "%-8s %-10s %8.4f  %7.4f  %+10.4f   %+.4f vs %s\n",
                          r.dataset.c_str(), r.encoder.c_str(), r.test_top1_mean,
                          r.test_top1_stddev, *r.delta_top1,
                          r.err_reduction ? *r.err_reduction : 0.0, r.baseline.c_str());
        } else {
            std::snprintf(buf, sizeof buf, "%-8s %-10s %8.4f  %7.4f\n", r.dataset.c_str(),
                          r.encoder.c_str(), r.test_top1_mean, r.test_top1_stddev);
        }
        std::cout << buf;
    }
    long failures = 0;
    for (const auto& c : report.cells)
        if (!c.ok) ++failures;
    if (failures > 0) std::cout << failures << " cell(s) failed; see the CSV appendix\n";
    std::cout << "table: " << out.string() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int run_cli(int argc, char** argv) {
    CLI::App app{"sphereloc: spherical position encoders with a neural location classifier,\n"
                 "synthetic mixture benchmarks, and geometric property checks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "sphereloc 1.0");
    app.set_help_all_flag("--help-all", "help for every subcommand");

    std::map<std::string, std::string> cfg_paths;  // subcommand -> --config value
    auto add_config_flag = [&cfg_paths](CLI::App* sub) {
        sub->add_option("--config", cfg_paths[sub->get_name()],
                        "flat key=value file of defaults for this subcommand; '#' starts a\n"
                        "comment line; relative paths resolve against the file's directory;\n"
                        "command-line flags win");
    };

    int exit_code = 0;

    // synth-gen
    SynthOpts synth;
    CLI::App* sg = app.add_subcommand(
        "synth-gen", "draw a labeled mixture-of-vMF dataset and write it as CSV");
    sg->add_option("--placement", synth.placement, "center placement: uniform or stratified")
        ->capture_default_str();
    sg->add_option("--classes", synth.classes, "number of classes (mixture components)")
        ->capture_default_str();
    sg->add_option("--n-mu", synth.n_mu, "stratified: latitude bands")->capture_default_str();
    sg->add_option("--c-mu", synth.c_mu, "stratified: centers per band")->capture_default_str();
    sg->add_option("--sp", synth.sp, "samples per class")->capture_default_str();
    sg->add_option("--kappa-min", synth.kappa_min,
                   "concentration-root lower bound (kappa = r^2, r uniform)")
        ->capture_default_str();
    sg->add_option("--kappa-max", synth.kappa_max, "concentration-root upper bound")
        ->capture_default_str();
    sg->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
    sg->add_option("--out", synth.out, "output dataset CSV (provenance JSON lands next to it)")
        ->required();
    add_config_flag(sg);
    sg->callback([&] {
        synth.classes_set = sg->count("--classes") > 0;
        exit_code = cmd_synth_gen(synth);
    });

    // train
    TrainOpts tr;
    CLI::App* tn = app.add_subcommand(
        "train", "fit the location classifier on a dataset CSV and save a checkpoint");
    tn->add_option("--dataset", tr.dataset, "input dataset CSV")->required();
    tn->add_flag("--degrees", tr.degrees, "read lon/lat columns as degrees");
    add_encoder_flags(tn, tr.enc);
    tn->add_option("--net", tr.net,
                   "ffn or residual (default: residual for wrap, ffn for the rest)")
        ->capture_default_str();
    tn->add_option("--hidden-layers", tr.hidden_layers, "hidden layers / residual blocks")
        ->capture_default_str();
    tn->add_option("--width", tr.width, "hidden width")->capture_default_str();
    tn->add_option("--embedding", tr.embedding, "embedding dimension (0 = same as width)")
        ->capture_default_str();
    tn->add_option("--dropout", tr.dropout, "dropout rate")->capture_default_str();
    tn->add_option("--lr", tr.lr, "learning rate")->capture_default_str();
    tn->add_option("--epochs", tr.epochs, "training epochs")->capture_default_str();
    tn->add_option("--batch-size", tr.batch_size, "mini-batch size")->capture_default_str();
    tn->add_option("--optimizer", tr.optimizer, "adam or sgd")->capture_default_str();
    tn->add_option("--beta", tr.beta, "positive-term weight (<= 0 = number of classes)")
        ->capture_default_str();
    tn->add_option("--negatives", tr.negatives, "uniform negatives per sample")
        ->capture_default_str();
    tn->add_option("--eval-every", tr.eval_every, "epochs between validation passes")
        ->capture_default_str();
    tn->add_option("--seed", tr.seed, "training seed (init, shuffles, negatives, dropout)")
        ->capture_default_str();
    tn->add_option("--out", tr.out, "output checkpoint JSON")->required();
    tn->add_option("--metrics-out", tr.metrics_out, "optional per-epoch history CSV");
    add_config_flag(tn);
    tn->callback([&] { exit_code = cmd_train(tr); });

    // eval
    EvalOpts ev;
    CLI::App* el = app.add_subcommand(
        "eval", "score a checkpoint on one dataset split and write a ranking report");
    el->add_option("--checkpoint", ev.checkpoint, "checkpoint JSON from train")->required();
    el->add_option("--dataset", ev.dataset, "dataset CSV")->required();
    el->add_flag("--degrees", ev.degrees, "read lon/lat columns as degrees");
    el->add_option("--split", ev.split, "split to score: train, val, or test")
        ->capture_default_str();
    el->add_option("--img-scores", ev.img_scores,
                   "optional per-point class scores CSV to fuse in by elementwise product");
    el->add_option("--out", ev.out,
                   "output report JSON (band/cell CSV tables land next to it)")
        ->required();
    add_config_flag(el);
    el->callback([&] { exit_code = cmd_eval(ev); });

    // props
    PropsOpts pr;
    CLI::App* pp = app.add_subcommand(
        "props", "run the geometric property checks (exit 3 if any fail)");
    pp->add_option("--trials", pr.trials, "random trials per check")->capture_default_str();
    pp->add_option("--seed", pr.seed, "seed for the property trials")->capture_default_str();
    pp->add_option("--out", pr.out, "optional report JSON");
    add_config_flag(pp);
    pp->callback([&] { exit_code = cmd_props(pr); });

    // encode
    EncodeOpts en;
    CLI::App* ec = app.add_subcommand(
        "encode", "write encoder features (or checkpoint embeddings) on a lon/lat grid");
    ec->add_option("--checkpoint", en.checkpoint,
                   "write the checkpoint model's embeddings instead of raw features");
    ec->add_option("--dataset", en.dataset, "dataset CSV (anchor source for --encoder rbf)");
    ec->add_flag("--degrees", en.degrees, "read lon/lat columns as degrees");
    add_encoder_flags(ec, en.enc);
    ec->add_option("--n-lon", en.n_lon, "grid cells along longitude")->capture_default_str();
    ec->add_option("--n-lat", en.n_lat, "grid cells along latitude")->capture_default_str();
    ec->add_option("--seed", en.seed, "seed for frozen rbf/rff draws")->capture_default_str();
    ec->add_option("--out", en.out, "output CSV: lon_rad,lat_rad,f_0,...")->required();
    add_config_flag(ec);
    ec->callback([&] {
        en.encoder_set = ec->count("--encoder") > 0;
        exit_code = cmd_encode(en);
    });

    // bench-suite
    BenchOpts be;
    CLI::App* bs = app.add_subcommand(
        "bench-suite", "train every selected encoder on every selected mixture preset");
    bs->add_option("--datasets", be.datasets,
                   "comma-separated preset names (default: all of " +
                       join_csv(bench_dataset_names()) + ")")
        ->delimiter(',');
    bs->add_option("--encoders", be.encoders,
                   "comma-separated preset names (default: all of " +
                       join_csv(bench_encoder_names()) + ")")
        ->delimiter(',');
    bs->add_option("--seeds", be.seeds, "comma-separated run seeds")
        ->delimiter(',')
        ->capture_default_str();
    bs->add_option("--lr", be.lr, "learning rate")->capture_default_str();
    bs->add_option("--epochs", be.epochs, "training epochs per cell")->capture_default_str();
    bs->add_option("--batch-size", be.batch_size, "mini-batch size")->capture_default_str();
    bs->add_option("--eval-every", be.eval_every, "epochs between validation passes")
        ->capture_default_str();
    bs->add_option("--negatives", be.negatives, "uniform negatives per sample")
        ->capture_default_str();
    bs->add_option("--beta", be.beta, "positive-term weight (<= 0 = number of classes)")
        ->capture_default_str();
    bs->add_option("--out", be.out, "output CSV table")->required();
    add_config_flag(bs);
    bs->callback([&] { exit_code = cmd_bench(be); });

    // Apply a --config file, if any, as injected defaults: tokens from the
    // file go before the user's, and keys the user set are skipped, so the
    // command line always wins.
    std::vector<std::string> raw(argv + 1, argv + argc);
    std::vector<std::string> tokens = raw;
    if (!raw.empty()) {
        CLI::App* sub = app.get_subcommand_no_throw(raw.front());
        if (sub != nullptr) {
            std::vector<std::string> rest(raw.begin() + 1, raw.end());
            std::string cfg;
            for (std::size_t i = 0; i < rest.size(); ++i) {
                const std::string& t = rest[i];
                if (t == "--config" && i + 1 < rest.size())
                    cfg = rest[i + 1];
                else if (t.rfind("--config=", 0) == 0)
                    cfg = t.substr(9);
            }
            if (!cfg.empty()) {
                std::vector<std::string> injected = config_tokens(cfg, sub, rest);
                tokens.clear();
                tokens.push_back(raw.front());
                tokens.insert(tokens.end(), injected.begin(), injected.end());
                tokens.insert(tokens.end(), rest.begin(), rest.end());
            }
        }
    }

    std::vector<const char*> cargv;
    cargv.push_back(argc > 0 ? argv[0] : "sphereloc");
    for (const auto& t : tokens) cargv.push_back(t.c_str());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }
    return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
