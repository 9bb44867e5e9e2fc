#include "sphereloc/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "sphereloc/io.hpp"
#include "sphereloc/metrics.hpp"

namespace sphereloc {

namespace {

const double kKappaMaxGrid[4] = {16.0, 32.0, 64.0, 128.0};
const int kBandGrid[4] = {5, 10, 25, 50};

struct DatasetPreset {
    std::string name;
    MvMFSpec spec;  // seed filled per run
};

std::vector<DatasetPreset> dataset_presets() {
    std::vector<DatasetPreset> out;
    for (int j = 0; j < 4; ++j) {
        MvMFSpec spec;
        spec.placement = Placement::uniform;
        spec.classes = 50;
        spec.samples_per_class = 100;
        spec.kappa_min = 1.0;
        spec.kappa_max = kKappaMaxGrid[j];
        out.push_back({"U" + std::to_string(j + 1), spec});
    }
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            MvMFSpec spec;
            spec.placement = Placement::stratified;
            spec.classes = 50;
            spec.samples_per_class = 100;
            spec.kappa_min = 1.0;
            spec.kappa_max = kKappaMaxGrid[j];
            spec.n_mu = kBandGrid[i];
            spec.c_mu = 50 / kBandGrid[i];
            out.push_back(
                {"S" + std::to_string(i + 1) + "." + std::to_string(j + 1), spec});
        }
    return out;
}

struct EncoderPreset {
    std::string name;
    bool baseline = true;
    NetKind net = NetKind::ffn;
};

std::vector<EncoderPreset> encoder_presets() {
    return {{"tile", true, NetKind::ffn},     {"wrap", true, NetKind::residual},
            {"wrap+ffn", true, NetKind::ffn}, {"xyz", true, NetKind::ffn},
            {"rbf", true, NetKind::ffn},      {"rff", true, NetKind::ffn},
            {"grid", true, NetKind::ffn},     {"theory", true, NetKind::ffn},
            {"nerf", true, NetKind::ffn},     {"dfs", true, NetKind::ffn},
            {"sphereC", false, NetKind::ffn}, {"sphereM", false, NetKind::ffn},
            {"sphereC+", false, NetKind::ffn},{"sphereM+", false, NetKind::ffn}};
}

EncoderSpec build_preset_spec(const std::string& name, const Dataset& data, std::uint64_t seed) {
    if (name == "tile") return EncoderSpec::make_tile(36, 18);
    if (name == "wrap" || name == "wrap+ffn") return EncoderSpec::single(Family::wrap);
    if (name == "xyz") return EncoderSpec::single(Family::xyz);
    if (name == "rbf") return EncoderSpec::make_rbf(sample_anchor_points(data, 200, seed), 1.0);
    if (name == "rff") return EncoderSpec::make_rff(256, 1.0, seed);
    if (name == "nerf") return EncoderSpec::nerf(8);
    if (name == "dfs") return EncoderSpec::multi_scale(Family::dfs, 8, 1e-2, 1.0);
    Family f = family_from_name(name);
    return EncoderSpec::multi_scale(f, 32, 1e-2, 1.0);
}

template <typename T>
std::size_t index_of(const std::vector<T>& names, const std::string& name) {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i].name == name) return i;
    throw std::invalid_argument("unknown preset: " + name);
}

}  // namespace

std::vector<std::string> bench_dataset_names() {
    std::vector<std::string> out;
    for (const auto& p : dataset_presets()) out.push_back(p.name);
    return out;
}

std::vector<std::string> bench_encoder_names() {
    std::vector<std::string> out;
    for (const auto& p : encoder_presets()) out.push_back(p.name);
    return out;
}

std::vector<SphericalPoint> sample_anchor_points(const Dataset& data, std::size_t count,
                                                 std::uint64_t seed) {
    std::vector<DataRecord> train = data.split_records(Split::train);
    if (train.empty()) throw std::invalid_argument("anchor sampling needs train records");
    Rng rng(seed);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    std::size_t m = std::min(count, train.size());
    std::vector<SphericalPoint> anchors;
    anchors.reserve(m);
    for (std::size_t i = 0; i < m; ++i) anchors.push_back(train[order[i]].point);
    return anchors;
}

BenchReport run_bench(const BenchOptions& options) {
    const std::vector<DatasetPreset> all_datasets = dataset_presets();
    const std::vector<EncoderPreset> all_encoders = encoder_presets();

    std::vector<std::string> dataset_names =
        options.datasets.empty() ? bench_dataset_names() : options.datasets;
    std::vector<std::string> encoder_names =
        options.encoders.empty() ? bench_encoder_names() : options.encoders;
    if (options.seeds.empty()) throw std::invalid_argument("bench needs at least one seed");

    BenchReport report;
    // dataset -> encoder -> per-seed test/val results
    std::map<std::string, std::map<std::string, std::vector<BenchCell>>> grouped;

    for (const auto& dname : dataset_names) {
        std::size_t d_idx = index_of(all_datasets, dname);
        for (std::uint64_t run_seed : options.seeds) {
            std::uint64_t dataset_seed = derive_seed(run_seed, 1000 + d_idx);
            MvMFSpec spec = all_datasets[d_idx].spec;
            spec.seed = dataset_seed;
            Dataset data = generate(spec);

            std::vector<SphericalPoint> test_pts, val_pts;
            std::vector<int> test_labels, val_labels;
            for (const auto& r : data.split_records(Split::test)) {
                test_pts.push_back(r.point);
                test_labels.push_back(r.class_id);
            }
            for (const auto& r : data.split_records(Split::val)) {
                val_pts.push_back(r.point);
                val_labels.push_back(r.class_id);
            }

            for (const auto& ename : encoder_names) {
                std::size_t e_idx = index_of(all_encoders, ename);
                BenchCell cell;
                cell.dataset = dname;
                cell.encoder = ename;
                cell.seed = run_seed;
                auto t0 = std::chrono::steady_clock::now();
                try {
                    std::uint64_t train_seed = derive_seed(dataset_seed, 100 + e_idx);
                    EncoderSpec enc =
                        build_preset_spec(ename, data, derive_seed(train_seed, 7));
                    NetShape shape;
                    shape.kind = all_encoders[e_idx].net;
                    TrainConfig config = options.train;
                    config.seed = train_seed;
                    Checkpoint ckpt = train(data, enc, shape, config);
                    cell.ok = true;
                    cell.val_top1 = ckpt.best_val_top1;
                    cell.best_epoch = ckpt.best_epoch;
                    cell.test_top1 = top1_accuracy(enc, ckpt.model, test_pts, test_labels);
                } catch (const std::exception& e) {
                    cell.ok = false;
                    cell.error = e.what();
                }
                cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                                   .count();
                grouped[dname][ename].push_back(cell);
                report.cells.push_back(cell);
            }
        }
    }

    // Aggregate rows, then fill the baseline comparisons per dataset.
    for (const auto& dname : dataset_names) {
        std::vector<BenchRow> dataset_rows;
        for (const auto& ename : encoder_names) {
            const auto& cells = grouped[dname][ename];
            BenchRow row;
            row.dataset = dname;
            row.encoder = ename;
            row.is_baseline = all_encoders[index_of(all_encoders, ename)].baseline;
            double sum = 0, val_sum = 0;
            for (const auto& c : cells)
                if (c.ok) {
                    ++row.n_ok;
                    sum += c.test_top1;
                    val_sum += c.val_top1;
                }
            if (row.n_ok > 0) {
                row.test_top1_mean = sum / row.n_ok;
                row.val_top1_mean = val_sum / row.n_ok;
                if (row.n_ok > 1) {
                    double ss = 0;
                    for (const auto& c : cells)
                        if (c.ok) {
                            double d = c.test_top1 - row.test_top1_mean;
                            ss += d * d;
                        }
                    row.test_top1_stddev = std::sqrt(ss / (row.n_ok - 1));
                }
            }
            dataset_rows.push_back(std::move(row));
        }

        // Reference: the best baseline row with at least one finished seed;
        // when the selection holds no baselines, the best row overall.
        const BenchRow* reference = nullptr;
        for (const auto& r : dataset_rows)
            if (r.is_baseline && r.n_ok > 0 &&
                (!reference || r.test_top1_mean > reference->test_top1_mean))
                reference = &r;
        if (!reference)
            for (const auto& r : dataset_rows)
                if (r.n_ok > 0 && (!reference || r.test_top1_mean > reference->test_top1_mean))
                    reference = &r;

        for (auto& r : dataset_rows) {
            if (reference && r.n_ok > 0) {
                r.baseline = reference->encoder;
                r.delta_top1 = r.test_top1_mean - reference->test_top1_mean;
                double base_err = 1.0 - reference->test_top1_mean;
                double enc_err = 1.0 - r.test_top1_mean;
                if (base_err > 0.0) r.err_reduction = (base_err - enc_err) / base_err;
                else if (enc_err == base_err) r.err_reduction = 0.0;
            }
            report.rows.push_back(std::move(r));
        }
    }
    return report;
}

std::string bench_csv(const BenchReport& report, const std::string& flags) {
    std::ostringstream out;
    out << "# format=bench-csv version=" << kBenchCsvVersion << "\n";
    out << "# flags: " << flags << "\n";
    out << "dataset,encoder,n_ok,test_top1_mean,test_top1_stddev,val_top1_mean,baseline,"
           "delta_top1,err_reduction\n";
    for (const auto& r : report.rows) {
        out << r.dataset << ',' << r.encoder << ',' << r.n_ok << ','
            << format_double(r.test_top1_mean) << ',' << format_double(r.test_top1_stddev) << ','
            << format_double(r.val_top1_mean) << ',' << r.baseline << ',';
        if (r.delta_top1) out << format_double(*r.delta_top1);
        out << ',';
        if (r.err_reduction) out << format_double(*r.err_reduction);
        out << "\n";
    }
    out << "# cells\n";
    out << "# dataset,encoder,seed,ok,val_top1,test_top1,best_epoch,seconds,error\n";
    for (const auto& c : report.cells) {
        out << "# " << c.dataset << ',' << c.encoder << ',' << c.seed << ','
            << (c.ok ? "1" : "0") << ',' << format_double(c.val_top1) << ','
            << format_double(c.test_top1) << ',' << c.best_epoch << ','
            << format_double(c.seconds) << ',' << c.error << "\n";
    }
    return out.str();
}

}  // namespace sphereloc
