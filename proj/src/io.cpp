#include "sphereloc/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sphereloc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) throw std::runtime_error("failed to format double");
    return std::string(buf, end);
}

namespace {

double parse_double(const std::string& s) {
    double v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw std::invalid_argument("bad number: '" + s + "'");
    return v;
}

std::int64_t parse_int64(const std::string& s) {
    std::int64_t v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw std::invalid_argument("bad integer: '" + s + "'");
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

json layer_to_json(const DenseLayer& l) {
    json w = json::array();
    for (Eigen::Index i = 0; i < l.w.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < l.w.cols(); ++j) row.push_back(l.w(i, j));
        w.push_back(std::move(row));
    }
    json b = json::array();
    for (Eigen::Index i = 0; i < l.b.size(); ++i) b.push_back(l.b(i));
    return json{{"w", std::move(w)}, {"b", std::move(b)}};
}

DenseLayer layer_from_json(const json& j) {
    const json& w = j.at("w");
    const json& b = j.at("b");
    if (w.empty()) throw std::invalid_argument("layer weight matrix is empty");
    DenseLayer l;
    l.w.resize(static_cast<Eigen::Index>(w.size()),
               static_cast<Eigen::Index>(w.at(0).size()));
    for (Eigen::Index i = 0; i < l.w.rows(); ++i) {
        const json& row = w.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != l.w.cols())
            throw std::invalid_argument("ragged weight matrix");
        for (Eigen::Index jc = 0; jc < l.w.cols(); ++jc)
            l.w(i, jc) = row.at(static_cast<std::size_t>(jc)).get<double>();
    }
    l.b.resize(static_cast<Eigen::Index>(b.size()));
    for (Eigen::Index i = 0; i < l.b.size(); ++i)
        l.b(i) = b.at(static_cast<std::size_t>(i)).get<double>();
    return l;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
    if (j.empty()) throw std::invalid_argument("matrix is empty");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                      static_cast<Eigen::Index>(j.at(0).size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const json& row = j.at(static_cast<std::size_t>(i));
        if (static_cast<Eigen::Index>(row.size()) != m.cols())
            throw std::invalid_argument("ragged matrix");
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
    }
    return m;
}

json net_to_json(const NetParams& net) {
    if (const auto* f = std::get_if<FfnParams>(&net)) {
        json hidden = json::array();
        for (const auto& l : f->hidden) hidden.push_back(layer_to_json(l));
        return json{{"kind", "ffn"},
                    {"dropout_rate", f->dropout_rate},
                    {"hidden", std::move(hidden)},
                    {"output", layer_to_json(f->output)}};
    }
    const auto& r = std::get<ResidualNetParams>(net);
    json blocks = json::array();
    for (const auto& b : r.blocks)
        blocks.push_back(json{{"first", layer_to_json(b.first)},
                              {"second", layer_to_json(b.second)}});
    return json{{"kind", "residual"},
                {"dropout_rate", r.dropout_rate},
                {"input", layer_to_json(r.input)},
                {"blocks", std::move(blocks)},
                {"output", layer_to_json(r.output)}};
}

NetParams net_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "ffn") {
        FfnParams f;
        f.dropout_rate = j.at("dropout_rate").get<double>();
        for (const auto& l : j.at("hidden")) f.hidden.push_back(layer_from_json(l));
        f.output = layer_from_json(j.at("output"));
        return f;
    }
    if (kind != "residual") throw std::invalid_argument("unknown net kind: " + kind);
    ResidualNetParams r;
    r.dropout_rate = j.at("dropout_rate").get<double>();
    r.input = layer_from_json(j.at("input"));
    for (const auto& b : j.at("blocks"))
        r.blocks.push_back(ResidualBlock{layer_from_json(b.at("first")),
                                         layer_from_json(b.at("second"))});
    r.output = layer_from_json(j.at("output"));
    return r;
}

json train_config_to_json(const TrainConfig& c) {
    return json{{"lr", c.lr},
                {"epochs", c.epochs},
                {"batch_size", c.batch_size},
                {"optimizer", optimizer_name(c.optimizer)},
                {"adam_beta1", c.adam_beta1},
                {"adam_beta2", c.adam_beta2},
                {"adam_eps", c.adam_eps},
                {"seed", c.seed},
                {"beta", c.beta},
                {"negatives_per_sample", c.negatives_per_sample},
                {"eval_every", c.eval_every}};
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.adam_eps = j.at("adam_eps").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.beta = j.at("beta").get<double>();
    c.negatives_per_sample = j.at("negatives_per_sample").get<int>();
    c.eval_every = j.at("eval_every").get<int>();
    return c;
}

json shape_to_json(const NetShape& s) {
    return json{{"kind", net_kind_name(s.kind)},
                {"hidden_layers", s.hidden_layers},
                {"width", s.width},
                {"embedding_dim", s.embedding_dim},
                {"dropout_rate", s.dropout_rate}};
}

NetShape shape_from_json(const json& j) {
    NetShape s;
    s.kind = net_kind_from_name(j.at("kind").get<std::string>());
    s.hidden_layers = j.at("hidden_layers").get<int>();
    s.width = j.at("width").get<int>();
    s.embedding_dim = j.at("embedding_dim").get<int>();
    s.dropout_rate = j.at("dropout_rate").get<double>();
    return s;
}

}  // namespace

json encoder_spec_to_json(const EncoderSpec& spec) {
    json j{{"family", family_name(spec.family)}};
    switch (spec.family) {
        case Family::grid:
        case Family::theory:
        case Family::dfs:
        case Family::sphere_c:
        case Family::sphere_m:
        case Family::sphere_c_plus:
        case Family::sphere_m_plus:
            j["scales"] = spec.schedule.scales;
            j["r_min"] = spec.schedule.r_min;
            j["r_max"] = spec.schedule.r_max;
            break;
        case Family::nerf: j["scales"] = spec.schedule.scales; break;
        case Family::tile:
            j["lon_cells"] = spec.tile->lon_cells;
            j["lat_cells"] = spec.tile->lat_cells;
            break;
        case Family::rbf: {
            j["sigma"] = spec.rbf->sigma;
            j["metric"] = spec.rbf->metric == RbfMetric::chord ? "chord" : "lonlat";
            json anchors = json::array();
            for (const auto& a : spec.rbf->anchors) anchors.push_back(json::array({a.lon, a.lat}));
            j["anchors"] = std::move(anchors);
            break;
        }
        case Family::rff: {
            j["bandwidth"] = spec.rff->bandwidth;
            json dirs = json::array();
            for (const auto& d : spec.rff->directions) dirs.push_back(json::array({d[0], d[1]}));
            j["directions"] = std::move(dirs);
            j["offsets"] = spec.rff->offsets;
            break;
        }
        case Family::wrap:
        case Family::xyz: break;
    }
    return j;
}

EncoderSpec encoder_spec_from_json(const json& j) {
    Family f = family_from_name(j.at("family").get<std::string>());
    switch (f) {
        case Family::grid:
        case Family::theory:
        case Family::dfs:
        case Family::sphere_c:
        case Family::sphere_m:
        case Family::sphere_c_plus:
        case Family::sphere_m_plus:
            return EncoderSpec::multi_scale(f, j.at("scales").get<int>(),
                                            j.at("r_min").get<double>(),
                                            j.at("r_max").get<double>());
        case Family::nerf: return EncoderSpec::nerf(j.at("scales").get<int>());
        case Family::tile:
            return EncoderSpec::make_tile(j.at("lon_cells").get<int>(),
                                          j.at("lat_cells").get<int>());
        case Family::rbf: {
            std::vector<SphericalPoint> anchors;
            for (const auto& a : j.at("anchors"))
                anchors.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
            RbfMetric metric = j.at("metric").get<std::string>() == "chord" ? RbfMetric::chord
                                                                            : RbfMetric::lonlat;
            return EncoderSpec::make_rbf(std::move(anchors), j.at("sigma").get<double>(), metric);
        }
        case Family::rff: {
            RffParams params;
            params.bandwidth = j.at("bandwidth").get<double>();
            for (const auto& d : j.at("directions"))
                params.directions.push_back({d.at(0).get<double>(), d.at(1).get<double>()});
            params.offsets = j.at("offsets").get<std::vector<double>>();
            if (params.directions.empty() || params.directions.size() != params.offsets.size())
                throw std::invalid_argument("rff directions/offsets mismatch");
            EncoderSpec spec;
            spec.family = Family::rff;
            spec.rff = std::move(params);
            return spec;
        }
        case Family::wrap:
        case Family::xyz: return EncoderSpec::single(f);
    }
    throw std::logic_error("unhandled family");
}

json mvmf_spec_to_json(const MvMFSpec& spec) {
    json comps = json::array();
    for (const auto& c : spec.components)
        comps.push_back(json{{"mu", {{"z", c.mu.z}, {"x", c.mu.x}, {"y", c.mu.y}}},
                             {"kappa", c.kappa}});
    return json{{"placement", spec.placement == Placement::uniform ? "uniform" : "stratified"},
                {"classes", spec.classes},
                {"samples_per_class", spec.samples_per_class},
                {"kappa_min", spec.kappa_min},
                {"kappa_max", spec.kappa_max},
                {"n_mu", spec.n_mu},
                {"c_mu", spec.c_mu},
                {"seed", spec.seed},
                {"components", std::move(comps)}};
}

MvMFSpec mvmf_spec_from_json(const json& j) {
    MvMFSpec spec;
    std::string placement = j.at("placement").get<std::string>();
    if (placement == "uniform") spec.placement = Placement::uniform;
    else if (placement == "stratified") spec.placement = Placement::stratified;
    else throw std::invalid_argument("unknown placement: " + placement);
    spec.classes = j.at("classes").get<int>();
    spec.samples_per_class = j.at("samples_per_class").get<int>();
    spec.kappa_min = j.at("kappa_min").get<double>();
    spec.kappa_max = j.at("kappa_max").get<double>();
    spec.n_mu = j.at("n_mu").get<int>();
    spec.c_mu = j.at("c_mu").get<int>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("components")) {
        const json& mu = c.at("mu");
        spec.components.push_back(VmfComponent{
            CartesianPoint{mu.at("z").get<double>(), mu.at("x").get<double>(),
                           mu.at("y").get<double>()},
            c.at("kappa").get<double>()});
    }
    return spec;
}

json checkpoint_to_json(const Checkpoint& ckpt, const std::string& flags) {
    json history = json::array();
    for (const auto& e : ckpt.history) {
        json row{{"epoch", e.epoch}, {"train_loss", e.train_loss}};
        row["val_top1"] = e.val_top1 ? json(*e.val_top1) : json(nullptr);
        history.push_back(std::move(row));
    }
    return json{{"format_version", kCheckpointVersion},
                {"flags", flags},
                {"encoder", encoder_spec_to_json(ckpt.encoder)},
                {"num_classes", ckpt.num_classes},
                {"shape", shape_to_json(ckpt.shape)},
                {"net", net_to_json(ckpt.model.net)},
                {"class_matrix", matrix_to_json(ckpt.model.classes.t)},
                {"train_config", train_config_to_json(ckpt.config)},
                {"best_epoch", ckpt.best_epoch},
                {"best_val_top1", ckpt.best_val_top1},
                {"history", std::move(history)}};
}

Checkpoint checkpoint_from_json(const json& j) {
    int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion)
        throw std::invalid_argument("unsupported checkpoint format version " +
                                    std::to_string(version));
    Checkpoint ckpt;
    ckpt.format_version = version;
    ckpt.encoder = encoder_spec_from_json(j.at("encoder"));
    ckpt.num_classes = j.at("num_classes").get<int>();
    ckpt.shape = shape_from_json(j.at("shape"));
    ckpt.model.net = net_from_json(j.at("net"));
    ckpt.model.classes.t = matrix_from_json(j.at("class_matrix"));
    ckpt.config = train_config_from_json(j.at("train_config"));
    ckpt.best_epoch = j.at("best_epoch").get<int>();
    ckpt.best_val_top1 = j.at("best_val_top1").get<double>();
    for (const auto& row : j.at("history")) {
        EpochStats e;
        e.epoch = row.at("epoch").get<int>();
        e.train_loss = row.at("train_loss").get<double>();
        if (!row.at("val_top1").is_null()) e.val_top1 = row.at("val_top1").get<double>();
        ckpt.history.push_back(e);
    }
    return ckpt;
}

json eval_report_to_json(const EvalReport& report, const std::string& flags) {
    json bands = json::array();
    for (const auto& b : report.bands) {
        json row{{"lat_lo", b.lat_lo}, {"lat_hi", b.lat_hi}, {"n", b.n}};
        row["mrr"] = b.mrr ? json(*b.mrr) : json(nullptr);
        bands.push_back(std::move(row));
    }
    json cells = json::array();
    for (const auto& c : report.cells) {
        json row{{"lon_lo", c.lon_lo},
                 {"lon_hi", c.lon_hi},
                 {"lat_lo", c.lat_lo},
                 {"lat_hi", c.lat_hi},
                 {"n", c.n}};
        row["mrr"] = c.mrr ? json(*c.mrr) : json(nullptr);
        cells.push_back(std::move(row));
    }
    return json{{"format_version", kEvalReportVersion},
                {"flags", flags},
                {"split", report.split},
                {"n", report.n},
                {"top1", report.top1},
                {"top3", report.top3},
                {"top5", report.top5},
                {"mrr", report.mean_reciprocal_rank},
                {"bands", std::move(bands)},
                {"cells", std::move(cells)}};
}

json props_report_to_json(const std::vector<PropertyResult>& rows, long trials,
                          std::uint64_t seed, const std::string& flags) {
    json props = json::array();
    for (const auto& r : rows)
        props.push_back(json{{"id", r.id},
                             {"trials", r.trials},
                             {"max_error", r.max_error},
                             {"tolerance", r.tolerance},
                             {"pass", r.pass},
                             {"seed", r.seed}});
    return json{{"format_version", kPropsReportVersion},
                {"flags", flags},
                {"trials", trials},
                {"seed", seed},
                {"pass", all_pass(rows)},
                {"properties", std::move(props)}};
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_json_file(const fs::path& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

json read_json_file(const fs::path& path) { return json::parse(read_text_file(path)); }

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt, const std::string& flags) {
    write_json_file(path, checkpoint_to_json(ckpt, flags));
}

Checkpoint load_checkpoint(const fs::path& path) {
    return checkpoint_from_json(read_json_file(path));
}

void write_dataset_csv(const fs::path& path, const Dataset& data, const std::string& flags) {
    std::ostringstream out;
    out << "# format=dataset-csv version=" << kDatasetCsvVersion << "\n";
    out << "# flags: " << flags << "\n";
    out << "point_id,lon_rad,lat_rad,class_id,split\n";
    for (const auto& r : data.records)
        out << r.point_id << ',' << format_double(r.point.lon) << ','
            << format_double(r.point.lat) << ',' << r.class_id << ',' << split_name(r.split)
            << "\n";
    write_text_file(path, out.str());
}

fs::path provenance_path_for(const fs::path& dataset_path) {
    fs::path p = dataset_path;
    p.replace_extension();
    p += ".provenance.json";
    return p;
}

void write_provenance_json(const fs::path& path, const MvMFSpec& spec, const std::string& flags) {
    json j = mvmf_spec_to_json(spec);
    j["format_version"] = kProvenanceVersion;
    j["flags"] = flags;
    write_json_file(path, j);
}

Dataset read_dataset_csv(const fs::path& path, bool degrees) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset: " + path.string());
    std::string line;
    bool header_seen = false;
    Dataset ds;
    double to_rad = degrees ? kPi / 180.0 : 1.0;
    int max_class = -1;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols = split_csv_line(line);
        if (!header_seen) {
            if (cols != std::vector<std::string>{"point_id", "lon_rad", "lat_rad", "class_id",
                                                 "split"})
                throw std::invalid_argument(path.string() + ": unexpected dataset header");
            header_seen = true;
            continue;
        }
        if (cols.size() != 5)
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                        ": expected 5 columns");
        DataRecord rec;
        rec.point_id = parse_int64(cols[0]);
        rec.point = SphericalPoint(parse_double(cols[1]) * to_rad, parse_double(cols[2]) * to_rad);
        rec.class_id = static_cast<int>(parse_int64(cols[3]));
        if (rec.class_id < 0)
            throw std::invalid_argument(path.string() + ": negative class id");
        rec.split = split_from_name(cols[4]);
        max_class = std::max(max_class, rec.class_id);
        ds.records.push_back(rec);
    }
    if (!header_seen) throw std::invalid_argument(path.string() + ": missing dataset header");
    ds.num_classes = max_class + 1;
    fs::path prov = provenance_path_for(path);
    if (fs::exists(prov)) ds.provenance = mvmf_spec_from_json(read_json_file(prov));
    return ds;
}

ImgScores read_img_scores_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open image scores: " + path.string());
    std::string line;
    bool header_seen = false;
    std::size_t columns = 0;
    ImgScores scores;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols = split_csv_line(line);
        if (!header_seen) {
            if (cols.size() < 2 || cols[0] != "point_id")
                throw std::invalid_argument(path.string() + ": unexpected image-score header");
            for (std::size_t i = 1; i < cols.size(); ++i)
                if (cols[i] != "score_" + std::to_string(i - 1))
                    throw std::invalid_argument(path.string() + ": unexpected image-score header");
            columns = cols.size();
            header_seen = true;
            continue;
        }
        if (cols.size() != columns)
            throw std::invalid_argument(path.string() + ":" + std::to_string(line_no) +
                                        ": wrong column count");
        std::vector<double> row;
        row.reserve(columns - 1);
        for (std::size_t i = 1; i < cols.size(); ++i) row.push_back(parse_double(cols[i]));
        scores.emplace(parse_int64(cols[0]), std::move(row));
    }
    if (!header_seen) throw std::invalid_argument(path.string() + ": missing image-score header");
    return scores;
}

void write_eval_report(const fs::path& json_path, const EvalReport& report,
                       const std::string& flags) {
    write_json_file(json_path, eval_report_to_json(report, flags));

    fs::path stem = json_path;
    stem.replace_extension();

    std::ostringstream bands;
    bands << "# format=eval-bands-csv version=" << kEvalReportVersion << "\n";
    bands << "# flags: " << flags << "\n";
    bands << "lat_lo_rad,lat_hi_rad,n,mrr\n";
    for (const auto& b : report.bands) {
        bands << format_double(b.lat_lo) << ',' << format_double(b.lat_hi) << ',' << b.n << ',';
        if (b.mrr) bands << format_double(*b.mrr);
        bands << "\n";
    }
    fs::path bands_path = stem;
    bands_path += ".bands.csv";
    write_text_file(bands_path, bands.str());

    std::ostringstream cells;
    cells << "# format=eval-cells-csv version=" << kEvalReportVersion << "\n";
    cells << "# flags: " << flags << "\n";
    cells << "lon_lo_rad,lon_hi_rad,lat_lo_rad,lat_hi_rad,n,mrr\n";
    for (const auto& c : report.cells) {
        cells << format_double(c.lon_lo) << ',' << format_double(c.lon_hi) << ','
              << format_double(c.lat_lo) << ',' << format_double(c.lat_hi) << ',' << c.n << ',';
        if (c.mrr) cells << format_double(*c.mrr);
        cells << "\n";
    }
    fs::path cells_path = stem;
    cells_path += ".cells.csv";
    write_text_file(cells_path, cells.str());
}

void write_history_csv(const fs::path& path, const std::vector<EpochStats>& history,
                       const std::string& flags) {
    std::ostringstream out;
    out << "# format=history-csv version=" << kHistoryCsvVersion << "\n";
    out << "# flags: " << flags << "\n";
    out << "epoch,train_loss,val_top1\n";
    for (const auto& e : history) {
        out << e.epoch << ',' << format_double(e.train_loss) << ',';
        if (e.val_top1) out << format_double(*e.val_top1);
        out << "\n";
    }
    write_text_file(path, out.str());
}

}  // namespace sphereloc
