#include "sphereloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sphereloc {

namespace {

constexpr double kEdgeTol = 1e-12;

// Index of the half-open interval [edges[i], edges[i+1]) containing v;
// values on an internal edge land in the interval above, the final edge
// folds down.
std::size_t interval_of(const std::vector<double>& edges, double v) {
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    std::size_t idx = it == edges.begin() ? 0 : static_cast<std::size_t>(it - edges.begin()) - 1;
    return std::min(idx, edges.size() - 2);
}

void check_edges(const std::vector<double>& edges, double lo, double hi) {
    if (edges.size() < 2) throw std::invalid_argument("need at least two edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1]))
            throw std::invalid_argument("edges must be strictly increasing");
    if (std::abs(edges.front() - lo) > kEdgeTol || std::abs(edges.back() - hi) > kEdgeTol)
        throw std::invalid_argument("edges must span the full coordinate range");
}

std::vector<double> linspace_edges(double lo, double hi, int cells) {
    std::vector<double> edges;
    edges.reserve(static_cast<std::size_t>(cells) + 1);
    for (int i = 0; i <= cells; ++i)
        edges.push_back(lo + (hi - lo) * static_cast<double>(i) / cells);
    return edges;
}

}  // namespace

int rank_of_truth(const Eigen::VectorXd& scores, int truth) {
    if (truth < 0 || truth >= scores.size()) throw std::invalid_argument("truth outside classes");
    double sy = scores(truth);
    int rank = 1;
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
        if (i == truth) continue;
        if (scores(i) >= sy) ++rank;
    }
    return rank;
}

double top_k(const std::vector<int>& ranks, int k) {
    if (ranks.empty()) throw std::invalid_argument("top_k needs at least one rank");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    long hits = std::count_if(ranks.begin(), ranks.end(), [k](int r) { return r <= k; });
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr(const std::vector<int>& ranks) {
    if (ranks.empty()) throw std::invalid_argument("mrr needs at least one rank");
    double sum = 0.0;
    for (int r : ranks) sum += 1.0 / static_cast<double>(r);
    return sum / static_cast<double>(ranks.size());
}

std::vector<double> default_band_edges() { return linspace_edges(-kPi / 2, kPi / 2, 18); }

std::vector<BandRow> band_report(const std::vector<RankedPoint>& items,
                                 const std::vector<double>& edges) {
    check_edges(edges, -kPi / 2, kPi / 2);
    std::size_t bands = edges.size() - 1;
    std::vector<BandRow> rows(bands);
    std::vector<double> inv_sum(bands, 0.0);
    for (std::size_t i = 0; i < bands; ++i) {
        rows[i].lat_lo = edges[i];
        rows[i].lat_hi = edges[i + 1];
    }
    for (const auto& it : items) {
        std::size_t b = interval_of(edges, it.point.lat);
        ++rows[b].n;
        inv_sum[b] += 1.0 / static_cast<double>(it.rank);
    }
    for (std::size_t i = 0; i < bands; ++i)
        if (rows[i].n > 0) rows[i].mrr = inv_sum[i] / static_cast<double>(rows[i].n);
    return rows;
}

std::vector<CellRow> cell_report(const std::vector<RankedPoint>& items, int lon_cells,
                                 int lat_cells) {
    if (lon_cells < 1 || lat_cells < 1) throw std::invalid_argument("cell counts must be >= 1");
    std::vector<double> lon_edges = linspace_edges(-kPi, kPi, lon_cells);
    std::vector<double> lat_edges = linspace_edges(-kPi / 2, kPi / 2, lat_cells);
    std::size_t cells = static_cast<std::size_t>(lon_cells) * lat_cells;
    std::vector<CellRow> rows(cells);
    std::vector<double> inv_sum(cells, 0.0);
    for (int la = 0; la < lat_cells; ++la)
        for (int lo = 0; lo < lon_cells; ++lo) {
            CellRow& r = rows[static_cast<std::size_t>(la) * lon_cells + lo];
            r.lon_lo = lon_edges[static_cast<std::size_t>(lo)];
            r.lon_hi = lon_edges[static_cast<std::size_t>(lo) + 1];
            r.lat_lo = lat_edges[static_cast<std::size_t>(la)];
            r.lat_hi = lat_edges[static_cast<std::size_t>(la) + 1];
        }
    for (const auto& it : items) {
        std::size_t lo = interval_of(lon_edges, it.point.lon);
        std::size_t la = interval_of(lat_edges, it.point.lat);
        std::size_t idx = la * static_cast<std::size_t>(lon_cells) + lo;
        ++rows[idx].n;
        inv_sum[idx] += 1.0 / static_cast<double>(it.rank);
    }
    for (std::size_t i = 0; i < cells; ++i)
        if (rows[i].n > 0) rows[i].mrr = inv_sum[i] / static_cast<double>(rows[i].n);
    return rows;
}

std::vector<BandDelta> delta_report(const std::vector<BandRow>& a, const std::vector<BandRow>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("band partitions differ in size");
    std::vector<BandDelta> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i].lat_lo - b[i].lat_lo) > kEdgeTol ||
            std::abs(a[i].lat_hi - b[i].lat_hi) > kEdgeTol)
            throw std::invalid_argument("band partitions differ");
        if (!a[i].mrr || !b[i].mrr) continue;
        out.push_back(BandDelta{a[i].lat_lo, a[i].lat_hi, a[i].n, b[i].n, *a[i].mrr - *b[i].mrr});
    }
    return out;
}

std::vector<CellDelta> delta_report(const std::vector<CellRow>& a, const std::vector<CellRow>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cell partitions differ in size");
    std::vector<CellDelta> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::abs(a[i].lon_lo - b[i].lon_lo) > kEdgeTol ||
            std::abs(a[i].lon_hi - b[i].lon_hi) > kEdgeTol ||
            std::abs(a[i].lat_lo - b[i].lat_lo) > kEdgeTol ||
            std::abs(a[i].lat_hi - b[i].lat_hi) > kEdgeTol)
            throw std::invalid_argument("cell partitions differ");
        if (!a[i].mrr || !b[i].mrr) continue;
        out.push_back(CellDelta{a[i].lon_lo, a[i].lon_hi, a[i].lat_lo, a[i].lat_hi, a[i].n,
                                b[i].n, *a[i].mrr - *b[i].mrr});
    }
    return out;
}

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& data, Split split,
                    const ImgScores* img_scores) {
    std::vector<DataRecord> recs = data.split_records(split);
    if (recs.empty()) throw std::invalid_argument("split has no records: " + split_name(split));
    if (data.num_classes != ckpt.num_classes)
        throw std::invalid_argument("checkpoint and dataset disagree on class count");

    std::vector<SphericalPoint> pts;
    pts.reserve(recs.size());
    for (const auto& r : recs) pts.push_back(r.point);
    Eigen::MatrixXd scores = class_scores(ckpt.model, encode_batch(ckpt.encoder, pts));

    if (img_scores) {
        Eigen::MatrixXd img(scores.rows(), scores.cols());
        for (std::size_t i = 0; i < recs.size(); ++i) {
            auto it = img_scores->find(recs[i].point_id);
            if (it == img_scores->end())
                throw std::invalid_argument("image scores missing point id " +
                                            std::to_string(recs[i].point_id));
            if (static_cast<Eigen::Index>(it->second.size()) != scores.rows())
                throw std::invalid_argument("image score row has wrong class count for point id " +
                                            std::to_string(recs[i].point_id));
            for (Eigen::Index c = 0; c < scores.rows(); ++c)
                img(c, static_cast<Eigen::Index>(i)) = it->second[static_cast<std::size_t>(c)];
        }
        scores = fuse(scores, img);
    }

    std::vector<int> ranks;
    std::vector<RankedPoint> ranked;
    ranks.reserve(recs.size());
    ranked.reserve(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        int r = rank_of_truth(scores.col(static_cast<Eigen::Index>(i)), recs[i].class_id);
        ranks.push_back(r);
        ranked.push_back(RankedPoint{recs[i].point, r});
    }

    EvalReport report;
    report.split = split_name(split);
    report.n = static_cast<long>(recs.size());
    report.top1 = top_k(ranks, 1);
    report.top3 = top_k(ranks, 3);
    report.top5 = top_k(ranks, 5);
    report.mean_reciprocal_rank = mrr(ranks);
    report.bands = band_report(ranked, default_band_edges());
    report.cells = cell_report(ranked, 24, 12);
    return report;
}

}  // namespace sphereloc
