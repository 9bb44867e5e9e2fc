#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sphereloc/encoders.hpp"
#include "sphereloc/metrics.hpp"
#include "sphereloc/props.hpp"
#include "sphereloc/train.hpp"
#include "sphereloc/vmf.hpp"

namespace sphereloc {

// File formats. Every writer stamps a format_version field (JSON) or a
// versioned comment header (CSV), and echoes the caller-supplied flag
// string so an output file names the exact command that produced it.
// Doubles are written in shortest round-trip form in both formats, so a
// value survives save/load bit-exactly and identical runs produce
// byte-identical files.

inline constexpr int kDatasetCsvVersion = 1;
inline constexpr int kCheckpointVersion = 1;
inline constexpr int kProvenanceVersion = 1;
inline constexpr int kEvalReportVersion = 1;
inline constexpr int kPropsReportVersion = 1;
inline constexpr int kHistoryCsvVersion = 1;
inline constexpr int kEncodeCsvVersion = 1;
inline constexpr int kBenchCsvVersion = 1;

// Shortest decimal string that parses back to exactly this double.
std::string format_double(double v);

// --- JSON conversions -------------------------------------------------------

nlohmann::json encoder_spec_to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const nlohmann::json& j);

nlohmann::json mvmf_spec_to_json(const MvMFSpec& spec);
MvMFSpec mvmf_spec_from_json(const nlohmann::json& j);

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt, const std::string& flags);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

nlohmann::json eval_report_to_json(const EvalReport& report, const std::string& flags);

nlohmann::json props_report_to_json(const std::vector<PropertyResult>& rows, long trials,
                                    std::uint64_t seed, const std::string& flags);

// --- files ------------------------------------------------------------------

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt,
                     const std::string& flags);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Dataset CSV: '#'-prefixed comment header (format version + flag echo),
// then `point_id,lon_rad,lat_rad,class_id,split` rows. The provenance
// sidecar (written next to it as <stem>.provenance.json) carries the
// realized generator spec.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::string& flags);
void write_provenance_json(const std::filesystem::path& path, const MvMFSpec& spec,
                           const std::string& flags);
std::filesystem::path provenance_path_for(const std::filesystem::path& dataset_path);

// Reads a dataset CSV; with degrees = true, coordinates are converted to
// radians on read. Class count is taken as max class id + 1. The provenance
// sidecar is loaded when present.
Dataset read_dataset_csv(const std::filesystem::path& path, bool degrees = false);

// Image-score CSV: `point_id,score_0,...,score_{c-1}`.
ImgScores read_img_scores_csv(const std::filesystem::path& path);

// Eval report: one JSON file plus band/cell CSV tables next to it
// (<stem>.bands.csv, <stem>.cells.csv). Empty bands/cells write an empty
// MRR field.
void write_eval_report(const std::filesystem::path& json_path, const EvalReport& report,
                       const std::string& flags);

// Training history CSV: `epoch,train_loss,val_top1` (val_top1 empty on
// epochs without an eval pass).
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history,
                       const std::string& flags);

}  // namespace sphereloc
