#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sddnn/arch.hpp"
#include "sddnn/corpus.hpp"
#include "sddnn/features.hpp"
#include "sddnn/trainer.hpp"

namespace sddnn {

using nlohmann::json;

// Feature layout sidecar: {"columns": [{"name": ..., "family": ... or null}, ...]} in LLD order.
json layout_to_json(const LldLayout& layout);
LldLayout layout_from_json(const json& j);
/// Families keyed by column name. Also accepts a plain {"<name>": "<family>"} object.
std::map<std::string, std::optional<LldFamily>> families_from_json(const json& j);

// LLD CSV: session_id,couple_id,speaker_id,segment_id,t,<lld columns...>
void write_lld_csv(std::ostream& out, std::span<const LldStream> streams, const LldLayout& layout);
struct LldTable {
    LldLayout layout;
    std::vector<LldStream> streams;
};
/// Throws InputError("line N: ...") on malformed rows.
LldTable read_lld_csv(std::istream& in, const std::map<std::string, std::optional<LldFamily>>& families, double hop);

// Frame CSV: session_id,speaker_id,window_start,f0,...,f{D-1}
void write_frames_csv(std::ostream& out, std::span<const FrameFeature> frames, std::size_t dim);
std::vector<FrameFeature> read_frames_csv(std::istream& in);

// Manifest CSV: session_id,couple_id,speaker_id,gender,<code>... (one rating column per code)
void write_manifest_csv(std::ostream& out, std::span<const SessionRecord> records);
std::vector<SessionRecord> read_manifest_csv(std::istream& in);
std::vector<SessionRecord> read_manifest_json(const json& j);
std::vector<SessionRecord> read_manifest(const std::filesystem::path& path);

/// What a model file carries besides its parameters.
struct ModelInfo {
    std::string regime;
    std::string code;
    std::optional<ThresholdModel> threshold;
};

struct ModelFile {
    ModelInfo info;
    /// A single network/composite, or the subnet set produced by the subnet regime.
    std::optional<Model> model;
    std::vector<Network> subnets;
    std::vector<std::string> subnet_names;
    /// Applied to every frame before the model sees it; empty when training used raw frames.
    FeatureScaler scaler;
};

json model_to_json(const ModelFile& file);
ModelFile model_from_json(const json& j);

json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j, TrainConfig base = {});
json cv_config_to_json(const CvConfig& c);
CvConfig cv_config_from_json(const json& j, CvConfig base = {});
json synth_config_to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const json& j);

json report_to_json(const CvReport& report, const CvConfig& config);

json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
/// FNV-1a 64 of a file's bytes, hex encoded.
std::string file_digest(const std::filesystem::path& path);

}  // namespace sddnn
