#include "sddnn/io.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "sddnn/csv.hpp"
#include "sddnn/error.hpp"

namespace sddnn {

namespace {

[[noreturn]] void fail_line(std::size_t line, const std::string& what) {
    throw InputError("line " + std::to_string(line) + ": " + what);
}

std::string time_text(double t) { return format_number(std::round(t * 1e6) / 1e6); }

// Rejects keys outside `known` so that typos in config files surface as errors.
void check_keys(const json& j, const std::set<std::string>& known, const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + what);
    }
}

template <class T>
void read_key(const json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

json layer_to_json(const Layer& l) {
    return {{"input_dim", l.shape.input_dim}, {"output_dim", l.shape.output_dim},
            {"activation", std::string(to_string(l.shape.activation))}, {"trainable", l.trainable},
            {"weights", l.weights}, {"biases", l.biases}};
}

Layer layer_from_json(const json& j) {
    Layer l;
    l.shape.input_dim = j.at("input_dim").get<std::size_t>();
    l.shape.output_dim = j.at("output_dim").get<std::size_t>();
    l.shape.activation = activation_from_string(j.at("activation").get<std::string>());
    l.trainable = j.at("trainable").get<bool>();
    l.weights = j.at("weights").get<std::vector<double>>();
    l.biases = j.at("biases").get<std::vector<double>>();
    l.validate();
    return l;
}

json network_to_json(const Network& n) {
    json layers = json::array();
    for (const auto& l : n.layers) layers.push_back(layer_to_json(l));
    return {{"trained", n.trained}, {"feature_indices", n.feature_indices}, {"layers", layers}};
}

Network network_from_json(const json& j) {
    Network n;
    n.trained = j.at("trained").get<bool>();
    n.feature_indices = j.at("feature_indices").get<std::vector<std::size_t>>();
    for (const auto& l : j.at("layers")) n.layers.push_back(layer_from_json(l));
    validate_chain(n.layers);
    if (!n.feature_indices.empty() && n.feature_indices.size() != n.input_dim()) {
        throw ConfigError("network feature indices do not match its input width");
    }
    return n;
}

json composite_to_json(const Composite& c) {
    json branches = json::array();
    for (std::size_t j = 0; j < c.branch_count(); ++j) {
        branches.push_back({{"name", c.groups[j].name},
                            {"feature_indices", c.groups[j].feature_indices},
                            {"layer", layer_to_json(c.layers[j])}});
    }
    json fusion = json::array();
    for (const auto& l : c.fusion()) fusion.push_back(layer_to_json(l));
    return {{"input_dim", c.input_dim}, {"trained", c.trained}, {"branches", branches}, {"fusion", fusion}};
}

Composite composite_from_json(const json& j) {
    Composite c;
    c.input_dim = j.at("input_dim").get<std::size_t>();
    c.trained = j.at("trained").get<bool>();
    for (const auto& b : j.at("branches")) {
        c.groups.push_back({b.at("name").get<std::string>(), b.at("feature_indices").get<std::vector<std::size_t>>()});
        c.layers.push_back(layer_from_json(b.at("layer")));
    }
    for (const auto& l : j.at("fusion")) c.layers.push_back(layer_from_json(l));
    c.validate();
    return c;
}

const std::set<std::string> kTrainKeys = {"regime",        "epochs",        "batch_size", "learning_rate",
                                          "epsilon",       "dropout_rate",  "dense_hidden", "subnet_hidden",
                                          "fusion_hidden", "seed",          "dev_fraction", "patience",
                                          "finetune_learning_rate", "standardize_inputs"};
const std::set<std::string> kCvKeys = {"codes",           "regimes",   "partition", "random_groups", "per_gender",
                                       "extreme_fraction", "per_class", "clamp_eps", "jobs"};

std::set<std::string> config_keys() {
    std::set<std::string> keys = kTrainKeys;
    keys.insert(kCvKeys.begin(), kCvKeys.end());
    return keys;
}

}  // namespace

json layout_to_json(const LldLayout& layout) {
    json columns = json::array();
    for (std::size_t i = 0; i < layout.size(); ++i) {
        columns.push_back({{"name", layout.names[i]},
                           {"family", layout.families[i] ? json(std::string(to_string(*layout.families[i]))) : json(nullptr)}});
    }
    return {{"columns", columns}};
}

namespace {

std::optional<LldFamily> family_value(const json& value, const std::string& name) {
    if (value.is_null()) return std::nullopt;
    if (!value.is_string()) throw ConfigError("family of column '" + name + "' must be a string or null");
    const auto family = family_from_string(value.get<std::string>());
    if (!family) throw ConfigError("unknown family '" + value.get<std::string>() + "' for column '" + name + "'");
    return family;
}

}  // namespace

LldLayout layout_from_json(const json& j) {
    if (!j.is_object() || !j.contains("columns") || !j.at("columns").is_array()) {
        throw ConfigError("layout must be {\"columns\": [{\"name\": ..., \"family\": ...}, ...]}");
    }
    LldLayout layout;
    for (const auto& col : j.at("columns")) {
        if (!col.is_object() || !col.contains("name") || !col.at("name").is_string()) {
            throw ConfigError("every layout column needs a name");
        }
        const auto name = col.at("name").get<std::string>();
        layout.names.push_back(name);
        layout.families.push_back(family_value(col.value("family", json(nullptr)), name));
    }
    if (layout.size() == 0) throw ConfigError("layout has no columns");
    return layout;
}

std::map<std::string, std::optional<LldFamily>> families_from_json(const json& j) {
    std::map<std::string, std::optional<LldFamily>> out;
    if (j.is_object() && j.contains("columns")) {
        const LldLayout layout = layout_from_json(j);
        for (std::size_t i = 0; i < layout.size(); ++i) out[layout.names[i]] = layout.families[i];
        return out;
    }
    if (!j.is_object()) throw ConfigError("layout must be a JSON object");
    for (const auto& [name, value] : j.items()) out[name] = family_value(value, name);
    return out;
}

void write_lld_csv(std::ostream& out, std::span<const LldStream> streams, const LldLayout& layout) {
    out << "session_id,couple_id,speaker_id,segment_id,t";
    for (const auto& n : layout.names) out << ',' << n;
    out << '\n';
    for (const auto& s : streams) {
        if (s.dim != layout.size()) throw InputError("stream width does not match the layout");
        for (const auto& seg : s.segments) {
            const std::size_t n = s.sample_count(seg);
            for (std::size_t i = 0; i < n; ++i) {
                out << s.session_id << ',' << s.couple_id << ',' << s.speaker_id << ',' << seg.id << ','
                    << time_text(seg.start + static_cast<double>(i) * s.hop);
                for (std::size_t d = 0; d < s.dim; ++d) out << ',' << format_number(seg.samples[i * s.dim + d]);
                out << '\n';
            }
        }
    }
}

LldTable read_lld_csv(std::istream& in, const std::map<std::string, std::optional<LldFamily>>& families, double hop) {
    if (!(hop > 0.0)) throw ConfigError("hop must be positive");
    LldTable table;
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw InputError("line 1: LLD CSV is empty");
    const auto header = split_csv(line);
    const char* fixed[] = {"session_id", "couple_id", "speaker_id", "segment_id", "t"};
    if (header.size() < 6) fail_line(1, "LLD header needs the five id/time columns and at least one LLD column");
    for (std::size_t i = 0; i < 5; ++i) {
        if (header[i] != fixed[i]) fail_line(1, "expected column '" + std::string(fixed[i]) + "'");
    }
    for (std::size_t i = 5; i < header.size(); ++i) {
        const std::string name(header[i]);
        table.layout.names.push_back(name);
        const auto it = families.find(name);
        table.layout.families.push_back(it == families.end() ? std::nullopt : it->second);
    }
    const std::size_t dim = table.layout.size();

    std::map<SessionKey, std::size_t> stream_index;
    std::map<SessionKey, std::string> open_segment;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) {
            fail_line(line_no, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        SessionKey key{std::string(fields[0]), std::string(fields[2])};
        if (key.session_id.empty() || key.speaker_id.empty() || fields[1].empty() || fields[3].empty()) {
            fail_line(line_no, "empty identifier");
        }
        double t = 0.0;
        std::vector<double> values(dim);
        try {
            t = parse_number(fields[4]);
            for (std::size_t d = 0; d < dim; ++d) values[d] = parse_number(fields[5 + d]);
        } catch (const InputError& e) {
            fail_line(line_no, e.what());
        }

        auto [it, inserted] = stream_index.try_emplace(key, table.streams.size());
        if (inserted) {
            LldStream s;
            s.session_id = key.session_id;
            s.couple_id = std::string(fields[1]);
            s.speaker_id = key.speaker_id;
            s.hop = hop;
            s.dim = dim;
            table.streams.push_back(std::move(s));
        }
        LldStream& stream = table.streams[it->second];
        if (stream.couple_id != fields[1]) fail_line(line_no, "session " + key.str() + " changes couple id");
        const std::string segment_id(fields[3]);
        if (inserted || open_segment[key] != segment_id) {
            for (const auto& seg : stream.segments) {
                if (seg.id == segment_id) fail_line(line_no, "segment '" + segment_id + "' rows are not contiguous");
            }
            stream.segments.push_back({segment_id, t, {}});
            open_segment[key] = segment_id;
        }
        Segment& seg = stream.segments.back();
        const double expected = seg.start + static_cast<double>(stream.sample_count(seg)) * hop;
        if (std::abs(t - expected) > hop / 2.0) {
            fail_line(line_no, "time " + format_number(t) + " breaks the " + format_number(hop) + " s hop of segment '" +
                                   segment_id + "'");
        }
        seg.samples.insert(seg.samples.end(), values.begin(), values.end());
    }
    for (const auto& s : table.streams) s.validate();
    return table;
}

void write_frames_csv(std::ostream& out, std::span<const FrameFeature> frames, std::size_t dim) {
    out << "session_id,speaker_id,window_start";
    for (std::size_t i = 0; i < dim; ++i) out << ",f" << i;
    out << '\n';
    for (const auto& f : frames) {
        if (f.values.size() != dim) throw InputError("frame width does not match the CSV header");
        out << f.session_id << ',' << f.speaker_id << ',' << time_text(f.window_start);
        for (double v : f.values) out << ',' << format_number(v);
        out << '\n';
    }
}

std::vector<FrameFeature> read_frames_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("line 1: frame CSV is empty");
    const auto header = split_csv(line);
    if (header.size() < 4 || header[0] != "session_id" || header[1] != "speaker_id" || header[2] != "window_start") {
        fail_line(1, "frame header must start with session_id,speaker_id,window_start");
    }
    for (std::size_t i = 3; i < header.size(); ++i) {
        if (header[i] != "f" + std::to_string(i - 3)) fail_line(1, "frame columns must be f0, f1, ...");
    }
    const std::size_t dim = header.size() - 3;
    std::vector<FrameFeature> frames;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) {
            fail_line(line_no, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
        }
        FrameFeature f;
        f.session_id = std::string(fields[0]);
        f.speaker_id = std::string(fields[1]);
        f.values.resize(dim);
        try {
            f.window_start = parse_number(fields[2]);
            for (std::size_t d = 0; d < dim; ++d) f.values[d] = parse_number(fields[3 + d]);
        } catch (const InputError& e) {
            fail_line(line_no, e.what());
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

void write_manifest_csv(std::ostream& out, std::span<const SessionRecord> records) {
    std::set<std::string> codes;
    for (const auto& r : records) {
        for (const auto& [code, rating] : r.ratings) codes.insert(code);
    }
    out << "session_id,couple_id,speaker_id,gender";
    for (const auto& c : codes) out << ',' << c;
    out << '\n';
    for (const auto& r : records) {
        out << r.session_id << ',' << r.couple_id << ',' << r.speaker_id << ',' << to_string(r.gender);
        for (const auto& c : codes) {
            out << ',';
            if (const auto it = r.ratings.find(c); it != r.ratings.end()) out << format_number(it->second);
        }
        out << '\n';
    }
}

std::vector<SessionRecord> read_manifest_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("line 1: manifest is empty");
    const auto header = split_csv(line);
    if (header.size() < 4 || header[0] != "session_id" || header[1] != "couple_id" || header[2] != "speaker_id" ||
        header[3] != "gender") {
        fail_line(1, "manifest header must start with session_id,couple_id,speaker_id,gender");
    }
    std::vector<std::string> codes;
    for (std::size_t i = 4; i < header.size(); ++i) codes.emplace_back(header[i]);
    std::vector<SessionRecord> records;
    std::set<SessionKey> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) fail_line(line_no, "field count does not match the header");
        SessionRecord r;
        r.session_id = std::string(fields[0]);
        r.couple_id = std::string(fields[1]);
        r.speaker_id = std::string(fields[2]);
        try {
            r.gender = gender_from_string(fields[3]);
            for (std::size_t i = 0; i < codes.size(); ++i) {
                auto cell = fields[4 + i];
                while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.remove_suffix(1);
                if (!cell.empty()) r.ratings[codes[i]] = parse_number(cell);
            }
            r.validate();
        } catch (const InputError& e) {
            fail_line(line_no, e.what());
        }
        if (!seen.insert(r.key()).second) fail_line(line_no, "duplicate session " + r.key().str());
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<SessionRecord> read_manifest_json(const json& j) {
    std::vector<SessionRecord> records;
    const json& list = j.is_object() && j.contains("sessions") ? j.at("sessions") : j;
    if (!list.is_array()) throw InputError("JSON manifest must be an array of sessions");
    try {
        for (const auto& s : list) {
            SessionRecord r;
            r.session_id = s.at("session_id").get<std::string>();
            r.couple_id = s.at("couple_id").get<std::string>();
            r.speaker_id = s.at("speaker_id").get<std::string>();
            r.gender = gender_from_string(s.at("gender").get<std::string>());
            r.ratings = s.at("ratings").get<std::map<std::string, double>>();
            r.validate();
            records.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed JSON manifest: ") + e.what());
    }
    return records;
}

std::vector<SessionRecord> read_manifest(const std::filesystem::path& path) {
    if (path.extension() == ".json") return read_manifest_json(read_json_file(path));
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest " + path.string());
    return read_manifest_csv(in);
}

json model_to_json(const ModelFile& file) {
    json j = {{"format", "sddnn-model"}, {"version", 1}, {"regime", file.info.regime}, {"code", file.info.code}};
    if (file.info.threshold) {
        j["threshold"] = {{"value", file.info.threshold->threshold},
                          {"training_error", file.info.threshold->training_error}};
    }
    if (file.model) {
        if (const auto* n = std::get_if<Network>(&*file.model)) {
            j["kind"] = "network";
            j["network"] = network_to_json(*n);
        } else {
            j["kind"] = "composite";
            j["composite"] = composite_to_json(std::get<Composite>(*file.model));
        }
    } else {
        j["kind"] = "subnet_set";
        json subnets = json::array();
        for (std::size_t i = 0; i < file.subnets.size(); ++i) {
            subnets.push_back({{"name", i < file.subnet_names.size() ? file.subnet_names[i] : "subnet_" + std::to_string(i)},
                               {"network", network_to_json(file.subnets[i])}});
        }
        j["subnets"] = subnets;
    }
    if (!file.scaler.empty()) j["input_scaler"] = {{"mean", file.scaler.mean}, {"scale", file.scaler.scale}};
    return j;
}

ModelFile model_from_json(const json& j) {
    ModelFile file;
    try {
        if (j.at("format").get<std::string>() != "sddnn-model") throw ConfigError("not a model file");
        if (j.at("version").get<int>() != 1) throw ConfigError("unsupported model file version");
        file.info.regime = j.value("regime", "");
        file.info.code = j.value("code", "");
        if (j.contains("threshold")) {
            file.info.threshold = ThresholdModel{j.at("threshold").at("value").get<double>(),
                                                 j.at("threshold").at("training_error").get<double>()};
        }
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "network") {
            file.model = network_from_json(j.at("network"));
        } else if (kind == "composite") {
            file.model = composite_from_json(j.at("composite"));
        } else if (kind == "subnet_set") {
            for (const auto& s : j.at("subnets")) {
                file.subnet_names.push_back(s.at("name").get<std::string>());
                file.subnets.push_back(network_from_json(s.at("network")));
            }
        } else {
            throw ConfigError("unknown model kind '" + kind + "'");
        }
        if (j.contains("input_scaler")) {
            file.scaler.mean = j.at("input_scaler").at("mean").get<std::vector<double>>();
            file.scaler.scale = j.at("input_scaler").at("scale").get<std::vector<double>>();
            if (file.scaler.mean.size() != file.scaler.scale.size() ||
                std::any_of(file.scaler.scale.begin(), file.scaler.scale.end(), [](double v) { return !(v > 0.0); })) {
                throw ConfigError("input_scaler needs matching mean/scale lists with positive scales");
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed model file: ") + e.what());
    }
    return file;
}

json train_config_to_json(const TrainConfig& c) {
    return {{"regime", std::string(to_string(c.regime))},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"finetune_learning_rate", c.finetune_learning_rate},
            {"epsilon", c.epsilon},
            {"dropout_rate", c.dropout_rate},
            {"dense_hidden", c.dense_hidden},
            {"subnet_hidden", c.subnet_hidden},
            {"fusion_hidden", c.fusion_hidden},
            {"seed", c.seed},
            {"dev_fraction", c.dev_fraction},
            {"patience", c.patience},
            {"standardize_inputs", c.standardize_inputs}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    check_keys(j, config_keys(), "training config");
    if (j.contains("regime")) {
        std::string r;
        read_key(j, "regime", r);
        c.regime = regime_from_string(r);
    }
    read_key(j, "epochs", c.epochs);
    read_key(j, "batch_size", c.batch_size);
    read_key(j, "learning_rate", c.learning_rate);
    read_key(j, "finetune_learning_rate", c.finetune_learning_rate);
    read_key(j, "epsilon", c.epsilon);
    read_key(j, "dropout_rate", c.dropout_rate);
    read_key(j, "dense_hidden", c.dense_hidden);
    read_key(j, "subnet_hidden", c.subnet_hidden);
    read_key(j, "fusion_hidden", c.fusion_hidden);
    read_key(j, "seed", c.seed);
    read_key(j, "dev_fraction", c.dev_fraction);
    read_key(j, "patience", c.patience);
    read_key(j, "standardize_inputs", c.standardize_inputs);
    c.validate();
    return c;
}

json cv_config_to_json(const CvConfig& c) {
    json j = train_config_to_json(c.train);
    j.erase("regime");
    std::vector<std::string> regimes;
    for (auto r : c.regimes) regimes.emplace_back(to_string(r));
    j["codes"] = c.codes;
    j["regimes"] = regimes;
    j["partition"] = c.partition == PartitionMode::knowledge ? "knowledge" : "random";
    j["random_groups"] = c.random_groups;
    j["per_gender"] = c.per_gender;
    j["extreme_fraction"] = c.extreme_fraction;
    j["per_class"] = c.per_class;
    j["clamp_eps"] = c.clamp_eps;
    return j;
}

CvConfig cv_config_from_json(const json& j, CvConfig c) {
    check_keys(j, config_keys(), "cross-validation config");
    c.train = train_config_from_json(j, c.train);
    read_key(j, "codes", c.codes);
    if (j.contains("regimes")) {
        std::vector<std::string> names;
        read_key(j, "regimes", names);
        c.regimes.clear();
        for (const auto& n : names) c.regimes.push_back(regime_from_string(n));
    }
    if (j.contains("partition")) {
        std::string p;
        read_key(j, "partition", p);
        if (p == "knowledge") {
            c.partition = PartitionMode::knowledge;
        } else if (p == "random") {
            c.partition = PartitionMode::random;
        } else {
            throw ConfigError("partition must be 'knowledge' or 'random'");
        }
    }
    read_key(j, "random_groups", c.random_groups);
    read_key(j, "per_gender", c.per_gender);
    read_key(j, "extreme_fraction", c.extreme_fraction);
    read_key(j, "per_class", c.per_class);
    read_key(j, "clamp_eps", c.clamp_eps);
    read_key(j, "jobs", c.jobs);
    return c;
}

json synth_config_to_json(const SynthConfig& c) {
    json codes = json::array();
    for (const auto& code : c.codes) {
        codes.push_back({{"name", code.name},
                         {"effect_columns", code.effect_columns},
                         {"polarity", code.polarity},
                         {"rating_noise", code.rating_noise}});
    }
    return {{"num_couples", c.num_couples},
            {"sessions_per_couple", c.sessions_per_couple},
            {"hop", c.hop},
            {"mean_session_duration", c.mean_session_duration},
            {"effect_size", c.effect_size},
            {"nuisance_scale", c.nuisance_scale},
            {"noise_scale", c.noise_scale},
            {"episode_fraction", c.episode_fraction},
            {"mean_episode_seconds", c.mean_episode_seconds},
            {"min_segment_seconds", c.min_segment_seconds},
            {"max_segment_seconds", c.max_segment_seconds},
            {"codes", codes},
            {"layout", layout_to_json(c.layout)},
            {"seed", c.seed}};
}

SynthConfig synth_config_from_json(const json& j) {
    check_keys(j,
               {"num_couples", "sessions_per_couple", "hop", "mean_session_duration", "effect_size", "nuisance_scale",
                "noise_scale", "episode_fraction", "mean_episode_seconds", "min_segment_seconds", "max_segment_seconds",
                "codes", "layout", "seed"},
               "synthetic corpus config");
    SynthConfig c;
    read_key(j, "num_couples", c.num_couples);
    read_key(j, "sessions_per_couple", c.sessions_per_couple);
    read_key(j, "hop", c.hop);
    read_key(j, "mean_session_duration", c.mean_session_duration);
    read_key(j, "effect_size", c.effect_size);
    read_key(j, "nuisance_scale", c.nuisance_scale);
    read_key(j, "noise_scale", c.noise_scale);
    read_key(j, "episode_fraction", c.episode_fraction);
    read_key(j, "mean_episode_seconds", c.mean_episode_seconds);
    read_key(j, "min_segment_seconds", c.min_segment_seconds);
    read_key(j, "max_segment_seconds", c.max_segment_seconds);
    read_key(j, "seed", c.seed);
    try {
        if (j.contains("layout")) c.layout = layout_from_json(j.at("layout"));
        if (j.contains("codes")) {
            c.codes.clear();
            for (const auto& code : j.at("codes")) {
                BehaviorCodeSpec spec;
                spec.name = code.at("name").get<std::string>();
                spec.effect_columns = code.at("effect_columns").get<std::vector<std::size_t>>();
                spec.polarity = code.value("polarity", 1.0);
                spec.rating_noise = code.value("rating_noise", 0.5);
                c.codes.push_back(std::move(spec));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed synthetic corpus config: ") + e.what());
    }
    c.validate();
    return c;
}

json report_to_json(const CvReport& report, const CvConfig& config) {
    json results = json::array();
    for (const auto& r : report.results) {
        json folds = json::array();
        for (const auto& f : r.folds) {
            json decisions = json::array();
            for (const auto& d : f.decisions) {
                decisions.push_back({{"session_id", d.session.session_id},
                                     {"speaker_id", d.session.speaker_id},
                                     {"score", d.score},
                                     {"label", d.label},
                                     {"prediction", d.prediction}});
            }
            json fold = {{"pool", f.pool},
                         {"held_out_couple", f.held_out_couple},
                         {"train_sessions", f.train_sessions},
                         {"train_frames", f.train_frames},
                         {"skipped", f.skipped},
                         {"decisions", decisions}};
            if (f.skipped) {
                fold["skip_reason"] = f.skip_reason;
            } else {
                fold["threshold"] = f.threshold.threshold;
                fold["training_error"] = f.threshold.training_error;
                fold["loss_curves"] = f.loss_curves;
            }
            folds.push_back(std::move(fold));
        }
        results.push_back({{"code", r.code},
                           {"regime", std::string(to_string(r.regime))},
                           {"column", r.column},
                           {"accuracy", r.accuracy},
                           {"correct", r.correct},
                           {"tested", r.tested},
                           {"accuracy_by_pool", r.accuracy_by_pool},
                           {"parameter_count", r.parameter_count},
                           {"trainable_parameter_count", r.trainable_parameter_count},
                           {"folds", folds}});
    }
    json pools = json::array();
    for (const auto& p : report.pools) {
        pools.push_back({{"code", p.code},
                         {"pool", p.pool},
                         {"candidates", p.candidates},
                         {"per_class", p.per_class},
                         {"folds", p.folds},
                         {"degenerate", p.degenerate}});
    }
    return {{"format", "sddnn-cv-report"},
            {"version", 1},
            {"config", cv_config_to_json(config)},
            {"threshold_scope", "one threshold per fold and behavior code, fit on that fold's training sessions"},
            {"pools", pools},
            {"results", results},
            {"warnings", report.warnings}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw InputError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path.string());
    out << text;
    if (!out) throw InputError("failed writing " + path.string());
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

}  // namespace sddnn
