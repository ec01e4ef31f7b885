#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "sddnn/csv.hpp"
#include "sddnn/error.hpp"
#include "sddnn/io.hpp"

namespace sddnn::cli {

namespace fs = std::filesystem;

namespace {

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path.string());
    return in;
}

std::vector<FrameFeature> load_frames(const fs::path& path) {
    auto in = open_input(path);
    try {
        return read_frames_csv(in);
    } catch (const InputError& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

/// The layout file if given; otherwise the default layout when the width fits,
/// else anonymous columns (usable with random partitions only).
LldLayout resolve_layout(const std::string& layout_path, std::size_t frame_width) {
    if (!layout_path.empty()) return layout_from_json(read_json_file(layout_path));
    LldLayout layout = LldLayout::default_layout();
    if (layout.frame_dim() == frame_width) return layout;
    if (frame_width % kFunctionalsPerLld != 0) {
        throw InputError("frame width " + std::to_string(frame_width) + " is not a multiple of " +
                         std::to_string(kFunctionalsPerLld) + "; pass --layout");
    }
    layout = {};
    for (std::size_t i = 0; i < frame_width / kFunctionalsPerLld; ++i) {
        layout.names.push_back("lld_" + std::to_string(i));
        layout.families.emplace_back(std::nullopt);
    }
    return layout;
}

std::vector<std::string> manifest_codes(std::span<const SessionRecord> records) {
    std::set<std::string> codes;
    for (const auto& r : records) {
        for (const auto& [code, rating] : r.ratings) codes.insert(code);
    }
    return {codes.begin(), codes.end()};
}

void check_codes(const std::vector<std::string>& wanted, const std::vector<std::string>& available) {
    for (const auto& c : wanted) {
        if (std::find(available.begin(), available.end(), c) != available.end()) continue;
        std::string list;
        for (const auto& a : available) list += (list.empty() ? "" : ", ") + a;
        throw ConfigError("unknown behavior code '" + c + "'; available codes: " + (list.empty() ? "(none)" : list));
    }
}

CvConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    return cv_config_from_json(read_json_file(path));
}

std::map<SessionKey, std::vector<const FrameFeature*>> group_frames(std::span<const FrameFeature> frames) {
    std::map<SessionKey, std::vector<const FrameFeature*>> out;
    for (const auto& f : frames) out[{f.session_id, f.speaker_id}].push_back(&f);
    for (auto& [key, list] : out) {
        std::stable_sort(list.begin(), list.end(),
                         [](const FrameFeature* a, const FrameFeature* b) { return a->window_start < b->window_start; });
    }
    return out;
}

// Frame width a model reads.
std::size_t required_width(const Model& m) {
    if (const auto* c = std::get_if<Composite>(&m)) return c->input_dim;
    const auto& n = std::get<Network>(m);
    if (n.feature_indices.empty()) return n.input_dim();
    return *std::max_element(n.feature_indices.begin(), n.feature_indices.end()) + 1;
}

// Standardized copies of every session's frames; the sessions are repointed at the copies.
std::unique_ptr<std::vector<FrameFeature>> scale_sessions(std::span<SessionFrames> sessions, const FeatureScaler& scaler) {
    auto out = std::make_unique<std::vector<FrameFeature>>();
    if (scaler.empty()) return out;
    std::size_t total = 0;
    for (const auto& s : sessions) total += s.frames.size();
    out->reserve(total);
    for (auto& s : sessions) {
        for (auto*& f : s.frames) {
            out->push_back({f->session_id, f->speaker_id, f->window_start, scaler.apply(f->values)});
            f = &out->back();
        }
    }
    return out;
}

// ---- synth ----

struct SynthArgs {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out, std::ostream& err) {
    SynthConfig config = synth_config_from_json(read_json_file(a.config));
    if (a.seed) config.seed = *a.seed;
    const SynthCorpus corpus = synth_corpus(config);

    fs::create_directories(a.out);
    std::ostringstream lld;
    write_lld_csv(lld, corpus.streams, corpus.layout);
    write_text_file(fs::path(a.out) / "lld.csv", lld.str());
    std::ostringstream manifest;
    write_manifest_csv(manifest, corpus.records);
    write_text_file(fs::path(a.out) / "manifest.csv", manifest.str());
    write_text_file(fs::path(a.out) / "layout.json", layout_to_json(corpus.layout).dump(2) + "\n");
    write_text_file(fs::path(a.out) / "synth_config.json", synth_config_to_json(config).dump(2) + "\n");

    double speech = 0.0;
    std::size_t samples = 0;
    for (const auto& s : corpus.streams) {
        speech += s.speech_seconds();
        samples += s.total_samples();
    }
    out << "couples " << config.num_couples << ", session-speakers " << corpus.records.size() << ", LLD rows "
        << samples << ", speech " << format_number(std::round(speech * 100.0) / 100.0) << " s\n";
    err << "wrote lld.csv, manifest.csv, layout.json and synth_config.json to " << a.out << '\n';
    return 0;
}

// ---- extract ----

struct ExtractArgs {
    std::string lld;
    std::string layout;
    std::string out;
    double window = 20.0;
    double shift = 1.0;
    double min_segment = 1.5;
    double hop = 0.01;
    std::string time_axis = "speech";
};

int cmd_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
    WindowConfig wc;
    wc.window_len = a.window;
    wc.shift = a.shift;
    if (a.time_axis == "speech") {
        wc.time_axis = TimeAxis::speech;
    } else if (a.time_axis == "wall") {
        wc.time_axis = TimeAxis::wall;
    } else {
        throw ConfigError("--time-axis must be 'speech' or 'wall'");
    }
    if (!(a.window > 0.0) || !(a.shift > 0.0)) throw ConfigError("--window and --shift must be positive");
    if (!(a.min_segment >= 0.0)) throw ConfigError("--min-segment must be >= 0");

    std::map<std::string, std::optional<LldFamily>> families;
    if (!a.layout.empty()) families = families_from_json(read_json_file(a.layout));
    auto in = open_input(a.lld);
    LldTable table;
    try {
        table = read_lld_csv(in, families, a.hop);
    } catch (const InputError& e) {
        throw InputError(a.lld + ": " + e.what());
    }

    CorpusExtraction ex = extract_corpus(table.streams, a.min_segment, wc);
    for (const auto& w : ex.warnings) err << "warning: " << w << '\n';
    const auto& frames = ex.frames;
    std::ostringstream csv;
    write_frames_csv(csv, frames, table.layout.frame_dim());
    write_text_file(a.out, csv.str());
    err << "streams " << table.streams.size() << ", frames " << frames.size() << ", dropped short segments "
        << ex.dropped_segments << ", dropped NaN frames " << ex.dropped_nan_frames << ", streams without frames "
        << ex.empty_streams.size() << '\n';
    out << frames.size() << " frames x " << table.layout.frame_dim() << " features -> " << a.out << '\n';
    return 0;
}

// ---- train ----

struct TrainArgs {
    std::string frames;
    std::string manifest;
    std::string regime;
    std::string config;
    std::string model_out;
    std::string base_model;
    std::string code;
    std::string layout;
    std::string gender = "all";
    std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    CvConfig cv = load_config(a.config);
    TrainConfig tc = cv.train;
    tc.regime = regime_from_string(a.regime);
    if (a.seed) tc.seed = *a.seed;
    tc.validate();
    const bool needs_base = tc.regime == Regime::sj || tc.regime == Regime::sd_init;
    if (needs_base && a.base_model.empty()) {
        throw ConfigError("--regime " + a.regime + " needs --base-model pointing at a trained SD model");
    }
    if (a.gender != "all" && a.gender != "F" && a.gender != "M") throw ConfigError("--gender must be F, M or all");

    std::optional<Composite> base;
    FeatureScaler scaler;
    if (needs_base) {
        ModelFile bf = model_from_json(read_json_file(a.base_model));
        if (!bf.model || !std::holds_alternative<Composite>(*bf.model) || bf.info.regime != "sd") {
            throw ConfigError("--base-model must be a model trained with --regime sd");
        }
        base = std::get<Composite>(*bf.model);
        // Continued training keeps the base model's input space.
        scaler = std::move(bf.scaler);
    }

    const auto frames = load_frames(a.frames);
    if (frames.empty()) throw InputError(a.frames + " holds no frames");
    const auto records = read_manifest(a.manifest);
    const auto available = manifest_codes(records);
    std::string code = a.code;
    if (code.empty()) {
        if (available.size() != 1) {
            check_codes({"(none given)"}, available);
        }
        code = available.front();
    }
    check_codes({code}, available);

    const auto by_session = group_frames(frames);
    std::vector<SessionRecord> candidates;
    for (const auto& r : records) {
        r.validate();
        if (!r.ratings.contains(code) || !by_session.contains(r.key())) continue;
        if (a.gender == "all" || to_string(r.gender) == a.gender) candidates.push_back(r);
    }
    const std::size_t per_class =
        cv.per_class ? cv.per_class
                     : static_cast<std::size_t>(std::floor(cv.extreme_fraction * static_cast<double>(candidates.size())));
    if (per_class == 0) throw ConfigError("too few rated sessions with frames for extreme selection");
    const ExtremeSelection selection = select_extremes(candidates, code, per_class);

    std::vector<SessionFrames> sessions;
    for (const auto& r : selection.selected) sessions.push_back({r.key(), r.couple_id, *r.binary_label, by_session.at(r.key())});
    if (!needs_base && tc.standardize_inputs) {
        std::vector<std::span<const double>> rows;
        for (const auto& s : sessions) {
            for (const auto* f : s.frames) rows.emplace_back(f->values);
        }
        scaler = fit_scaler(rows);
    }
    const auto scaled = scale_sessions(sessions, scaler);
    std::vector<TrainingPair> pairs;
    for (const auto& s : sessions) {
        for (const auto* f : s.frames) pairs.push_back({f->values, static_cast<double>(s.label), s.key, s.couple_id});
    }

    const std::size_t width = frames.front().values.size();
    ModelFile file;
    file.info.regime = std::string(to_string(tc.regime));
    file.info.code = code;
    file.scaler = scaler;
    std::vector<std::vector<double>> curves;
    std::vector<std::string> warnings;
    std::function<std::vector<double>(const SessionFrames&)> scorer;

    if (tc.regime == Regime::dense) {
        auto t = train_dense(pairs, tc);
        curves.push_back(t.log.loss);
        file.model = std::move(t.model);
    } else if (tc.regime == Regime::sj) {
        auto t = train_sj(*base, pairs, tc);
        curves.push_back(t.log.loss);
        file.model = std::move(t.model);
    } else if (tc.regime == Regime::sd_init) {
        auto t = train_dense_sdinit(*base, pairs, tc);
        curves.push_back(t.log.loss);
        file.model = std::move(t.model);
    } else {
        const LldLayout layout = resolve_layout(a.layout, width);
        if (layout.frame_dim() != width) {
            throw InputError("frame width " + std::to_string(width) + " does not match the layout (" +
                             std::to_string(layout.frame_dim()) + ")");
        }
        const auto assignment =
            partition_features(cv.partition, layout, cv.random_groups, derive_seed(tc.seed, "partition"));
        auto trained = train_subnets(pairs, assignment, tc);
        std::vector<Network> subnets;
        for (auto& t : trained) {
            curves.push_back(t.log.loss);
            for (auto& w : t.log.warnings) warnings.push_back(w);
            subnets.push_back(std::move(t.model));
        }
        if (tc.regime == Regime::subnet) {
            file.subnets = subnets;
            for (const auto& g : assignment.groups) file.subnet_names.push_back(g.name);
        } else {
            auto sd = train_sd(subnets, assignment, pairs, tc);
            curves.push_back(sd.log.loss);
            file.model = std::move(sd.model);
        }
    }
    if (file.model) {
        scorer = [&](const SessionFrames& s) { return frame_scores(*file.model, s); };
    } else {
        scorer = [&](const SessionFrames& s) { return fused_frame_scores(file.subnets, s); };
    }
    std::vector<LabeledScore> fit;
    for (const auto& s : sessions) fit.push_back({aggregate_session(scorer(s), cv.clamp_eps), s.label});
    file.info.threshold = fit_threshold(fit);

    write_text_file(a.model_out, model_to_json(file).dump(1) + "\n");
    json inputs = {{"frames", {{"path", a.frames}, {"fnv1a64", file_digest(a.frames)}}},
                   {"manifest", {{"path", a.manifest}, {"fnv1a64", file_digest(a.manifest)}}}};
    if (needs_base) inputs["base_model"] = {{"path", a.base_model}, {"fnv1a64", file_digest(a.base_model)}};
    if (!a.layout.empty()) inputs["layout"] = {{"path", a.layout}, {"fnv1a64", file_digest(a.layout)}};
    const json run = {{"command", "train"},
                      {"code", code},
                      {"gender", a.gender},
                      {"config", train_config_to_json(tc)},
                      {"partition", cv.partition == PartitionMode::knowledge ? "knowledge" : "random"},
                      {"seed", tc.seed},
                      {"inputs", inputs},
                      {"sessions", sessions.size()},
                      {"frames", pairs.size()},
                      {"threshold", file.info.threshold->threshold},
                      {"training_error", file.info.threshold->training_error},
                      {"loss_curves", curves},
                      {"warnings", warnings}};
    write_text_file(a.model_out + ".run.json", run.dump(1) + "\n");
    for (const auto& w : warnings) err << "warning: " << w << '\n';
    if (selection.degenerate) err << "warning: rating ties at the extreme cut were broken by session id\n";
    out << "trained " << file.info.regime << " for " << code << " on " << sessions.size() << " sessions ("
        << pairs.size() << " frames); threshold " << format_number(file.info.threshold->threshold)
        << ", training error " << format_number(file.info.threshold->training_error) << '\n';
    return 0;
}

// ---- cv ----

struct CvArgs {
    std::string frames;
    std::string manifest;
    std::vector<std::string> codes;
    std::vector<std::string> regimes;
    std::string config;
    std::string report;
    std::string layout;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    bool pooled = false;
};

int cmd_cv(const CvArgs& a, std::ostream& out, std::ostream& err) {
    CvConfig config = load_config(a.config);
    if (a.seed) config.train.seed = *a.seed;
    if (a.jobs) config.jobs = *a.jobs;
    if (a.pooled) config.per_gender = false;
    if (!a.regimes.empty()) {
        config.regimes.clear();
        for (const auto& r : a.regimes) config.regimes.push_back(regime_from_string(r));
    }
    const auto frames = load_frames(a.frames);
    if (frames.empty()) throw InputError(a.frames + " holds no frames");
    const auto records = read_manifest(a.manifest);
    const auto available = manifest_codes(records);
    if (!a.codes.empty()) config.codes = a.codes;
    if (config.codes.empty()) config.codes = available;
    check_codes(config.codes, available);
    config.validate();

    const LldLayout layout = resolve_layout(a.layout, frames.front().values.size());
    const CvReport report = run_cv({frames, records, layout}, config);
    if (!a.report.empty()) write_text_file(a.report, report_to_json(report, config).dump(1) + "\n");
    for (const auto& w : report.warnings) err << "warning: " << w << '\n';
    out << render_table(report, true);
    return 0;
}

// ---- trajectory ----

struct TrajectoryArgs {
    std::vector<std::string> models;
    std::string frames;
    std::string session;
    std::string speaker;
    std::string out;
};

int cmd_trajectory(const TrajectoryArgs& a, std::ostream& out, std::ostream& err) {
    const auto frames = load_frames(a.frames);
    std::set<std::string> speakers;
    for (const auto& f : frames) {
        if (f.session_id == a.session && (a.speaker.empty() || f.speaker_id == a.speaker)) speakers.insert(f.speaker_id);
    }
    if (speakers.empty()) {
        throw InputError("session '" + a.session + (a.speaker.empty() ? "" : "/" + a.speaker) + "' has no frames in " +
                         a.frames);
    }
    if (speakers.size() > 1) {
        std::string list;
        for (const auto& s : speakers) list += (list.empty() ? "" : ", ") + s;
        throw ConfigError("session '" + a.session + "' has several speakers (" + list + "); pass --speaker");
    }
    const SessionKey key{a.session, *speakers.begin()};
    const auto grouped = group_frames(frames);
    const SessionFrames session{key, "", 0, grouped.at(key)};
    std::vector<double> times;
    for (const auto* f : session.frames) times.push_back(f->window_start);

    std::vector<TrajectorySeries> series;
    std::set<std::string> names;
    for (const auto& path : a.models) {
        const ModelFile file = model_from_json(read_json_file(path));
        const std::string stem = !file.info.code.empty() ? file.info.code : fs::path(path).stem().string();
        std::string name = stem;
        for (int k = 2; names.contains(name); ++k) name = stem + "_" + std::to_string(k);
        names.insert(name);
        std::size_t needed = 0;
        if (file.model) {
            needed = required_width(*file.model);
        } else {
            for (const auto& n : file.subnets) needed = std::max(needed, required_width(Model{n}));
        }
        const std::size_t width = session.frames.front()->values.size();
        if (needed > width) {
            throw InputError(path + " expects " + std::to_string(needed) + " features; frames hold " + std::to_string(width));
        }
        SessionFrames view = session;
        const auto scaled = scale_sessions(std::span<SessionFrames>(&view, 1), file.scaler);
        auto scores = file.model ? frame_scores(*file.model, view) : fused_frame_scores(file.subnets, view);
        series.push_back({name, times, std::move(scores)});
    }
    std::ostringstream csv;
    write_trajectory(csv, series);
    if (a.out.empty() || a.out == "-") {
        out << csv.str();
    } else {
        write_text_file(a.out, csv.str());
        out << times.size() << " frames x " << series.size() << " models -> " << a.out << '\n';
    }
    err << "trajectory for " << key.str() << '\n';
    return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Behavior recognition with subsystem-disjoint networks"};
    app.name("sddnn");
    app.require_subcommand(1, 1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate a synthetic LLD corpus with behavior ratings");
    s->add_option("--config", synth.config, "Synthetic corpus config (JSON)")->required();
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--seed", synth.seed, "Override the config seed");

    ExtractArgs extract;
    auto* e = app.add_subcommand("extract", "Turn LLD streams into windowed functional frames");
    e->add_option("--lld", extract.lld, "LLD CSV")->required();
    e->add_option("--layout", extract.layout, "Column families (layout JSON)");
    e->add_option("--out", extract.out, "Frame CSV to write")->required();
    e->add_option("--window", extract.window, "Window length in seconds")->capture_default_str();
    e->add_option("--shift", extract.shift, "Window shift in seconds")->capture_default_str();
    e->add_option("--min-segment", extract.min_segment, "Drop segments shorter than this (s)")->capture_default_str();
    e->add_option("--hop", extract.hop, "LLD sample period in seconds")->capture_default_str();
    e->add_option("--time-axis", extract.time_axis, "speech or wall")->capture_default_str();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train one regime on the extreme sessions of one behavior code");
    t->add_option("--frames", train.frames, "Frame CSV")->required();
    t->add_option("--manifest", train.manifest, "Session manifest (CSV or JSON)")->required();
    t->add_option("--regime", train.regime, "dense, subnet, sd, sj or sd_init")->required();
    t->add_option("--config", train.config, "Training config (JSON)");
    t->add_option("--model-out", train.model_out, "Model JSON to write")->required();
    t->add_option("--base-model", train.base_model, "Trained SD model (sj and sd_init)");
    t->add_option("--code", train.code, "Behavior code (default: the manifest's only code)");
    t->add_option("--layout", train.layout, "Layout JSON matching the frame columns");
    t->add_option("--gender", train.gender, "F, M or all")->capture_default_str();
    t->add_option("--seed", train.seed, "Override the config seed");

    CvArgs cv;
    auto* c = app.add_subcommand("cv", "Leave-one-couple-out evaluation across codes and regimes");
    c->add_option("--frames", cv.frames, "Frame CSV")->required();
    c->add_option("--manifest", cv.manifest, "Session manifest (CSV or JSON)")->required();
    c->add_option("--codes", cv.codes, "Behavior codes (default: all in the manifest)")->delimiter(',');
    c->add_option("--regimes", cv.regimes, "Regimes to run")->delimiter(',');
    c->add_option("--config", cv.config, "Config (JSON)");
    c->add_option("--report", cv.report, "Report JSON to write");
    c->add_option("--layout", cv.layout, "Layout JSON matching the frame columns");
    c->add_option("--seed", cv.seed, "Override the config seed");
    c->add_option("--jobs", cv.jobs, "Worker threads");
    c->add_flag("--pooled", cv.pooled, "Pool genders instead of per-gender models");

    TrajectoryArgs traj;
    auto* r = app.add_subcommand("trajectory", "Per-frame scores of one session under one or more models");
    r->add_option("--model", traj.models, "Model JSON (repeatable)")->required();
    r->add_option("--frames", traj.frames, "Frame CSV")->required();
    r->add_option("--session", traj.session, "Session id")->required();
    r->add_option("--speaker", traj.speaker, "Speaker id when the session has several");
    r->add_option("--out", traj.out, "CSV to write ('-' for stdout)");

    std::vector<std::string> argv_store{"sddnn"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& a : argv_store) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& pe) {
        const int code = app.exit(pe, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*s) return cmd_synth(synth, out, err);
        if (*e) return cmd_extract(extract, out, err);
        if (*t) return cmd_train(train, out, err);
        if (*c) return cmd_cv(cv, out, err);
        if (*r) return cmd_trajectory(traj, out, err);
    } catch (const ConfigError& ex) {
        err << "error: " << ex.what() << '\n';
        return 2;
    } catch (const InputError& ex) {
        err << "error: " << ex.what() << '\n';
        return 2;
    } catch (const std::exception& ex) {
        err << "internal error: " << ex.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace sddnn::cli
