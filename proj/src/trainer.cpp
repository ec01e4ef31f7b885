#include "sddnn/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <iomanip>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "sddnn/error.hpp"

namespace sddnn {

std::string_view to_string(Regime r) {
    switch (r) {
        case Regime::dense:
            return "dense";
        case Regime::subnet:
            return "subnet";
        case Regime::sd:
            return "sd";
        case Regime::sj:
            return "sj";
        case Regime::sd_init:
            return "sd_init";
    }
    return "sd";
}

Regime regime_from_string(std::string_view s) {
    for (auto r : {Regime::dense, Regime::subnet, Regime::sd, Regime::sj, Regime::sd_init}) {
        if (s == to_string(r)) return r;
    }
    throw ConfigError("unknown regime '" + std::string(s) + "' (expected dense, subnet, sd, sj or sd_init)");
}

void TrainConfig::validate() const {
    if (epochs == 0 || batch_size == 0) throw ConfigError("epochs and batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !(finetune_learning_rate >= 0.0) || !(epsilon >= 0.0)) {
        throw ConfigError("learning rates and epsilon must be >= 0");
    }
    if (!(dropout_rate >= 0.0) || dropout_rate >= 1.0) throw ConfigError("dropout_rate must lie in [0, 1)");
    if (subnet_hidden == 0) throw ConfigError("subnet_hidden must be >= 1");
    for (auto w : dense_hidden) {
        if (w == 0) throw ConfigError("dense hidden widths must be >= 1");
    }
    for (auto w : fusion_hidden) {
        if (w == 0) throw ConfigError("fusion hidden widths must be >= 1");
    }
    if (!(dev_fraction >= 0.0) || dev_fraction >= 1.0) throw ConfigError("dev_fraction must lie in [0, 1)");
    if (patience == 0) throw ConfigError("patience must be >= 1");
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    // FNV-1a over the tag, then splitmix64 finalization of the combination.
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ULL + (index << 6) + (index >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

namespace {

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> dev;
};

Split split_by_couple(std::span<const TrainingPair> data, const TrainConfig& config) {
    Split split;
    if (config.dev_fraction > 0.0) {
        std::set<std::string> unique;
        for (const auto& p : data) unique.insert(p.couple_id);
        std::vector<std::string> couples(unique.begin(), unique.end());
        if (couples.size() >= 2) {
            Rng rng(derive_seed(config.seed, "dev-split"));
            for (std::size_t i = couples.size() - 1; i > 0; --i) std::swap(couples[i], couples[rng() % (i + 1)]);
            auto n_dev = static_cast<std::size_t>(std::ceil(config.dev_fraction * static_cast<double>(couples.size())));
            n_dev = std::clamp<std::size_t>(n_dev, 1, couples.size() - 1);
            const std::set<std::string> dev(couples.begin(), couples.begin() + static_cast<std::ptrdiff_t>(n_dev));
            for (std::size_t i = 0; i < data.size(); ++i) (dev.contains(data[i].couple_id) ? split.dev : split.train).push_back(i);
            return split;
        }
    }
    split.train.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) split.train[i] = i;
    return split;
}

// Adds scale * dL/dtheta for sample `index` into the gradient buffer and returns its loss.
using SampleGradient = std::function<double(std::size_t index, Gradients& accum, double scale, Rng& rng)>;
using SampleLoss = std::function<double(std::size_t index)>;

TrainingLog fit_layers(std::vector<Layer>& layers, const Split& split, const TrainConfig& config, double learning_rate,
                       std::uint64_t seed, const SampleGradient& sample_gradient, const SampleLoss& sample_loss) {
    TrainingLog log;
    if (split.train.empty()) throw ConfigError("training needs at least one sample");
    OptimizerState optimizer = make_optimizer(layers, learning_rate, config.epsilon);
    Gradients accum = zero_gradients(layers);
    Rng rng(seed);
    std::vector<std::size_t> order = split.train;

    double best_dev = std::numeric_limits<double>::infinity();
    std::vector<Layer> best_layers;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (auto& g : accum) {
                std::fill(g.weights.begin(), g.weights.end(), 0.0);
                std::fill(g.biases.begin(), g.biases.end(), 0.0);
            }
            const double scale = 1.0 / static_cast<double>(end - start);
            for (std::size_t b = start; b < end; ++b) total += sample_gradient(order[b], accum, scale, rng);
            adagrad_step(layers, accum, optimizer);
        }
        log.loss.push_back(total / static_cast<double>(order.size()));

        if (split.dev.empty()) continue;
        double dev = 0.0;
        for (std::size_t i : split.dev) dev += sample_loss(i);
        dev /= static_cast<double>(split.dev.size());
        log.dev_loss.push_back(dev);
        if (dev < best_dev) {
            best_dev = dev;
            best_layers = layers;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            layers = best_layers;
            log.stopped_early = true;
            break;
        }
    }
    return log;
}

// Contiguous row-major copy of each pair's input (optionally a column subset).
std::vector<double> gather_inputs(std::span<const TrainingPair> data, std::span<const std::size_t> columns,
                                  std::size_t& width) {
    if (data.empty()) throw ConfigError("training needs at least one sample");
    width = columns.empty() ? data.front().input.size() : columns.size();
    std::vector<double> out;
    out.reserve(data.size() * width);
    for (const auto& p : data) {
        if (columns.empty()) {
            if (p.input.size() != width) throw InputError("training frames have inconsistent widths");
            out.insert(out.end(), p.input.begin(), p.input.end());
        } else {
            for (std::size_t c : columns) {
                if (c >= p.input.size()) throw InputError("training frame narrower than the feature assignment");
                out.push_back(p.input[c]);
            }
        }
    }
    return out;
}

// Trains `layers` as a plain stack on pre-gathered inputs.
TrainingLog fit_stack(std::vector<Layer>& layers, const std::vector<double>& inputs, std::size_t width,
                      std::span<const TrainingPair> data, const TrainConfig& config, double learning_rate,
                      std::uint64_t seed, double dropout_rate) {
    const Split split = split_by_couple(data, config);
    ForwardPass pass;
    std::vector<double> dropped;
    const DropoutSpec dropout{dropout_rate};
    auto row = [&](std::size_t i) { return std::span<const double>(inputs).subspan(i * width, width); };
    SampleGradient grad = [&](std::size_t i, Gradients& accum, double scale, Rng& rng) {
        if (dropout.rate > 0.0) {
            dropped = apply_input_dropout(row(i), dropout, rng);
            forward_into(layers, dropped, pass);
        } else {
            forward_into(layers, row(i), pass);
        }
        const double diff = pass.output()[0] - data[i].target;
        const double g = 2.0 * diff;
        backpropagate(layers, 0, pass, std::span<const double>(&g, 1), scale, accum, nullptr);
        return diff * diff;
    };
    SampleLoss loss = [&](std::size_t i) {
        forward_into(layers, row(i), pass);
        const double diff = pass.output()[0] - data[i].target;
        return diff * diff;
    };
    return fit_layers(layers, split, config, learning_rate, seed, grad, loss);
}

bool has_constant_column(const std::vector<double>& inputs, std::size_t width) {
    const std::size_t rows = inputs.size() / width;
    for (std::size_t c = 0; c < width; ++c) {
        bool constant = true;
        for (std::size_t r = 1; r < rows && constant; ++r) constant = inputs[r * width + c] == inputs[c];
        if (constant) return true;
    }
    return false;
}

}  // namespace

Trained<Network> train_dense(std::span<const TrainingPair> data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw ConfigError("dense training needs at least one training pair");
    std::size_t width = 0;
    const auto inputs = gather_inputs(data, {}, width);
    std::vector<LayerShape> shapes;
    std::size_t in = width;
    for (auto h : config.dense_hidden) {
        shapes.push_back({in, h, Activation::tanh});
        in = h;
    }
    shapes.push_back({in, 1, Activation::sigmoid});
    Trained<Network> out{init_params(shapes, derive_seed(config.seed, "dense-init")), {}};
    out.log = fit_stack(out.model.layers, inputs, width, data, config, config.learning_rate, derive_seed(config.seed, "dense-fit"),
                        config.dropout_rate);
    out.model.trained = true;
    return out;
}

std::vector<Trained<Network>> train_subnets(std::span<const TrainingPair> data, const SubnetAssignment& assignment,
                                            const TrainConfig& config) {
    config.validate();
    assignment.validate();
    if (data.empty()) throw ConfigError("subnet training needs at least one training pair");
    if (data.front().input.size() != assignment.feature_dim) {
        throw InputError("frame width " + std::to_string(data.front().input.size()) +
                         " does not match the feature assignment width " + std::to_string(assignment.feature_dim));
    }
    std::vector<Trained<Network>> out;
    for (std::size_t j = 0; j < assignment.groups.size(); ++j) {
        const auto& group = assignment.groups[j];
        Trained<Network> t{build_subnet(group.feature_indices, config.subnet_hidden,
                                        derive_seed(config.seed, "subnet-init", j)),
                           {}};
        std::size_t width = 0;
        const auto inputs = gather_inputs(data, group.feature_indices, width);
        std::string warning;
        if (has_constant_column(inputs, width)) warning = "subnet '" + group.name + "' has zero-variance inputs";
        t.log = fit_stack(t.model.layers, inputs, width, data, config, config.learning_rate,
                          derive_seed(config.seed, "subnet-fit", j), 0.0);
        if (!warning.empty()) t.log.warnings.push_back(warning);
        t.model.trained = true;
        out.push_back(std::move(t));
    }
    return out;
}

Trained<Composite> train_sd(std::span<const Network> subnets, const SubnetAssignment& assignment,
                            std::span<const TrainingPair> data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw ConfigError("SD training needs at least one training pair");
    if (subnets.size() != assignment.groups.size()) throw ConfigError("one subnet per feature group is required");
    Trained<Composite> out{compose_sd(subnets, config.fusion_hidden, assignment.feature_dim,
                                      derive_seed(config.seed, "fusion-init")),
                           {}};
    for (std::size_t j = 0; j < assignment.groups.size(); ++j) {
        if (out.model.groups[j].feature_indices != assignment.groups[j].feature_indices) {
            throw ConfigError("subnet " + std::to_string(j) + " does not read its assigned feature group");
        }
        out.model.groups[j].name = assignment.groups[j].name;
    }

    // The base is frozen, so its hidden outputs are fixed per frame and computed once.
    const std::size_t width = out.model.concat_width();
    std::vector<double> hiddens;
    hiddens.reserve(data.size() * width);
    for (const auto& p : data) {
        const auto h = branch_hiddens(out.model, p.input);
        hiddens.insert(hiddens.end(), h.begin(), h.end());
    }
    const auto fusion = out.model.fusion();
    std::vector<Layer> fusion_layers(fusion.begin(), fusion.end());
    out.log = fit_stack(fusion_layers, hiddens, width, data, config, config.learning_rate,
                        derive_seed(config.seed, "fusion-fit"), 0.0);
    std::copy(fusion_layers.begin(), fusion_layers.end(), out.model.fusion().begin());
    out.model.trained = true;
    return out;
}

Trained<Composite> train_sj(const Composite& sd, std::span<const TrainingPair> data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw ConfigError("SJ training needs at least one training pair");
    if (!sd.trained) throw ConfigError("SJ training starts from a trained SD model");
    Trained<Composite> out{unfreeze(sd), {}};
    Composite& model = out.model;
    const Split split = split_by_couple(data, config);
    CompositePass pass;
    SampleGradient grad = [&](std::size_t i, Gradients& accum, double scale, Rng&) {
        forward_into(model, data[i].input, pass);
        const double diff = pass.output()[0] - data[i].target;
        const double target = data[i].target;
        backpropagate(model, pass, std::span<const double>(&target, 1), scale, accum);
        return diff * diff;
    };
    SampleLoss loss = [&](std::size_t i) {
        forward_into(model, data[i].input, pass);
        const double diff = pass.output()[0] - data[i].target;
        return diff * diff;
    };
    out.log = fit_layers(model.layers, split, config, config.finetune_learning_rate, derive_seed(config.seed, "sj-fit"),
                         grad, loss);
    model.trained = true;
    return out;
}

Trained<Network> train_dense_sdinit(const Composite& sd, std::span<const TrainingPair> data, const TrainConfig& config) {
    config.validate();
    if (data.empty()) throw ConfigError("SD-init training needs at least one training pair");
    if (!sd.trained) throw ConfigError("SD-init training starts from a trained SD model");
    Trained<Network> out{densify(sd), {}};
    std::size_t width = 0;
    const auto inputs = gather_inputs(data, {}, width);
    out.log = fit_stack(out.model.layers, inputs, width, data, config, config.finetune_learning_rate,
                        derive_seed(config.seed, "sdinit-fit"), 0.0);
    out.model.trained = true;
    return out;
}

std::vector<double> frame_scores(const Model& model, const SessionFrames& session) {
    std::vector<double> out;
    out.reserve(session.frames.size());
    for (const auto* f : session.frames) out.push_back(score(model, f->values));
    return out;
}

std::vector<double> fused_frame_scores(std::span<const Network> subnets, const SessionFrames& session) {
    if (subnets.empty()) throw ConfigError("late fusion needs at least one subnet");
    std::vector<double> out;
    out.reserve(session.frames.size());
    for (const auto* f : session.frames) {
        double sum = 0.0;
        for (const auto& s : subnets) sum += score(s, f->values);
        out.push_back(sum / static_cast<double>(subnets.size()));
    }
    return out;
}

void CvConfig::validate() const {
    train.validate();
    if (codes.empty()) throw ConfigError("cross-validation needs at least one behavior code");
    if (regimes.empty()) throw ConfigError("cross-validation needs at least one regime");
    if (per_class == 0 && !(extreme_fraction > 0.0 && extreme_fraction <= 0.5)) {
        throw ConfigError("extreme_fraction must lie in (0, 0.5]");
    }
    if (!(clamp_eps >= 0.0) || clamp_eps >= 0.5) throw ConfigError("clamp_eps must lie in [0, 0.5)");
    if (jobs == 0) throw ConfigError("jobs must be >= 1");
}

namespace {

std::string column_label(Regime r) {
    switch (r) {
        case Regime::dense:
            return "Dense";
        case Regime::subnet:
            return "Subnet";
        case Regime::sd:
            return "SD-DNN";
        case Regime::sj:
            return "SJ-DNN";
        case Regime::sd_init:
            return "DNN_SD-init";
    }
    return "";
}

struct ColumnOutcome {
    FoldResult fold;
    double seconds = 0.0;
    std::size_t parameters = 0;
    std::size_t trainable = 0;
};

struct FoldTask {
    std::size_t code_index = 0;
    std::string pool;
    std::size_t fold_index = 0;
    const std::vector<SessionRecord>* labeled = nullptr;
    const Fold* fold = nullptr;
    // Filled by the worker, keyed by column id.
    std::map<std::string, ColumnOutcome> columns;
    std::vector<std::string> warnings;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

FoldResult evaluate_scorer(const std::function<std::vector<double>(const SessionFrames&)>& scorer,
                           std::span<const SessionFrames> train, std::span<const SessionFrames> test, double eps,
                           FoldResult base) {
    std::vector<LabeledScore> fit;
    for (const auto& s : train) fit.push_back({aggregate_session(scorer(s), eps), s.label});
    base.threshold = fit_threshold(fit);
    for (const auto& s : test) {
        const double q = aggregate_session(scorer(s), eps);
        base.decisions.push_back({s.key, q, s.label, classify(q, base.threshold)});
    }
    return base;
}

void run_fold(FoldTask& task, const CvConfig& config, const SubnetAssignment& assignment,
              const std::map<SessionKey, std::vector<const FrameFeature*>>& frames_by_session) {
    const std::string& code = config.codes[task.code_index];
    const Fold& fold = *task.fold;
    std::map<SessionKey, const SessionRecord*> records;
    for (const auto& r : *task.labeled) records[r.key()] = &r;

    auto session_frames = [&](const SessionKey& key) {
        const SessionRecord& r = *records.at(key);
        return SessionFrames{key, r.couple_id, *r.binary_label, frames_by_session.at(key)};
    };
    std::vector<SessionFrames> train_sessions;
    std::vector<SessionFrames> test_sessions;
    for (const auto& k : fold.train) train_sessions.push_back(session_frames(k));
    for (const auto& k : fold.test) test_sessions.push_back(session_frames(k));

    // Standardized copies of the fold's frames, fitted on training frames only.
    std::vector<FrameFeature> scaled;
    if (config.train.standardize_inputs && !train_sessions.empty()) {
        std::vector<std::span<const double>> rows;
        std::size_t total = 0;
        for (const auto& s : train_sessions) {
            for (const auto* f : s.frames) rows.emplace_back(f->values);
        }
        const FeatureScaler scaler = fit_scaler(rows);
        for (const auto* list : {&train_sessions, &test_sessions}) {
            for (const auto& s : *list) total += s.frames.size();
        }
        scaled.reserve(total);
        for (auto* list : {&train_sessions, &test_sessions}) {
            for (auto& s : *list) {
                for (auto*& f : s.frames) {
                    scaled.push_back({f->session_id, f->speaker_id, f->window_start, scaler.apply(f->values)});
                    f = &scaled.back();
                }
            }
        }
    }

    std::vector<TrainingPair> pairs;
    std::set<int> train_labels;
    for (const auto& s : train_sessions) {
        train_labels.insert(s.label);
        for (const auto* f : s.frames) pairs.push_back({f->values, static_cast<double>(s.label), s.key, s.couple_id});
    }
    // Lineage audit: nothing from the held-out couple may reach training.
    const std::set<SessionKey> test_keys(fold.test.begin(), fold.test.end());
    for (const auto& p : pairs) {
        if (p.couple_id == fold.held_out_couple || test_keys.contains(p.session)) {
            throw InternalError("test-fold data leaked into training for fold " + fold.held_out_couple);
        }
    }

    FoldResult base;
    base.pool = task.pool;
    base.held_out_couple = fold.held_out_couple;
    base.train_sessions = train_sessions.size();
    base.train_frames = pairs.size();

    auto wants = [&](Regime r) { return std::find(config.regimes.begin(), config.regimes.end(), r) != config.regimes.end(); };
    const bool need_sd = wants(Regime::sd) || wants(Regime::sj) || wants(Regime::sd_init);
    const bool need_subnets = need_sd || wants(Regime::subnet);

    auto skip_all = [&](const std::string& reason) {
        base.skipped = true;
        base.skip_reason = reason;
        for (Regime r : config.regimes) {
            if (r == Regime::subnet) {
                for (const auto& g : assignment.groups) task.columns["subnet:" + g.name].fold = base;
                task.columns["subnet:fusion"].fold = base;
            } else {
                task.columns[std::string(to_string(r))].fold = base;
            }
        }
        task.warnings.push_back(code + " pool " + task.pool + ": fold " + fold.held_out_couple + " skipped (" + reason + ")");
    };
    if (train_labels.size() < 2) {
        skip_all("training data holds a single class");
        return;
    }

    TrainConfig tc = config.train;
    tc.seed = derive_seed(config.train.seed, code + "|" + task.pool, task.fold_index);
    const double eps = config.clamp_eps;

    auto record = [&](const std::string& column, const Model& model, double seconds,
                      std::vector<std::vector<double>> curves) {
        ColumnOutcome outcome;
        outcome.fold = evaluate_scorer([&](const SessionFrames& s) { return frame_scores(model, s); }, train_sessions,
                                       test_sessions, eps, base);
        outcome.fold.loss_curves = std::move(curves);
        outcome.seconds = seconds;
        outcome.parameters = model_parameter_count(model);
        outcome.trainable = std::visit([](const auto& m) { return m.trainable_parameter_count(); }, model);
        task.columns[column] = std::move(outcome);
    };

    if (wants(Regime::dense)) {
        const auto start = Clock::now();
        auto dense = train_dense(pairs, tc);
        record("dense", Model{std::move(dense.model)}, seconds_since(start), {std::move(dense.log.loss)});
    }
    if (!need_subnets) return;

    auto start = Clock::now();
    auto trained_subnets = train_subnets(pairs, assignment, tc);
    const double subnet_seconds = seconds_since(start);
    std::vector<Network> subnets;
    std::vector<std::vector<double>> subnet_curves;
    for (auto& t : trained_subnets) {
        for (auto& w : t.log.warnings) task.warnings.push_back(code + ": " + w);
        subnets.push_back(t.model);
        subnet_curves.push_back(t.log.loss);
    }
    if (wants(Regime::subnet)) {
        for (std::size_t j = 0; j < subnets.size(); ++j) {
            record("subnet:" + assignment.groups[j].name, Model{subnets[j]}, subnet_seconds / static_cast<double>(subnets.size()),
                   {subnet_curves[j]});
        }
        ColumnOutcome fused;
        fused.fold = evaluate_scorer([&](const SessionFrames& s) { return fused_frame_scores(subnets, s); },
                                     train_sessions, test_sessions, eps, base);
        fused.fold.loss_curves = subnet_curves;
        fused.seconds = subnet_seconds;
        for (const auto& s : subnets) {
            fused.parameters += s.parameter_count();
            fused.trainable += s.trainable_parameter_count();
        }
        task.columns["subnet:fusion"] = std::move(fused);
    }
    if (!need_sd) return;

    start = Clock::now();
    auto sd = train_sd(subnets, assignment, pairs, tc);
    const double sd_seconds = subnet_seconds + seconds_since(start);
    auto sd_curves = subnet_curves;
    sd_curves.push_back(sd.log.loss);
    if (wants(Regime::sd)) {
        record("sd", Model{sd.model}, sd_seconds, sd_curves);
    }
    if (wants(Regime::sj)) {
        start = Clock::now();
        auto sj = train_sj(sd.model, pairs, tc);
        record("sj", Model{std::move(sj.model)}, seconds_since(start), {std::move(sj.log.loss)});
    }
    if (wants(Regime::sd_init)) {
        start = Clock::now();
        auto dn = train_dense_sdinit(sd.model, pairs, tc);
        record("sd_init", Model{std::move(dn.model)}, seconds_since(start), {std::move(dn.log.loss)});
    }
}

}  // namespace

CvReport run_cv(const CvData& data, const CvConfig& config) {
    config.validate();
    if (data.frames.empty()) throw InputError("cross-validation needs frames");
    const std::size_t dim = data.frames.front().values.size();
    std::map<SessionKey, std::vector<const FrameFeature*>> frames_by_session;
    for (const auto& f : data.frames) {
        if (f.values.size() != dim) throw InputError("frames have inconsistent widths");
        frames_by_session[{f.session_id, f.speaker_id}].push_back(&f);
    }
    for (auto& [key, frames] : frames_by_session) {
        std::stable_sort(frames.begin(), frames.end(),
                         [](const FrameFeature* a, const FrameFeature* b) { return a->window_start < b->window_start; });
    }
    if (data.layout.frame_dim() != dim) {
        throw InputError("frame width " + std::to_string(dim) + " does not match the LLD layout (" +
                         std::to_string(data.layout.frame_dim()) + ")");
    }
    const SubnetAssignment assignment = partition_features(config.partition, data.layout, config.random_groups,
                                                           derive_seed(config.train.seed, "partition"));

    CvReport report;
    std::vector<SessionRecord> with_frames;
    for (const auto& r : data.records) {
        r.validate();
        if (frames_by_session.contains(r.key())) with_frames.push_back(r);
    }
    if (with_frames.size() < data.records.size()) {
        report.warnings.push_back(std::to_string(data.records.size() - with_frames.size()) +
                                  " manifest sessions have no frames and were excluded");
    }

    // Selections must outlive the tasks that point into them.
    std::vector<std::unique_ptr<std::vector<SessionRecord>>> selections;
    std::vector<std::unique_ptr<FoldPlan>> plans;
    std::vector<FoldTask> tasks;
    const std::vector<std::string> pools = config.per_gender ? std::vector<std::string>{"F", "M"} : std::vector<std::string>{"all"};
    for (std::size_t ci = 0; ci < config.codes.size(); ++ci) {
        const std::string& code = config.codes[ci];
        for (const auto& pool : pools) {
            std::vector<SessionRecord> candidates;
            for (const auto& r : with_frames) {
                if (!r.ratings.contains(code)) continue;
                if (pool == "all" || to_string(r.gender) == pool) candidates.push_back(r);
            }
            if (candidates.empty()) continue;
            const std::size_t per_class =
                config.per_class ? config.per_class
                                 : static_cast<std::size_t>(std::floor(config.extreme_fraction *
                                                                       static_cast<double>(candidates.size())));
            if (per_class == 0) {
                report.warnings.push_back(code + " pool " + pool + ": too few sessions for extreme selection");
                continue;
            }
            auto selection = select_extremes(candidates, code, per_class);
            if (selection.degenerate) {
                report.warnings.push_back(code + " pool " + pool + ": rating ties at the extreme cut were broken by session id");
            }
            selections.push_back(std::make_unique<std::vector<SessionRecord>>(std::move(selection.selected)));
            plans.push_back(std::make_unique<FoldPlan>(make_folds(*selections.back())));
            report.pools.push_back({code, pool, candidates.size(), per_class, plans.back()->folds.size(), selection.degenerate});
            for (std::size_t fi = 0; fi < plans.back()->folds.size(); ++fi) {
                FoldTask t;
                t.code_index = ci;
                t.pool = pool;
                t.fold_index = fi;
                t.labeled = selections.back().get();
                t.fold = &plans.back()->folds[fi];
                tasks.push_back(std::move(t));
            }
        }
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&]() {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                run_fold(tasks[i], config, assignment, frames_by_session);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = tasks.size();
            }
        }
    };
    const unsigned n_threads = std::min<unsigned>(config.jobs, static_cast<unsigned>(std::max<std::size_t>(1, tasks.size())));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (unsigned i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    // Column order per code: subnet groups, subnet fusion, then the remaining regimes as requested.
    for (std::size_t ci = 0; ci < config.codes.size(); ++ci) {
        std::vector<std::pair<std::string, Regime>> columns;
        for (Regime r : config.regimes) {
            if (r != Regime::subnet) continue;
            for (const auto& g : assignment.groups) columns.emplace_back("subnet:" + g.name, r);
            columns.emplace_back("subnet:fusion", r);
        }
        for (Regime r : config.regimes) {
            if (r != Regime::subnet) columns.emplace_back(std::string(to_string(r)), r);
        }
        for (const auto& [id, regime] : columns) {
            RegimeResult result;
            result.code = config.codes[ci];
            result.regime = regime;
            result.column = regime == Regime::subnet ? (id == "subnet:fusion" ? "Fusion" : id.substr(7)) : column_label(regime);
            std::map<std::string, std::pair<std::size_t, std::size_t>> by_pool;
            for (const auto& t : tasks) {
                if (t.code_index != ci) continue;
                const auto it = t.columns.find(id);
                if (it == t.columns.end()) continue;
                const ColumnOutcome& o = it->second;
                result.wall_seconds += o.seconds;
                result.parameter_count = std::max(result.parameter_count, o.parameters);
                result.trainable_parameter_count = std::max(result.trainable_parameter_count, o.trainable);
                for (const auto& d : o.fold.decisions) {
                    const bool hit = d.prediction == d.label;
                    result.correct += hit;
                    ++result.tested;
                    by_pool[t.pool].first += hit;
                    ++by_pool[t.pool].second;
                }
                result.folds.push_back(o.fold);
            }
            result.accuracy = result.tested ? static_cast<double>(result.correct) / static_cast<double>(result.tested) : 0.0;
            for (const auto& [pool, counts] : by_pool) {
                result.accuracy_by_pool[pool] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
            }
            report.results.push_back(std::move(result));
        }
    }
    std::set<std::string> seen;
    for (const auto& t : tasks) {
        for (const auto& w : t.warnings) {
            if (seen.insert(w).second) report.warnings.push_back(w);
        }
    }
    return report;
}

std::string render_table(const CvReport& report, bool with_wall_clock) {
    std::vector<std::string> codes;
    std::vector<std::string> columns;
    for (const auto& r : report.results) {
        if (std::find(codes.begin(), codes.end(), r.code) == codes.end()) codes.push_back(r.code);
        if (std::find(columns.begin(), columns.end(), r.column) == columns.end()) columns.push_back(r.column);
    }
    std::ostringstream out;
    const int code_width = 14;
    auto cell_width = [](const std::string& c) { return std::max<int>(12, static_cast<int>(c.size()) + 2); };
    out << std::left << std::setw(code_width) << "Behavior code";
    for (const auto& c : columns) out << std::right << std::setw(cell_width(c)) << c;
    out << '\n';
    for (const auto& code : codes) {
        out << std::left << std::setw(code_width) << code;
        for (const auto& c : columns) {
            const auto it = std::find_if(report.results.begin(), report.results.end(),
                                         [&](const RegimeResult& r) { return r.code == code && r.column == c; });
            std::ostringstream cell;
            if (it != report.results.end() && it->tested > 0) {
                cell << std::fixed << std::setprecision(2) << 100.0 * it->accuracy;
            } else {
                cell << "-";
            }
            out << std::right << std::setw(cell_width(c)) << cell.str();
        }
        out << '\n';
        if (with_wall_clock) {
            out << std::left << std::setw(code_width) << "  train s";
            for (const auto& c : columns) {
                const auto it = std::find_if(report.results.begin(), report.results.end(),
                                             [&](const RegimeResult& r) { return r.code == code && r.column == c; });
                std::ostringstream cell;
                if (it != report.results.end()) cell << std::fixed << std::setprecision(1) << it->wall_seconds;
                out << std::right << std::setw(cell_width(c)) << cell.str();
            }
            out << '\n';
        }
    }
    return out.str();
}

}  // namespace sddnn
