#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sddnn/arch.hpp"
#include "sddnn/corpus.hpp"
#include "sddnn/evalsess.hpp"
#include "sddnn/features.hpp"
#include "sddnn/nncore.hpp"

namespace sddnn {

enum class Regime { dense, subnet, sd, sj, sd_init };

std::string_view to_string(Regime r);
Regime regime_from_string(std::string_view s);

struct TrainConfig {
    Regime regime = Regime::sd;
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    /// Step size for the stages that continue from a trained SD model (sj, sd_init).
    double finetune_learning_rate = 0.005;
    double epsilon = 1e-8;
    double dropout_rate = 0.5;  // input dropout, dense regime only
    std::vector<std::size_t> dense_hidden{15};
    std::size_t subnet_hidden = 15;
    std::vector<std::size_t> fusion_hidden{30, 10};
    std::uint64_t seed = 1;
    /// Fraction of training couples held back for early stopping; 0 disables it.
    double dev_fraction = 0.0;
    std::size_t patience = 5;
    /// Standardize every frame column with statistics of the training frames.
    bool standardize_inputs = true;

    void validate() const;
};

struct TrainingLog {
    /// Mean per-frame training loss of each epoch, measured before each mini-batch update.
    std::vector<double> loss;
    std::vector<double> dev_loss;
    bool stopped_early = false;
    std::vector<std::string> warnings;
};

template <class M>
struct Trained {
    M model;
    TrainingLog log;
};

/// Deterministic seed for a named sub-task of a run.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

/// Fully connected net D -> dense_hidden (tanh) -> 1 (sigmoid) with input dropout.
Trained<Network> train_dense(std::span<const TrainingPair> data, const TrainConfig& config);

/// One subnet per group, each trained on its own feature slice.
std::vector<Trained<Network>> train_subnets(std::span<const TrainingPair> data, const SubnetAssignment& assignment,
                                            const TrainConfig& config);

/// Freezes the subnets' hidden layers and trains a fresh fusion stack on their outputs.
Trained<Composite> train_sd(std::span<const Network> subnets, const SubnetAssignment& assignment,
                            std::span<const TrainingPair> data, const TrainConfig& config);

/// Unfreezes a trained SD composite and keeps training every layer.
Trained<Composite> train_sj(const Composite& sd, std::span<const TrainingPair> data, const TrainConfig& config);

/// Densifies a trained SD composite (zeros for absent connections) and trains every layer.
Trained<Network> train_dense_sdinit(const Composite& sd, std::span<const TrainingPair> data, const TrainConfig& config);

/// Frames of one labeled session, in window order.
struct SessionFrames {
    SessionKey key;
    std::string couple_id;
    int label = 0;
    std::vector<const FrameFeature*> frames;
};

std::vector<double> frame_scores(const Model& model, const SessionFrames& session);

/// Late fusion of standalone subnets: per-frame mean of their outputs.
std::vector<double> fused_frame_scores(std::span<const Network> subnets, const SessionFrames& session);

struct CvConfig {
    TrainConfig train;
    std::vector<std::string> codes;
    std::vector<Regime> regimes{Regime::dense, Regime::sd, Regime::sj, Regime::sd_init};
    PartitionMode partition = PartitionMode::knowledge;
    std::size_t random_groups = 5;
    bool per_gender = true;
    /// Sessions per class = per_class if non-zero, else floor(extreme_fraction * pool size).
    double extreme_fraction = 0.2;
    std::size_t per_class = 0;
    double clamp_eps = kDefaultClampEps;
    unsigned jobs = 1;

    void validate() const;
};

struct SessionDecision {
    SessionKey session;
    double score = 0.0;
    int label = 0;
    int prediction = 0;
};

struct FoldResult {
    std::string pool;  // "F", "M" or "all"
    std::string held_out_couple;
    std::size_t train_sessions = 0;
    std::size_t train_frames = 0;
    bool skipped = false;
    std::string skip_reason;
    ThresholdModel threshold;
    std::vector<SessionDecision> decisions;
    std::vector<std::vector<double>> loss_curves;  // one per training stage feeding this model
};

/// One cell of the results table: a behavior code under one regime (or one
/// standalone subnet / their late fusion for the subnet regime).
struct RegimeResult {
    std::string code;
    Regime regime = Regime::sd;
    std::string column;  // table column label
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t tested = 0;
    std::map<std::string, double> accuracy_by_pool;
    std::size_t parameter_count = 0;
    std::size_t trainable_parameter_count = 0;
    std::vector<FoldResult> folds;
    double wall_seconds = 0.0;  // training time; kept out of the JSON report
};

struct PoolSummary {
    std::string code;
    std::string pool;
    std::size_t candidates = 0;
    std::size_t per_class = 0;
    std::size_t folds = 0;
    bool degenerate = false;
};

struct CvReport {
    std::vector<RegimeResult> results;
    std::vector<PoolSummary> pools;
    std::vector<std::string> warnings;
};

struct CvData {
    std::span<const FrameFeature> frames;
    std::span<const SessionRecord> records;
    LldLayout layout;
};

/// Leave-one-couple-out evaluation of every (code, regime) pair.
CvReport run_cv(const CvData& data, const CvConfig& config);

/// Table layout: one row per code, one column per regime (subnet groups and their fusion first).
std::string render_table(const CvReport& report, bool with_wall_clock = false);

}  // namespace sddnn
