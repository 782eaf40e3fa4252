#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ems/regress.hpp"

namespace ems {

/// Pearson correlation of predicted and true ratings.
/// Throws LengthMismatch, TooShort, ZeroVariance.
double coerr(const AnnotationTrace& pred, const AnnotationTrace& truth);

struct EvalConfig {
    std::size_t k = 10;
    std::uint64_t seed = 0; // fold assignment
    StateModelConfig model;

    void validate() const;
};

/// Train/test session lists for one fold. In block mode the sessions are
/// pieces of the originals.
struct FoldSplit {
    std::vector<Session> train;
    std::vector<Session> test;
};

/// Session-level folds from a seeded shuffle when there are at least k
/// sessions; otherwise every session is cut into k contiguous blocks, block f
/// is tested in fold f and `gap` frames on each side of it are left out of
/// training. Throws TooFewSessions.
std::vector<FoldSplit> make_folds(std::span<const Session> sessions, EmotionState state, std::size_t k,
                                  std::uint64_t seed, std::size_t gap);

struct FoldResult {
    std::size_t fold = 0;
    std::vector<std::string> test_ids;
    std::size_t test_frames = 0;
    double coerr = 0.0;    // pooled over the fold's test sessions
    bool excluded = false; // constant truth or prediction; left out of the mean

    friend bool operator==(const FoldResult&, const FoldResult&) = default;
};

struct StateEval {
    EmotionState state = EmotionState::Concentration;
    std::string arm = "region"; // "region" or "flat"
    std::size_t window = 0;
    std::vector<FoldResult> folds;
    double mean = 0.0;
    double std = 0.0; // sample std over used folds
    std::size_t excluded = 0;

    friend bool operator==(const StateEval&, const StateEval&) = default;
};

struct Ablation {
    EmotionState state = EmotionState::Concentration;
    StateEval with_region;
    StateEval without_region;
    double delta_percent = 0.0; // relative: 100 * (with - without) / without

    friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct SweepPoint {
    std::size_t window = 0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t folds_used = 0;

    friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

struct Sweep {
    EmotionState state = EmotionState::Concentration;
    std::vector<SweepPoint> points;
    std::size_t best_window = 0;

    friend bool operator==(const Sweep&, const Sweep&) = default;
};

inline const std::vector<std::size_t> kDefaultSweepWindows = {5, 10, 20, 40, 60, 80, 100};

/// Region-gated model per fold. Folds run in parallel.
StateEval kfold_cv(std::span<const Session> sessions, EmotionState state, const EvalConfig& cfg);

/// Region-gated model against a single regressor on all kinds, same folds.
Ablation ablate_regions(std::span<const Session> sessions, EmotionState state, const EvalConfig& cfg);

/// kfold_cv at each window size. Throws InvalidArgument for an empty list or
/// a window outside [2, shortest session].
Sweep window_sweep(std::span<const Session> sessions, EmotionState state, std::span<const std::size_t> windows,
                   const EvalConfig& cfg);

struct EvalReport {
    std::uint64_t seed = 0;
    std::size_t k = 10;
    std::size_t sessions = 0;
    nlohmann::json config; // echo of the model config
    std::vector<StateEval> states;
    std::vector<Ablation> ablations;
    std::vector<Sweep> sweeps;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

nlohmann::json to_json(const EvalReport& r);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// state,arm,window,fold,test_frames,coerr,excluded. An ablation's region arm
/// is skipped when states already lists the same state, arm and window.
void write_fold_csv(const EvalReport& r, std::ostream& out);
/// state,window,mean,std,folds_used
void write_sweep_csv(const EvalReport& r, std::ostream& out);

} // namespace ems
