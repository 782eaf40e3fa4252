#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ems/regions.hpp"
#include "ems/stats.hpp"
#include "ems/temporal.hpp"

namespace ems {

enum class KernelType { Rbf, Linear };

std::string_view to_string(KernelType k);
std::optional<KernelType> parse_kernel(std::string_view s);

struct SvrParams {
    double C = 1.0;
    double epsilon = 0.05;
    KernelType kernel = KernelType::Rbf;
    double gamma = 0.0;        // 0 = 1 / (d * mean column variance of the standardized inputs)
    double tol = 1e-3;         // maximal KKT violation at convergence
    std::size_t max_iter = 0;  // 0 = 10 * rows
    bool standardize = true;
    std::size_t cache_mb = 256; // kernel row cache

    void validate() const;
    friend bool operator==(const SvrParams&, const SvrParams&) = default;
};

struct SvrReport {
    std::size_t iterations = 0;
    bool converged = false;
    double violation = 0.0;          // final maximal KKT violation
    std::vector<double> objective;   // dual objective after every iteration (start = 0)
};

/// Trained epsilon-insensitive kernel regressor.
class Regressor {
public:
    Matrix support;             // standardized support rows
    std::vector<double> coef;   // alpha - alpha*, |coef| <= C
    double bias = 0.0;
    KernelType kernel = KernelType::Rbf;
    double gamma = 1.0;
    double C = 1.0;
    double epsilon = 0.0;
    std::size_t arity = 0;
    std::vector<double> mean;   // input centering
    std::vector<double> scale;  // input scaling
    SvrReport report;           // not serialized beyond convergence flags

    /// Kernel expansion plus bias, unclipped. Throws ArityMismatch.
    double predict_raw(std::span<const double> row) const;
    /// predict_raw clipped to [-1, +1].
    double predict(std::span<const double> row) const;
};

/// Minimizes C * sum(epsilon-insensitive loss) + |f|^2 / 2 with pairwise
/// (SMO-style) dual updates and second-order working-set selection.
///
/// `column_weights` are the factors already multiplied into the columns; the
/// standardization divides each column by (its std / its weight), so relative
/// weights survive centering and scaling. Hitting max_iter returns the
/// best-so-far model with report.converged = false.
/// Throws TooFewRows, LengthMismatch, OutOfRange (targets outside [-1, 1]).
Regressor train_svr(const Matrix& x, std::span<const double> targets, const SvrParams& p,
                    std::span<const double> column_weights = {});
Regressor train_svr(const DesignMatrix& m, std::span<const double> targets, const SvrParams& p);

double predict(const Regressor& r, std::span<const double> row);

nlohmann::json to_json(const Regressor& r);
Regressor regressor_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Per-state model

struct StateModelConfig {
    WindowConfig window;
    std::size_t label_smooth = 0;     // 0 = window size
    double label_threshold = 0.005;   // units/s
    bool use_provided_regions = true; // prefer region labels carried by a session
    MicParams mic;
    std::size_t mic_max_points = 1000; // evenly strided subsample for MIC weights
    ForestParams forest;
    SvrParams svr;

    friend bool operator==(const StateModelConfig&, const StateModelConfig&) = default;
};

/// Default config for a state: window size from default_window_size.
StateModelConfig default_state_config(EmotionState s);

/// Feature kinds each region's regressor consumes: all four for RISE and
/// DECAY, originals only for SUSTAIN.
std::vector<FeatureKind> default_region_kinds(Region r);

struct StateModel {
    EmotionState state = EmotionState::Concentration;
    StateModelConfig config;
    MicMatrix weights; // 12 channels + 12 velocity rows, one state column
    RegionClassifier classifier;
    std::array<Regressor, 3> regressors;                  // indexed by Region
    std::array<std::vector<FeatureKind>, 3> region_kinds; // indexed by Region
    std::vector<std::string> warnings;
};

/// Stacked training rows of all sessions carrying a trace for the state.
struct TrainingSet {
    DesignMatrix design; // unweighted, all four kinds
    std::vector<double> targets;
    RegionLabels labels;
    std::vector<std::string> warnings;
};

TrainingSet assemble_training_set(std::span<const Session> sessions, EmotionState state,
                                  const StateModelConfig& cfg);

/// MIC of every channel and of its velocity against the targets, on an evenly
/// strided subsample of at most cfg.mic_max_points rows.
MicMatrix compute_mic_weights(const TrainingSet& data, EmotionState state, const StateModelConfig& cfg);

/// Weights from training data only, region labels, the region classifier on
/// all kinds, then one regressor per region. A region without training rows
/// reuses the SUSTAIN regressor (warning recorded).
StateModel train_state_model(std::span<const Session> sessions, EmotionState state, const StateModelConfig& cfg);
/// Same, from an assembled training set and precomputed weights.
StateModel train_state_model(const TrainingSet& data, const MicMatrix& weights, EmotionState state,
                             const StateModelConfig& cfg);

/// One prediction per input frame; the first window-1 frames repeat the first
/// windowed prediction.
AnnotationTrace predict_state(const StateModel& model, const FeatureSeries& features);

nlohmann::json to_json(const StateModel& m);
StateModel state_model_from_json(const nlohmann::json& j);

/// Region-free baseline: one regressor on all kinds, same weights.
struct FlatModel {
    EmotionState state = EmotionState::Concentration;
    StateModelConfig config;
    MicMatrix weights;
    Regressor regressor;
};

FlatModel train_flat_model(std::span<const Session> sessions, EmotionState state, const StateModelConfig& cfg);
FlatModel train_flat_model(const TrainingSet& data, const MicMatrix& weights, EmotionState state,
                           const StateModelConfig& cfg);
AnnotationTrace predict_flat(const FlatModel& model, const FeatureSeries& features);

nlohmann::json config_to_json(const StateModelConfig& c);
StateModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ScoreTable& t);
ScoreTable score_table_from_json(const nlohmann::json& j);

} // namespace ems
