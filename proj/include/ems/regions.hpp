#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <json.hpp>

#include "ems/dataset.hpp"
#include "ems/temporal.hpp"

namespace ems {

/// Ground-truth regions from a trace: centered moving average of `smooth`
/// frames, then a central difference spanning smooth/2 frames on each side
/// (units/s). slope > tau is RISE, slope < -tau is DECAY, else SUSTAIN.
/// Throws TooShort, InvalidArgument.
RegionLabels label_regions(const AnnotationTrace& trace, std::size_t smooth, double tau);

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;
    std::size_t min_leaf = 5;
    std::size_t features_per_split = 0; // 0 = ceil(sqrt(d))
    std::uint64_t seed = 0;
    bool bootstrap = true;

    void validate() const;
    friend bool operator==(const ForestParams&, const ForestParams&) = default;
};

/// Flat node arrays; a node is a leaf when feature < 0.
struct DecisionTree {
    std::vector<int> feature;
    std::vector<double> threshold;
    std::vector<std::int32_t> left;
    std::vector<std::int32_t> right;
    std::vector<std::array<std::uint32_t, 3>> counts; // training class counts per node

    /// Leaf reached by a row (value <= threshold goes left).
    std::size_t leaf_of(std::span<const double> row) const;
    /// Majority class index of a leaf; ties go to the lower class index.
    int vote(std::size_t leaf) const;
};

struct RegionPrediction {
    Region label = Region::Sustain;
    std::array<double, 3> probabilities{}; // indexed by Region, vote fractions
};

class RegionClassifier {
public:
    std::vector<DecisionTree> trees;
    std::vector<Region> classes; // seen in training
    std::size_t arity = 0;
    ForestParams params;
    // training metadata
    std::size_t window = 0;
    std::vector<FeatureKind> kinds;

    RegionPrediction classify(std::span<const double> row) const;
};

/// Bagged Gini trees with majority vote; deterministic for a fixed seed.
/// Throws LengthMismatch, SingleClass, TooFewRows (a present class with fewer
/// than min_leaf rows).
RegionClassifier train_region_classifier(const DesignMatrix& m, const RegionLabels& labels,
                                         const ForestParams& p);

/// Throws ArityMismatch.
RegionPrediction classify_region(const RegionClassifier& c, std::span<const double> row);

/// Area under the ROC curve via the rank statistic (ties share average ranks).
double roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

/// One-vs-rest AUC per class over vote fractions. Throws MissingClass.
std::map<Region, double> region_roc(const RegionClassifier& c, const DesignMatrix& m, const RegionLabels& labels);

nlohmann::json to_json(const RegionClassifier& c);
RegionClassifier classifier_from_json(const nlohmann::json& j);

} // namespace ems
