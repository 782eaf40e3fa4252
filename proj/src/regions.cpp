#include "ems/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ems/error.hpp"
#include "ems/parallel.hpp"
#include "rng.hpp"

namespace ems {

RegionLabels label_regions(const AnnotationTrace& trace, std::size_t smooth, double tau)
{
    const std::size_t n = trace.frames();
    if (smooth < 2)
        throw Error(ErrorCode::InvalidArgument, "smoothing width must be >= 2");
    if (!(tau > 0.0))
        throw Error(ErrorCode::InvalidArgument, "slope threshold must be > 0");
    if (n < smooth)
        throw Error(ErrorCode::TooShort, "trace of " + std::to_string(n) + " frames, smoothing " +
                                             std::to_string(smooth));

    const std::size_t before = smooth / 2;
    const std::size_t after = smooth - 1 - before;
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        prefix[i + 1] = prefix[i] + trace.values[i];
    std::vector<double> smoothed(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i >= before ? i - before : 0;
        const std::size_t hi = std::min(n - 1, i + after);
        smoothed[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }

    const std::size_t span = std::max<std::size_t>(1, smooth / 2);
    RegionLabels labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t a = i >= span ? i - span : 0;
        const std::size_t b = std::min(n - 1, i + span);
        const double slope = (smoothed[b] - smoothed[a]) * trace.fps / static_cast<double>(b - a);
        labels[i] = slope > tau ? Region::Rise : slope < -tau ? Region::Decay : Region::Sustain;
    }
    return labels;
}

void ForestParams::validate() const
{
    if (n_trees == 0 || max_depth == 0 || min_leaf == 0)
        throw Error(ErrorCode::InvalidArgument, "forest parameters must be positive");
}

std::size_t DecisionTree::leaf_of(std::span<const double> row) const
{
    std::size_t node = 0;
    while (feature[node] >= 0)
        node = static_cast<std::size_t>(row[static_cast<std::size_t>(feature[node])] <= threshold[node]
                                            ? left[node]
                                            : right[node]);
    return node;
}

int DecisionTree::vote(std::size_t leaf) const
{
    const auto& c = counts[leaf];
    return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
}

namespace {

// Columns quantized to at most kMaxBins bins of consecutive distinct values
// (exact ranks when a column has few distinct values). Splits fall between
// occupied bins.
constexpr std::size_t kMaxBins = 256;

struct BinnedColumns {
    std::vector<std::vector<std::uint16_t>> bin; // [feature][row]
    std::vector<std::vector<double>> lower;      // [feature][bin] smallest value
    std::vector<std::vector<double>> upper;      // [feature][bin] largest value

    explicit BinnedColumns(const Matrix& x) : bin(x.cols()), lower(x.cols()), upper(x.cols())
    {
        std::vector<std::size_t> order(x.rows());
        std::vector<double> distinct;
        std::vector<std::size_t> rank(x.rows());
        for (std::size_t f = 0; f < x.cols(); ++f) {
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
            distinct.clear();
            for (auto i : order) {
                if (distinct.empty() || x(i, f) != distinct.back())
                    distinct.push_back(x(i, f));
                rank[i] = distinct.size() - 1;
            }
            const std::size_t u = distinct.size();
            const std::size_t nb = std::min(u, kMaxBins);
            auto bin_of = [&](std::size_t r) { return r * nb / u; };
            lower[f].assign(nb, 0.0);
            upper[f].assign(nb, 0.0);
            for (std::size_t r = 0; r < u; ++r) {
                const auto b = bin_of(r);
                if (r == 0 || bin_of(r - 1) != b)
                    lower[f][b] = distinct[r];
                upper[f][b] = distinct[r];
            }
            bin[f].resize(x.rows());
            for (std::size_t i = 0; i < x.rows(); ++i)
                bin[f][i] = static_cast<std::uint16_t>(bin_of(rank[i]));
        }
    }
};

struct TreeBuilder {
    const BinnedColumns& x;
    const std::vector<int>& y;
    const ForestParams& p;
    std::size_t mtry;
    std::mt19937_64 rng;
    DecisionTree tree;

    // scratch
    std::vector<std::size_t> features;
    std::vector<std::array<std::uint32_t, 3>> hist;

    std::array<std::uint32_t, 3> count(std::span<const std::size_t> idx) const
    {
        std::array<std::uint32_t, 3> c{};
        for (auto i : idx)
            ++c[static_cast<std::size_t>(y[i])];
        return c;
    }

    std::size_t add_node(const std::array<std::uint32_t, 3>& c)
    {
        tree.feature.push_back(-1);
        tree.threshold.push_back(0.0);
        tree.left.push_back(-1);
        tree.right.push_back(-1);
        tree.counts.push_back(c);
        return tree.feature.size() - 1;
    }

    void grow(std::vector<std::size_t>& idx, std::size_t node, std::size_t depth)
    {
        const auto& c = tree.counts[node];
        const std::size_t n = idx.size();
        const std::size_t nonzero = static_cast<std::size_t>(std::count_if(c.begin(), c.end(), [](auto v) { return v > 0; }));
        if (depth >= p.max_depth || n < 2 * p.min_leaf || nonzero <= 1)
            return;

        double parent_purity = 0.0;
        for (auto v : c)
            parent_purity += static_cast<double>(v) * v;
        parent_purity /= static_cast<double>(n);

        // sample mtry candidate features without replacement
        for (std::size_t k = 0; k < mtry; ++k) {
            std::uniform_int_distribution<std::size_t> pick(k, features.size() - 1);
            std::swap(features[k], features[pick(rng)]);
        }

        double best_gain = 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;
        int best_bin = 0;
        for (std::size_t k = 0; k < mtry; ++k) {
            const std::size_t f = features[k];
            const auto& bins = x.bin[f];
            const std::size_t nb = x.lower[f].size();
            hist.assign(nb, {0, 0, 0});
            for (auto i : idx)
                ++hist[bins[i]][static_cast<std::size_t>(y[i])];
            std::array<double, 3> lc{}, rc{static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])};
            std::size_t nl = 0;
            std::ptrdiff_t prev = -1; // last occupied bin
            for (std::size_t bb = 0; bb < nb; ++bb) {
                const auto& h = hist[bb];
                const std::size_t m = h[0] + h[1] + h[2];
                if (m == 0)
                    continue;
                if (prev >= 0 && nl >= p.min_leaf && n - nl >= p.min_leaf) {
                    const std::size_t nr = n - nl;
                    const double purity = (lc[0] * lc[0] + lc[1] * lc[1] + lc[2] * lc[2]) / static_cast<double>(nl) +
                                          (rc[0] * rc[0] + rc[1] * rc[1] + rc[2] * rc[2]) / static_cast<double>(nr);
                    const double gain = purity - parent_purity;
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<int>(f);
                        best_bin = static_cast<int>(prev);
                        const double lo = x.upper[f][static_cast<std::size_t>(prev)], hi = x.lower[f][bb];
                        double mid = 0.5 * (lo + hi);
                        if (!(mid < hi))
                            mid = lo;
                        best_threshold = mid;
                    }
                }
                for (std::size_t cls = 0; cls < 3; ++cls) {
                    lc[cls] += h[cls];
                    rc[cls] -= h[cls];
                }
                nl += m;
                prev = static_cast<std::ptrdiff_t>(bb);
            }
        }

        if (best_feature < 0)
            return;

        const auto bf = static_cast<std::size_t>(best_feature);
        auto mid = std::stable_partition(idx.begin(), idx.end(),
                                         [&](std::size_t i) { return x.bin[bf][i] <= best_bin; });
        std::vector<std::size_t> left_idx(idx.begin(), mid), right_idx(mid, idx.end());
        idx.clear();
        idx.shrink_to_fit();

        tree.feature[node] = best_feature;
        tree.threshold[node] = best_threshold;
        const std::size_t l = add_node(count(left_idx));
        tree.left[node] = static_cast<std::int32_t>(l);
        grow(left_idx, l, depth + 1);
        const std::size_t r = add_node(count(right_idx));
        tree.right[node] = static_cast<std::int32_t>(r);
        grow(right_idx, r, depth + 1);
    }
};

} // namespace

RegionPrediction RegionClassifier::classify(std::span<const double> row) const
{
    if (row.size() != arity)
        throw Error(ErrorCode::ArityMismatch,
                    "row of " + std::to_string(row.size()) + " values, classifier expects " + std::to_string(arity));
    std::array<std::size_t, 3> votes{};
    for (const auto& t : trees)
        ++votes[static_cast<std::size_t>(t.vote(t.leaf_of(row)))];
    RegionPrediction out;
    std::size_t best = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        out.probabilities[k] = static_cast<double>(votes[k]) / static_cast<double>(trees.size());
        if (votes[k] > votes[best])
            best = k;
    }
    out.label = static_cast<Region>(best);
    return out;
}

RegionClassifier train_region_classifier(const DesignMatrix& m, const RegionLabels& labels, const ForestParams& p)
{
    p.validate();
    if (labels.size() != m.rows())
        throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels for " +
                                                   std::to_string(m.rows()) + " rows");
    if (m.rows() == 0 || m.cols() == 0)
        throw Error(ErrorCode::TooFewRows, "empty design matrix");

    std::vector<int> y(labels.size());
    std::array<std::size_t, 3> per_class{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        y[i] = static_cast<int>(labels[i]);
        ++per_class[static_cast<std::size_t>(y[i])];
    }
    RegionClassifier c;
    for (Region r : kAllRegions) {
        const auto k = per_class[static_cast<std::size_t>(r)];
        if (k == 0)
            continue;
        if (k < p.min_leaf)
            throw Error(ErrorCode::TooFewRows, std::string(to_string(r)) + " has " + std::to_string(k) +
                                                   " rows, min_leaf is " + std::to_string(p.min_leaf));
        c.classes.push_back(r);
    }
    if (c.classes.size() < 2)
        throw Error(ErrorCode::SingleClass, "labels hold a single region");

    const std::size_t d = m.cols();
    const std::size_t mtry = std::min(d, p.features_per_split ? p.features_per_split
                                                             : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))));
    c.arity = d;
    c.params = p;
    c.trees.resize(p.n_trees);

    const BinnedColumns binned(m.values);
    parallel_for(p.n_trees, [&](std::size_t t) {
        TreeBuilder b{binned, y, p, mtry, std::mt19937_64(detail::mix_seed(p.seed, t)), {}, {}, {}};
        b.features.resize(d);
        std::iota(b.features.begin(), b.features.end(), std::size_t{0});
        std::vector<std::size_t> idx(m.rows());
        if (p.bootstrap) {
            std::uniform_int_distribution<std::size_t> draw(0, m.rows() - 1);
            for (auto& i : idx)
                i = draw(b.rng);
        } else {
            std::iota(idx.begin(), idx.end(), std::size_t{0});
        }
        const auto root = b.add_node(b.count(idx));
        b.grow(idx, root, 0);
        c.trees[t] = std::move(b.tree);
    });
    return c;
}

RegionPrediction classify_region(const RegionClassifier& c, std::span<const double> row) { return c.classify(row); }

double roc_auc(std::span<const double> scores, const std::vector<bool>& positive)
{
    if (scores.size() != positive.size())
        throw Error(ErrorCode::LengthMismatch, "scores and labels differ in length");
    const auto ranks = average_ranks(scores);
    double pos_rank_sum = 0.0;
    std::size_t npos = 0;
    for (std::size_t i = 0; i < ranks.size(); ++i)
        if (positive[i]) {
            pos_rank_sum += ranks[i];
            ++npos;
        }
    const std::size_t nneg = ranks.size() - npos;
    if (npos == 0 || nneg == 0)
        throw Error(ErrorCode::MissingClass, "AUC needs both positive and negative samples");
    const double np = static_cast<double>(npos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(nneg));
}

std::map<Region, double> region_roc(const RegionClassifier& c, const DesignMatrix& m, const RegionLabels& labels)
{
    if (labels.size() != m.rows())
        throw Error(ErrorCode::LengthMismatch, "labels and design matrix differ in length");
    std::vector<std::array<double, 3>> probs(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        probs[r] = c.classify(m.values.row(r)).probabilities;
    std::map<Region, double> out;
    for (Region region : kAllRegions) {
        const auto k = static_cast<std::size_t>(region);
        std::vector<double> scores(m.rows());
        std::vector<bool> positive(m.rows());
        for (std::size_t r = 0; r < m.rows(); ++r) {
            scores[r] = probs[r][k];
            positive[r] = labels[r] == region;
        }
        const auto npos = std::count(positive.begin(), positive.end(), true);
        if (npos == 0 || static_cast<std::size_t>(npos) == positive.size())
            throw Error(ErrorCode::MissingClass, std::string(to_string(region)));
        out[region] = roc_auc(scores, positive);
    }
    return out;
}

nlohmann::json to_json(const RegionClassifier& c)
{
    nlohmann::json j;
    j["format"] = "ems-region-forest";
    j["version"] = 1;
    j["arity"] = c.arity;
    j["window"] = c.window;
    std::vector<std::string> classes, kinds;
    for (auto r : c.classes)
        classes.emplace_back(to_string(r));
    for (auto k : c.kinds)
        kinds.emplace_back(to_string(k));
    j["classes"] = classes;
    j["kinds"] = kinds;
    j["params"] = {{"n_trees", c.params.n_trees},       {"max_depth", c.params.max_depth},
                   {"min_leaf", c.params.min_leaf},     {"features_per_split", c.params.features_per_split},
                   {"seed", c.params.seed},             {"bootstrap", c.params.bootstrap}};
    auto& trees = j["trees"] = nlohmann::json::array();
    for (const auto& t : c.trees) {
        std::vector<std::uint32_t> counts;
        for (const auto& cc : t.counts)
            counts.insert(counts.end(), cc.begin(), cc.end());
        trees.push_back({{"feature", t.feature},
                         {"threshold", t.threshold},
                         {"left", t.left},
                         {"right", t.right},
                         {"counts", counts}});
    }
    return j;
}

RegionClassifier classifier_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format") != "ems-region-forest" || j.at("version") != 1)
            throw Error(ErrorCode::InvalidArgument, "unsupported classifier format");
        RegionClassifier c;
        c.arity = j.at("arity");
        c.window = j.at("window");
        for (const auto& s : j.at("classes")) {
            auto r = parse_region(s.get<std::string>());
            if (!r)
                throw Error(ErrorCode::InvalidArgument, "bad class " + s.get<std::string>());
            c.classes.push_back(*r);
        }
        for (const auto& s : j.at("kinds")) {
            auto k = parse_kind(s.get<std::string>());
            if (!k)
                throw Error(ErrorCode::InvalidArgument, "bad kind " + s.get<std::string>());
            c.kinds.push_back(*k);
        }
        const auto& p = j.at("params");
        c.params.n_trees = p.at("n_trees");
        c.params.max_depth = p.at("max_depth");
        c.params.min_leaf = p.at("min_leaf");
        c.params.features_per_split = p.at("features_per_split");
        c.params.seed = p.at("seed");
        c.params.bootstrap = p.at("bootstrap");
        for (const auto& jt : j.at("trees")) {
            DecisionTree t;
            t.feature = jt.at("feature").get<std::vector<int>>();
            t.threshold = jt.at("threshold").get<std::vector<double>>();
            t.left = jt.at("left").get<std::vector<std::int32_t>>();
            t.right = jt.at("right").get<std::vector<std::int32_t>>();
            const auto counts = jt.at("counts").get<std::vector<std::uint32_t>>();
            const std::size_t nodes = t.feature.size();
            if (t.threshold.size() != nodes || t.left.size() != nodes || t.right.size() != nodes ||
                counts.size() != 3 * nodes || nodes == 0)
                throw Error(ErrorCode::InvalidArgument, "inconsistent tree arrays");
            for (std::size_t i = 0; i < nodes; ++i) {
                t.counts.push_back({counts[3 * i], counts[3 * i + 1], counts[3 * i + 2]});
                if (t.feature[i] >= 0) {
                    if (static_cast<std::size_t>(t.feature[i]) >= c.arity || t.left[i] <= 0 || t.right[i] <= 0 ||
                        static_cast<std::size_t>(t.left[i]) >= nodes || static_cast<std::size_t>(t.right[i]) >= nodes)
                        throw Error(ErrorCode::InvalidArgument, "tree node out of range");
                }
            }
            c.trees.push_back(std::move(t));
        }
        if (c.trees.empty())
            throw Error(ErrorCode::InvalidArgument, "classifier has no trees");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("classifier document: ") + e.what());
    }
}

} // namespace ems
