#include <algorithm>
#include <cmath>

#include "ems/error.hpp"
#include "ems/parallel.hpp"
#include "ems/regress.hpp"

namespace ems {

StateModelConfig default_state_config(EmotionState s)
{
    StateModelConfig c;
    c.window.size = default_window_size(s);
    return c;
}

std::vector<FeatureKind> default_region_kinds(Region r)
{
    if (r == Region::Sustain)
        return {FeatureKind::Original};
    return {kAllKinds.begin(), kAllKinds.end()};
}

namespace {

void validate_config(const StateModelConfig& c)
{
    c.window.validate();
    c.mic.validate();
    c.forest.validate();
    c.svr.validate();
    if (!(c.label_threshold > 0))
        throw Error(ErrorCode::InvalidArgument, "label_threshold must be > 0");
    if (c.mic_max_points < 4)
        throw Error(ErrorCode::InvalidArgument, "mic_max_points must be >= 4");
}

void append(DesignMatrix& dst, const DesignMatrix& src)
{
    if (dst.columns.empty()) {
        dst = src;
        return;
    }
    for (std::size_t r = 0; r < src.rows(); ++r)
        dst.values.append_row(src.values.row(r));
}

std::vector<std::size_t> rows_with(const RegionLabels& labels, Region r)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == r)
            out.push_back(i);
    return out;
}

std::vector<double> pick(std::span<const double> v, std::span<const std::size_t> idx)
{
    std::vector<double> out;
    out.reserve(idx.size());
    for (auto i : idx)
        out.push_back(v[i]);
    return out;
}

// Classifier that always answers `r`: one tree with a single leaf.
RegionClassifier constant_classifier(Region r, std::size_t arity, std::size_t rows, const ForestParams& p)
{
    RegionClassifier c;
    DecisionTree t;
    t.feature = {-1};
    t.threshold = {0.0};
    t.left = {-1};
    t.right = {-1};
    std::array<std::uint32_t, 3> counts{};
    counts[static_cast<std::size_t>(r)] = static_cast<std::uint32_t>(rows);
    t.counts = {counts};
    c.trees = {t};
    c.classes = {r};
    c.arity = arity;
    c.params = p;
    return c;
}

std::vector<double> back_fill(const std::vector<double>& rows, std::size_t frames)
{
    std::vector<double> out(frames, rows.front());
    std::copy(rows.begin(), rows.end(), out.begin() + static_cast<std::ptrdiff_t>(frames - rows.size()));
    return out;
}

} // namespace

TrainingSet assemble_training_set(std::span<const Session> sessions, EmotionState state,
                                  const StateModelConfig& cfg)
{
    TrainingSet out;
    const std::size_t w = cfg.window.size;
    const std::size_t smooth = cfg.label_smooth ? cfg.label_smooth : w;
    for (const auto& s : sessions) {
        const auto it = s.traces.find(state);
        if (it == s.traces.end())
            continue;
        auto [features, trace] = align(s.features, it->second);
        if (features.frames() < w) {
            out.warnings.push_back("session " + s.id + " skipped: " + std::to_string(features.frames()) +
                                   " frames, window " + std::to_string(w));
            continue;
        }
        const auto design = build_design_matrix(features, cfg.window, kAllKinds);
        RegionLabels labels;
        const auto given = s.regions.find(state);
        if (cfg.use_provided_regions && given != s.regions.end() && given->second.size() >= features.frames() &&
            features.fps == s.features.fps) {
            labels.assign(given->second.begin() + static_cast<std::ptrdiff_t>(design.first_frame),
                          given->second.begin() + static_cast<std::ptrdiff_t>(features.frames()));
        } else if (trace.frames() >= std::max<std::size_t>(smooth, 2)) {
            const auto all = label_regions(trace, std::max<std::size_t>(smooth, 2), cfg.label_threshold);
            labels.assign(all.begin() + static_cast<std::ptrdiff_t>(design.first_frame), all.end());
        } else {
            out.warnings.push_back("session " + s.id + " too short to label regions; using SUSTAIN");
            labels.assign(design.rows(), Region::Sustain);
        }
        append(out.design, design);
        out.labels.insert(out.labels.end(), labels.begin(), labels.end());
        out.targets.insert(out.targets.end(), trace.values.begin() + static_cast<std::ptrdiff_t>(design.first_frame),
                           trace.values.end());
    }
    if (out.design.rows() < 2)
        throw Error(ErrorCode::TooFewRows, "no training rows for " + std::string(to_string(state)));
    return out;
}

MicMatrix compute_mic_weights(const TrainingSet& data, EmotionState state, const StateModelConfig& cfg)
{
    const std::size_t n = data.design.rows();
    const std::size_t m = std::min(n, cfg.mic_max_points);
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i)
        idx[i] = i * n / m;
    const auto y = pick(data.targets, idx);

    // column of each (channel, kind) pair
    std::vector<std::size_t> cols(2 * kChannelCount);
    for (std::size_t c = 0; c < data.design.columns.size(); ++c) {
        const auto& tag = data.design.columns[c];
        if (tag.kind == FeatureKind::Original)
            cols[tag.channel] = c;
        else if (tag.kind == FeatureKind::Velocity)
            cols[kChannelCount + tag.channel] = c;
    }

    MicMatrix table;
    table.cols = {std::string(to_string(state))};
    for (std::size_t c = 0; c < kChannelCount; ++c)
        table.rows.emplace_back(kChannelNames[c]);
    for (std::size_t c = 0; c < kChannelCount; ++c)
        table.rows.push_back(velocity_weight_name(c));
    table.scores = Matrix(2 * kChannelCount, 1);
    std::vector<double> scores(2 * kChannelCount);
    parallel_for(scores.size(), [&](std::size_t k) {
        std::vector<double> x(m);
        for (std::size_t i = 0; i < m; ++i)
            x[i] = data.design.values(idx[i], cols[k]);
        scores[k] = mic(x, y, cfg.mic);
    });
    for (std::size_t k = 0; k < scores.size(); ++k)
        table.scores(k, 0) = scores[k];
    return table;
}

StateModel train_state_model(std::span<const Session> sessions, EmotionState state, const StateModelConfig& cfg)
{
    validate_config(cfg);
    const auto data = assemble_training_set(sessions, state, cfg);
    return train_state_model(data, compute_mic_weights(data, state, cfg), state, cfg);
}

StateModel train_state_model(const TrainingSet& data, const MicMatrix& weights, EmotionState state,
                             const StateModelConfig& cfg)
{
    validate_config(cfg);
    StateModel model;
    model.state = state;
    model.config = cfg;
    model.warnings = data.warnings;
    model.weights = weights;
    const auto x = weight_features(data.design, model.weights, state);

    // classes too small for a leaf are dropped from classifier training
    std::vector<std::size_t> keep;
    {
        std::array<std::size_t, 3> n{};
        for (auto r : data.labels)
            ++n[static_cast<std::size_t>(r)];
        for (std::size_t i = 0; i < data.labels.size(); ++i)
            if (n[static_cast<std::size_t>(data.labels[i])] >= cfg.forest.min_leaf)
                keep.push_back(i);
        for (Region r : kAllRegions) {
            const auto k = n[static_cast<std::size_t>(r)];
            if (k > 0 && k < cfg.forest.min_leaf)
                model.warnings.push_back(std::string(to_string(r)) + " has only " + std::to_string(k) +
                                         " rows; left out of the region classifier");
        }
    }
    RegionLabels kept_labels;
    for (auto i : keep)
        kept_labels.push_back(data.labels[i]);
    const bool multi = std::any_of(kept_labels.begin(), kept_labels.end(),
                                   [&](Region r) { return r != kept_labels.front(); });
    if (kept_labels.empty()) {
        model.warnings.push_back("no region has enough rows; classifier always answers SUSTAIN");
        model.classifier = constant_classifier(Region::Sustain, x.cols(), 0, cfg.forest);
    } else if (!multi) {
        model.warnings.push_back("training rows hold only " + std::string(to_string(kept_labels.front())) +
                                 "; classifier is constant");
        model.classifier = constant_classifier(kept_labels.front(), x.cols(), kept_labels.size(), cfg.forest);
    } else {
        model.classifier = train_region_classifier(select_rows(x, keep), kept_labels, cfg.forest);
    }
    model.classifier.window = cfg.window.size;
    model.classifier.kinds.assign(kAllKinds.begin(), kAllKinds.end());

    // per-region regressors; a region with fewer than 2 rows falls back to SUSTAIN
    std::array<std::vector<std::size_t>, 3> rows;
    std::array<bool, 3> trained{};
    for (Region r : kAllRegions) {
        const auto k = static_cast<std::size_t>(r);
        rows[k] = rows_with(data.labels, r);
        trained[k] = rows[k].size() >= 2;
        model.region_kinds[k] = default_region_kinds(r);
    }
    const auto sustain = static_cast<std::size_t>(Region::Sustain);
    if (!trained[sustain]) {
        model.warnings.push_back("SUSTAIN has fewer than 2 rows; its regressor uses all rows");
        rows[sustain].resize(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i)
            rows[sustain][i] = i;
        trained[sustain] = true;
    }
    std::vector<Region> jobs;
    for (Region r : kAllRegions)
        if (trained[static_cast<std::size_t>(r)])
            jobs.push_back(r);
    parallel_for(jobs.size(), [&](std::size_t j) {
        const auto k = static_cast<std::size_t>(jobs[j]);
        const auto cols = columns_of_kinds(x, model.region_kinds[k]);
        const auto sub = select_columns(select_rows(x, rows[k]), cols);
        model.regressors[k] = train_svr(sub, pick(data.targets, rows[k]), cfg.svr);
    });
    for (Region r : kAllRegions) {
        const auto k = static_cast<std::size_t>(r);
        if (!trained[k]) {
            model.warnings.push_back(std::string(to_string(r)) + " missing from training data; reusing SUSTAIN regressor");
            model.regressors[k] = model.regressors[sustain];
            model.region_kinds[k] = model.region_kinds[sustain];
        }
        if (!model.regressors[k].report.converged)
            model.warnings.push_back(std::string(to_string(r)) + " regressor stopped at max_iter before converging");
    }
    return model;
}

AnnotationTrace predict_state(const StateModel& model, const FeatureSeries& features)
{
    const auto design = weight_features(build_design_matrix(features, model.config.window, kAllKinds),
                                        model.weights, model.state);
    std::array<std::vector<std::size_t>, 3> cols;
    for (std::size_t k = 0; k < 3; ++k)
        cols[k] = columns_of_kinds(design, model.region_kinds[k]);
    std::vector<double> out(design.rows());
    std::vector<double> row;
    for (std::size_t i = 0; i < design.rows(); ++i) {
        const auto full = design.values.row(i);
        const auto k = static_cast<std::size_t>(model.classifier.classify(full).label);
        row.clear();
        for (auto c : cols[k])
            row.push_back(full[c]);
        out[i] = model.regressors[k].predict(row);
    }
    AnnotationTrace t;
    t.state = model.state;
    t.fps = features.fps;
    t.values = back_fill(out, features.frames());
    return t;
}

FlatModel train_flat_model(std::span<const Session> sessions, EmotionState state, const StateModelConfig& cfg)
{
    validate_config(cfg);
    const auto data = assemble_training_set(sessions, state, cfg);
    return train_flat_model(data, compute_mic_weights(data, state, cfg), state, cfg);
}

FlatModel train_flat_model(const TrainingSet& data, const MicMatrix& weights, EmotionState state,
                           const StateModelConfig& cfg)
{
    validate_config(cfg);
    FlatModel model;
    model.state = state;
    model.config = cfg;
    model.weights = weights;
    const auto x = weight_features(data.design, model.weights, state);
    model.regressor = train_svr(x, data.targets, cfg.svr);
    return model;
}

AnnotationTrace predict_flat(const FlatModel& model, const FeatureSeries& features)
{
    const auto design = weight_features(build_design_matrix(features, model.config.window, kAllKinds),
                                        model.weights, model.state);
    std::vector<double> out(design.rows());
    for (std::size_t i = 0; i < design.rows(); ++i)
        out[i] = model.regressor.predict(design.values.row(i));
    AnnotationTrace t;
    t.state = model.state;
    t.fps = features.fps;
    t.values = back_fill(out, features.frames());
    return t;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json to_json(const ScoreTable& t)
{
    std::vector<double> scores(t.scores.data().begin(), t.scores.data().end());
    return {{"rows", t.rows}, {"cols", t.cols}, {"scores", scores}};
}

ScoreTable score_table_from_json(const nlohmann::json& j)
{
    ScoreTable t;
    t.rows = j.at("rows").get<std::vector<std::string>>();
    t.cols = j.at("cols").get<std::vector<std::string>>();
    const auto s = j.at("scores").get<std::vector<double>>();
    if (s.size() != t.rows.size() * t.cols.size())
        throw Error(ErrorCode::InvalidArgument, "score table size mismatch");
    t.scores = Matrix(t.rows.size(), t.cols.size());
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        for (std::size_t c = 0; c < t.cols.size(); ++c)
            t.scores(r, c) = s[r * t.cols.size() + c];
    return t;
}

nlohmann::json config_to_json(const StateModelConfig& c)
{
    return {{"window", c.window.size},
            {"deadband", c.window.deadband},
            {"label_smooth", c.label_smooth},
            {"label_threshold", c.label_threshold},
            {"use_provided_regions", c.use_provided_regions},
            {"mic_alpha", c.mic.alpha},
            {"mic_clump_factor", c.mic.clump_factor},
            {"mic_max_points", c.mic_max_points},
            {"forest_trees", c.forest.n_trees},
            {"forest_max_depth", c.forest.max_depth},
            {"forest_min_leaf", c.forest.min_leaf},
            {"forest_features_per_split", c.forest.features_per_split},
            {"forest_seed", c.forest.seed},
            {"forest_bootstrap", c.forest.bootstrap},
            {"svr_C", c.svr.C},
            {"svr_epsilon", c.svr.epsilon},
            {"svr_kernel", std::string(to_string(c.svr.kernel))},
            {"svr_gamma", c.svr.gamma},
            {"svr_tol", c.svr.tol},
            {"svr_max_iter", c.svr.max_iter},
            {"svr_standardize", c.svr.standardize},
            {"svr_cache_mb", c.svr.cache_mb}};
}

StateModelConfig config_from_json(const nlohmann::json& j)
{
    try {
        StateModelConfig c;
        c.window.size = j.at("window");
        c.window.deadband = j.at("deadband");
        c.label_smooth = j.at("label_smooth");
        c.label_threshold = j.at("label_threshold");
        c.use_provided_regions = j.at("use_provided_regions");
        c.mic.alpha = j.at("mic_alpha");
        c.mic.clump_factor = j.at("mic_clump_factor");
        c.mic_max_points = j.at("mic_max_points");
        c.forest.n_trees = j.at("forest_trees");
        c.forest.max_depth = j.at("forest_max_depth");
        c.forest.min_leaf = j.at("forest_min_leaf");
        c.forest.features_per_split = j.at("forest_features_per_split");
        c.forest.seed = j.at("forest_seed");
        c.forest.bootstrap = j.at("forest_bootstrap");
        c.svr.C = j.at("svr_C");
        c.svr.epsilon = j.at("svr_epsilon");
        const auto k = parse_kernel(j.at("svr_kernel").get<std::string>());
        if (!k)
            throw Error(ErrorCode::InvalidArgument, "unknown kernel");
        c.svr.kernel = *k;
        c.svr.gamma = j.at("svr_gamma");
        c.svr.tol = j.at("svr_tol");
        c.svr.max_iter = j.at("svr_max_iter");
        c.svr.standardize = j.at("svr_standardize");
        c.svr.cache_mb = j.at("svr_cache_mb");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("config document: ") + e.what());
    }
}

nlohmann::json to_json(const StateModel& m)
{
    nlohmann::json regs, kinds;
    for (Region r : kAllRegions) {
        const auto k = static_cast<std::size_t>(r);
        regs[std::string(to_string(r))] = to_json(m.regressors[k]);
        std::vector<std::string> names;
        for (auto kind : m.region_kinds[k])
            names.emplace_back(to_string(kind));
        kinds[std::string(to_string(r))] = names;
    }
    return {{"format", "ems-state-model"},
            {"version", 1},
            {"state", std::string(to_string(m.state))},
            {"config", config_to_json(m.config)},
            {"weights", to_json(m.weights)},
            {"classifier", to_json(m.classifier)},
            {"regressors", regs},
            {"region_kinds", kinds},
            {"warnings", m.warnings}};
}

StateModel state_model_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format") != "ems-state-model" || j.at("version") != 1)
            throw Error(ErrorCode::InvalidArgument, "unsupported model format");
        StateModel m;
        const auto s = parse_state(j.at("state").get<std::string>());
        if (!s)
            throw Error(ErrorCode::InvalidArgument, "unknown state");
        m.state = *s;
        m.config = config_from_json(j.at("config"));
        m.weights = score_table_from_json(j.at("weights"));
        m.classifier = classifier_from_json(j.at("classifier"));
        for (Region r : kAllRegions) {
            const auto k = static_cast<std::size_t>(r);
            const std::string name(to_string(r));
            m.regressors[k] = regressor_from_json(j.at("regressors").at(name));
            for (const auto& kn : j.at("region_kinds").at(name)) {
                const auto kind = parse_kind(kn.get<std::string>());
                if (!kind)
                    throw Error(ErrorCode::InvalidArgument, "unknown feature kind");
                m.region_kinds[k].push_back(*kind);
            }
        }
        m.warnings = j.at("warnings").get<std::vector<std::string>>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("model document: ") + e.what());
    }
}

} // namespace ems
