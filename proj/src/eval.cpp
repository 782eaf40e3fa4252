#include "ems/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "ems/error.hpp"
#include "ems/parallel.hpp"
#include "rng.hpp"
#include "text_io.hpp"

namespace ems {

double coerr(const AnnotationTrace& pred, const AnnotationTrace& truth)
{
    return pearson(pred.values, truth.values);
}

void EvalConfig::validate() const
{
    if (k < 2)
        throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Aligned copy of frames [a, b) carrying only the given state.
Session slice_session(const Session& s, EmotionState state, std::size_t a, std::size_t b, const std::string& suffix)
{
    auto [features, trace] = align(s.features, s.traces.at(state));
    Session out;
    out.id = s.id + suffix;
    std::vector<std::size_t> rows(b - a);
    std::iota(rows.begin(), rows.end(), a);
    out.features = FeatureSeries{features.data.select_rows(rows), features.fps};
    trace.values.assign(trace.values.begin() + static_cast<std::ptrdiff_t>(a),
                        trace.values.begin() + static_cast<std::ptrdiff_t>(b));
    out.traces[state] = trace;
    const auto given = s.regions.find(state);
    if (given != s.regions.end() && given->second.size() >= b && features.fps == s.features.fps)
        out.regions[state] = RegionLabels(given->second.begin() + static_cast<std::ptrdiff_t>(a),
                                          given->second.begin() + static_cast<std::ptrdiff_t>(b));
    return out;
}

std::size_t aligned_frames(const Session& s, EmotionState state)
{
    return align(s.features, s.traces.at(state)).first.frames();
}

void summarize(StateEval& e)
{
    std::vector<double> used;
    for (const auto& f : e.folds)
        if (!f.excluded)
            used.push_back(f.coerr);
    e.excluded = e.folds.size() - used.size();
    if (used.empty()) {
        e.mean = kNaN;
        e.std = kNaN;
        return;
    }
    e.mean = std::accumulate(used.begin(), used.end(), 0.0) / static_cast<double>(used.size());
    double ss = 0.0;
    for (double v : used)
        ss += (v - e.mean) * (v - e.mean);
    e.std = used.size() > 1 ? std::sqrt(ss / static_cast<double>(used.size() - 1)) : 0.0;
}

// Pooled CoERR of a predictor over a fold's test sessions.
template <class Predict>
FoldResult score_fold(std::size_t fold, const std::vector<Session>& test, EmotionState state, std::size_t window,
                      Predict&& predict)
{
    FoldResult r;
    r.fold = fold;
    std::vector<double> pred, truth;
    for (const auto& s : test) {
        auto [features, trace] = align(s.features, s.traces.at(state));
        if (features.frames() < window)
            continue;
        r.test_ids.push_back(s.id);
        const auto p = predict(features);
        pred.insert(pred.end(), p.values.begin(), p.values.end());
        truth.insert(truth.end(), trace.values.begin(), trace.values.end());
    }
    r.test_frames = pred.size();
    try {
        r.coerr = pearson(pred, truth);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ZeroVariance && e.code() != ErrorCode::TooShort)
            throw;
        r.coerr = kNaN;
        r.excluded = true;
    }
    return r;
}

struct ArmResults {
    StateEval region;
    StateEval flat;
};

ArmResults run_folds(std::span<const Session> sessions, EmotionState state, const EvalConfig& cfg, bool with_flat)
{
    cfg.validate();
    const std::size_t w = cfg.model.window.size;
    const auto folds = make_folds(sessions, state, cfg.k, cfg.seed, w);
    ArmResults out;
    out.region.state = out.flat.state = state;
    out.region.window = out.flat.window = w;
    out.region.arm = "region";
    out.flat.arm = "flat";
    out.region.folds.resize(folds.size());
    if (with_flat)
        out.flat.folds.resize(folds.size());
    parallel_for(folds.size(), [&](std::size_t f) {
        const auto data = assemble_training_set(folds[f].train, state, cfg.model);
        const auto weights = compute_mic_weights(data, state, cfg.model);
        const auto model = train_state_model(data, weights, state, cfg.model);
        out.region.folds[f] = score_fold(f, folds[f].test, state, w,
                                         [&](const FeatureSeries& x) { return predict_state(model, x); });
        if (with_flat) {
            const auto flat = train_flat_model(data, weights, state, cfg.model);
            out.flat.folds[f] = score_fold(f, folds[f].test, state, w,
                                           [&](const FeatureSeries& x) { return predict_flat(flat, x); });
        }
    });
    summarize(out.region);
    if (with_flat)
        summarize(out.flat);
    return out;
}

} // namespace

std::vector<FoldSplit> make_folds(std::span<const Session> sessions, EmotionState state, std::size_t k,
                                  std::uint64_t seed, std::size_t gap)
{
    if (k < 2)
        throw Error(ErrorCode::InvalidArgument, "k must be >= 2");
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < sessions.size(); ++i)
        if (sessions[i].traces.count(state))
            usable.push_back(i);
    if (usable.empty())
        throw Error(ErrorCode::TooFewSessions, "no session carries a " + std::string(to_string(state)) + " trace");

    std::vector<FoldSplit> folds(k);
    if (usable.size() >= k) {
        std::mt19937_64 rng(detail::mix_seed(seed, 0x464f4c44));
        std::vector<std::size_t> order = usable;
        // Fisher-Yates with an explicit draw so the order is stable across standard libraries
        for (std::size_t i = order.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(rng() % i);
            std::swap(order[i - 1], order[j]);
        }
        std::vector<std::size_t> fold_of(sessions.size(), k);
        for (std::size_t p = 0; p < order.size(); ++p)
            fold_of[order[p]] = p % k;
        for (std::size_t f = 0; f < k; ++f)
            for (auto i : usable)
                (fold_of[i] == f ? folds[f].test : folds[f].train).push_back(sessions[i]);
        return folds;
    }

    // contiguous blocks within each session
    for (auto i : usable) {
        const std::size_t n = aligned_frames(sessions[i], state);
        if (n < k)
            throw Error(ErrorCode::TooFewSessions, std::to_string(usable.size()) + " sessions and session " +
                                                        sessions[i].id + " has fewer than k frames");
        for (std::size_t f = 0; f < k; ++f) {
            const std::size_t a = f * n / k, b = (f + 1) * n / k;
            const std::string tag = "#" + std::to_string(f);
            folds[f].test.push_back(slice_session(sessions[i], state, a, b, tag));
            if (a > gap)
                folds[f].train.push_back(slice_session(sessions[i], state, 0, a - gap, tag + "a"));
            if (b + gap < n)
                folds[f].train.push_back(slice_session(sessions[i], state, b + gap, n, tag + "b"));
        }
    }
    for (std::size_t f = 0; f < k; ++f)
        if (folds[f].train.empty())
            throw Error(ErrorCode::TooFewSessions, "fold " + std::to_string(f) + " has no training frames");
    return folds;
}

StateEval kfold_cv(std::span<const Session> sessions, EmotionState state, const EvalConfig& cfg)
{
    return run_folds(sessions, state, cfg, false).region;
}

Ablation ablate_regions(std::span<const Session> sessions, EmotionState state, const EvalConfig& cfg)
{
    auto arms = run_folds(sessions, state, cfg, true);
    Ablation a;
    a.state = state;
    a.with_region = std::move(arms.region);
    a.without_region = std::move(arms.flat);
    a.delta_percent = a.without_region.mean != 0.0
                          ? 100.0 * (a.with_region.mean - a.without_region.mean) / a.without_region.mean
                          : kNaN;
    return a;
}

Sweep window_sweep(std::span<const Session> sessions, EmotionState state, std::span<const std::size_t> windows,
                   const EvalConfig& cfg)
{
    if (windows.empty())
        throw Error(ErrorCode::InvalidArgument, "window list is empty");
    std::size_t shortest = std::numeric_limits<std::size_t>::max();
    for (const auto& s : sessions)
        if (s.traces.count(state))
            shortest = std::min(shortest, aligned_frames(s, state));
    for (auto w : windows)
        if (w < 2 || w > shortest)
            throw Error(ErrorCode::InvalidArgument,
                        "window " + std::to_string(w) + " outside [2, " + std::to_string(shortest) + "]");

    Sweep sweep;
    sweep.state = state;
    sweep.points.resize(windows.size());
    parallel_for(windows.size(), [&](std::size_t i) {
        EvalConfig c = cfg;
        c.model.window.size = windows[i];
        const auto e = kfold_cv(sessions, state, c);
        sweep.points[i] = SweepPoint{windows[i], e.mean, e.std, e.folds.size() - e.excluded};
    });
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& p : sweep.points)
        if (p.mean > best) {
            best = p.mean;
            sweep.best_window = p.window;
        }
    return sweep;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json number(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json& j)
{
    return j.is_null() ? kNaN : j.get<double>();
}

EmotionState state_from(const nlohmann::json& j)
{
    const auto s = parse_state(j.get<std::string>());
    if (!s)
        throw Error(ErrorCode::InvalidArgument, "unknown state " + j.get<std::string>());
    return *s;
}

nlohmann::json to_json(const StateEval& e)
{
    auto folds = nlohmann::json::array();
    for (const auto& f : e.folds)
        folds.push_back({{"fold", f.fold},
                         {"test_ids", f.test_ids},
                         {"test_frames", f.test_frames},
                         {"coerr", number(f.coerr)},
                         {"excluded", f.excluded}});
    return {{"state", std::string(to_string(e.state))},
            {"arm", e.arm},
            {"window", e.window},
            {"mean", number(e.mean)},
            {"std", number(e.std)},
            {"excluded", e.excluded},
            {"folds", folds}};
}

StateEval state_eval_from(const nlohmann::json& j)
{
    StateEval e;
    e.state = state_from(j.at("state"));
    e.arm = j.at("arm");
    e.window = j.at("window");
    e.mean = number_from(j.at("mean"));
    e.std = number_from(j.at("std"));
    e.excluded = j.at("excluded");
    for (const auto& jf : j.at("folds")) {
        FoldResult f;
        f.fold = jf.at("fold");
        f.test_ids = jf.at("test_ids").get<std::vector<std::string>>();
        f.test_frames = jf.at("test_frames");
        f.coerr = number_from(jf.at("coerr"));
        f.excluded = jf.at("excluded");
        e.folds.push_back(std::move(f));
    }
    return e;
}

} // namespace

nlohmann::json to_json(const EvalReport& r)
{
    nlohmann::json j;
    j["format"] = "ems-eval-report";
    j["version"] = 1;
    j["seed"] = r.seed;
    j["k"] = r.k;
    j["sessions"] = r.sessions;
    j["config"] = r.config;
    j["delta_convention"] = "relative percent: 100 * (with - without) / without";
    auto& states = j["states"] = nlohmann::json::array();
    for (const auto& e : r.states)
        states.push_back(to_json(e));
    auto& abl = j["ablations"] = nlohmann::json::array();
    for (const auto& a : r.ablations)
        abl.push_back({{"state", std::string(to_string(a.state))},
                       {"with_region", to_json(a.with_region)},
                       {"without_region", to_json(a.without_region)},
                       {"delta_percent", number(a.delta_percent)}});
    auto& sweeps = j["sweeps"] = nlohmann::json::array();
    for (const auto& s : r.sweeps) {
        auto pts = nlohmann::json::array();
        for (const auto& p : s.points)
            pts.push_back({{"window", p.window}, {"mean", number(p.mean)}, {"std", number(p.std)},
                           {"folds_used", p.folds_used}});
        sweeps.push_back({{"state", std::string(to_string(s.state))}, {"best_window", s.best_window}, {"points", pts}});
    }
    return j;
}

EvalReport eval_report_from_json(const nlohmann::json& j)
{
    try {
        if (j.at("format") != "ems-eval-report" || j.at("version") != 1)
            throw Error(ErrorCode::InvalidArgument, "unsupported report format");
        EvalReport r;
        r.seed = j.at("seed");
        r.k = j.at("k");
        r.sessions = j.at("sessions");
        r.config = j.at("config");
        for (const auto& e : j.at("states"))
            r.states.push_back(state_eval_from(e));
        for (const auto& ja : j.at("ablations")) {
            Ablation a;
            a.state = state_from(ja.at("state"));
            a.with_region = state_eval_from(ja.at("with_region"));
            a.without_region = state_eval_from(ja.at("without_region"));
            a.delta_percent = number_from(ja.at("delta_percent"));
            r.ablations.push_back(std::move(a));
        }
        for (const auto& js : j.at("sweeps")) {
            Sweep s;
            s.state = state_from(js.at("state"));
            s.best_window = js.at("best_window");
            for (const auto& jp : js.at("points"))
                s.points.push_back(SweepPoint{jp.at("window"), number_from(jp.at("mean")), number_from(jp.at("std")),
                                              jp.at("folds_used")});
            r.sweeps.push_back(std::move(s));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("report document: ") + e.what());
    }
}

namespace {

std::string cell(double v)
{
    return std::isfinite(v) ? detail::format_double(v) : std::string("nan");
}

void write_folds(const StateEval& e, std::ostream& out)
{
    for (const auto& f : e.folds)
        out << to_string(e.state) << ',' << e.arm << ',' << e.window << ',' << f.fold << ',' << f.test_frames << ','
            << cell(f.coerr) << ',' << (f.excluded ? 1 : 0) << '\n';
}

} // namespace

void write_fold_csv(const EvalReport& r, std::ostream& out)
{
    out << "state,arm,window,fold,test_frames,coerr,excluded\n";
    for (const auto& e : r.states)
        write_folds(e, out);
    for (const auto& a : r.ablations) {
        const auto listed = std::any_of(r.states.begin(), r.states.end(), [&](const StateEval& e) {
            return e.state == a.with_region.state && e.arm == a.with_region.arm && e.window == a.with_region.window;
        });
        if (!listed)
            write_folds(a.with_region, out);
        write_folds(a.without_region, out);
    }
}

void write_sweep_csv(const EvalReport& r, std::ostream& out)
{
    out << "state,window,mean,std,folds_used\n";
    for (const auto& s : r.sweeps)
        for (const auto& p : s.points)
            out << to_string(s.state) << ',' << p.window << ',' << cell(p.mean) << ',' << cell(p.std) << ','
                << p.folds_used << '\n';
}

} // namespace ems
