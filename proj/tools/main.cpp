// ems: command-line front end for feature extraction, MIC analysis, model
// training/prediction, cross-validation and synthetic data generation.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ems/error.hpp"
#include "ems/eval.hpp"
#include "ems/facefeat.hpp"
#include "ems/parallel.hpp"
#include "ems/version.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace ems;
using nlohmann::json;

namespace {

struct Common {
    std::uint64_t seed = 1;
    bool seed_given = false;
    std::size_t threads = 0;
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::size_t> window;
    std::optional<double> alpha;
    std::optional<std::size_t> k;
    std::string out_dir;
    bool strict = false;
};

// Written next to every run's outputs; enough to rerun it.
struct Manifest {
    std::string subcommand;
    json inputs = json::object();
    std::vector<std::string> outputs;
    std::vector<std::string> warnings;
};

class NumericFailure : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

cli::RunConfig make_run_config(const Common& c)
{
    cli::RunConfig rc;
    if (!c.config_path.empty())
        rc.load_file(c.config_path);
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "--set expects key=value, got '" + s + "'");
        rc.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (c.seed_given)
        rc.seed = c.seed;
    if (c.window) {
        rc.model.window.size = *c.window;
        rc.window_overridden = true;
    }
    if (c.alpha)
        rc.model.mic.alpha = *c.alpha;
    if (c.k)
        rc.k = *c.k;
    return rc;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::Io, "cannot write " + path.string());
    out << text;
}

void emit(const fs::path& out_dir, Manifest& m, const std::string& name, const std::string& text)
{
    write_text(out_dir / name, text);
    m.outputs.push_back(name);
}

void write_manifest(const fs::path& out_dir, const Manifest& m, const cli::RunConfig& rc)
{
    json j;
    j["tool"] = "ems";
    j["version"] = std::string(kVersion);
    j["subcommand"] = m.subcommand;
    j["seed"] = rc.seed;
    j["config"] = rc.to_json();
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    j["warnings"] = m.warnings;
    write_text(out_dir / "manifest.json", j.dump(2) + "\n");
}

EmotionState state_arg(const std::string& name)
{
    const auto s = parse_state(name);
    if (!s)
        throw Error(ErrorCode::InvalidArgument, "unknown state '" + name + "'");
    return *s;
}

// Traces given as State=path on the command line.
std::vector<AnnotationTrace> load_traces(const std::vector<std::string>& specs, double fps, json& inputs)
{
    std::vector<AnnotationTrace> traces;
    for (const auto& spec : specs) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::InvalidArgument, "--trace expects State=path, got '" + spec + "'");
        const auto state = state_arg(spec.substr(0, eq));
        const std::string path = spec.substr(eq + 1);
        traces.push_back(load_annotation_trace(path, state, fps));
        inputs["traces"][std::string(to_string(state))] = path;
    }
    return traces;
}

// Aligns every trace to the features and truncates all to the shortest.
std::pair<FeatureSeries, std::vector<AnnotationTrace>> align_all(const FeatureSeries& f,
                                                                 const std::vector<AnnotationTrace>& traces)
{
    std::vector<AnnotationTrace> aligned;
    std::size_t n = f.frames();
    for (const auto& t : traces) {
        aligned.push_back(align(f, t).second);
        n = std::min(n, aligned.back().frames());
    }
    for (auto& t : aligned)
        t.values.resize(n);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i)
        rows[i] = i;
    return {FeatureSeries{f.data.select_rows(rows), f.fps}, aligned};
}

std::vector<Session> load_session_root(const std::string& root, double fps)
{
    auto sessions = load_sessions(root, fps);
    if (sessions.empty())
        throw Error(ErrorCode::TooFewSessions, "no session directories under " + root);
    return sessions;
}

std::vector<EmotionState> states_present(const std::vector<Session>& sessions, const std::string& arg)
{
    if (arg != "all")
        return {state_arg(arg)};
    std::vector<EmotionState> out;
    for (auto s : kAllStates)
        for (const auto& sess : sessions)
            if (sess.traces.count(s)) {
                out.push_back(s);
                break;
            }
    if (out.empty())
        throw Error(ErrorCode::TooFewSessions, "sessions carry no traces");
    return out;
}

// ---------------------------------------------------------------------------

void cmd_features(const cli::RunConfig& rc, const fs::path& out, Manifest& m, const std::string& landmarks,
                  const std::string& reference)
{
    m.inputs["landmarks"] = landmarks;
    m.inputs["reference"] = reference;
    const auto ref = load_reference_shape(reference);
    const auto frames = load_landmark_frames(landmarks);
    const auto series = extract_series(frames, ref, rc.fps);
    std::ostringstream csv;
    write_feature_series(series, csv);
    emit(out, m, "features.csv", csv.str());
}

void cmd_scores(const cli::RunConfig& rc, const fs::path& out, Manifest& m, bool use_mic, const std::string& features_path,
                const std::vector<std::string>& trace_specs, const std::string& session_dir)
{
    FeatureSeries features;
    std::vector<AnnotationTrace> traces;
    if (!session_dir.empty()) {
        m.inputs["session"] = session_dir;
        const auto s = load_session(session_dir, rc.fps);
        features = s.features;
        for (const auto& [state, t] : s.traces)
            traces.push_back(t);
    } else {
        m.inputs["features"] = features_path;
        features = load_feature_series(features_path, rc.fps);
    }
    auto extra = load_traces(trace_specs, rc.fps, m.inputs);
    traces.insert(traces.end(), extra.begin(), extra.end());
    if (traces.empty())
        throw Error(ErrorCode::EmptyInput, "no traces given");
    const auto [f, t] = align_all(features, traces);

    const auto table = use_mic ? mic_matrix(f, t, rc.model.mic) : pearson_matrix(f, t);
    const std::string name = use_mic ? "mic" : "pearson";
    std::ostringstream csv;
    write_score_table(table, csv);
    emit(out, m, name + ".csv", csv.str());

    std::vector<std::string> header = {"frames=" + std::to_string(f.frames()), "seed=" + std::to_string(rc.seed)};
    if (use_mic) {
        std::ostringstream a;
        a << "alpha=" << rc.model.mic.alpha;
        header.insert(header.begin(), {a.str(), "clump_factor=" + std::to_string(rc.model.mic.clump_factor)});
    }
    emit(out, m, name + "_report.txt",
         format_ranking_report(table, use_mic ? "MIC ranking" : "Pearson ranking", header));
}

void cmd_train(const cli::RunConfig& rc, const fs::path& out, Manifest& m, const Common& c,
               const std::string& sessions_dir, const std::string& state_name)
{
    m.inputs["sessions"] = sessions_dir;
    const auto sessions = load_session_root(sessions_dir, rc.fps);
    bool failed = false;
    for (auto state : states_present(sessions, state_name)) {
        const auto model = train_state_model(sessions, state, rc.model_for(state));
        for (const auto& w : model.warnings)
            m.warnings.push_back(std::string(to_string(state)) + ": " + w);
        for (const auto& r : model.regressors)
            failed = failed || !r.report.converged;
        emit(out, m, "model_" + std::string(to_string(state)) + ".json", to_json(model).dump(1) + "\n");
    }
    if (failed && c.strict)
        throw NumericFailure("NotConverged: a regressor stopped at max_iter");
}

void cmd_predict(const cli::RunConfig& rc, const fs::path& out, Manifest& m, const std::string& model_path,
                 const std::string& features_path)
{
    m.inputs["model"] = model_path;
    m.inputs["features"] = features_path;
    std::ifstream in(model_path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open " + model_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedRow, model_path + ": " + e.what());
    }
    const auto model = state_model_from_json(doc);
    const auto features = load_feature_series(features_path, rc.fps);
    const auto pred = predict_state(model, features);
    std::ostringstream csv;
    write_annotation_trace(pred, csv);
    emit(out, m, "prediction_" + std::string(to_string(model.state)) + ".csv", csv.str());
}

EvalReport base_report(const cli::RunConfig& rc, std::size_t n_sessions)
{
    EvalReport r;
    r.seed = rc.seed;
    r.k = rc.k;
    r.sessions = n_sessions;
    r.config = rc.to_json();
    return r;
}

void cmd_eval(const cli::RunConfig& rc, const fs::path& out, Manifest& m, const std::string& sessions_dir,
              const std::string& state_name, bool ablation)
{
    m.inputs["sessions"] = sessions_dir;
    const auto sessions = load_session_root(sessions_dir, rc.fps);
    auto report = base_report(rc, sessions.size());
    for (auto state : states_present(sessions, state_name)) {
        if (ablation) {
            auto a = ablate_regions(sessions, state, rc.eval_for(state));
            report.states.push_back(a.with_region);
            report.ablations.push_back(std::move(a));
        } else {
            report.states.push_back(kfold_cv(sessions, state, rc.eval_for(state)));
        }
        if (report.states.back().excluded)
            m.warnings.push_back(std::string(to_string(state)) + ": " + std::to_string(report.states.back().excluded) +
                                 " folds excluded (constant truth or prediction)");
    }
    emit(out, m, "report.json", to_json(report).dump(2) + "\n");
    std::ostringstream csv;
    write_fold_csv(report, csv);
    emit(out, m, "folds.csv", csv.str());
}

void cmd_sweep(const cli::RunConfig& rc, const fs::path& out, Manifest& m, const std::string& sessions_dir,
               const std::string& state_name)
{
    m.inputs["sessions"] = sessions_dir;
    const auto sessions = load_session_root(sessions_dir, rc.fps);
    auto report = base_report(rc, sessions.size());
    for (auto state : states_present(sessions, state_name))
        report.sweeps.push_back(window_sweep(sessions, state, rc.windows, rc.eval_for(state)));
    emit(out, m, "report.json", to_json(report).dump(2) + "\n");
    std::ostringstream csv;
    write_sweep_csv(report, csv);
    emit(out, m, "sweep.csv", csv.str());
}

struct SynthArgs {
    std::string manifest;
    bool benchmark = false;
    std::size_t sessions = 20;
    std::size_t frames = 240;
    std::size_t dynamics = 40;
    double noise = 0.02;
    std::string state = "Concentration";
};

void write_session(const fs::path& out, Manifest& m, const Session& s)
{
    save_session(s, out / s.id);
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(out / s.id))
        names.push_back(s.id + "/" + entry.path().filename().string());
    std::sort(names.begin(), names.end());
    m.outputs.insert(m.outputs.end(), names.begin(), names.end());
}

void cmd_synth(const cli::RunConfig& rc, const fs::path& out, Manifest& m, const Common& c, const SynthArgs& a)
{
    if (a.benchmark == !a.manifest.empty())
        throw Error(ErrorCode::InvalidArgument, "synth needs exactly one of --manifest or --benchmark");
    if (!a.manifest.empty()) {
        m.inputs["manifest"] = a.manifest;
        std::ifstream in(a.manifest);
        if (!in)
            throw Error(ErrorCode::Io, "cannot open " + a.manifest);
        auto cfg = parse_synth_manifest(in);
        if (c.seed_given)
            cfg.seed = rc.seed;
        write_session(out, m, synth_session(cfg));
        emit(out, m, "synth_manifest.txt", format_synth_manifest(cfg));
        return;
    }
    BenchmarkConfig b;
    b.n_sessions = a.sessions;
    b.n_frames = a.frames;
    b.fps = rc.fps;
    b.dynamics = a.dynamics;
    b.noise = a.noise;
    b.state = state_arg(a.state);
    b.seed = rc.seed;
    m.inputs["benchmark"] = {{"sessions", b.n_sessions}, {"frames", b.n_frames}, {"dynamics", b.dynamics},
                             {"noise", b.noise},         {"state", a.state}};
    for (const auto& s : synth_benchmark(b))
        write_session(out, m, s);
}

int exit_code_for(const Error& e)
{
    return is_numeric_failure(e.code()) ? 3 : 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Epistemic mental state modeling: MIC analysis, temporal features, region-gated regression"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    Common c;
    const char* env_out = std::getenv("EMS_OUT_DIR");
    c.out_dir = env_out && *env_out ? env_out : "ems_out";
    app.add_option_function<std::uint64_t>(
           "--seed", [&](std::uint64_t s) { c.seed = s; c.seed_given = true; }, "seed for every random choice (default 1)");
    app.add_option("--threads", c.threads, "worker threads (0 = all cores); outputs do not depend on it");
    app.add_option("--config", c.config_path, "key=value config file")->check(CLI::ExistingFile);
    app.add_option("--set", c.sets, "config override key=value (repeatable)");
    app.add_option_function<std::size_t>("--window", [&](std::size_t w) { c.window = w; }, "window size in frames");
    app.add_option_function<double>("--alpha", [&](double a) { c.alpha = a; }, "MIC grid exponent");
    app.add_option_function<std::size_t>("--k", [&](std::size_t k) { c.k = k; }, "cross-validation folds");
    app.add_option("--out", c.out_dir, "output directory (default $EMS_OUT_DIR or ./ems_out)");
    app.add_flag("--strict", c.strict, "treat a non-converged regressor as a failure (exit 3)");
    app.fallthrough();

    std::string landmarks, reference;
    auto* features = app.add_subcommand("features", "landmark CSV -> 12-channel feature CSV");
    features->add_option("--landmarks", landmarks, "landmark CSV")->required();
    features->add_option("--reference", reference, "reference shape CSV (one row)")->required();

    std::string feat_path, session_dir;
    std::vector<std::string> trace_specs;
    auto* mic_cmd = app.add_subcommand("mic", "MIC matrix of channels against state traces");
    auto* pearson_cmd = app.add_subcommand("pearson", "Pearson matrix of channels against state traces");
    for (auto* sc : {mic_cmd, pearson_cmd}) {
        sc->add_option("--features", feat_path, "feature CSV");
        sc->add_option("--trace", trace_specs, "State=trace.csv (repeatable)");
        sc->add_option("--session", session_dir, "session directory instead of --features/--trace");
    }

    std::string sessions_dir, state_name = "all";
    auto* train = app.add_subcommand("train", "train per-state models");
    train->add_option("--sessions", sessions_dir, "directory of session directories")->required();
    train->add_option("--state", state_name, "state name or 'all'");

    std::string model_path;
    auto* predict = app.add_subcommand("predict", "predict a trace with a trained model");
    predict->add_option("--model", model_path, "model JSON")->required();
    predict->add_option("--features", feat_path, "feature CSV")->required();

    bool no_ablation = false;
    auto* eval = app.add_subcommand("eval", "k-fold cross-validation with the region ablation");
    eval->add_option("--sessions", sessions_dir, "directory of session directories")->required();
    eval->add_option("--state", state_name, "state name or 'all'");
    eval->add_flag("--no-ablation", no_ablation, "skip the region-free baseline");

    std::string windows;
    auto* sweep = app.add_subcommand("sweep", "cross-validated CoERR over window sizes");
    sweep->add_option("--sessions", sessions_dir, "directory of session directories")->required();
    sweep->add_option("--state", state_name, "state name or 'all'");
    sweep->add_option("--windows", windows, "comma-separated window sizes");

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "generate synthetic sessions");
    synth->add_option("--manifest", sa.manifest, "single-session key=value manifest");
    synth->add_flag("--benchmark", sa.benchmark, "randomized multi-session benchmark");
    synth->add_option("--count", sa.sessions, "benchmark sessions");
    synth->add_option("--frames", sa.frames, "frames per benchmark session");
    synth->add_option("--dynamics", sa.dynamics, "mean segment length in frames");
    synth->add_option("--noise", sa.noise, "channel noise std");
    synth->add_option("--state", sa.state, "benchmark state");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    const auto start = std::chrono::steady_clock::now();
    Manifest manifest;
    try {
        auto rc = make_run_config(c);
        if (!windows.empty())
            rc.set("windows", windows);
        set_thread_count(c.threads);
        const fs::path out = c.out_dir;
        fs::create_directories(out);

        if (features->parsed()) {
            manifest.subcommand = "features";
            cmd_features(rc, out, manifest, landmarks, reference);
        } else if (mic_cmd->parsed() || pearson_cmd->parsed()) {
            manifest.subcommand = mic_cmd->parsed() ? "mic" : "pearson";
            if (session_dir.empty() && feat_path.empty())
                throw Error(ErrorCode::InvalidArgument, "give --session or --features with --trace");
            cmd_scores(rc, out, manifest, mic_cmd->parsed(), feat_path, trace_specs, session_dir);
        } else if (train->parsed()) {
            manifest.subcommand = "train";
            cmd_train(rc, out, manifest, c, sessions_dir, state_name);
        } else if (predict->parsed()) {
            manifest.subcommand = "predict";
            cmd_predict(rc, out, manifest, model_path, feat_path);
        } else if (eval->parsed()) {
            manifest.subcommand = "eval";
            cmd_eval(rc, out, manifest, sessions_dir, state_name, !no_ablation);
        } else if (sweep->parsed()) {
            manifest.subcommand = "sweep";
            cmd_sweep(rc, out, manifest, sessions_dir, state_name);
        } else if (synth->parsed()) {
            manifest.subcommand = "synth";
            cmd_synth(rc, out, manifest, c, sa);
        }
        write_manifest(out, manifest, rc);
        for (const auto& w : manifest.warnings)
            std::cerr << "warning: " << w << '\n';
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cerr << "ems " << manifest.subcommand << ": " << manifest.outputs.size() << " files in " << out.string()
                  << " (" << secs << " s)\n";
        return 0;
    } catch (const NumericFailure& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
