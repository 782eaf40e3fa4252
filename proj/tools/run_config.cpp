#include "run_config.hpp"

#include <charconv>
#include <fstream>

#include "ems/error.hpp"

namespace ems::cli {

namespace {

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return {};
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

template <class T>
T number(const std::string& key, const std::string& v)
{
    T out{};
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end)
        throw Error(ErrorCode::InvalidArgument, "bad value for " + key + ": '" + v + "'");
    return out;
}

bool boolean(const std::string& key, const std::string& v)
{
    if (v == "1" || v == "true" || v == "yes" || v == "on")
        return true;
    if (v == "0" || v == "false" || v == "no" || v == "off")
        return false;
    throw Error(ErrorCode::InvalidArgument, "bad value for " + key + ": '" + v + "'");
}

std::vector<std::size_t> size_list(const std::string& key, const std::string& v)
{
    std::vector<std::size_t> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto item = trim(v.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
        out.push_back(number<std::size_t>(key, item));
        if (comma == std::string::npos)
            break;
        start = comma + 1;
    }
    return out;
}

} // namespace

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = {
        "seed",        "k",           "fps",          "windows",        "window",         "deadband",
        "label_smooth", "label_threshold", "use_provided_regions", "mic_alpha", "mic_clump_factor",
        "mic_max_points", "forest_trees", "forest_max_depth", "forest_min_leaf", "forest_features_per_split",
        "forest_bootstrap", "svr_C", "svr_epsilon", "svr_kernel", "svr_gamma", "svr_tol", "svr_max_iter",
        "svr_standardize", "svr_cache_mb"};
    return keys;
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value)
{
    const auto key = trim(raw_key);
    const auto v = trim(raw_value);
    auto& m = model;
    if (key == "seed")
        seed = number<std::uint64_t>(key, v);
    else if (key == "k")
        k = number<std::size_t>(key, v);
    else if (key == "fps")
        fps = number<double>(key, v);
    else if (key == "windows")
        windows = size_list(key, v);
    else if (key == "window") {
        m.window.size = number<std::size_t>(key, v);
        window_overridden = true;
    } else if (key == "deadband")
        m.window.deadband = number<double>(key, v);
    else if (key == "label_smooth")
        m.label_smooth = number<std::size_t>(key, v);
    else if (key == "label_threshold")
        m.label_threshold = number<double>(key, v);
    else if (key == "use_provided_regions")
        m.use_provided_regions = boolean(key, v);
    else if (key == "mic_alpha")
        m.mic.alpha = number<double>(key, v);
    else if (key == "mic_clump_factor")
        m.mic.clump_factor = number<int>(key, v);
    else if (key == "mic_max_points")
        m.mic_max_points = number<std::size_t>(key, v);
    else if (key == "forest_trees")
        m.forest.n_trees = number<std::size_t>(key, v);
    else if (key == "forest_max_depth")
        m.forest.max_depth = number<std::size_t>(key, v);
    else if (key == "forest_min_leaf")
        m.forest.min_leaf = number<std::size_t>(key, v);
    else if (key == "forest_features_per_split")
        m.forest.features_per_split = number<std::size_t>(key, v);
    else if (key == "forest_bootstrap")
        m.forest.bootstrap = boolean(key, v);
    else if (key == "svr_C")
        m.svr.C = number<double>(key, v);
    else if (key == "svr_epsilon")
        m.svr.epsilon = number<double>(key, v);
    else if (key == "svr_kernel") {
        const auto kern = parse_kernel(v);
        if (!kern)
            throw Error(ErrorCode::InvalidArgument, "unknown kernel '" + v + "'");
        m.svr.kernel = *kern;
    } else if (key == "svr_gamma")
        m.svr.gamma = number<double>(key, v);
    else if (key == "svr_tol")
        m.svr.tol = number<double>(key, v);
    else if (key == "svr_max_iter")
        m.svr.max_iter = number<std::size_t>(key, v);
    else if (key == "svr_standardize")
        m.svr.standardize = boolean(key, v);
    else if (key == "svr_cache_mb")
        m.svr.cache_mb = number<std::size_t>(key, v);
    else
        throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
}

void RunConfig::load_file(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::Io, "cannot open config " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(ErrorCode::MalformedRow, path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        set(line.substr(0, eq), line.substr(eq + 1));
    }
}

StateModelConfig RunConfig::model_for(EmotionState s) const
{
    StateModelConfig c = model;
    if (!window_overridden)
        c.window.size = default_window_size(s);
    c.forest.seed = seed;
    return c;
}

EvalConfig RunConfig::eval_for(EmotionState s) const
{
    EvalConfig e;
    e.k = k;
    e.seed = seed;
    e.model = model_for(s);
    return e;
}

nlohmann::json RunConfig::to_json() const
{
    auto j = config_to_json(model);
    j["seed"] = seed;
    j["forest_seed"] = seed;
    j["k"] = k;
    j["fps"] = fps;
    j["windows"] = windows;
    j["window_overridden"] = window_overridden;
    return j;
}

} // namespace ems::cli
