#include "qdal/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace qdal {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) {
        throw ConfigError(where + " must be an object");
    }
    const std::set<std::string> keys(allowed.begin(), allowed.end());
    for (const auto& [key, value] : obj.items()) {
        if (!keys.contains(key)) {
            std::string list;
            for (const auto* k : allowed) {
                list += list.empty() ? k : std::string(", ") + k;
            }
            throw ConfigError("unknown key '" + key + "' in " + where + " (valid: " + list + ")");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + "." + key + ": " + e.what());
    }
}

std::string_view mask_mode_name(MaskMode m) { return m == MaskMode::per_pass ? "per_pass" : "per_example"; }

std::string_view format_name(DatasetFormat f) { return f == DatasetFormat::csv ? "csv" : "jsonl"; }

void resolve_seeds(ExperimentConfig& c) {
    c.seeds.clear();
    for (int r = 0; r < c.loop.runs; ++r) {
        c.seeds.push_back(c.loop.base_seed + static_cast<std::uint64_t>(r));
    }
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig c;
    c.dataset.synthetic = SyntheticConfig{};
    c.loop = LoopConfig::desk_scale(c.dataset.synthetic->dim);
    resolve_seeds(c);
    return c;
}

std::vector<std::string> split_comma_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) {
            out.push_back(item.substr(b, e - b + 1));
        }
    }
    return out;
}

std::vector<Strategy> parse_strategy_list(const std::vector<std::string>& names) {
    std::vector<Strategy> out;
    for (const auto& n : names) {
        const auto s = parse_strategy(n);
        if (!s) {
            throw ConfigError("unknown strategy '" + n + "' (valid strategies: " + valid_strategy_names() + ")");
        }
        if (std::find(out.begin(), out.end(), *s) == out.end()) {
            out.push_back(*s);
        }
    }
    if (out.empty()) {
        throw ConfigError("at least one strategy is required (valid strategies: " + valid_strategy_names() + ")");
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::vector<std::string>& values) {
    std::vector<std::uint64_t> out;
    for (const auto& v : values) {
        try {
            std::size_t used = 0;
            const auto s = std::stoull(v, &used);
            if (used != v.size()) {
                throw std::invalid_argument(v);
            }
            out.push_back(s);
        } catch (const std::exception&) {
            throw ConfigError("invalid seed '" + v + "'");
        }
    }
    if (out.empty()) {
        throw ConfigError("at least one seed is required");
    }
    return out;
}

ExperimentConfig parse_config(const json& root, const std::filesystem::path& base_dir) {
    const json& j = root.contains("manifest_version") ? root.at("config") : root;
    reject_unknown(j, "config",
                   {"dataset", "loop", "acquisition", "regressor", "strategies", "baselines", "output_dir", "threads",
                    "isa"});
    ExperimentConfig c = default_config();

    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        reject_unknown(d, "dataset", {"synthetic", "path", "format"});
        if (d.contains("synthetic") == d.contains("path")) {
            throw ConfigError("dataset: give exactly one of 'synthetic' or 'path'");
        }
        c.dataset = DatasetSource{};
        if (d.contains("synthetic")) {
            const auto& s = d.at("synthetic");
            reject_unknown(s, "dataset.synthetic",
                           {"n_train", "n_val", "n_test", "dim", "level_proportions", "noise_sd", "hardness_skew",
                            "seed"});
            SyntheticConfig sc;
            read(s, "n_train", sc.n_train, "dataset.synthetic");
            read(s, "n_val", sc.n_val, "dataset.synthetic");
            read(s, "n_test", sc.n_test, "dataset.synthetic");
            read(s, "dim", sc.dim, "dataset.synthetic");
            read(s, "level_proportions", sc.level_proportions, "dataset.synthetic");
            read(s, "noise_sd", sc.noise_sd, "dataset.synthetic");
            read(s, "hardness_skew", sc.hardness_skew, "dataset.synthetic");
            read(s, "seed", sc.seed, "dataset.synthetic");
            c.dataset.synthetic = sc;
        } else {
            std::filesystem::path p = d.at("path").get<std::string>();
            c.dataset.path = p.is_absolute() ? p : base_dir / p;
            if (d.contains("format")) {
                const auto f = d.at("format").get<std::string>();
                if (f == "jsonl") {
                    c.dataset.format = DatasetFormat::jsonl;
                } else if (f == "csv") {
                    c.dataset.format = DatasetFormat::csv;
                } else {
                    throw ConfigError("dataset.format must be 'jsonl' or 'csv', got '" + f + "'");
                }
            }
        }
    }

    bool explicit_seeds = false;
    if (j.contains("loop")) {
        const auto& l = j.at("loop");
        reject_unknown(l, "loop",
                       {"initial_labeled", "final_labeled", "runs", "base_seed", "seeds", "record_wall_time"});
        read(l, "initial_labeled", c.loop.initial_labeled, "loop");
        read(l, "final_labeled", c.loop.final_labeled, "loop");
        read(l, "runs", c.loop.runs, "loop");
        read(l, "base_seed", c.loop.base_seed, "loop");
        read(l, "record_wall_time", c.loop.record_wall_time, "loop");
        if (l.contains("seeds")) {
            read(l, "seeds", c.seeds, "loop");
            if (c.seeds.empty()) {
                throw ConfigError("loop.seeds must not be empty");
            }
            c.loop.runs = static_cast<int>(c.seeds.size());
            explicit_seeds = true;
        }
    }
    if (c.loop.runs < 1) {
        throw ConfigError("loop.runs must be positive");
    }
    if (!explicit_seeds) {
        resolve_seeds(c);
    }

    if (j.contains("acquisition")) {
        const auto& a = j.at("acquisition");
        reject_unknown(a, "acquisition", {"batch_k", "beta", "mc_samples", "pool_subset_m"});
        read(a, "batch_k", c.loop.acquisition.batch_k, "acquisition");
        read(a, "beta", c.loop.acquisition.beta, "acquisition");
        read(a, "mc_samples", c.loop.acquisition.mc_samples, "acquisition");
        read(a, "pool_subset_m", c.loop.acquisition.pool_subset_m, "acquisition");
    }

    if (j.contains("regressor")) {
        const auto& r = j.at("regressor");
        reject_unknown(r, "regressor",
                       {"preset", "hidden_widths", "dropout_rate", "learning_rate", "weight_decay", "epochs",
                        "batch_size", "warmup_ratio", "beta1", "beta2", "adam_eps", "mask_mode"});
        auto& rc = c.loop.regressor;
        if (r.contains("preset")) {
            const auto preset = r.at("preset").get<std::string>();
            if (preset == "fine_tuning") {
                rc.learning_rate = RegressorConfig::kFineTuningLearningRate;
            } else if (preset != "default") {
                throw ConfigError("regressor.preset must be 'default' or 'fine_tuning', got '" + preset + "'");
            }
        }
        read(r, "hidden_widths", rc.hidden_widths, "regressor");
        read(r, "dropout_rate", rc.dropout_rate, "regressor");
        read(r, "learning_rate", rc.learning_rate, "regressor");
        read(r, "weight_decay", rc.weight_decay, "regressor");
        read(r, "epochs", rc.epochs, "regressor");
        read(r, "batch_size", rc.batch_size, "regressor");
        read(r, "warmup_ratio", rc.warmup_ratio, "regressor");
        read(r, "beta1", rc.beta1, "regressor");
        read(r, "beta2", rc.beta2, "regressor");
        read(r, "adam_eps", rc.adam_eps, "regressor");
        if (r.contains("mask_mode")) {
            const auto m = r.at("mask_mode").get<std::string>();
            if (m == "per_example") {
                rc.mask_mode = MaskMode::per_example;
            } else if (m == "per_pass") {
                rc.mask_mode = MaskMode::per_pass;
            } else {
                throw ConfigError("regressor.mask_mode must be 'per_example' or 'per_pass', got '" + m + "'");
            }
        }
    }

    if (j.contains("strategies")) {
        c.strategies = parse_strategy_list(j.at("strategies").get<std::vector<std::string>>());
    }
    if (j.contains("baselines")) {
        c.baselines.clear();
        for (const auto& name : j.at("baselines").get<std::vector<std::string>>()) {
            const auto b = parse_baseline(name);
            if (!b) {
                throw ConfigError("unknown baseline '" + name + "' (valid baselines: random, majority, supervised)");
            }
            c.baselines.push_back(*b);
        }
    }
    if (j.contains("output_dir")) {
        std::filesystem::path p = j.at("output_dir").get<std::string>();
        c.output_dir = p;
    }
    read(j, "threads", c.threads, "config");
    if (j.contains("isa")) {
        const auto name = j.at("isa").get<std::string>();
        c.isa = kernels::parse_isa(name);
        if (!c.isa) {
            throw ConfigError("isa must be 'scalar' or 'avx2', got '" + name + "'");
        }
    }

    if (c.dataset.synthetic) {
        c.loop.regressor.input_dim = c.dataset.synthetic->dim;
    }
    return c;
}

void apply_env_overrides(ExperimentConfig& config) {
    if (const char* seed = std::getenv("QDAL_SEED"); seed != nullptr && *seed != '\0') {
        config.loop.base_seed = parse_seed_list({seed}).front();
        resolve_seeds(config);
    }
    if (const char* out = std::getenv("QDAL_OUT"); out != nullptr && *out != '\0') {
        config.output_dir = out;
    }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config '" + path.string() + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    try {
        auto c = parse_config(j, path.parent_path());
        apply_env_overrides(c);
        return c;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const ExperimentConfig& c) {
    nlohmann::ordered_json j;
    if (c.dataset.synthetic) {
        const auto& s = *c.dataset.synthetic;
        j["dataset"]["synthetic"] = {{"n_train", s.n_train},
                                     {"n_val", s.n_val},
                                     {"n_test", s.n_test},
                                     {"dim", s.dim},
                                     {"level_proportions", s.level_proportions},
                                     {"noise_sd", s.noise_sd},
                                     {"hardness_skew", s.hardness_skew},
                                     {"seed", s.seed}};
    } else if (c.dataset.path) {
        j["dataset"]["path"] = std::filesystem::absolute(*c.dataset.path).string();
        if (c.dataset.format) {
            j["dataset"]["format"] = std::string(format_name(*c.dataset.format));
        }
    }
    j["loop"] = {{"initial_labeled", c.loop.initial_labeled},
                 {"final_labeled", c.loop.final_labeled},
                 {"runs", c.loop.runs},
                 {"base_seed", c.loop.base_seed},
                 {"seeds", c.seeds},
                 {"record_wall_time", c.loop.record_wall_time}};
    const auto& a = c.loop.acquisition;
    j["acquisition"] = {{"batch_k", a.batch_k},
                        {"beta", a.beta},
                        {"mc_samples", a.mc_samples},
                        {"pool_subset_m", a.pool_subset_m}};
    const auto& r = c.loop.regressor;
    j["regressor"] = {{"hidden_widths", r.hidden_widths},
                      {"dropout_rate", r.dropout_rate},
                      {"learning_rate", r.learning_rate},
                      {"weight_decay", r.weight_decay},
                      {"epochs", r.epochs},
                      {"batch_size", r.batch_size},
                      {"warmup_ratio", r.warmup_ratio},
                      {"beta1", r.beta1},
                      {"beta2", r.beta2},
                      {"adam_eps", r.adam_eps},
                      {"mask_mode", std::string(mask_mode_name(r.mask_mode))}};
    std::vector<std::string> strategies;
    for (const auto s : c.strategies) {
        strategies.emplace_back(strategy_name(s));
    }
    j["strategies"] = strategies;
    std::vector<std::string> baselines;
    for (const auto b : c.baselines) {
        baselines.emplace_back(baseline_name(b));
    }
    j["baselines"] = baselines;
    j["output_dir"] = c.output_dir.string();
    j["threads"] = c.threads;
    if (c.isa) {
        j["isa"] = std::string(kernels::isa_name(*c.isa));
    }
    return j;
}

Dataset materialize_dataset(const ExperimentConfig& config) {
    if (config.dataset.synthetic) {
        return gen_synthetic(*config.dataset.synthetic);
    }
    if (config.dataset.path) {
        return load_dataset(*config.dataset.path, config.dataset.format);
    }
    throw ConfigError("no dataset configured");
}

}  // namespace qdal
