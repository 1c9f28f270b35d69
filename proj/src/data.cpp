#include "qdal/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "qdal/rng.hpp"

namespace qdal {

namespace {

constexpr double kClusterOffsetSd = 0.5;

bool has_gz_suffix(const std::filesystem::path& path) { return path.extension() == ".gz"; }

std::string read_all(const std::filesystem::path& path) {
    // gzread passes uncompressed files through unchanged.
    gzFile f = gzopen(path.c_str(), "rb");
    if (f == nullptr) {
        throw ParseError(0, "cannot open '" + path.string() + "'");
    }
    std::unique_ptr<gzFile_s, int (*)(gzFile)> guard(f, gzclose);
    std::string out;
    std::array<char, 1 << 16> buf{};
    int n = 0;
    while ((n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
        out.append(buf.data(), static_cast<std::size_t>(n));
    }
    if (n < 0) {
        throw ParseError(0, "read error in '" + path.string() + "'");
    }
    return out;
}

void write_all(const std::filesystem::path& path, const std::string& content) {
    if (has_gz_suffix(path)) {
        gzFile f = gzopen(path.c_str(), "wb");
        if (f == nullptr) {
            throw std::runtime_error("cannot open '" + path.string() + "' for writing");
        }
        const int written = content.empty() ? 0 : gzwrite(f, content.data(), static_cast<unsigned>(content.size()));
        const int rc = gzclose(f);
        if (written != static_cast<int>(content.size()) || rc != Z_OK) {
            throw std::runtime_error("write failed for '" + path.string() + "'");
        }
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out << content;
    if (!out) {
        throw std::runtime_error("write failed for '" + path.string() + "'");
    }
}

std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

/// Random orthonormal basis (Gram-Schmidt on a Gaussian matrix); row r is basis vector r.
std::vector<std::vector<double>> random_rotation(std::size_t d, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<std::vector<double>> q;
    while (q.size() < d) {
        std::vector<double> v(d);
        for (auto& x : v) {
            x = normal(rng);
        }
        for (const auto& u : q) {
            const double proj = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
            for (std::size_t i = 0; i < d; ++i) {
                v[i] -= proj * u[i];
            }
        }
        const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm < 1e-8) {
            continue;
        }
        for (auto& x : v) {
            x /= norm;
        }
        q.push_back(std::move(v));
    }
    return q;
}

int split_code(std::string_view name) {
    if (name == "train") {
        return 0;
    }
    if (name == "val") {
        return 1;
    }
    if (name == "test") {
        return 2;
    }
    return -1;
}

std::vector<Example>& split_ref(Dataset& ds, int code) {
    return code == 0 ? ds.train : (code == 1 ? ds.val : ds.test);
}

/// Common validation once all records are in.
void finish_loaded(Dataset& ds) {
    for (const auto* name : {"train", "val", "test"}) {
        if (split_ref(ds, split_code(name)).empty()) {
            throw ParseError(0, std::string("split '") + name + "' is empty or missing");
        }
    }
    try {
        ds.finalize();
    } catch (const std::invalid_argument& e) {
        throw ParseError(0, e.what());
    }
}

class RecordChecker {
public:
    void check(std::size_t line, const std::string& id, int level, std::size_t dim) {
        if (level < 0 || level >= kNumLevels) {
            throw ParseError(line, "level " + std::to_string(level) + " is outside {0, 1, 2}");
        }
        if (dim == 0) {
            throw ParseError(line, "empty feature vector");
        }
        if (dim_ == 0) {
            dim_ = dim;
        } else if (dim != dim_) {
            throw ParseError(line, "ragged features: " + std::to_string(dim) + " values, expected " +
                                       std::to_string(dim_));
        }
        if (!ids_.insert(id).second) {
            throw ParseError(line, "duplicate example id '" + id + "'");
        }
    }

private:
    std::size_t dim_ = 0;
    std::unordered_set<std::string> ids_;
};

Dataset parse_jsonl(const std::string& text) {
    Dataset ds;
    RecordChecker checker;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
        }
        try {
            const auto id = j.at("id").get<std::string>();
            const auto split = j.at("split").get<std::string>();
            const int code = split_code(split);
            if (code < 0) {
                throw ParseError(lineno, "unknown split '" + split + "'");
            }
            const auto& level_json = j.at("level");
            if (!level_json.is_number_integer()) {
                throw ParseError(lineno, "level must be an integer");
            }
            const int level = level_json.get<int>();
            auto features = j.at("features").get<std::vector<double>>();
            checker.check(lineno, id, level, features.size());
            if (!std::all_of(features.begin(), features.end(), [](double v) { return std::isfinite(v); })) {
                throw ParseError(lineno, "non-finite feature value");
            }
            split_ref(ds, code).push_back(Example{id, std::move(features), DifficultyLevel(level)});
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, std::string("bad record: ") + e.what());
        }
    }
    finish_loaded(ds);
    return ds;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t lineno, const char* what) {
    T value{};
    const auto* end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, value);
    if (res.ec != std::errc{} || res.ptr != end) {
        throw ParseError(lineno, std::string("cannot parse ") + what + " '" + std::string(field) + "'");
    }
    return value;
}

Dataset parse_csv(const std::string& text) {
    Dataset ds;
    RecordChecker checker;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    std::size_t dim = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (lineno == 1) {
            const auto header = split_csv_line(line);
            if (header.size() < 4 || header[0] != "id" || header[1] != "split" || header[2] != "level") {
                throw ParseError(1, "header must start with id,split,level,f0");
            }
            for (std::size_t i = 3; i < header.size(); ++i) {
                if (header[i] != "f" + std::to_string(i - 3)) {
                    throw ParseError(1, "unexpected feature column '" + std::string(header[i]) + "'");
                }
            }
            dim = header.size() - 3;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() < 4) {
            throw ParseError(lineno, "too few columns");
        }
        const int code = split_code(fields[1]);
        if (code < 0) {
            throw ParseError(lineno, "unknown split '" + std::string(fields[1]) + "'");
        }
        const int level = parse_number<int>(fields[2], lineno, "level");
        std::vector<double> features;
        features.reserve(fields.size() - 3);
        for (std::size_t i = 3; i < fields.size(); ++i) {
            features.push_back(parse_number<double>(fields[i], lineno, "feature"));
        }
        if (features.size() != dim) {
            throw ParseError(lineno, "ragged features: " + std::to_string(features.size()) + " values, expected " +
                                         std::to_string(dim));
        }
        const std::string id(fields[0]);
        checker.check(lineno, id, level, features.size());
        if (!std::all_of(features.begin(), features.end(), [](double v) { return std::isfinite(v); })) {
            throw ParseError(lineno, "non-finite feature value");
        }
        split_ref(ds, code).push_back(Example{id, std::move(features), DifficultyLevel(level)});
    }
    if (lineno == 0) {
        throw ParseError(0, "empty file");
    }
    finish_loaded(ds);
    return ds;
}

}  // namespace

void SyntheticConfig::validate() const {
    if (n_train == 0 || n_val == 0 || n_test == 0) {
        throw std::invalid_argument("synthetic: every split size must be positive");
    }
    if (dim < 1) {
        throw std::invalid_argument("synthetic: dim must be positive");
    }
    double sum = 0.0;
    for (const double p : level_proportions) {
        if (!(p > 0.0) || !std::isfinite(p)) {
            throw std::invalid_argument("synthetic: level proportions must be positive");
        }
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("synthetic: level proportions must sum to 1");
    }
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) {
        throw std::invalid_argument("synthetic: noise_sd must be non-negative");
    }
    if (!(hardness_skew >= 0.0) || !std::isfinite(hardness_skew)) {
        throw std::invalid_argument("synthetic: hardness_skew must be non-negative");
    }
}

SyntheticDataset gen_synthetic_with_latent(const SyntheticConfig& config) {
    config.validate();
    const std::size_t d = config.dim;

    // Geometry shared by all splits: a rotation embedding the latent coordinates and
    // per-level cluster centres in the nuisance coordinates.
    Rng geo = make_rng(config.seed, {0x6e0});
    const auto basis = random_rotation(d, geo);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<std::vector<double>, kNumLevels> centres;
    for (auto& c : centres) {
        c.resize(d - 1);
        for (auto& x : c) {
            x = kClusterOffsetSd * normal(geo);
        }
    }

    SyntheticDataset out;
    const std::array<std::pair<const char*, std::size_t>, 3> splits{
        {{"train", config.n_train}, {"val", config.n_val}, {"test", config.n_test}}};
    std::discrete_distribution<int> level_dist(config.level_proportions.begin(), config.level_proportions.end());

    for (std::size_t s = 0; s < splits.size(); ++s) {
        Rng rng = make_rng(config.seed, {0x5b1, s});
        auto& target = s == 0 ? out.dataset.train : (s == 1 ? out.dataset.val : out.dataset.test);
        target.reserve(splits[s].second);
        std::vector<double> latent(d);
        for (std::size_t i = 0; i < splits[s].second; ++i) {
            const int level = level_dist(rng);
            const double spread = level == kNumLevels - 1 ? 1.0 + config.hardness_skew : 1.0;
            latent[0] = level + config.noise_sd * spread * normal(rng);
            for (std::size_t j = 1; j < d; ++j) {
                latent[j] = centres[level][j - 1] + config.noise_sd * spread * normal(rng);
            }
            std::vector<double> x(d, 0.0);
            for (std::size_t r = 0; r < d; ++r) {
                for (std::size_t c = 0; c < d; ++c) {
                    x[c] += latent[r] * basis[r][c];
                }
            }
            char id[32];
            std::snprintf(id, sizeof(id), "%s-%06zu", splits[s].first, i);
            target.push_back(Example{id, std::move(x), DifficultyLevel(level)});
            if (s == 0) {
                out.train_latent.push_back(latent[0]);
            }
        }
    }
    out.dataset.finalize();
    return out;
}

Dataset gen_synthetic(const SyntheticConfig& config) { return gen_synthetic_with_latent(config).dataset; }

std::optional<DatasetFormat> format_from_path(const std::filesystem::path& path) {
    auto p = path;
    if (has_gz_suffix(p)) {
        p = p.stem();
    }
    const auto ext = p.extension();
    if (ext == ".jsonl" || ext == ".json" || ext == ".ndjson") {
        return DatasetFormat::jsonl;
    }
    if (ext == ".csv") {
        return DatasetFormat::csv;
    }
    return std::nullopt;
}

Dataset load_dataset(const std::filesystem::path& path, std::optional<DatasetFormat> format) {
    if (!format) {
        format = format_from_path(path);
    }
    if (!format) {
        throw ParseError(0, "cannot infer dataset format from '" + path.string() + "'");
    }
    if (!std::filesystem::exists(path)) {
        throw ParseError(0, "dataset file '" + path.string() + "' does not exist");
    }
    const auto text = read_all(path);
    return *format == DatasetFormat::jsonl ? parse_jsonl(text) : parse_csv(text);
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path, std::optional<DatasetFormat> format) {
    if (!format) {
        format = format_from_path(path);
    }
    if (!format) {
        throw std::invalid_argument("cannot infer dataset format from '" + path.string() + "'");
    }
    const std::array<std::pair<const char*, const std::vector<Example>*>, 3> splits{
        {{"train", &dataset.train}, {"val", &dataset.val}, {"test", &dataset.test}}};
    std::string out;
    if (*format == DatasetFormat::csv) {
        out += "id,split,level";
        for (std::size_t j = 0; j < dataset.dim; ++j) {
            out += ",f" + std::to_string(j);
        }
        out += '\n';
        for (const auto& [name, examples] : splits) {
            for (const auto& ex : *examples) {
                out += ex.id;
                out += ',';
                out += name;
                out += ',';
                out += std::to_string(ex.level.value());
                for (const double v : ex.features) {
                    out += ',';
                    out += format_double(v);
                }
                out += '\n';
            }
        }
    } else {
        for (const auto& [name, examples] : splits) {
            for (const auto& ex : *examples) {
                nlohmann::ordered_json j;
                j["id"] = ex.id;
                j["split"] = name;
                j["level"] = ex.level.value();
                j["features"] = ex.features;
                out += j.dump();
                out += '\n';
            }
        }
    }
    write_all(path, out);
}

}  // namespace qdal
