#include "adareg/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "adareg/errors.hpp"

namespace adareg {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& message)
{
    fail(ErrorCode::ConfigError, message);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where)
{
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) config_error("unknown key '" + key + "' in " + where);
    }
}

template <class T>
T get(const json& obj, const char* key, const std::string& where)
{
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(where + "." + key + ": " + e.what());
    }
}

template <class T>
void read_opt(const json& obj, const char* key, T& out, const std::string& where)
{
    if (obj.contains(key)) out = get<T>(obj, key, where);
}

const json& object_at(const json& obj, const char* key)
{
    const json& v = obj.at(key);
    if (!v.is_object()) config_error(std::string(key) + " must be an object");
    return v;
}

DatasetConfig parse_dataset(const json& j)
{
    reject_unknown(j,
                   {"kind", "path", "train", "test", "num_targets", "test_size", "standardize", "n_train", "n_test",
                    "input_dim", "num_tasks", "latent_dim", "task_correlation", "noise_std", "seed"},
                   "dataset");
    DatasetConfig d;
    const auto kind = get<std::string>(j, "kind", "dataset");
    if (kind == "mnist") {
        d.kind = DatasetKind::Mnist;
    } else if (kind == "csv") {
        d.kind = DatasetKind::Csv;
    } else if (kind == "synthetic") {
        d.kind = DatasetKind::Synthetic;
    } else {
        config_error("dataset.kind must be one of mnist, csv, synthetic (got '" + kind + "')");
    }
    read_opt(j, "path", d.path, "dataset");
    read_opt(j, "train", d.train_path, "dataset");
    read_opt(j, "test", d.test_path, "dataset");
    read_opt(j, "num_targets", d.num_targets, "dataset");
    read_opt(j, "standardize", d.standardize, "dataset");
    if (j.contains("test_size") && !j.at("test_size").is_null()) d.test_size = get<Eigen::Index>(j, "test_size", "dataset");
    auto& s = d.synthetic;
    read_opt(j, "n_train", s.n_train, "dataset");
    read_opt(j, "n_test", s.n_test, "dataset");
    read_opt(j, "input_dim", s.input_dim, "dataset");
    read_opt(j, "num_tasks", s.num_tasks, "dataset");
    read_opt(j, "latent_dim", s.latent_dim, "dataset");
    read_opt(j, "task_correlation", s.task_correlation, "dataset");
    read_opt(j, "noise_std", s.noise_std, "dataset");
    read_opt(j, "seed", s.seed, "dataset");
    return d;
}

}  // namespace

std::string_view to_string(Method m) noexcept
{
    switch (m) {
    case Method::None: return "none";
    case Method::WeightDecay: return "weight_decay";
    case Method::Dropout: return "dropout";
    case Method::AdaReg: return "adareg";
    case Method::AdaRegWeightDecay: return "adareg+weight_decay";
    case Method::AdaRegDropout: return "adareg+dropout";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) noexcept
{
    for (Method m : {Method::None, Method::WeightDecay, Method::Dropout, Method::AdaReg, Method::AdaRegWeightDecay,
                     Method::AdaRegDropout}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

bool uses_adareg(Method m) noexcept
{
    return m == Method::AdaReg || m == Method::AdaRegWeightDecay || m == Method::AdaRegDropout;
}

bool uses_weight_decay(Method m) noexcept { return m == Method::WeightDecay || m == Method::AdaRegWeightDecay; }

bool uses_dropout(Method m) noexcept { return m == Method::Dropout || m == Method::AdaRegDropout; }

void ExperimentConfig::validate() const
{
    if (name.empty()) config_error("name must not be empty");
    for (auto h : hidden) {
        if (h < 1) config_error("architecture.hidden sizes must be positive");
    }
    if (methods.empty()) config_error("at least one method is required");
    try {
        schedule.validate();
    } catch (const Error& e) {
        config_error(std::string("schedule: ") + e.what());
    }
    if (!(bounds_v >= 1.0)) config_error("bounds_v must be >= 1");
    if (lambda && !(*lambda >= 0.0)) config_error("lambda must be non-negative");
    if (!(weight_decay >= 0.0)) config_error("weight_decay must be non-negative");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) config_error("dropout_rate must be in [0, 1)");
    for (auto n : training_sizes) {
        if (n < 1) config_error("training_sizes must be positive");
    }
    if (seeds.empty()) config_error("at least one seed is required");
    const auto layers = static_cast<int>(hidden.size()) + 1;
    for (int k : regularized_layers) {
        if (k >= layers || k < -layers) config_error("regularized_layer_index " + std::to_string(k) + " out of range");
    }
    if (regularized_layers.empty()) {
        for (Method m : methods) {
            if (uses_adareg(m)) config_error("adareg methods need at least one regularized layer");
        }
    }
    if (output_dir.empty()) config_error("output_dir must not be empty");

    const auto& d = dataset;
    switch (d.kind) {
    case DatasetKind::Csv:
        if (d.train_path.empty() || d.test_path.empty()) config_error("csv datasets need dataset.train and dataset.test");
        if (d.num_targets < 1) config_error("dataset.num_targets must be positive");
        break;
    case DatasetKind::Synthetic: {
        const auto& s = d.synthetic;
        if (s.n_train < 1 || s.n_test < 1 || s.input_dim < 1 || s.num_tasks < 1 || s.latent_dim < 1) {
            config_error("synthetic dataset sizes must be positive");
        }
        if (!(s.task_correlation >= 0.0 && s.task_correlation < 1.0)) config_error("task_correlation must be in [0, 1)");
        if (!(s.noise_std > 0.0)) config_error("noise_std must be positive");
        for (auto n : training_sizes) {
            if (n > s.n_train) config_error("training size " + std::to_string(n) + " exceeds n_train");
        }
        break;
    }
    case DatasetKind::Mnist:
        break;
    }
    if (d.test_size && *d.test_size < 1) config_error("dataset.test_size must be positive");
}

ExperimentConfig parse_config(std::string_view json_text)
{
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        config_error(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) config_error("config must be a JSON object");
    reject_unknown(j,
                   {"name", "dataset", "architecture", "method", "methods", "schedule", "bounds_v", "lambda",
                    "weight_decay", "dropout_rate", "training_sizes", "seeds", "regularized_layer_index",
                    "stratified", "output_dir"},
                   "config");

    ExperimentConfig c;
    read_opt(j, "name", c.name, "config");
    if (!j.contains("dataset")) config_error("dataset is required");
    c.dataset = parse_dataset(object_at(j, "dataset"));

    if (j.contains("architecture")) {
        const json& a = object_at(j, "architecture");
        reject_unknown(a, {"hidden", "activation"}, "architecture");
        read_opt(a, "hidden", c.hidden, "architecture");
        if (a.contains("activation")) {
            const auto act = get<std::string>(a, "activation", "architecture");
            if (act == "relu") {
                c.activation = Activation::ReLU;
            } else if (act == "identity") {
                c.activation = Activation::Identity;
            } else {
                config_error("architecture.activation must be relu or identity");
            }
        }
    }

    if (j.contains("method") && j.contains("methods")) config_error("give either method or methods, not both");
    std::vector<std::string> names;
    if (j.contains("method")) names.push_back(get<std::string>(j, "method", "config"));
    if (j.contains("methods")) names = get<std::vector<std::string>>(j, "methods", "config");
    if (!names.empty()) {
        c.methods.clear();
        for (const auto& n : names) {
            const auto m = parse_method(n);
            if (!m) config_error("unknown method '" + n + "'");
            c.methods.push_back(*m);
        }
    }

    if (j.contains("schedule")) {
        const json& s = object_at(j, "schedule");
        reject_unknown(s, {"outer_loops", "epochs_per_block", "batch_size", "learning_rate"}, "schedule");
        read_opt(s, "outer_loops", c.schedule.outer_loops, "schedule");
        read_opt(s, "epochs_per_block", c.schedule.epochs_per_block, "schedule");
        read_opt(s, "batch_size", c.schedule.batch_size, "schedule");
        read_opt(s, "learning_rate", c.schedule.learning_rate, "schedule");
    }
    read_opt(j, "bounds_v", c.bounds_v, "config");
    if (j.contains("lambda") && !j.at("lambda").is_null()) c.lambda = get<double>(j, "lambda", "config");
    read_opt(j, "weight_decay", c.weight_decay, "config");
    read_opt(j, "dropout_rate", c.dropout_rate, "config");
    read_opt(j, "training_sizes", c.training_sizes, "config");
    read_opt(j, "seeds", c.seeds, "config");
    if (j.contains("regularized_layer_index")) {
        const json& r = j.at("regularized_layer_index");
        if (r.is_array()) {
            c.regularized_layers = get<std::vector<int>>(j, "regularized_layer_index", "config");
        } else {
            c.regularized_layers = {get<int>(j, "regularized_layer_index", "config")};
        }
    }
    read_opt(j, "stratified", c.stratified, "config");
    read_opt(j, "output_dir", c.output_dir, "config");

    c.validate();
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open config " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

std::filesystem::path resolve_data_path(const std::string& path)
{
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("ADAREG_DATA_DIR"); root != nullptr && *root != '\0') {
        return std::filesystem::path(root) / p;
    }
    return p;
}

}  // namespace adareg
