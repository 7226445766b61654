#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "adareg/data.hpp"
#include "adareg/net.hpp"
#include "adareg/optimizer.hpp"

namespace adareg {

enum class Method { None, WeightDecay, Dropout, AdaReg, AdaRegWeightDecay, AdaRegDropout };

std::string_view to_string(Method m) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;
bool uses_adareg(Method m) noexcept;
bool uses_weight_decay(Method m) noexcept;
bool uses_dropout(Method m) noexcept;

enum class DatasetKind { Mnist, Csv, Synthetic };

struct DatasetConfig {
    DatasetKind kind = DatasetKind::Synthetic;
    std::string path;        // mnist: directory holding the four IDX files
    std::string train_path;  // csv
    std::string test_path;   // csv
    int num_targets = 7;     // csv
    std::optional<Eigen::Index> test_size;  // stratified cap on the test set
    bool standardize = true;                // regression inputs
    SyntheticMultitaskSpec synthetic;
};

/// A sweep over training_sizes x seeds x methods. Every cell of the sweep
/// shares the network architecture, schedule and hyperparameters.
struct ExperimentConfig {
    std::string name = "experiment";
    DatasetConfig dataset;
    std::vector<Eigen::Index> hidden{50};
    Activation activation = Activation::ReLU;
    std::vector<Method> methods{Method::None, Method::AdaReg};
    BcdSchedule schedule;
    double bounds_v = 10.0;
    std::optional<double> lambda;  // default 1 / (2 p d) of the regularized layer
    double weight_decay = 1e-3;
    double dropout_rate = 0.5;
    std::vector<Eigen::Index> training_sizes;  // empty: the whole training pool
    std::vector<std::uint64_t> seeds{1};
    std::vector<int> regularized_layers{-1};  // negative counts from the end
    bool stratified = true;
    std::string output_dir = "runs";

    /// Throws ConfigError describing the first violated constraint.
    void validate() const;
};

/// Parses the JSON schema documented in the README. Unknown keys are errors.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Resolves a data path: absolute paths are kept, relative ones are taken
/// against $ADAREG_DATA_DIR when it is set.
std::filesystem::path resolve_data_path(const std::string& path);

}  // namespace adareg
