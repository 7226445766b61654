#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "adareg/config.hpp"
#include "adareg/data.hpp"

namespace adareg {

struct RunOptions {
    std::optional<std::uint64_t> seed_override;  // replaces config.seeds with this one seed
    std::optional<std::filesystem::path> output_dir;
    int jobs = 1;                                // cells trained in parallel
    std::ostream* progress = nullptr;            // one line per finished cell
};

struct RunReport {
    std::filesystem::path output_dir;
    std::vector<std::string> cells;  // cell directory names, canonical order
};

/// Training pool and test set for an experiment.
struct PreparedData {
    Dataset train_pool;
    Dataset test;
};

PreparedData prepare_data(const ExperimentConfig& config);

/// Trains every (training_size, seed, method) cell. Each cell writes
/// cells/<method>_n<size>_s<seed>/{metrics.csv, summary.json, weights_layer<k>.csv,
/// bias_layer<k>.csv} plus omega_{r,c}_layer<k>.csv for AdaReg methods; runs.csv gets
/// one row per cell. All files are a function of the config alone.
RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Aggregates cells/*/summary.json into summary.csv: one row per
/// (method, training_size) with mean and sample standard deviation of the
/// final test metrics. Throws EmptyDirectory or SchemaMismatch.
std::filesystem::path summarize(const std::filesystem::path& run_dir);

/// Writes correlation_layer<k>.csv (rows of the layer's weight matrix) in
/// every cell under `dir` (or in `dir` itself if it is a cell). layer < 0
/// counts from the end. Throws MissingWeights when weights were not saved.
std::vector<std::filesystem::path> export_correlation(const std::filesystem::path& dir, int layer);

}  // namespace adareg
