#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "adareg/net.hpp"

namespace adareg {

enum class TaskKind { Classification, Regression };

/// A full example set. It is-a Batch (inputs row-per-example, labels or
/// targets), so whole-set losses need no copy.
struct Dataset : Batch {
    TaskKind kind = TaskKind::Classification;
    int num_classes = 0;

    Eigen::Index input_dim() const noexcept { return inputs.cols(); }
    /// num_classes for classification, target columns for regression.
    Eigen::Index output_dim() const noexcept;

    Batch gather(std::span<const std::size_t> rows) const;
    Dataset subset(std::span<const std::size_t> rows) const;

    /// Throws InvalidArgument on an empty set, non-finite values, or labels
    /// outside [0, num_classes).
    void validate() const;
};

// ---- IDX (MNIST) ----------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

/// Images are flattened row-major and scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes);

/// Inverse of parse_idx for datasets whose pixels are multiples of 1/255.
std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> encode_idx(const Dataset& ds, std::uint32_t rows,
                                                                           std::uint32_t cols);
void write_idx(const Dataset& ds, std::uint32_t rows, std::uint32_t cols, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

// ---- CSV ------------------------------------------------------------------

/// Last `num_targets` columns become targets. A single header row is skipped
/// when the first row has a non-numeric cell.
Dataset load_csv_regression(const std::filesystem::path& path, int num_targets);

// ---- Synthetic multitask regression ---------------------------------------

struct SyntheticMultitaskSpec {
    Eigen::Index n_train = 2000;
    Eigen::Index n_test = 1000;
    Eigen::Index input_dim = 21;
    Eigen::Index num_tasks = 7;
    Eigen::Index latent_dim = 16;
    double task_correlation = 0.8;
    double noise_std = 0.5;
    std::uint64_t seed = 0;
};

/// y = tanh(A x) B + noise, x ~ N(0, I). Task vectors (columns of B) share a
/// common component so that corr(b_s, b_t) = task_correlation in expectation.
std::pair<Dataset, Dataset> synth_multitask(const SyntheticMultitaskSpec& spec);

// ---- Sampling -------------------------------------------------------------

/// Seeded subsample of `size` rows. When `stratified` is set on a
/// classification set, per-class counts differ by at most one (where the
/// classes have enough examples).
Dataset subsample(const Dataset& ds, Eigen::Index size, std::uint64_t seed, bool stratified);

/// Seeded shuffle of 0..n-1 cut into chunks of batch_size; the last chunk may be short.
std::vector<std::vector<std::size_t>> batch_indices(Eigen::Index n, Eigen::Index batch_size, std::uint64_t seed);
std::vector<Batch> batches(const Dataset& ds, Eigen::Index batch_size, std::uint64_t seed);

/// Per-feature standardization fitted on one set and applied to others.
class Standardizer {
public:
    static Standardizer fit(const Eigen::MatrixXd& inputs);
    void apply(Dataset& ds) const;

    const Eigen::RowVectorXd& mean() const noexcept { return mean_; }
    const Eigen::RowVectorXd& scale() const noexcept { return scale_; }

private:
    Eigen::RowVectorXd mean_;
    Eigen::RowVectorXd scale_;
};

}  // namespace adareg
