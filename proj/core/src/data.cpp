#include "adareg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>

#include "adareg/errors.hpp"
#include "adareg/rng.hpp"

namespace adareg {

namespace {

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset, const char* what)
{
    if (bytes.size() < offset + 4) fail(ErrorCode::TruncatedFile, std::string(what) + " header is truncated");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t x)
{
    out.push_back(static_cast<std::uint8_t>(x >> 24));
    out.push_back(static_cast<std::uint8_t>(x >> 16));
    out.push_back(static_cast<std::uint8_t>(x >> 8));
    out.push_back(static_cast<std::uint8_t>(x));
}

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view cell, double& value)
{
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
    if (cell.empty()) return false;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(value);
}

std::vector<std::string_view> split_commas(std::string_view line)
{
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        if (pos == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return cells;
}

}  // namespace

Eigen::Index Dataset::output_dim() const noexcept
{
    return kind == TaskKind::Classification ? num_classes : targets.cols();
}

Batch Dataset::gather(std::span<const std::size_t> rows) const
{
    Batch b;
    const auto n = static_cast<Eigen::Index>(rows.size());
    b.inputs.resize(n, inputs.cols());
    for (Eigen::Index i = 0; i < n; ++i) b.inputs.row(i) = inputs.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
    if (kind == TaskKind::Classification) {
        b.labels.reserve(rows.size());
        for (auto r : rows) b.labels.push_back(labels[r]);
    } else {
        b.targets.resize(n, targets.cols());
        for (Eigen::Index i = 0; i < n; ++i) b.targets.row(i) = targets.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
    }
    return b;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const
{
    Batch b = gather(rows);
    Dataset out;
    out.kind = kind;
    out.num_classes = num_classes;
    out.inputs = std::move(b.inputs);
    out.labels = std::move(b.labels);
    out.targets = std::move(b.targets);
    return out;
}

void Dataset::validate() const
{
    if (size() < 1) fail(ErrorCode::InvalidArgument, "dataset is empty");
    if (!inputs.allFinite()) fail(ErrorCode::InvalidArgument, "dataset inputs contain non-finite values");
    if (kind == TaskKind::Classification) {
        if (static_cast<Eigen::Index>(labels.size()) != size()) fail(ErrorCode::CountMismatch, "label count mismatch");
        for (int y : labels) {
            if (y < 0 || y >= num_classes) fail(ErrorCode::InvalidArgument, "label out of range: " + std::to_string(y));
        }
    } else {
        if (targets.rows() != size()) fail(ErrorCode::CountMismatch, "target row count mismatch");
        if (!targets.allFinite()) fail(ErrorCode::InvalidArgument, "dataset targets contain non-finite values");
    }
}

// ---- IDX ------------------------------------------------------------------

Dataset parse_idx(std::span<const std::uint8_t> image_bytes, std::span<const std::uint8_t> label_bytes)
{
    const std::uint32_t image_magic = read_be32(image_bytes, 0, "images");
    if (image_magic != kIdxImagesMagic) {
        fail(ErrorCode::BadMagic, "images file magic is " + std::to_string(image_magic) + ", expected 2051");
    }
    const std::uint32_t label_magic = read_be32(label_bytes, 0, "labels");
    if (label_magic != kIdxLabelsMagic) {
        fail(ErrorCode::BadMagic, "labels file magic is " + std::to_string(label_magic) + ", expected 2049");
    }
    const std::size_t count = read_be32(image_bytes, 4, "images");
    const std::size_t rows = read_be32(image_bytes, 8, "images");
    const std::size_t cols = read_be32(image_bytes, 12, "images");
    const std::size_t label_count = read_be32(label_bytes, 4, "labels");

    const std::size_t pixels = rows * cols;
    if (image_bytes.size() < 16 || (pixels > 0 && count > (image_bytes.size() - 16) / pixels)) {
        fail(ErrorCode::TruncatedFile, "images file is truncated");
    }
    if (label_bytes.size() < 8 + label_count) fail(ErrorCode::TruncatedFile, "labels file is truncated");
    if (count != label_count) {
        fail(ErrorCode::CountMismatch,
             std::to_string(count) + " images but " + std::to_string(label_count) + " labels");
    }

    Dataset ds;
    ds.kind = TaskKind::Classification;
    ds.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
    const std::uint8_t* px = image_bytes.data() + 16;
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t j = 0; j < pixels; ++j) {
            ds.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = px[i * pixels + j] / 255.0;
        }
    }
    ds.labels.resize(count);
    int max_label = -1;
    for (std::size_t i = 0; i < count; ++i) {
        ds.labels[i] = label_bytes[8 + i];
        max_label = std::max(max_label, ds.labels[i]);
    }
    ds.num_classes = max_label + 1;
    return ds;
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path)
{
    const auto images = read_bytes(images_path);
    const auto labels = read_bytes(labels_path);
    return parse_idx(images, labels);
}

std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> encode_idx(const Dataset& ds, std::uint32_t rows,
                                                                           std::uint32_t cols)
{
    if (ds.kind != TaskKind::Classification) fail(ErrorCode::InvalidArgument, "IDX holds classification data only");
    if (static_cast<Eigen::Index>(rows) * cols != ds.input_dim()) {
        fail(ErrorCode::DimensionMismatch, "rows * cols must equal the input dimension");
    }
    const auto count = static_cast<std::uint32_t>(ds.size());
    std::vector<std::uint8_t> images;
    images.reserve(16 + static_cast<std::size_t>(ds.inputs.size()));
    put_be32(images, kIdxImagesMagic);
    put_be32(images, count);
    put_be32(images, rows);
    put_be32(images, cols);
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
        for (Eigen::Index j = 0; j < ds.input_dim(); ++j) {
            const double scaled = std::round(std::clamp(ds.inputs(i, j), 0.0, 1.0) * 255.0);
            images.push_back(static_cast<std::uint8_t>(scaled));
        }
    }
    std::vector<std::uint8_t> labels;
    labels.reserve(8 + ds.labels.size());
    put_be32(labels, kIdxLabelsMagic);
    put_be32(labels, count);
    for (int y : ds.labels) {
        if (y < 0 || y > 255) fail(ErrorCode::InvalidArgument, "IDX labels must fit in a byte");
        labels.push_back(static_cast<std::uint8_t>(y));
    }
    return {std::move(images), std::move(labels)};
}

void write_idx(const Dataset& ds, std::uint32_t rows, std::uint32_t cols, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path)
{
    const auto [images, labels] = encode_idx(ds, rows, cols);
    write_bytes(images_path, images);
    write_bytes(labels_path, labels);
}

// ---- CSV ------------------------------------------------------------------

Dataset load_csv_regression(const std::filesystem::path& path, int num_targets)
{
    if (num_targets < 1) fail(ErrorCode::InvalidArgument, "num_targets must be positive");
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());

    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        std::vector<double> values(cells.size());
        bool numeric = true;
        std::size_t bad_col = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (!parse_double(cells[c], values[c])) {
                numeric = false;
                bad_col = c;
                break;
            }
        }
        if (first) {
            first = false;
            if (!numeric) continue;  // header
        }
        if (!numeric) {
            fail(ErrorCode::ParseError, path.string() + ": row " + std::to_string(line_no) + ", column " +
                                            std::to_string(bad_col + 1) + ": cannot parse '" +
                                            std::string(trim(cells[bad_col])) + "'");
        }
        if (rows.empty()) {
            width = values.size();
        } else if (values.size() != width) {
            fail(ErrorCode::RaggedRows, path.string() + ": row " + std::to_string(line_no) + " has " +
                                            std::to_string(values.size()) + " columns, expected " +
                                            std::to_string(width));
        }
        rows.push_back(std::move(values));
    }
    if (rows.empty()) fail(ErrorCode::ParseError, path.string() + ": no data rows");
    if (width < static_cast<std::size_t>(num_targets) + 1) {
        fail(ErrorCode::DimensionMismatch, path.string() + ": need at least num_targets + 1 columns");
    }

    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto n_in = static_cast<Eigen::Index>(width) - num_targets;
    Dataset ds;
    ds.kind = TaskKind::Regression;
    ds.inputs.resize(n, n_in);
    ds.targets.resize(n, num_targets);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < n_in; ++j) ds.inputs(i, j) = r[static_cast<std::size_t>(j)];
        for (Eigen::Index j = 0; j < num_targets; ++j) ds.targets(i, j) = r[static_cast<std::size_t>(n_in + j)];
    }
    return ds;
}

// ---- Synthetic ------------------------------------------------------------

std::pair<Dataset, Dataset> synth_multitask(const SyntheticMultitaskSpec& spec)
{
    if (spec.n_train < 1 || spec.n_test < 1 || spec.input_dim < 1 || spec.num_tasks < 1 || spec.latent_dim < 1) {
        fail(ErrorCode::InvalidArgument, "synthetic spec dimensions must be positive");
    }
    if (!(spec.task_correlation >= 0.0 && spec.task_correlation < 1.0)) {
        fail(ErrorCode::InvalidArgument, "task_correlation must be in [0, 1)");
    }
    if (!(spec.noise_std > 0.0)) fail(ErrorCode::InvalidArgument, "noise_std must be positive");

    Rng rng(spec.seed);
    const auto in = spec.input_dim;
    const auto k = spec.latent_dim;
    const auto t = spec.num_tasks;

    Eigen::MatrixXd mixing(k, in);
    const double a_scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (Eigen::Index j = 0; j < in; ++j) {
        for (Eigen::Index i = 0; i < k; ++i) mixing(i, j) = a_scale * rng.normal();
    }

    const double shared_w = std::sqrt(spec.task_correlation);
    const double own_w = std::sqrt(1.0 - spec.task_correlation);
    const double b_scale = 1.0 / std::sqrt(static_cast<double>(k));
    Eigen::VectorXd shared(k);
    for (Eigen::Index i = 0; i < k; ++i) shared[i] = rng.normal();
    Eigen::MatrixXd tasks(k, t);
    for (Eigen::Index j = 0; j < t; ++j) {
        for (Eigen::Index i = 0; i < k; ++i) tasks(i, j) = b_scale * (shared_w * shared[i] + own_w * rng.normal());
    }

    auto draw = [&](Eigen::Index n) {
        Dataset ds;
        ds.kind = TaskKind::Regression;
        ds.inputs.resize(n, in);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < in; ++j) ds.inputs(i, j) = rng.normal();
        }
        const Eigen::MatrixXd hidden = (ds.inputs * mixing.transpose()).array().tanh().matrix();
        ds.targets = hidden * tasks;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < t; ++j) ds.targets(i, j) += spec.noise_std * rng.normal();
        }
        return ds;
    };
    Dataset train = draw(spec.n_train);
    Dataset test = draw(spec.n_test);
    return {std::move(train), std::move(test)};
}

// ---- Sampling -------------------------------------------------------------

Dataset subsample(const Dataset& ds, Eigen::Index size, std::uint64_t seed, bool stratified)
{
    if (size < 1) fail(ErrorCode::InvalidArgument, "subsample size must be positive");
    if (size > ds.size()) {
        fail(ErrorCode::SizeTooLarge,
             "requested " + std::to_string(size) + " rows from a set of " + std::to_string(ds.size()));
    }
    Rng rng(seed);
    std::vector<std::size_t> chosen;
    chosen.reserve(static_cast<std::size_t>(size));

    if (stratified && ds.kind == TaskKind::Classification) {
        const auto classes = static_cast<std::size_t>(ds.num_classes);
        std::vector<std::vector<std::size_t>> groups(classes);
        for (std::size_t i = 0; i < ds.labels.size(); ++i) groups[static_cast<std::size_t>(ds.labels[i])].push_back(i);
        for (auto& g : groups) rng.shuffle(g.begin(), g.end());

        std::vector<std::size_t> order(classes);
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(order.begin(), order.end());

        // Round-robin over classes in a seeded order; exhausted classes drop out.
        std::vector<std::size_t> counts(classes, 0);
        auto remaining = static_cast<std::size_t>(size);
        while (remaining > 0) {
            for (std::size_t c : order) {
                if (remaining == 0) break;
                if (counts[c] < groups[c].size()) {
                    ++counts[c];
                    --remaining;
                }
            }
        }
        for (std::size_t c = 0; c < classes; ++c) {
            chosen.insert(chosen.end(), groups[c].begin(), groups[c].begin() + static_cast<std::ptrdiff_t>(counts[c]));
        }
        rng.shuffle(chosen.begin(), chosen.end());
    } else {
        std::vector<std::size_t> all(static_cast<std::size_t>(ds.size()));
        std::iota(all.begin(), all.end(), std::size_t{0});
        rng.shuffle(all.begin(), all.end());
        chosen.assign(all.begin(), all.begin() + size);
    }
    return ds.subset(chosen);
}

std::vector<std::vector<std::size_t>> batch_indices(Eigen::Index n, Eigen::Index batch_size, std::uint64_t seed)
{
    if (batch_size < 1) fail(ErrorCode::InvalidArgument, "batch size must be positive");
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order.begin(), order.end());

    std::vector<std::vector<std::size_t>> out;
    const auto step = static_cast<std::size_t>(batch_size);
    for (std::size_t start = 0; start < order.size(); start += step) {
        const std::size_t end = std::min(order.size(), start + step);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

std::vector<Batch> batches(const Dataset& ds, Eigen::Index batch_size, std::uint64_t seed)
{
    std::vector<Batch> out;
    for (const auto& idx : batch_indices(ds.size(), batch_size, seed)) out.push_back(ds.gather(idx));
    return out;
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& inputs)
{
    if (inputs.rows() < 1) fail(ErrorCode::InvalidArgument, "cannot standardize an empty matrix");
    Standardizer s;
    s.mean_ = inputs.colwise().mean();
    const Eigen::MatrixXd centered = inputs.rowwise() - s.mean_;
    s.scale_ = (centered.colwise().squaredNorm() / static_cast<double>(inputs.rows())).cwiseSqrt();
    for (Eigen::Index j = 0; j < s.scale_.size(); ++j) {
        if (!(s.scale_[j] > 0.0)) s.scale_[j] = 1.0;  // constant feature: center only
    }
    return s;
}

void Standardizer::apply(Dataset& ds) const
{
    if (ds.input_dim() != mean_.size()) fail(ErrorCode::DimensionMismatch, "standardizer width mismatch");
    ds.inputs = ((ds.inputs.rowwise() - mean_).array().rowwise() / scale_.array()).matrix();
}

}  // namespace adareg
