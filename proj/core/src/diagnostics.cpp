#include "adareg/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "adareg/errors.hpp"
#include "adareg/rng.hpp"

namespace adareg {

namespace {

constexpr std::uint64_t kPowerSeed = 0x7057e12a11ULL;
constexpr int kPowerCap = 10000;
constexpr double kPowerTol = 1e-10;

Eigen::VectorXd random_unit(Eigen::Index n, std::uint64_t seed)
{
    Rng rng(seed);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.normal();
    return x / x.norm();
}

}  // namespace

double spectral_norm(const Eigen::MatrixXd& w_in)
{
    if (w_in.size() == 0 || w_in.isZero(0.0)) return 0.0;
    if (!w_in.allFinite()) fail(ErrorCode::InvalidArgument, "spectral norm of a non-finite matrix");
    // Power-of-two rescaling is exact and keeps W^T W from overflowing.
    int exponent = 0;
    std::frexp(w_in.cwiseAbs().maxCoeff(), &exponent);
    const double scale = std::ldexp(1.0, exponent);
    const Eigen::MatrixXd w = w_in / scale;

    std::uint64_t attempt = 0;
    Eigen::VectorXd x = random_unit(w.cols(), derive_seed(kPowerSeed, attempt));
    double previous = -1.0;
    for (int iter = 0; iter < kPowerCap; ++iter) {
        const Eigen::VectorXd y = w.transpose() * (w * x);
        const double rayleigh = x.dot(y);
        const double norm = y.norm();
        if (!(norm > 0.0)) {
            // Start vector landed in the null space; redraw.
            x = random_unit(w.cols(), derive_seed(kPowerSeed, ++attempt));
            previous = -1.0;
            continue;
        }
        if (previous >= 0.0 && std::abs(rayleigh - previous) <= kPowerTol * rayleigh) {
            return scale * std::sqrt(rayleigh);
        }
        previous = rayleigh;
        x = y / norm;
    }
    fail(ErrorCode::ConvergenceFailure, "power iteration did not converge in 10000 iterations");
}

double stable_rank(const Eigen::MatrixXd& w)
{
    const double sigma = spectral_norm(w);
    if (sigma == 0.0) fail(ErrorCode::ZeroMatrix, "stable rank of the zero matrix is undefined");
    return w.squaredNorm() / (sigma * sigma);
}

SpectrumReport spectrum_report(const Eigen::MatrixXd& w)
{
    SpectrumReport r;
    r.spectral_norm = spectral_norm(w);
    r.frobenius_norm = w.norm();
    if (r.spectral_norm > 0.0) r.stable_rank = w.squaredNorm() / (r.spectral_norm * r.spectral_norm);
    return r;
}

double generalization_proxy(const Network& net, Eigen::Index n)
{
    if (n < 1) fail(ErrorCode::InvalidArgument, "sample count must be positive");
    double product = 1.0;
    double srank_sum = 0.0;
    for (const auto& layer : net.layers()) {
        const double sigma = spectral_norm(layer.weight);
        if (sigma == 0.0) fail(ErrorCode::ZeroMatrix, "generalization proxy needs nonzero layers");
        product *= sigma * sigma;
        srank_sum += layer.weight.squaredNorm() / (sigma * sigma);
    }
    return std::sqrt(product * srank_sum / static_cast<double>(n));
}

Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& w)
{
    const Eigen::Index p = w.rows();
    if (w.cols() < 2) fail(ErrorCode::DegenerateRow, "rows need at least two entries");
    const Eigen::MatrixXd centered = w.colwise() - w.rowwise().mean();
    const Eigen::VectorXd spread = centered.rowwise().norm();
    for (Eigen::Index i = 0; i < p; ++i) {
        if (!(spread[i] > 0.0)) fail(ErrorCode::DegenerateRow, "row " + std::to_string(i) + " is constant");
    }
    Eigen::MatrixXd corr = (centered * centered.transpose()).array() / (spread * spread.transpose()).array();
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index i = 0; i < p; ++i) corr(i, j) = std::clamp(corr(i, j), -1.0, 1.0);
        corr(j, j) = 1.0;
    }
    return 0.5 * (corr + corr.transpose());
}

Eigen::VectorXd explained_variance(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets)
{
    if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols() || targets.rows() < 1) {
        fail(ErrorCode::DimensionMismatch, "predictions and targets must have the same non-empty shape");
    }
    const double n = static_cast<double>(targets.rows());
    Eigen::VectorXd out(targets.cols());
    for (Eigen::Index j = 0; j < targets.cols(); ++j) {
        const double mean = targets.col(j).mean();
        const double var = (targets.col(j).array() - mean).square().sum() / n;
        if (!(var > 0.0)) fail(ErrorCode::ZeroVariance, "target column " + std::to_string(j) + " is constant");
        const double mse = (predictions.col(j) - targets.col(j)).squaredNorm() / n;
        out[j] = 1.0 - mse / var;
    }
    return out;
}

double accuracy(const Eigen::MatrixXd& outputs, std::span<const int> labels)
{
    if (static_cast<Eigen::Index>(labels.size()) != outputs.rows() || labels.empty()) {
        fail(ErrorCode::DimensionMismatch, "label count must match output rows");
    }
    Eigen::Index hits = 0;
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
        Eigen::Index arg = 0;
        outputs.row(i).maxCoeff(&arg);
        if (arg == labels[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(outputs.rows());
}

}  // namespace adareg
