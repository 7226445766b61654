#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "adareg/net.hpp"

namespace adareg {

struct SpectrumReport {
    double stable_rank = 0.0;  // 0 for the zero matrix
    double spectral_norm = 0.0;
    double frobenius_norm = 0.0;
};

/// Largest singular value by power iteration on W^T W. Stops when the
/// Rayleigh quotient changes by less than 1e-10 relative; throws
/// ConvergenceFailure after 1e4 iterations. The start vector is drawn from a
/// fixed seed and redrawn if it falls in the null space.
double spectral_norm(const Eigen::MatrixXd& w);

/// ||W||_F^2 / ||W||_2^2. Throws ZeroMatrix for W == 0.
double stable_rank(const Eigen::MatrixXd& w);

SpectrumReport spectrum_report(const Eigen::MatrixXd& w);

/// sqrt(prod_j ||W_j||_2^2 * sum_j srank(W_j) / n), constants dropped.
double generalization_proxy(const Network& net, Eigen::Index n);

/// Pearson correlation between the rows of W (p x p). Throws DegenerateRow
/// if a row is constant.
Eigen::MatrixXd correlation_matrix(const Eigen::MatrixXd& w);

/// 1 - MSE / Var per target column (population variance). Throws
/// ZeroVariance for a constant target column.
Eigen::VectorXd explained_variance(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets);

/// Fraction of rows whose arg-max matches the label.
double accuracy(const Eigen::MatrixXd& outputs, std::span<const int> labels);

}  // namespace adareg
