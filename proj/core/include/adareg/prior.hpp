#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "adareg/spectral.hpp"

namespace adareg {

/// Zero-mean matrix-variate normal MN(0, row_cov, col_cov) over p x d
/// matrices; vec(W) ~ N(0, col_cov (x) row_cov).
class MatrixNormalPrior {
public:
    /// Throws NotPD if either covariance is not positive definite.
    MatrixNormalPrior(SymMatrix row_cov, SymMatrix col_cov);

    Eigen::Index rows() const noexcept { return row_cov_.dim(); }
    Eigen::Index cols() const noexcept { return col_cov_.dim(); }
    const SymMatrix& row_cov() const noexcept { return row_cov_; }
    const SymMatrix& col_cov() const noexcept { return col_cov_; }

private:
    SymMatrix row_cov_;
    SymMatrix col_cov_;
};

/// Row/column precision matrices (inverse covariances) with spectra inside
/// the bounds. Log-determinants are computed once at construction.
class PrecisionPair {
public:
    /// Throws InvalidArgument if a spectrum leaves [u - 1e-8, v + 1e-8].
    PrecisionPair(SymMatrix omega_r, SymMatrix omega_c, SpectralBounds bounds);

    static PrecisionPair identity(Eigen::Index p, Eigen::Index d, SpectralBounds bounds);

    const SymMatrix& row() const noexcept { return omega_r_; }
    const SymMatrix& col() const noexcept { return omega_c_; }
    const SpectralBounds& bounds() const noexcept { return bounds_; }
    double log_det_row() const noexcept { return log_det_r_; }
    double log_det_col() const noexcept { return log_det_c_; }

    /// The covariance prior these precisions describe.
    MatrixNormalPrior to_prior() const;

private:
    SymMatrix omega_r_;
    SymMatrix omega_c_;
    SpectralBounds bounds_;
    double log_det_r_ = 0.0;
    double log_det_c_ = 0.0;
};

double log_density(const Eigen::MatrixXd& w, const MatrixNormalPrior& prior);

/// row_cov^{1/2} Z col_cov^{1/2}, Z filled column by column with standard
/// normals from Rng(seed).
Eigen::MatrixXd sample(const MatrixNormalPrior& prior, std::uint64_t seed);

/// lambda * tr(Omega_r W Omega_c W^T) - lambda * (d log det Omega_r + p log det Omega_c)
double regularizer_value(const Eigen::MatrixXd& w, const PrecisionPair& pp, double lambda);

/// 2 * lambda * Omega_r W Omega_c
Eigen::MatrixXd regularizer_grad(const Eigen::MatrixXd& w, const PrecisionPair& pp, double lambda);

/// Default prior strength 1 / (2 p d).
double default_lambda(Eigen::Index p, Eigen::Index d);

}  // namespace adareg
