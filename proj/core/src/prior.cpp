#include "adareg/prior.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include <Eigen/Cholesky>

#include "adareg/errors.hpp"
#include "adareg/rng.hpp"

namespace adareg {

namespace {

Eigen::LLT<Eigen::MatrixXd> cholesky(const SymMatrix& a, const char* what)
{
    Eigen::LLT<Eigen::MatrixXd> llt(a.matrix());
    if (llt.info() != Eigen::Success) fail(ErrorCode::NotPD, std::string(what) + " is not positive definite");
    const auto diag = llt.matrixL().toDenseMatrix().diagonal();
    if ((diag.array() <= 0.0).any()) fail(ErrorCode::NotPD, std::string(what) + " is singular");
    return llt;
}

double log_det_from(const Eigen::LLT<Eigen::MatrixXd>& llt)
{
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

SymMatrix sqrt_spd(const SymMatrix& a)
{
    const EigenDecomposition eig = eigh(a);
    if (eig.eigenvalues.size() > 0 && !(eig.eigenvalues.minCoeff() > 0.0)) {
        fail(ErrorCode::NotPD, "covariance is not positive definite");
    }
    return reassemble(eig, eig.eigenvalues.cwiseSqrt());
}

void check_spectrum(const SymMatrix& m, const SpectralBounds& b, const char* what)
{
    const EigenDecomposition eig = eigh(m);
    if (eig.eigenvalues.size() == 0) return;
    const double hi = eig.eigenvalues[0];
    const double lo = eig.eigenvalues[eig.eigenvalues.size() - 1];
    if (lo < b.lower() - 1e-8 || hi > b.upper() + 1e-8) {
        fail(ErrorCode::InvalidArgument, std::string(what) + " spectrum [" + std::to_string(lo) +
                                             ", " + std::to_string(hi) + "] outside bounds");
    }
}

void check_shape(const Eigen::MatrixXd& w, const PrecisionPair& pp)
{
    if (w.rows() != pp.row().dim() || w.cols() != pp.col().dim()) {
        fail(ErrorCode::DimensionMismatch,
             "weight is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                 " but precisions are " + std::to_string(pp.row().dim()) + " and " +
                 std::to_string(pp.col().dim()));
    }
}

}  // namespace

MatrixNormalPrior::MatrixNormalPrior(SymMatrix row_cov, SymMatrix col_cov)
    : row_cov_(std::move(row_cov)), col_cov_(std::move(col_cov))
{
    cholesky(row_cov_, "row covariance");
    cholesky(col_cov_, "column covariance");
}

PrecisionPair::PrecisionPair(SymMatrix omega_r, SymMatrix omega_c, SpectralBounds bounds)
    : omega_r_(std::move(omega_r)), omega_c_(std::move(omega_c)), bounds_(bounds)
{
    check_spectrum(omega_r_, bounds_, "row precision");
    check_spectrum(omega_c_, bounds_, "column precision");
    log_det_r_ = log_det_spd(omega_r_);
    log_det_c_ = log_det_spd(omega_c_);
}

PrecisionPair PrecisionPair::identity(Eigen::Index p, Eigen::Index d, SpectralBounds bounds)
{
    return PrecisionPair(SymMatrix::identity(p), SymMatrix::identity(d), bounds);
}

MatrixNormalPrior PrecisionPair::to_prior() const
{
    auto inverse = [](const SymMatrix& a) {
        const EigenDecomposition eig = eigh(a);
        return reassemble(eig, eig.eigenvalues.cwiseInverse());
    };
    return MatrixNormalPrior(inverse(omega_r_), inverse(omega_c_));
}

double log_density(const Eigen::MatrixXd& w, const MatrixNormalPrior& prior)
{
    if (w.rows() != prior.rows() || w.cols() != prior.cols()) {
        fail(ErrorCode::DimensionMismatch, "weight shape does not match the prior");
    }
    const auto llt_r = cholesky(prior.row_cov(), "row covariance");
    const auto llt_c = cholesky(prior.col_cov(), "column covariance");
    const Eigen::MatrixXd left = llt_r.solve(w);                    // Sigma_r^{-1} W
    const Eigen::MatrixXd right = llt_c.solve(w.transpose());       // Sigma_c^{-1} W^T
    const double trace = left.cwiseProduct(right.transpose()).sum();
    const double p = static_cast<double>(w.rows());
    const double d = static_cast<double>(w.cols());
    return -0.5 * trace - 0.5 * p * d * std::log(2.0 * std::numbers::pi) -
           0.5 * d * log_det_from(llt_r) - 0.5 * p * log_det_from(llt_c);
}

Eigen::MatrixXd sample(const MatrixNormalPrior& prior, std::uint64_t seed)
{
    const SymMatrix root_r = sqrt_spd(prior.row_cov());
    const SymMatrix root_c = sqrt_spd(prior.col_cov());
    Rng rng(seed);
    Eigen::MatrixXd z(prior.rows(), prior.cols());
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
        for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = rng.normal();
    }
    return root_r.matrix() * z * root_c.matrix();
}

double regularizer_value(const Eigen::MatrixXd& w, const PrecisionPair& pp, double lambda)
{
    check_shape(w, pp);
    const Eigen::MatrixXd left = pp.row().matrix() * w;   // Omega_r W
    const Eigen::MatrixXd right = w * pp.col().matrix();  // W Omega_c
    const double trace = left.cwiseProduct(right).sum();
    const double p = static_cast<double>(w.rows());
    const double d = static_cast<double>(w.cols());
    return lambda * trace - lambda * (d * pp.log_det_row() + p * pp.log_det_col());
}

Eigen::MatrixXd regularizer_grad(const Eigen::MatrixXd& w, const PrecisionPair& pp, double lambda)
{
    check_shape(w, pp);
    return (2.0 * lambda) * (pp.row().matrix() * w * pp.col().matrix());
}

double default_lambda(Eigen::Index p, Eigen::Index d)
{
    if (p < 1 || d < 1) fail(ErrorCode::InvalidArgument, "default_lambda needs positive dimensions");
    return 1.0 / (2.0 * static_cast<double>(p) * static_cast<double>(d));
}

}  // namespace adareg
