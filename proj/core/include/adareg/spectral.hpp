#pragma once

#include <Eigen/Core>

namespace adareg {

/// Dense real symmetric matrix. Construction symmetrizes the input,
/// A <- (A + A^T) / 2, and rejects non-square or non-finite data.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Eigen::MatrixXd& a);

    static SymMatrix identity(Eigen::Index dim, double scale = 1.0);
    static SymMatrix diagonal(const Eigen::VectorXd& values);

    Eigen::Index dim() const noexcept { return entries_.rows(); }
    const Eigen::MatrixXd& matrix() const noexcept { return entries_; }
    double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

private:
    Eigen::MatrixXd entries_;
};

/// The pair (u, v) bounding the spectrum of the precision matrices, with
/// 0 < u <= v and u * v = 1.
class SpectralBounds {
public:
    /// u = 1 / v; requires v >= 1.
    static SpectralBounds from_upper(double v);

    double lower() const noexcept { return u_; }
    double upper() const noexcept { return v_; }

private:
    SpectralBounds(double u, double v) : u_(u), v_(v) {}

    double u_;
    double v_;
};

struct EigenDecomposition {
    Eigen::VectorXd eigenvalues;   // descending
    Eigen::MatrixXd eigenvectors;  // orthogonal, column j pairs with eigenvalues[j]
};

/// max{u, min{v, x}}; +inf maps to v.
double threshold(double x, const SpectralBounds& bounds) noexcept;

/// Cyclic Jacobi eigensolver. Sweeps until the largest off-diagonal entry is
/// below 1e-12 * ||A||_F; throws ConvergenceFailure after 100 * dim^2 sweeps.
/// Eigenvector signs are fixed so the largest-magnitude component of each
/// column is positive.
EigenDecomposition eigh(const SymMatrix& a);

/// Q diag(values) Q^T for the eigenvectors of `eig`. If every value is the
/// same scalar c, returns c * I exactly.
SymMatrix reassemble(const EigenDecomposition& eig, const Eigen::VectorXd& values);

/// Euclidean (Frobenius) projection onto {A : uI <= A <= vI}.
SymMatrix project_to_cone(const SymMatrix& a, const SpectralBounds& bounds);

/// Exact minimizer of tr(Omega * delta) - m * log det(Omega) subject to
/// uI <= Omega <= vI: Q diag(T(m / r)) Q^T with delta = Q diag(r) Q^T.
/// Eigenvalues of delta in [-1e-6 ||delta||_2, 0) are treated as zero, and a
/// zero eigenvalue maps to v. Anything more negative throws NotPSD.
SymMatrix inv_threshold(const SymMatrix& delta, int m, const SpectralBounds& bounds);

/// tr(omega * delta) - m * log det(omega). Throws NotPD unless omega is
/// positive definite.
double subproblem_objective(const SymMatrix& omega, const SymMatrix& delta, int m);

/// Sum of log eigenvalues; throws NotPD on a non-positive eigenvalue.
double log_det_spd(const SymMatrix& a);

}  // namespace adareg
