#include "adareg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "adareg/errors.hpp"

namespace adareg {

SymMatrix::SymMatrix(const Eigen::MatrixXd& a)
{
    if (a.rows() != a.cols()) {
        fail(ErrorCode::DimensionMismatch,
             "symmetric matrix must be square, got " + std::to_string(a.rows()) + "x" +
                 std::to_string(a.cols()));
    }
    if (!a.allFinite()) fail(ErrorCode::InvalidArgument, "symmetric matrix has non-finite entries");
    entries_ = 0.5 * (a + a.transpose());
}

SymMatrix SymMatrix::identity(Eigen::Index dim, double scale)
{
    return SymMatrix(Eigen::MatrixXd::Identity(dim, dim) * scale);
}

SymMatrix SymMatrix::diagonal(const Eigen::VectorXd& values)
{
    return SymMatrix(Eigen::MatrixXd(values.asDiagonal()));
}

SpectralBounds SpectralBounds::from_upper(double v)
{
    if (!(v >= 1.0) || !std::isfinite(v)) {
        fail(ErrorCode::InvalidArgument, "spectral upper bound v must be finite and >= 1");
    }
    return SpectralBounds(1.0 / v, v);
}

double threshold(double x, const SpectralBounds& bounds) noexcept
{
    return std::max(bounds.lower(), std::min(bounds.upper(), x));
}

namespace {

// One Jacobi rotation zeroing a(p, q); applied to both triangles and to the
// accumulated eigenvector matrix.
void rotate(Eigen::MatrixXd& a, Eigen::MatrixXd& v, Eigen::Index p, Eigen::Index q)
{
    const double apq = a(p, q);
    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
    double t;
    if (std::abs(theta) > 1e150) {
        t = 0.5 / theta;
    } else {
        t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    }
    const double c = 1.0 / std::sqrt(t * t + 1.0);
    const double s = t * c;

    a(p, p) -= t * apq;
    a(q, q) += t * apq;
    a(p, q) = 0.0;
    a(q, p) = 0.0;
    const Eigen::Index n = a.rows();
    for (Eigen::Index r = 0; r < n; ++r) {
        if (r == p || r == q) continue;
        const double arp = a(r, p);
        const double arq = a(r, q);
        a(r, p) = c * arp - s * arq;
        a(p, r) = a(r, p);
        a(r, q) = s * arp + c * arq;
        a(q, r) = a(r, q);
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        const double vrp = v(r, p);
        const double vrq = v(r, q);
        v(r, p) = c * vrp - s * vrq;
        v(r, q) = s * vrp + c * vrq;
    }
}

double max_off_diagonal(const Eigen::MatrixXd& a)
{
    double m = 0.0;
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
        for (Eigen::Index i = 0; i < j; ++i) m = std::max(m, std::abs(a(i, j)));
    }
    return m;
}

}  // namespace

EigenDecomposition eigh(const SymMatrix& sym)
{
    const Eigen::Index n = sym.dim();
    Eigen::MatrixXd a = sym.matrix();
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

    const double tol = 1e-12 * a.norm();
    const long max_sweeps = 100L * static_cast<long>(n) * static_cast<long>(n);
    long sweep = 0;
    while (max_off_diagonal(a) > tol) {
        if (sweep++ >= max_sweeps) {
            fail(ErrorCode::ConvergenceFailure,
                 "Jacobi eigensolver exceeded " + std::to_string(max_sweeps) + " sweeps");
        }
        for (Eigen::Index p = 0; p + 1 < n; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (a(p, q) != 0.0) rotate(a, v, p, q);
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        out.eigenvalues[k] = a(src, src);
        Eigen::VectorXd col = v.col(src);
        Eigen::Index arg = 0;
        col.cwiseAbs().maxCoeff(&arg);
        if (col[arg] < 0.0) col = -col;
        out.eigenvectors.col(k) = col;
    }
    return out;
}

SymMatrix reassemble(const EigenDecomposition& eig, const Eigen::VectorXd& values)
{
    const Eigen::Index n = values.size();
    if (n == 0) return SymMatrix(Eigen::MatrixXd(0, 0));
    if ((values.array() == values[0]).all()) return SymMatrix::identity(n, values[0]);
    const Eigen::MatrixXd& q = eig.eigenvectors;
    return SymMatrix(q * values.asDiagonal() * q.transpose());
}

SymMatrix project_to_cone(const SymMatrix& a, const SpectralBounds& bounds)
{
    const EigenDecomposition eig = eigh(a);
    const Eigen::VectorXd clamped =
        eig.eigenvalues.unaryExpr([&](double x) { return threshold(x, bounds); });
    return reassemble(eig, clamped);
}

SymMatrix inv_threshold(const SymMatrix& delta, int m, const SpectralBounds& bounds)
{
    if (m <= 0) fail(ErrorCode::InvalidArgument, "inv_threshold requires m > 0");
    const EigenDecomposition eig = eigh(delta);
    const Eigen::Index n = eig.eigenvalues.size();
    if (n == 0) return delta;

    const double spectral = eig.eigenvalues.cwiseAbs().maxCoeff();
    const double smallest = eig.eigenvalues[n - 1];
    if (smallest < -1e-6 * spectral) {
        fail(ErrorCode::NotPSD, "inv_threshold input has eigenvalue " + std::to_string(smallest) +
                                    " below -1e-6 * ||delta||_2");
    }

    Eigen::VectorXd values(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double r = std::max(0.0, eig.eigenvalues[i]);
        const double ratio =
            r > 0.0 ? static_cast<double>(m) / r : std::numeric_limits<double>::infinity();
        values[i] = threshold(ratio, bounds);
    }
    return reassemble(eig, values);
}

double log_det_spd(const SymMatrix& a)
{
    const EigenDecomposition eig = eigh(a);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < eig.eigenvalues.size(); ++i) {
        const double lambda = eig.eigenvalues[i];
        if (!(lambda > 0.0)) {
            fail(ErrorCode::NotPD, "matrix has non-positive eigenvalue " + std::to_string(lambda));
        }
        sum += std::log(lambda);
    }
    return sum;
}

double subproblem_objective(const SymMatrix& omega, const SymMatrix& delta, int m)
{
    if (omega.dim() != delta.dim()) {
        fail(ErrorCode::DimensionMismatch, "omega and delta must have the same dimension");
    }
    const double trace = omega.matrix().cwiseProduct(delta.matrix()).sum();
    return trace - static_cast<double>(m) * log_det_spd(omega);
}

}  // namespace adareg
