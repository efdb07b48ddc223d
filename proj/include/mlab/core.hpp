#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mlab/errors.hpp"
#include "mlab/tolerances.hpp"

namespace mlab {

using Complex = std::complex<double>;

// Dense row-major storage throughout; meter dimensions stay small (<= ~64).
using CMatrix = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

namespace detail {

inline std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

// Max elementwise deviation from Hermiticity.
inline double hermiticity_deviation(const CMatrix& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

}  // namespace detail

/// Hilbert-space inner product <x|y> = sum_i conj(x_i) y_i.
inline Complex inner(const CVector& x, const CVector& y) {
    if (x.size() != y.size()) {
        throw DimensionError("inner: vectors have dimensions " + std::to_string(x.size()) +
                             " and " + std::to_string(y.size()));
    }
    if (x.size() < 1) throw DimensionError("inner: vectors must have dim >= 1");
    return x.dot(y);  // Eigen conjugates the left factor
}

struct HermitianEig {
    RVector eigenvalues;   // ascending
    CMatrix eigenvectors;  // columns, unitary
};

/// Eigendecomposition of a Hermitian matrix: m = V diag(lambda) V^dagger.
/// Deviations below `tol` are removed by symmetrization (m + m^dagger)/2;
/// anything above is a hard error.
inline HermitianEig hermitian_eig(const CMatrix& m,
                                  double tol = default_tolerances().validity) {
    if (m.rows() != m.cols()) {
        throw DimensionError("hermitian_eig: matrix is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", expected square");
    }
    const double dev = detail::hermiticity_deviation(m);
    if (dev > tol) {
        throw NotHermitian("hermitian_eig: max |m - m^dagger| = " + detail::fmt(dev) +
                           " exceeds tolerance " + detail::fmt(tol));
    }
    const CMatrix sym = 0.5 * (m + m.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw InternalError("hermitian_eig: eigensolver did not converge");
    }
    return HermitianEig{solver.eigenvalues(), solver.eigenvectors()};
}

// Validated density operator in the eigenbasis of the target observable.
// The stored matrix is the symmetrized input, so it is Hermitian to machine
// precision. Labels are optional display metadata; indexing is positional.
class DensityMatrix {
public:
    const CMatrix& matrix() const { return rho_; }
    Eigen::Index dim() const { return rho_.rows(); }
    const std::vector<double>& labels() const { return labels_; }

    friend DensityMatrix validate_density(const CMatrix&, double, std::vector<double>);

private:
    DensityMatrix(CMatrix rho, std::vector<double> labels)
        : rho_(std::move(rho)), labels_(std::move(labels)) {}

    CMatrix rho_;
    std::vector<double> labels_;
};

/// Checks Hermiticity, positivity and unit trace; each failure names the
/// violated invariant and the worst offending value.
inline DensityMatrix validate_density(const CMatrix& rho,
                                      double tol = default_tolerances().validity,
                                      std::vector<double> labels = {}) {
    if (rho.rows() != rho.cols() || rho.rows() < 1) {
        throw DimensionError("validate_density: matrix is " + std::to_string(rho.rows()) + "x" +
                             std::to_string(rho.cols()) + ", expected square");
    }
    const double herm_dev = detail::hermiticity_deviation(rho);
    if (herm_dev > tol) {
        throw NotHermitian("validate_density: max |rho - rho^dagger| = " +
                           detail::fmt(herm_dev) + " exceeds tolerance " + detail::fmt(tol));
    }
    const CMatrix sym = 0.5 * (rho + rho.adjoint().eval());
    const double trace_dev = std::abs(sym.trace() - Complex(1.0, 0.0));
    if (trace_dev > tol) {
        throw TraceNotOne("validate_density: |trace - 1| = " + detail::fmt(trace_dev) +
                          " (trace = " + detail::fmt(sym.trace().real()) + ")");
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
    if (solver.info() != Eigen::Success) {
        throw InternalError("validate_density: eigensolver did not converge");
    }
    const double min_eig = solver.eigenvalues().minCoeff();
    if (min_eig < -tol) {
        throw NotPositive("validate_density: minimum eigenvalue " + detail::fmt(min_eig) +
                          " is below -" + detail::fmt(tol));
    }
    if (!labels.empty() && static_cast<Eigen::Index>(labels.size()) != rho.rows()) {
        throw DimensionError("validate_density: " + std::to_string(labels.size()) +
                             " labels for a " + std::to_string(rho.rows()) + "-dim matrix");
    }
    return DensityMatrix(sym, std::move(labels));
}

// Validated unitary: U^dagger U = I within `tol` (max elementwise deviation).
class UnitaryMatrix {
public:
    explicit UnitaryMatrix(CMatrix u, double tol = default_tolerances().validity)
        : u_(std::move(u)) {
        if (u_.rows() != u_.cols() || u_.rows() < 1) {
            throw DimensionError("UnitaryMatrix: matrix is " + std::to_string(u_.rows()) + "x" +
                                 std::to_string(u_.cols()) + ", expected square");
        }
        const CMatrix gram = u_.adjoint() * u_;
        const double dev =
            (gram - CMatrix::Identity(u_.rows(), u_.rows())).cwiseAbs().maxCoeff();
        if (dev > tol) {
            throw NotUnitary("UnitaryMatrix: max |U^dagger U - I| = " + detail::fmt(dev) +
                             " exceeds tolerance " + detail::fmt(tol));
        }
    }

    const CMatrix& matrix() const { return u_; }
    Eigen::Index dim() const { return u_.rows(); }

private:
    CMatrix u_;
};

}  // namespace mlab
