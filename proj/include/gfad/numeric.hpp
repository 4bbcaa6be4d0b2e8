#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gfad/error.hpp"

namespace gfad {

using cdouble = std::complex<double>;

// Dense complex matrices use Eigen's default column-major storage.
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Real polynomial with coefficients in ascending degree. The leading stored
/// coefficient may be zero; use degree() for the effective degree.
struct RealPolynomial {
    std::vector<double> coeffs;

    RealPolynomial() = default;
    explicit RealPolynomial(std::vector<double> c) : coeffs(std::move(c)) {}

    /// Highest index with a nonzero coefficient, or -1 for the zero polynomial.
    int degree() const;
    double operator()(double x) const;
    RealPolynomial derivative() const;
    double max_abs_coeff() const;

    RealPolynomial& operator+=(const RealPolynomial& other);
    RealPolynomial& operator*=(double s);
    friend RealPolynomial operator*(const RealPolynomial& a, const RealPolynomial& b);
    friend RealPolynomial operator+(RealPolynomial a, const RealPolynomial& b) { return a += b; }
    friend RealPolynomial operator*(RealPolynomial a, double s) { return a *= s; }
};

struct EigenPair {
    RVector values;   // ascending
    CMatrix vectors;  // unitary, columns are eigenvectors
};

/// Unitary DFT matrix, F(l, l') = exp(-j 2 pi l l' / L) / sqrt(L) with 0-based indices.
CMatrix dft_matrix(std::size_t L);

/// Eigendecomposition of a Hermitian matrix. The input is symmetrized as
/// (A + A^H) / 2 before factoring.
EigenPair eig_hermitian(const CMatrix& A);

/// Returns (Sigma + c S S^H)^-1 given Sigma^-1, using the Woodbury identity
///   Sigma^-1 - c Sigma^-1 S (I + c S^H Sigma^-1 S)^-1 S^H Sigma^-1.
/// The result is re-Hermitized. Throws SingularUpdateError when the inner P x P
/// matrix is not positive definite (the updated covariance would be indefinite).
CMatrix woodbury_downdate(const CMatrix& sigma_inv, const CMatrix& block, double c);

/// Same update with W = Sigma^-1 S and Gamma = S^H W already formed.
CMatrix woodbury_downdate_precomputed(const CMatrix& sigma_inv, const CMatrix& w,
                                      const CMatrix& gamma, double c);

/// Coefficients of prod_{q != exclude} (1 + v_q d)^2, ascending in d.
RealPolynomial squared_factor_coeffs(std::span<const double> v,
                                     std::optional<std::size_t> exclude = std::nullopt);

/// Real roots of `poly` in [lo, hi], ascending, duplicates within 1e-10 merged.
/// Degrees up to 3 use closed forms, higher degrees use companion-matrix
/// eigenvalues. Every root is Newton-polished against the original polynomial.
/// Throws DegeneratePolynomialError for the zero polynomial.
std::vector<double> real_roots_in_interval(const RealPolynomial& poly, double lo, double hi);

/// Hermitian part (A + A^H) / 2.
CMatrix hermitian_part(const CMatrix& A);

/// Max-norm of A - B.
double max_abs_diff(const CMatrix& A, const CMatrix& B);

/// Inverse and log-determinant of a Hermitian positive definite matrix via
/// Cholesky. Throws ConditioningError when the factorization fails.
struct HpdFactor {
    CMatrix inverse;
    double log_det = 0.0;
};
HpdFactor factor_hpd(const CMatrix& A);

} // namespace gfad
