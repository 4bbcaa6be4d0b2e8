#include "gfad/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gfad {

namespace {

constexpr double kTrimRelative = 1e-14;    // leading coefficients below this (relative) are dropped
constexpr double kImagTolerance = 1e-8;    // |Im| <= tol (1 + |Re|) counts as real
constexpr double kResidualTolerance = 1e-8;
constexpr double kMergeTolerance = 1e-10;

bool treat_as_real(double re, double im) {
    return std::abs(im) <= kImagTolerance * (1.0 + std::abs(re));
}

double polish(const RealPolynomial& p, const RealPolynomial& dp, double x) {
    double best = x;
    double best_res = std::abs(p(x));
    for (int it = 0; it < 12 && best_res > 0.0; ++it) {
        const double slope = dp(x);
        if (slope == 0.0 || !std::isfinite(slope)) break;
        const double step = p(x) / slope;
        x -= step;
        if (!std::isfinite(x)) break;
        const double res = std::abs(p(x));
        if (res < best_res) {
            best_res = res;
            best = x;
        }
        if (std::abs(step) <= 1e-16 * (1.0 + std::abs(x))) break;
    }
    return best;
}

void linear_roots(const std::vector<double>& c, std::vector<double>& out) {
    out.push_back(-c[0] / c[1]);
}

void quadratic_roots(const std::vector<double>& c, std::vector<double>& out) {
    const double a = c[2], b = c[1], k = c[0];
    const double disc = b * b - 4.0 * a * k;
    if (disc < 0.0) {
        const double re = -b / (2.0 * a);
        const double im = std::sqrt(-disc) / (2.0 * std::abs(a));
        if (treat_as_real(re, im)) out.push_back(re);
        return;
    }
    const double sq = std::sqrt(disc);
    const double q = -0.5 * (b + std::copysign(sq, b));
    if (q != 0.0) {
        out.push_back(q / a);
        out.push_back(k / q);
    } else {
        out.push_back(0.0);
    }
}

void cubic_roots(const std::vector<double>& c, std::vector<double>& out) {
    const double a = c[2] / c[3], b = c[1] / c[3], k = c[0] / c[3];
    const double Q = (a * a - 3.0 * b) / 9.0;
    const double R = (2.0 * a * a * a - 9.0 * a * b + 27.0 * k) / 54.0;
    const double Q3 = Q * Q * Q;
    if (R * R < Q3) {
        const double theta = std::acos(std::clamp(R / std::sqrt(Q3), -1.0, 1.0));
        const double m = -2.0 * std::sqrt(Q);
        constexpr double two_pi = 2.0 * std::numbers::pi;
        out.push_back(m * std::cos(theta / 3.0) - a / 3.0);
        out.push_back(m * std::cos((theta + two_pi) / 3.0) - a / 3.0);
        out.push_back(m * std::cos((theta - two_pi) / 3.0) - a / 3.0);
        return;
    }
    const double A = -std::copysign(std::cbrt(std::abs(R) + std::sqrt(R * R - Q3)), R);
    const double B = (A != 0.0) ? Q / A : 0.0;
    out.push_back((A + B) - a / 3.0);
    const double re = -0.5 * (A + B) - a / 3.0;
    const double im = 0.5 * std::sqrt(3.0) * (A - B);
    if (treat_as_real(re, im)) out.push_back(re);
}

// Parlett-Reinsch balancing with radix-2 scaling, in place.
void balance(Eigen::MatrixXd& m) {
    constexpr double radix = 2.0;
    const Eigen::Index n = m.rows();
    bool done = false;
    while (!done) {
        done = true;
        for (Eigen::Index i = 0; i < n; ++i) {
            double r = 0.0, col = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                col += std::abs(m(j, i));
                r += std::abs(m(i, j));
            }
            if (col == 0.0 || r == 0.0) continue;
            double g = r / radix;
            double f = 1.0;
            const double s = col + r;
            while (col < g) {
                f *= radix;
                col *= radix * radix;
            }
            g = r * radix;
            while (col > g) {
                f /= radix;
                col /= radix * radix;
            }
            if ((col + r) / f < 0.95 * s) {
                done = false;
                m.row(i) /= f;
                m.col(i) *= f;
            }
        }
    }
}

void companion_roots(const std::vector<double>& c, std::vector<double>& out) {
    const auto deg = static_cast<Eigen::Index>(c.size() - 1);
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (Eigen::Index i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (Eigen::Index i = 0; i < deg; ++i) comp(i, deg - 1) = -c[static_cast<std::size_t>(i)] / c.back();
    balance(comp);
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, /*computeEigenvectors=*/false);
    const auto& ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (treat_as_real(ev[i].real(), ev[i].imag())) out.push_back(ev[i].real());
    }
}

} // namespace

int RealPolynomial::degree() const {
    for (int i = static_cast<int>(coeffs.size()) - 1; i >= 0; --i) {
        if (coeffs[static_cast<std::size_t>(i)] != 0.0) return i;
    }
    return -1;
}

double RealPolynomial::operator()(double x) const {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * x + *it;
    return acc;
}

RealPolynomial RealPolynomial::derivative() const {
    if (coeffs.size() <= 1) return RealPolynomial({0.0});
    std::vector<double> d(coeffs.size() - 1);
    for (std::size_t k = 1; k < coeffs.size(); ++k) d[k - 1] = static_cast<double>(k) * coeffs[k];
    return RealPolynomial(std::move(d));
}

double RealPolynomial::max_abs_coeff() const {
    double m = 0.0;
    for (double c : coeffs) m = std::max(m, std::abs(c));
    return m;
}

RealPolynomial& RealPolynomial::operator+=(const RealPolynomial& other) {
    if (other.coeffs.size() > coeffs.size()) coeffs.resize(other.coeffs.size(), 0.0);
    for (std::size_t k = 0; k < other.coeffs.size(); ++k) coeffs[k] += other.coeffs[k];
    return *this;
}

RealPolynomial& RealPolynomial::operator*=(double s) {
    for (double& c : coeffs) c *= s;
    return *this;
}

RealPolynomial operator*(const RealPolynomial& a, const RealPolynomial& b) {
    if (a.coeffs.empty() || b.coeffs.empty()) return RealPolynomial({0.0});
    std::vector<double> r(a.coeffs.size() + b.coeffs.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.coeffs.size(); ++i)
        for (std::size_t j = 0; j < b.coeffs.size(); ++j) r[i + j] += a.coeffs[i] * b.coeffs[j];
    return RealPolynomial(std::move(r));
}

CMatrix dft_matrix(std::size_t L) {
    if (L == 0) throw DimensionError("dft_matrix: L must be positive");
    const auto n = static_cast<Eigen::Index>(L);
    CMatrix F(n, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(L));
    for (std::size_t r = 0; r < L; ++r) {
        for (std::size_t c = 0; c < L; ++c) {
            // Reduce the exponent modulo L to keep the phase exact for large indices.
            const double phase = -2.0 * std::numbers::pi * static_cast<double>((r * c) % L) /
                                 static_cast<double>(L);
            F(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::polar(scale, phase);
        }
    }
    return F;
}

CMatrix hermitian_part(const CMatrix& A) {
    return (A + A.adjoint()) * 0.5;
}

double max_abs_diff(const CMatrix& A, const CMatrix& B) {
    if (A.rows() != B.rows() || A.cols() != B.cols())
        throw DimensionError("max_abs_diff: shape mismatch");
    if (A.size() == 0) return 0.0;
    return (A - B).cwiseAbs().maxCoeff();
}

EigenPair eig_hermitian(const CMatrix& A) {
    if (A.rows() != A.cols()) throw DimensionError("eig_hermitian: matrix must be square");
    Eigen::SelfAdjointEigenSolver<CMatrix> es(hermitian_part(A));
    if (es.info() != Eigen::Success) throw ConditioningError("eig_hermitian: solver did not converge");
    return EigenPair{es.eigenvalues(), es.eigenvectors()};
}

CMatrix woodbury_downdate_precomputed(const CMatrix& sigma_inv, const CMatrix& w,
                                      const CMatrix& gamma, double c) {
    if (c == 0.0) return sigma_inv;
    const auto p = gamma.rows();
    CMatrix inner = CMatrix::Identity(p, p) + c * hermitian_part(gamma);
    Eigen::LLT<CMatrix> llt(inner);
    if (llt.info() != Eigen::Success)
        throw SingularUpdateError("woodbury_downdate: inner matrix is not positive definite");
    const auto diag = llt.matrixLLT().diagonal().real();
    if (diag.minCoeff() <= 1e-7 * std::max(1.0, diag.maxCoeff()))
        throw SingularUpdateError("woodbury_downdate: inner matrix is numerically singular");
    CMatrix updated = sigma_inv - c * w * llt.solve(w.adjoint());
    return hermitian_part(updated);
}

CMatrix woodbury_downdate(const CMatrix& sigma_inv, const CMatrix& block, double c) {
    if (sigma_inv.rows() != sigma_inv.cols() || block.rows() != sigma_inv.rows())
        throw DimensionError("woodbury_downdate: shape mismatch");
    const CMatrix w = sigma_inv * block;
    const CMatrix gamma = block.adjoint() * w;
    return woodbury_downdate_precomputed(sigma_inv, w, gamma, c);
}

RealPolynomial squared_factor_coeffs(std::span<const double> v, std::optional<std::size_t> exclude) {
    std::vector<double> acc{1.0};
    for (std::size_t q = 0; q < v.size(); ++q) {
        if (exclude && *exclude == q) continue;
        const double f[3] = {1.0, 2.0 * v[q], v[q] * v[q]};
        std::vector<double> next(acc.size() + 2, 0.0);
        for (std::size_t i = 0; i < acc.size(); ++i)
            for (std::size_t j = 0; j < 3; ++j) next[i + j] += acc[i] * f[j];
        acc = std::move(next);
    }
    return RealPolynomial(std::move(acc));
}

std::vector<double> real_roots_in_interval(const RealPolynomial& poly, double lo, double hi) {
    if (lo > hi) throw std::invalid_argument("real_roots_in_interval: lo > hi");
    const double scale = poly.max_abs_coeff();
    if (scale == 0.0 || poly.coeffs.empty())
        throw DegeneratePolynomialError("real_roots_in_interval: zero polynomial");

    std::vector<double> c = poly.coeffs;
    while (c.size() > 1 && std::abs(c.back()) <= kTrimRelative * scale) c.pop_back();

    std::vector<double> raw;
    std::size_t zeros = 0;
    while (c.size() > 1 && c.front() == 0.0) {
        c.erase(c.begin());
        ++zeros;
    }
    if (zeros > 0) raw.push_back(0.0);

    switch (c.size() - 1) {
    case 0: break;
    case 1: linear_roots(c, raw); break;
    case 2: quadratic_roots(c, raw); break;
    case 3: cubic_roots(c, raw); break;
    default: companion_roots(c, raw); break;
    }

    const RealPolynomial dp = poly.derivative();
    const double slack = 1e-12 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
    std::vector<double> roots;
    for (double r : raw) {
        if (!std::isfinite(r)) continue;
        const double x = polish(poly, dp, r);
        if (x < lo - slack || x > hi + slack) continue;
        if (std::abs(poly(x)) > kResidualTolerance * scale) continue;
        roots.push_back(std::clamp(x, lo, hi));
    }
    std::sort(roots.begin(), roots.end());
    std::vector<double> merged;
    for (double r : roots) {
        if (merged.empty() || r - merged.back() > kMergeTolerance) merged.push_back(r);
    }
    return merged;
}

HpdFactor factor_hpd(const CMatrix& A) {
    if (A.rows() != A.cols()) throw DimensionError("factor_hpd: matrix must be square");
    Eigen::LLT<CMatrix> llt(hermitian_part(A));
    if (llt.info() != Eigen::Success)
        throw ConditioningError("covariance is not numerically positive definite");
    const auto diag = llt.matrixLLT().diagonal().real();
    if (diag.size() > 0 && diag.minCoeff() <= 0.0)
        throw ConditioningError("covariance is not numerically positive definite");
    HpdFactor out;
    out.log_det = 2.0 * diag.array().log().sum();
    out.inverse = hermitian_part(llt.solve(CMatrix::Identity(A.rows(), A.cols())));
    return out;
}

} // namespace gfad
