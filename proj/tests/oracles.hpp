#pragma once

// Independent reference implementations used only by the tests. These
// deliberately take different algorithmic routes than the library so the
// two sides cannot share a bug.

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "shmloc/linalg.hpp"

namespace oracles {

using shmloc::Complex;
using shmloc::ComplexVector;
using shmloc::Matrix;
using shmloc::Vector;

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    if (scale == 0.0) return 0.0;
    return std::abs(a - b) / scale;
}

/// Naive Gaussian elimination without pivoting on a dense complex system.
inline ComplexVector naive_solve_complex(std::vector<Complex> a, ComplexVector b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        for (std::size_t r = col + 1; r < n; ++r) {
            const Complex factor = a[r * n + col] / a[col * n + col];
            for (std::size_t j = col; j < n; ++j) {
                a[r * n + j] -= factor * a[col * n + j];
            }
            b[r] -= factor * b[col];
        }
    }
    ComplexVector x(n);
    for (std::size_t ii = n; ii-- > 0;) {
        Complex acc = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) acc -= a[ii * n + j] * x[j];
        x[ii] = acc / a[ii * n + ii];
    }
    return x;
}

/// Determinant by cofactor expansion; fine for the tiny matrices the
/// tests use.
inline double cofactor_det(const Matrix& m) {
    const std::size_t n = m.rows();
    if (n == 1) return m(0, 0);
    if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    double det = 0.0;
    double sign = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        Matrix minor(n - 1, n - 1);
        for (std::size_t i = 1; i < n; ++i) {
            std::size_t mj = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == col) continue;
                minor(i - 1, mj++) = m(i, j);
            }
        }
        det += sign * m(0, col) * cofactor_det(minor);
        sign = -sign;
    }
    return det;
}

/// Inverse via adjugate / determinant.
inline Matrix adjugate_inverse(const Matrix& m) {
    const std::size_t n = m.rows();
    const double det = cofactor_det(m);
    if (det == 0.0) throw std::runtime_error("adjugate_inverse: singular");
    Matrix inv(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            Matrix minor(n - 1, n - 1);
            std::size_t mi = 0;
            for (std::size_t r = 0; r < n; ++r) {
                if (r == i) continue;
                std::size_t mj = 0;
                for (std::size_t c = 0; c < n; ++c) {
                    if (c == j) continue;
                    minor(mi, mj++) = m(r, c);
                }
                ++mi;
            }
            const double sign = ((i + j) % 2 == 0) ? 1.0 : -1.0;
            inv(j, i) = sign * cofactor_det(minor) / det;
        }
    }
    return inv;
}

/// Real symmetric eigenvalues via Householder tridiagonalization followed
/// by QL iteration with implicit shifts (classic tred2/tqli route, values
/// only). Returned descending.
inline Vector symmetric_eigenvalues(Matrix a) {
    const std::size_t n = a.rows();
    Vector d(n, 0.0), e(n, 0.0);

    // Householder reduction to tridiagonal form.
    for (std::size_t i = n; i-- > 1;) {
        const std::size_t l = i - 1;
        double h = 0.0;
        if (l > 0) {
            double scale = 0.0;
            for (std::size_t k = 0; k <= l; ++k) scale += std::abs(a(i, k));
            if (scale == 0.0) {
                e[i] = a(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    a(i, k) /= scale;
                    h += a(i, k) * a(i, k);
                }
                double f = a(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                a(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
                    e[j] = g / h;
                    f += e[j] * a(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = a(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k) {
                        a(j, k) -= f * e[k] + g * a(i, k);
                    }
                }
            }
        } else {
            e[i] = a(i, l);
        }
        d[i] = h;
    }
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);

    // QL with implicit shifts.
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iterations = 0;
        while (true) {
            std::size_t m = l;
            for (; m + 1 < n; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) <= 1e-300 || std::abs(e[m]) <= 1e-15 * dd) break;
            }
            if (m == l) break;
            if (++iterations > 60) {
                throw std::runtime_error("symmetric_eigenvalues: no convergence");
            }
            double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            double r = std::hypot(g, 1.0);
            g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
            double s = 1.0, c = 1.0, p = 0.0;
            for (std::size_t i = m; i-- > l;) {
                double f = s * e[i];
                const double b = c * e[i];
                r = std::hypot(f, g);
                e[i + 1] = r;
                if (r == 0.0) {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if (r == 0.0 && m > l + 1) continue;
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    std::sort(d.begin(), d.end(), std::greater<double>());
    return d;
}

} // namespace oracles
