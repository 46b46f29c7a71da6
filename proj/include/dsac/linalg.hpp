#pragma once

// Small dense matrices and an LU solver with partial pivoting. The systems
// here are L x L with L in the tens, so dense factorization is cheap and
// avoids special-casing the cyclic band structure.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dsac {

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), a(static_cast<size_t>(r) * c, fill) {}

    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
};

inline std::vector<double> matvec(const Matrix& m, const std::vector<double>& x) {
    std::vector<double> y(static_cast<size_t>(m.rows), 0.0);
    for (int r = 0; r < m.rows; ++r) {
        double acc = 0.0;
        for (int c = 0; c < m.cols; ++c) acc += m.at(r, c) * x[static_cast<size_t>(c)];
        y[static_cast<size_t>(r)] = acc;
    }
    return y;
}

struct LuFactors {
    Matrix lu;
    std::vector<int> piv;
};

inline LuFactors lu_factor(Matrix m) {
    if (m.rows != m.cols) throw std::invalid_argument("lu_factor: matrix must be square");
    const int n = m.rows;
    std::vector<int> piv(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) piv[static_cast<size_t>(i)] = i;
    for (int k = 0; k < n; ++k) {
        int p = k;
        double best = std::abs(m.at(k, k));
        for (int r = k + 1; r < n; ++r) {
            const double v = std::abs(m.at(r, k));
            if (v > best) {
                best = v;
                p = r;
            }
        }
        if (!(best > 0.0) || !std::isfinite(best))
            throw std::runtime_error("lu_factor: singular or non-finite system");
        if (p != k) {
            for (int c = 0; c < n; ++c) std::swap(m.at(k, c), m.at(p, c));
            std::swap(piv[static_cast<size_t>(k)], piv[static_cast<size_t>(p)]);
        }
        const double d = m.at(k, k);
        for (int r = k + 1; r < n; ++r) {
            const double f = m.at(r, k) / d;
            m.at(r, k) = f;
            if (f == 0.0) continue;
            for (int c = k + 1; c < n; ++c) m.at(r, c) -= f * m.at(k, c);
        }
    }
    return {std::move(m), std::move(piv)};
}

inline std::vector<double> lu_solve(const LuFactors& f, const std::vector<double>& rhs) {
    const int n = f.lu.rows;
    std::vector<double> x(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] = rhs[static_cast<size_t>(f.piv[static_cast<size_t>(i)])];
    for (int r = 1; r < n; ++r) {
        double acc = x[static_cast<size_t>(r)];
        for (int c = 0; c < r; ++c) acc -= f.lu.at(r, c) * x[static_cast<size_t>(c)];
        x[static_cast<size_t>(r)] = acc;
    }
    for (int r = n - 1; r >= 0; --r) {
        double acc = x[static_cast<size_t>(r)];
        for (int c = r + 1; c < n; ++c) acc -= f.lu.at(r, c) * x[static_cast<size_t>(c)];
        x[static_cast<size_t>(r)] = acc / f.lu.at(r, r);
    }
    return x;
}

}  // namespace dsac
