#pragma once

#include <cmath>
#include <cstddef>

namespace mvir::kernels {

// Dense kernels shared by the autodiff tape and the raw (tape-free) field
// evaluators. All matrices are row-major. These loops carry the bulk of the
// arithmetic, keep them simple enough for the compiler to vectorize.

// C(n x m) += A(n x k) * B(m x k)^T
inline void gemm_nt_acc(const double* A, const double* B, double* C, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        double* c = C + static_cast<size_t>(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* b = B + static_cast<size_t>(j) * k;
            double s = 0;
            for (int p = 0; p < k; ++p)
                s += a[p] * b[p];
            c[j] += s;
        }
    }
}

// C(n x m) += A(n x k) * B(k x m)
inline void gemm_nn_acc(const double* A, const double* B, double* C, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        double* c = C + static_cast<size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            double av = a[p];
            const double* b = B + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j)
                c[j] += av * b[j];
        }
    }
}

// C(k x m) += A(n x k)^T * B(n x m)
inline void gemm_tn_acc(const double* A, const double* B, double* C, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        const double* a = A + static_cast<size_t>(i) * k;
        const double* b = B + static_cast<size_t>(i) * m;
        for (int p = 0; p < k; ++p) {
            double av = a[p];
            double* c = C + static_cast<size_t>(p) * m;
            for (int j = 0; j < m; ++j)
                c[j] += av * b[j];
        }
    }
}

inline double sigmoid(double x) {
    if (x >= 0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    double e = std::exp(x);
    return e / (1.0 + e);
}

// softplus with sharpness beta: (1/beta) * log(1 + exp(beta x)).
inline double softplus(double x, double beta) {
    double z = beta * x;
    if (z > 30.0)
        return x; // exp(z) dwarfs 1, log1p(exp(z)) ~= z
    if (z < -30.0)
        return std::exp(z) / beta;
    return std::log1p(std::exp(z)) / beta;
}

// d/dx softplus(x; beta) = sigmoid(beta x)
inline double softplus_grad(double x, double beta) { return sigmoid(beta * x); }

// x^n for integer n >= 0 by repeated squaring.
inline double pow_int(double x, int n) {
    double r = 1.0, b = x;
    for (int e = n; e > 0; e >>= 1) {
        if (e & 1)
            r *= b;
        b *= b;
    }
    return r;
}

} // namespace mvir::kernels
