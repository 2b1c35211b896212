#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "mvir/error.h"

namespace mvir {

// ---------------------------------------------------------------------------
// Small fixed-size geometry types. Row vectors, row-major matrices.
// ---------------------------------------------------------------------------

struct Vec3 {
    double x = 0, y = 0, z = 0;

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x; y += o.y; z += o.z;
        return *this;
    }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    return n > 0 ? v / n : Vec3{0, 0, 0};
}

struct Mat3 {
    // Row-major.
    std::array<double, 9> m{};

    double& operator()(int r, int c) { return m[r * 3 + c]; }
    double operator()(int r, int c) const { return m[r * 3 + c]; }

    static Mat3 identity() {
        Mat3 I;
        I.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
        return I;
    }

    Mat3 transposed() const {
        Mat3 t;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                t(r, c) = (*this)(c, r);
        return t;
    }

    Vec3 operator*(const Vec3& v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k)
                    s += (*this)(i, k) * o(k, j);
                r(i, j) = s;
            }
        return r;
    }

    double det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
};

// Solves A x = b for a 3x3 system by Cramer's rule. Throws on singular A.
inline Vec3 solve3(const Mat3& A, const Vec3& b, double det_tol = 1e-12) {
    double d = A.det();
    check(std::abs(d) > det_tol, "singular 3x3 system (det=", d, ")");
    auto col_replaced = [&](int c) {
        Mat3 M = A;
        for (int r = 0; r < 3; ++r)
            M(r, c) = b[r];
        return M.det();
    };
    return {col_replaced(0) / d, col_replaced(1) / d, col_replaced(2) / d};
}

// ---------------------------------------------------------------------------
// Dense row-major matrix of doubles. The autodiff tape stores every node
// value in this layout; a column vector is n x 1, a row vector 1 x n.
// ---------------------------------------------------------------------------

struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), a(std::move(data)) {
        check(a.size() == static_cast<size_t>(r) * c, "Mat: data size mismatch");
    }

    static Mat row(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Mat(1, n, std::move(v));
    }
    static Mat col(std::vector<double> v) {
        int n = static_cast<int>(v.size());
        return Mat(n, 1, std::move(v));
    }
    static Mat scalar(double v) { return Mat(1, 1, {v}); }
    static Mat row3(const Vec3& v) { return Mat(1, 3, {v.x, v.y, v.z}); }

    size_t size() const { return a.size(); }
    double& operator()(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
    double* data() { return a.data(); }
    const double* data() const { return a.data(); }
};

} // namespace mvir
