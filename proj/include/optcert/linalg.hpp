/*
 Copyright 2026 The OptCert Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

#include <cstddef>
#include <vector>

#include "optcert/errors.hpp"

namespace optcert {

using Vec = std::vector<double>;

/// Dense row-major matrix, small sizes only (state dimensions of a handful).
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
    static Mat diag(const Vec& d) {
        Mat m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    Mat transposed() const;
    Mat& operator+=(const Mat& other);
    Mat& operator*=(double c);

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Mat operator+(Mat a, const Mat& b);
Mat operator-(const Mat& a, const Mat& b);
Mat operator*(double c, Mat a);
Mat matmul(const Mat& a, const Mat& b);

Vec matvec(const Mat& a, const Vec& x);
/// Row-vector product psi * A (costates are rows throughout).
Vec vecmat(const Vec& psi, const Mat& a);

Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scaled(const Vec& a, double c);
void axpy(double c, const Vec& x, Vec& y);
double dot(const Vec& a, const Vec& b);
double norm2(const Vec& a);
double norm_inf(const Vec& a);
bool all_finite(const Vec& a);

/// Quadratic form xᵀ A x.
double quad_form(const Mat& a, const Vec& x);

double sym_defect(const Mat& a);
Mat symmetrize(const Mat& a);

/// Solves A X = I by Gaussian elimination with partial pivoting.
/// Throws JumpError when A is numerically singular.
Mat inverse(const Mat& a);

/// Condition estimate via max/min column-scaled pivots of the elimination,
/// good enough for the reset-Jacobian health report.
double condition_estimate(const Mat& a);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
Vec jacobi_eigenvalues(const Mat& a, double tol = 1e-14, int max_sweeps = 64);

/// Frobenius norm.
double frob_norm(const Mat& a);

/// -1/+1 lexicographic comparison used by argmax/argmin tie-breaks.
bool lex_less(const Vec& a, const Vec& b);

}  // namespace optcert
