// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "minder/error.hpp"
#include "minder/lstm.hpp"  // Vec

namespace minder {

/// Dense symmetric eigensolver (cyclic Jacobi). Returns eigenvalues in
/// descending order with matching eigenvector columns. Fine for the small
/// matrices this toolkit sees (covariances of up to a few dozen features).
struct SymmetricEigen {
    Vec values;          // n, descending
    Vec vectors;         // n x n, column j is the eigenvector for values[j]
    std::size_t n = 0;

    double vec_at(std::size_t row, std::size_t col) const { return vectors[row * n + col]; }
};

inline SymmetricEigen sym_eigen(Vec a, std::size_t n) {
    if (a.size() != n * n) throw ShapeMismatch("sym_eigen: matrix size mismatch");
    SymmetricEigen out;
    out.n = n;
    out.vectors.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) out.vectors[i * n + i] = 1.0;

    auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += at(p, q) * at(p, q);
        if (off < 1e-24) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(at(p, q)) < 1e-300) continue;
                const double theta = (at(q, q) - at(p, p)) / (2.0 * at(p, q));
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = at(k, p), akq = at(k, q);
                    at(k, p) = c * akp - s * akq;
                    at(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = at(p, k), aqk = at(q, k);
                    at(p, k) = c * apk - s * aqk;
                    at(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = out.vectors[k * n + p], vkq = out.vectors[k * n + q];
                    out.vectors[k * n + p] = c * vkp - s * vkq;
                    out.vectors[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a[i * n + i];

    // Sort descending by eigenvalue, reordering vector columns with them.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return out.values[x] > out.values[y]; });
    Vec sorted_values(n);
    Vec sorted_vectors(n * n);
    for (std::size_t j = 0; j < n; ++j) {
        sorted_values[j] = out.values[order[j]];
        for (std::size_t i = 0; i < n; ++i)
            sorted_vectors[i * n + j] = out.vectors[i * n + order[j]];
    }
    out.values = std::move(sorted_values);
    out.vectors = std::move(sorted_vectors);
    return out;
}

struct PcaResult {
    std::size_t rows = 0;
    std::size_t components = 0;       // may be less than requested on rank deficiency
    Vec scores;                        // rows x components
    Vec loadings;                      // features x components
    Vec eigenvalues;                   // per retained component
    Vec column_means;                  // per original feature

    double score_at(std::size_t r, std::size_t c) const { return scores[r * components + c]; }
};

/// Project row vectors onto their top-k principal components. Columns are
/// centered first; each component's sign is fixed so its largest-magnitude
/// loading is positive. If fewer than k eigenvalues are meaningfully
/// nonzero, only the available rank is kept.
///
/// When there are more features than rows (the usual shape here: a handful
/// of machines, metrics x moments features) the eigenproblem is solved on
/// the rows x rows Gram matrix instead of the full covariance; the nonzero
/// spectrum is the same and the work drops from O(F^3) to O(M^3).
inline PcaResult pca_project(const Vec& data, std::size_t rows, std::size_t cols, std::size_t k) {
    if (data.size() != rows * cols) throw ShapeMismatch("pca_project: data size mismatch");
    if (rows < 2) throw TooFewMachines("pca_project needs >= 2 rows");
    if (k < 1 || k > std::min(rows, cols)) throw ConfigError("pca component count out of range");

    PcaResult out;
    out.rows = rows;
    out.column_means.assign(cols, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out.column_means[c] += data[r * cols + c];
    for (double& m : out.column_means) m /= static_cast<double>(rows);

    Vec centered(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
            centered[r * cols + c] = data[r * cols + c] - out.column_means[c];

    const double inv = 1.0 / static_cast<double>(rows - 1);
    const bool gram_path = cols > rows;

    SymmetricEigen eig;
    if (gram_path) {
        Vec gram(rows * rows, 0.0);
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = i; j < rows; ++j) {
                double acc = 0.0;
                for (std::size_t c = 0; c < cols; ++c)
                    acc += centered[i * cols + c] * centered[j * cols + c];
                gram[i * rows + j] = gram[j * rows + i] = acc * inv;
            }
        }
        eig = sym_eigen(std::move(gram), rows);
    } else {
        Vec cov(cols * cols, 0.0);
        for (std::size_t i = 0; i < cols; ++i) {
            for (std::size_t j = i; j < cols; ++j) {
                double acc = 0.0;
                for (std::size_t r = 0; r < rows; ++r)
                    acc += centered[r * cols + i] * centered[r * cols + j];
                cov[i * cols + j] = cov[j * cols + i] = acc * inv;
            }
        }
        eig = sym_eigen(std::move(cov), cols);
    }

    // Drop components whose eigenvalue is numerically zero (rank deficiency).
    const double scale = std::max(1e-300, eig.values.empty() ? 0.0 : std::abs(eig.values[0]));
    std::size_t rank = 0;
    while (rank < k && rank < eig.n && eig.values[rank] > 1e-12 * scale) ++rank;
    if (rank == 0) rank = 1;  // degenerate data: keep one (zero-variance) axis
    out.components = rank;

    out.loadings.assign(cols * rank, 0.0);
    out.eigenvalues.assign(rank, 0.0);
    for (std::size_t j = 0; j < rank; ++j) {
        out.eigenvalues[j] = std::max(0.0, eig.values[j]);
        Vec loading(cols, 0.0);
        if (gram_path) {
            // v = X^T u / ||X^T u||
            for (std::size_t c = 0; c < cols; ++c) {
                double acc = 0.0;
                for (std::size_t r = 0; r < rows; ++r)
                    acc += centered[r * cols + c] * eig.vec_at(r, j);
                loading[c] = acc;
            }
            double norm = 0.0;
            for (double v : loading) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 1e-300) {
                for (double& v : loading) v /= norm;
            }
        } else {
            for (std::size_t c = 0; c < cols; ++c) loading[c] = eig.vec_at(c, j);
        }
        // sign convention: largest-|loading| entry positive
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            if (std::abs(loading[c]) > best) {
                best = std::abs(loading[c]);
                arg = c;
            }
        }
        const double sign = loading[arg] < 0.0 ? -1.0 : 1.0;
        for (std::size_t c = 0; c < cols; ++c) out.loadings[c * rank + j] = sign * loading[c];
    }

    out.scores.assign(rows * rank, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < rank; ++j) {
            double acc = 0.0;
            for (std::size_t c = 0; c < cols; ++c)
                acc += centered[r * cols + c] * out.loadings[c * rank + j];
            out.scores[r * rank + j] = acc;
        }
    }
    return out;
}

}  // namespace minder
