// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "midibpe/error.hpp"

namespace midibpe {

// Row-major V x d matrix of float32 embeddings (one row per token).
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols, std::vector<float> values)
      : rows_(rows), cols_(cols), values_(std::move(values)) {
    if (values_.size() != rows_ * cols_) throw PreconditionError("embedding value count does not match rows x cols");
  }

  static EmbeddingMatrix from_eigen(const Eigen::MatrixXd& m) {
    std::vector<float> v(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        v[static_cast<std::size_t>(i * m.cols() + j)] = static_cast<float>(m(i, j));
      }
    }
    return EmbeddingMatrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), std::move(v));
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::span<const float> values() const { return values_; }
  float operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

  Eigen::MatrixXd to_eigen() const {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows_), static_cast<Eigen::Index>(cols_));
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(i, j);
    }
    return m;
  }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

namespace detail {

inline void require_shape(const Eigen::MatrixXd& m) {
  if (m.rows() < 2 || m.cols() < 2) throw PreconditionError("need at least 2 points in at least 2 dimensions");
  if (!m.allFinite()) throw PreconditionError("embedding contains non-finite values");
}

inline Eigen::MatrixXd centered(const Eigen::MatrixXd& m) { return m.rowwise() - m.colwise().mean(); }

// Eigenvalues of the sample covariance of the rows, descending.
inline Eigen::VectorXd covariance_spectrum(const Eigen::MatrixXd& points) {
  const Eigen::MatrixXd x = centered(points);
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(points.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
  Eigen::VectorXd ev = solver.eigenvalues().reverse();
  return ev.cwiseMax(0.0);
}

}  // namespace detail

// Singular values of the matrix divided by the largest, descending.
inline std::vector<double> singular_spectrum(const Eigen::MatrixXd& matrix) {
  detail::require_shape(matrix);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix);
  const Eigen::VectorXd s = svd.singularValues();
  if (s.size() == 0 || s(0) <= 0.0) throw DataError("degenerate spectrum: the matrix is zero");
  std::vector<double> out(static_cast<std::size_t>(s.size()));
  for (Eigen::Index i = 0; i < s.size(); ++i) out[static_cast<std::size_t>(i)] = s(i) / s(0);
  return out;
}

inline std::vector<double> singular_spectrum(const EmbeddingMatrix& m) { return singular_spectrum(m.to_eigen()); }

// IsoScore of a point cloud (rows are points), in [0, 1].
inline double isoscore(const Eigen::MatrixXd& points) {
  detail::require_shape(points);
  const auto d = static_cast<double>(points.cols());

  // Reorient by PCA and take the per-axis variance of the new coordinates.
  const Eigen::MatrixXd x = detail::centered(points);
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(points.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  const Eigen::MatrixXd reoriented = x * solver.eigenvectors();
  const Eigen::VectorXd variance =
      reoriented.colwise().squaredNorm().transpose() / static_cast<double>(points.rows() - 1);

  const double norm = variance.norm();
  if (!(norm > 0.0)) throw DataError("isoscore is undefined for zero total variance");
  const Eigen::VectorXd normalized = std::sqrt(d) * variance / norm;
  const double defect = (normalized - Eigen::VectorXd::Ones(points.cols())).norm() / std::sqrt(2.0 * (d - std::sqrt(d)));
  const double fraction = std::pow(d - defect * defect * (d - std::sqrt(d)), 2) / (d * d);
  const double score = (d * fraction - 1.0) / (d - 1.0);
  return std::clamp(score, 0.0, 1.0);
}

inline double isoscore(const EmbeddingMatrix& m) { return isoscore(m.to_eigen()); }

// Number of covariance eigenvalues at least ratio_threshold times the largest.
inline int pca_intrinsic_dim(const Eigen::MatrixXd& points, double ratio_threshold = 0.05) {
  detail::require_shape(points);
  const Eigen::VectorXd ev = detail::covariance_spectrum(points);
  const double largest = ev(0);
  if (!(largest > 0.0)) throw DataError("intrinsic dimension is undefined for identical points");
  int n = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev(i) >= ratio_threshold * largest) ++n;
  }
  return n;
}

inline int pca_intrinsic_dim(const EmbeddingMatrix& m, double ratio_threshold = 0.05) {
  return pca_intrinsic_dim(m.to_eigen(), ratio_threshold);
}

// ---------------------------------------------------------------------------
// EMB1 binary format: "EMB1", rows (u32 LE), cols (u32 LE), then row-major
// float32 LE values.

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}
inline std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | in[at + static_cast<std::size_t>(i)];
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> save_embeddings(const EmbeddingMatrix& m) {
  if (m.rows() > 0xFFFFFFFFu || m.cols() > 0xFFFFFFFFu) throw PreconditionError("matrix too large for EMB1");
  std::vector<std::uint8_t> out{'E', 'M', 'B', '1'};
  out.reserve(12 + 4 * m.values().size());
  detail::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (float f : m.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline EmbeddingMatrix load_embeddings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "EMB1", 4) != 0) throw ParseError("bad magic: expected EMB1", 0);
  if (bytes.size() < 12) throw ParseError("truncated EMB1 header", bytes.size());
  const std::uint64_t rows = detail::get_u32(bytes, 4);
  const std::uint64_t cols = detail::get_u32(bytes, 8);
  const std::uint64_t expected = 12 + 4 * rows * cols;
  if (bytes.size() != expected) {
    throw ParseError("EMB1 size mismatch: header announces " + std::to_string(rows) + "x" + std::to_string(cols) +
                         " values but the payload holds " + std::to_string(bytes.size() - 12) + " bytes",
                     std::min<std::size_t>(bytes.size(), static_cast<std::size_t>(std::min<std::uint64_t>(expected, SIZE_MAX))));
  }
  std::vector<float> values(static_cast<std::size_t>(rows * cols));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(detail::get_u32(bytes, 12 + 4 * i));
    if (!std::isfinite(values[i])) throw ParseError("non-finite value in EMB1 payload", 12 + 4 * i);
  }
  return EmbeddingMatrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols), std::move(values));
}

}  // namespace midibpe
