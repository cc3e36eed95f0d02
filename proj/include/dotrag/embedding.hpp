#pragma once

#include <Eigen/Core>

#include "dotrag/common.hpp"

namespace dotrag {

template <typename Scalar>
using EmbeddingT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Embedding = EmbeddingT<double>;

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Cosine similarity dot(a, b) / (|a| |b|). Callers guarantee non-zero norms.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionError("cosine_similarity: dimension " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
  }
  return a.dot(b) / (a.norm() * b.norm());
}

}  // namespace dotrag
