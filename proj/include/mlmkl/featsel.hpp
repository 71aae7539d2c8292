#pragma once

#include <span>
#include <vector>

#include "mlmkl/types.hpp"

namespace mlmkl {

struct FeatureRanking {
  Vector scores;
  std::vector<Index> order;     // descending score, ties to smaller index
  std::vector<Index> selected;  // prefix of order
};

/// One-way ANOVA F statistic per feature column. Zero within-class spread with
/// nonzero between-class spread scores +infinity; no spread at all scores 0.
Vector anova_f_scores(const Matrix& features, std::span<const int> labels);

FeatureRanking rank_features(const Vector& scores, Index width);

struct Selection {
  FeatureRanking ranking;
  Matrix reduced;  // n x width, columns in rank order
};

Selection select_features(const Matrix& features, std::span<const int> labels, Index width);

/// Columns of `features` listed in `indices`, in that order.
Matrix take_columns(const Matrix& features, std::span<const Index> indices);

}  // namespace mlmkl
