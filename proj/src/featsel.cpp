#include "mlmkl/featsel.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <numeric>

#include "mlmkl/error.hpp"

namespace mlmkl {

Vector anova_f_scores(const Matrix& features, std::span<const int> labels) {
  const Index n = features.rows();
  if (static_cast<Index>(labels.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "one label per sample required");
  }
  // Class ids in ascending order mapped to dense slots.
  std::map<int, Index> slot;
  for (int label : labels) slot.emplace(label, 0);
  if (slot.size() < 2) throw Error(ErrorCode::DegenerateLabels, "at least two classes required");
  Index next = 0;
  for (auto& [label, s] : slot) s = next++;
  const Index k = next;

  std::vector<Index> counts(static_cast<std::size_t>(k), 0);
  std::vector<Index> assignment(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    assignment[static_cast<std::size_t>(i)] = slot[labels[static_cast<std::size_t>(i)]];
    ++counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])];
  }

  const double df_between = static_cast<double>(k - 1);
  const double df_within = static_cast<double>(n - k);
  Vector scores(features.cols());
  Vector class_mean(k);
  for (Index f = 0; f < features.cols(); ++f) {
    const auto column = features.col(f);
    const double grand = column.mean();
    class_mean.setZero();
    for (Index i = 0; i < n; ++i) class_mean(assignment[static_cast<std::size_t>(i)]) += column(i);
    for (Index c = 0; c < k; ++c) class_mean(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);

    double between = 0.0;
    for (Index c = 0; c < k; ++c) {
      const double d = class_mean(c) - grand;
      between += static_cast<double>(counts[static_cast<std::size_t>(c)]) * d * d;
    }
    double within = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double d = column(i) - class_mean(assignment[static_cast<std::size_t>(i)]);
      within += d * d;
    }
    const double total = between + within;
    if (total <= 0.0) {
      scores(f) = 0.0;
    } else if (within <= 1e-12 * total || df_within <= 0.0) {
      scores(f) = std::numeric_limits<double>::infinity();
    } else {
      scores(f) = (between / df_between) / (within / df_within);
    }
  }
  return scores;
}

FeatureRanking rank_features(const Vector& scores, Index width) {
  const Index d = scores.size();
  if (width < 1 || width > d) {
    throw Error(ErrorCode::InvalidArgument,
                "width " + std::to_string(width) + " outside [1, " + std::to_string(d) + "]");
  }
  FeatureRanking ranking;
  ranking.scores = scores;
  ranking.order.resize(static_cast<std::size_t>(d));
  std::iota(ranking.order.begin(), ranking.order.end(), Index{0});
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](Index a, Index b) { return scores(a) > scores(b); });
  ranking.selected.assign(ranking.order.begin(), ranking.order.begin() + width);
  return ranking;
}

Selection select_features(const Matrix& features, std::span<const int> labels, Index width) {
  Selection out;
  out.ranking = rank_features(anova_f_scores(features, labels), width);
  out.reduced = take_columns(features, out.ranking.selected);
  return out;
}

Matrix take_columns(const Matrix& features, std::span<const Index> indices) {
  Matrix out(features.rows(), static_cast<Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    if (indices[c] < 0 || indices[c] >= features.cols()) {
      throw Error(ErrorCode::ShapeError, "feature index out of range");
    }
    out.col(static_cast<Index>(c)) = features.col(indices[c]);
  }
  return out;
}

}  // namespace mlmkl
