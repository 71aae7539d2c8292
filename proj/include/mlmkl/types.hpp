#pragma once

#include <Eigen/Dense>

#include <string_view>

namespace mlmkl {

// Samples are stored row-wise: an n x d matrix holds n points of dimension d.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Warnings go through a process-wide sink so tests and the CLI can silence
// or redirect them.
using WarningSink = void (*)(std::string_view);
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace mlmkl
