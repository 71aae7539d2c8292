#include "mlmkl/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "mlmkl/error.hpp"
#include "number_text.hpp"

namespace mlmkl {

void Dataset::validate() const {
  if (features.rows() == 0) throw Error(ErrorCode::InvalidArgument, "dataset is empty");
  if (static_cast<Index>(labels.size()) != features.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "one label per image required");
  }
  if (features.size() > 0 && (features.minCoeff() < 0.0 || features.maxCoeff() > 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "pixel values must lie in [0, 1]");
  }
  for (int l : labels) {
    if (l < 0 || l > 9) throw Error(ErrorCode::InvalidArgument, "label outside 0..9");
  }
}

Dataset load_amat(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());

  std::vector<double> values;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> row;
  row.reserve(kImagePixels + 1);
  while (std::getline(in, line)) {
    ++line_no;
    row.clear();
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
      if (p == end) break;
      const char* tok = p;
      while (p < end && !std::isspace(static_cast<unsigned char>(*p))) ++p;
      const auto v = detail::parse_number(std::string_view(tok, static_cast<std::size_t>(p - tok)));
      if (!v) {
        throw Error(ErrorCode::ParseError,
                    path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                        std::string(tok, p) + "'");
      }
      row.push_back(*v);
    }
    if (row.empty()) continue;
    if (row.size() != kImagePixels + 1) {
      throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(line_no) +
                                             ": expected 785 values, got " +
                                             std::to_string(row.size()));
    }
    const double label = row.back();
    if (label != std::floor(label) || label < 0.0 || label > 9.0) {
      throw Error(ErrorCode::ParseError,
                  path.string() + ":" + std::to_string(line_no) + ": label is not an integer in 0..9");
    }
    labels.push_back(static_cast<int>(label));
    for (std::size_t k = 0; k < kImagePixels; ++k) values.push_back(std::clamp(row[k], 0.0, 1.0));
  }

  Dataset ds;
  ds.name = path.stem().string();
  const auto n = static_cast<Index>(labels.size());
  ds.features = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, kImagePixels);
  ds.labels = std::move(labels);
  ds.validate();
  return ds;
}

void write_amat(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  std::string line;
  for (Index i = 0; i < dataset.size(); ++i) {
    line.clear();
    for (Index k = 0; k < dataset.features.cols(); ++k) {
      line += detail::format_number(dataset.features(i, k));
      line += ' ';
    }
    line += detail::format_number(static_cast<double>(dataset.labels[static_cast<std::size_t>(i)]));
    line += '\n';
    out << line;
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);
  if (img.size() < 16 || read_be32(img, 0) != 0x00000803) {
    throw Error(ErrorCode::ParseError, images.string() + ": not an IDX image file");
  }
  if (lab.size() < 8 || read_be32(lab, 0) != 0x00000801) {
    throw Error(ErrorCode::ParseError, labels.string() + ": not an IDX label file");
  }
  const std::size_t n = read_be32(img, 4);
  const std::size_t rows = read_be32(img, 8);
  const std::size_t cols = read_be32(img, 12);
  if (rows * cols != kImagePixels) {
    throw Error(ErrorCode::ParseError, images.string() + ": images must be 28x28");
  }
  if (read_be32(lab, 4) != n) throw Error(ErrorCode::ParseError, "image and label counts differ");
  if (img.size() < 16 + n * kImagePixels || lab.size() < 8 + n) {
    throw Error(ErrorCode::ParseError, "IDX payload truncated");
  }

  Dataset ds;
  ds.name = images.stem().string();
  ds.features.resize(static_cast<Index>(n), kImagePixels);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kImagePixels; ++k) {
      ds.features(static_cast<Index>(i), static_cast<Index>(k)) = img[16 + i * kImagePixels + k] / 255.0;
    }
    ds.labels[i] = lab[8 + i];
  }
  ds.validate();
  return ds;
}

Dataset subset(const Dataset& dataset, std::span<const Index> indices) {
  Dataset out;
  out.name = dataset.name;
  out.features.resize(static_cast<Index>(indices.size()), dataset.features.cols());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    out.features.row(static_cast<Index>(r)) = dataset.features.row(indices[r]);
    out.labels.push_back(dataset.labels[static_cast<std::size_t>(indices[r])]);
  }
  return out;
}

std::vector<Index> seeded_permutation(Index n, std::uint64_t seed) {
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto range = static_cast<std::uint64_t>(i) + 1;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % range;
    std::uint64_t draw = rng();
    while (draw >= limit) draw = rng();
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(draw % range)]);
  }
  return perm;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, Index n_train, Index n_valid,
                                  std::uint64_t seed) {
  if (n_train < 0 || n_valid < 0 || n_train + n_valid > dataset.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "split of " + std::to_string(n_train) + "+" + std::to_string(n_valid) +
                    " exceeds dataset size " + std::to_string(dataset.size()));
  }
  const auto perm = seeded_permutation(dataset.size(), seed);
  const std::span<const Index> all(perm);
  return {subset(dataset, all.subspan(0, static_cast<std::size_t>(n_train))),
          subset(dataset, all.subspan(static_cast<std::size_t>(n_train), static_cast<std::size_t>(n_valid)))};
}

std::string fingerprint(const Matrix& features, std::span<const int> labels) {
  uLong crc = crc32(0L, Z_NULL, 0);
  const std::array<std::int64_t, 2> shape{features.rows(), features.cols()};
  crc = crc32(crc, reinterpret_cast<const Bytef*>(shape.data()), sizeof(shape));
  crc = crc32(crc, reinterpret_cast<const Bytef*>(features.data()),
              static_cast<uInt>(features.size() * sizeof(double)));
  crc = crc32(crc, reinterpret_cast<const Bytef*>(labels.data()),
              static_cast<uInt>(labels.size() * sizeof(int)));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

}  // namespace mlmkl
