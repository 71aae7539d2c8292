// Model container:
//   "MLMKLMDL" | u32 version | u64 total size | u32 header length | header text
//   | binary payload | u32 CRC32 of everything before it
// All integers little-endian; doubles stored as their IEEE-754 bits.

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mlmkl/error.hpp"
#include "mlmkl/pipeline.hpp"
#include "number_text.hpp"

static_assert(std::endian::native == std::endian::little, "model I/O assumes a little-endian host");

namespace mlmkl {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'M', 'K', 'L', 'M', 'D', 'L'};
constexpr std::size_t kPreamble = 8 + 4 + 8 + 4;

class Writer {
 public:
  template <typename T>
  void pod(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void raw(const void* data, std::size_t size) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes_.insert(bytes_.end(), p, p + size);
  }
  void text(const std::string& s) {
    pod<std::uint64_t>(s.size());
    raw(s.data(), s.size());
  }
  void matrix(const Matrix& m) {
    pod<std::int64_t>(m.rows());
    pod<std::int64_t>(m.cols());
    raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  }
  void vector(const Vector& v) {
    pod<std::int64_t>(v.size());
    raw(v.data(), static_cast<std::size_t>(v.size()) * sizeof(double));
  }
  void indices(const std::vector<Index>& v) {
    pod<std::uint64_t>(v.size());
    for (Index i : v) pod<std::int64_t>(i);
  }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T pod() {
    T value;
    std::memcpy(&value, take(sizeof(T)), sizeof(T));
    return value;
  }
  std::string text() {
    const auto size = count(1);
    const auto* p = take(size);
    return std::string(reinterpret_cast<const char*>(p), size);
  }
  Matrix matrix() {
    const auto rows = pod<std::int64_t>();
    const auto cols = pod<std::int64_t>();
    if (rows < 0 || cols < 0) corrupt();
    Matrix m(rows, cols);
    const auto size = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * sizeof(double);
    std::memcpy(m.data(), take(size), size);
    return m;
  }
  Vector vector() {
    const auto size = pod<std::int64_t>();
    if (size < 0) corrupt();
    Vector v(size);
    std::memcpy(v.data(), take(static_cast<std::size_t>(size) * sizeof(double)),
                static_cast<std::size_t>(size) * sizeof(double));
    return v;
  }
  std::vector<Index> indices() {
    std::vector<Index> v(count(sizeof(std::int64_t)));
    for (auto& i : v) i = pod<std::int64_t>();
    return v;
  }
  // Element count guarded against the remaining bytes.
  std::size_t count(std::size_t element_size) {
    const auto n = pod<std::uint64_t>();
    if (n > remaining() / element_size) corrupt();
    return static_cast<std::size_t>(n);
  }
  std::size_t remaining() const { return bytes_.size() - offset_; }

  [[noreturn]] static void corrupt() {
    throw Error(ErrorCode::ParseError, "model payload is inconsistent");
  }

 private:
  const std::uint8_t* take(std::size_t size) {
    if (size > remaining()) corrupt();
    const auto* p = bytes_.data() + offset_;
    offset_ += size;
    return p;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t offset_ = 0;
};

std::uint32_t checksum(const std::uint8_t* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, data, static_cast<uInt>(size)));
}

std::string header_text(const MlmklModel& model) {
  std::ostringstream h;
  h << "mlmkl model\n";
  h << "format-version: " << kModelFormatVersion << "\n";
  h << "layers: " << model.layers.size() << "\n";
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    h << "layer " << l + 1 << " kernels:";
    for (const auto& spec : layer.kernel_specs) h << ' ' << spec.to_string();
    h << "\nlayer " << l + 1 << " weights:";
    for (Index t = 0; t < layer.mu.size(); ++t) h << ' ' << detail::format_number(layer.mu[t]);
    h << "\nlayer " << l + 1 << " width: " << layer.width() << "\n";
  }
  h << "classifier: " << model.classifier.spec.to_string()
    << " C=" << detail::format_number(model.classifier.C) << "\n";
  h << "seed: " << model.metadata.seed << "\n";
  h << "subsample: " << model.metadata.subsample << "\n";
  h << "dataset: " << model.metadata.dataset_fingerprint << "\n";
  h << "config: " << model.metadata.config << "\n";
  return h.str();
}

void write_layer(Writer& w, const LayerModel& layer) {
  w.pod<std::uint64_t>(layer.kernel_specs.size());
  for (const auto& spec : layer.kernel_specs) w.text(spec.to_string());
  w.vector(layer.mu.values());
  w.matrix(layer.kpca.alphas);
  w.vector(layer.kpca.eigenvalues);
  w.vector(layer.kpca.row_means);
  w.pod<double>(layer.kpca.total_mean);
  w.pod<std::int64_t>(layer.kpca.n_fit);
  w.indices(layer.selected);
  w.matrix(layer.fit_samples);
}

LayerModel read_layer(Reader& r) {
  LayerModel layer;
  const auto m = r.count(8);
  for (std::size_t t = 0; t < m; ++t) layer.kernel_specs.push_back(KernelSpec::parse(r.text()));
  layer.mu = KernelWeights(r.vector());
  layer.kpca.alphas = r.matrix();
  layer.kpca.eigenvalues = r.vector();
  layer.kpca.row_means = r.vector();
  layer.kpca.total_mean = r.pod<double>();
  layer.kpca.n_fit = r.pod<std::int64_t>();
  layer.selected = r.indices();
  layer.fit_samples = r.matrix();

  const Index n_fit = layer.kpca.n_fit;
  if (layer.mu.size() != static_cast<Index>(m) || layer.kpca.alphas.rows() != n_fit ||
      layer.kpca.row_means.size() != n_fit || layer.fit_samples.rows() != n_fit ||
      layer.kpca.eigenvalues.size() != layer.kpca.alphas.cols()) {
    Reader::corrupt();
  }
  for (Index s : layer.selected) {
    if (s < 0 || s >= layer.kpca.components()) Reader::corrupt();
  }
  return layer;
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const MlmklModel& model) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kModelFormatVersion);
  w.pod<std::uint64_t>(0);  // total size, patched below
  const std::string header = header_text(model);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(header.size()));
  w.raw(header.data(), header.size());

  w.text(model.metadata.config);
  w.text(model.metadata.dataset_fingerprint);
  w.pod<std::uint64_t>(model.metadata.seed);
  w.pod<std::int64_t>(model.metadata.subsample);

  w.pod<std::uint64_t>(model.layers.size());
  for (const auto& layer : model.layers) write_layer(w, layer);

  const SvmModel& svm = model.classifier;
  w.text(svm.spec.to_string());
  w.pod<double>(svm.C);
  w.pod<std::uint64_t>(svm.classes.size());
  for (int c : svm.classes) w.pod<std::int32_t>(c);
  w.indices(svm.support_indices);
  w.matrix(svm.support_vectors);
  w.matrix(svm.coefficients);
  w.vector(svm.biases);

  auto& bytes = w.bytes();
  const std::uint64_t total = bytes.size() + sizeof(std::uint32_t);
  std::memcpy(bytes.data() + 12, &total, sizeof(total));
  const std::uint32_t crc = checksum(bytes.data(), bytes.size());
  w.pod<std::uint32_t>(crc);
  return std::move(bytes);
}

MlmklModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kPreamble + sizeof(std::uint32_t)) {
    throw Error(ErrorCode::Truncated, "model file too short");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::BadMagic, "not an mlmkl model file");
  }
  std::uint32_t version = 0;
  std::uint64_t total = 0;
  std::memcpy(&version, bytes.data() + 8, sizeof(version));
  std::memcpy(&total, bytes.data() + 12, sizeof(total));
  if (version != kModelFormatVersion) {
    throw Error(ErrorCode::UnsupportedVersion, "model format version " + std::to_string(version) +
                                                   ", this build reads " +
                                                   std::to_string(kModelFormatVersion));
  }
  if (total > bytes.size()) {
    throw Error(ErrorCode::Truncated, "model file has " + std::to_string(bytes.size()) +
                                          " of " + std::to_string(total) + " bytes");
  }
  if (total < bytes.size()) throw Error(ErrorCode::ChecksumMismatch, "trailing bytes after model");
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - sizeof(stored), sizeof(stored));
  if (stored != checksum(bytes.data(), bytes.size() - sizeof(stored))) {
    throw Error(ErrorCode::ChecksumMismatch, "model checksum does not match");
  }

  const std::size_t body = kPreamble - sizeof(std::uint32_t);
  Reader r(bytes.subspan(body, bytes.size() - body));
  const auto header_len = r.pod<std::uint32_t>();
  if (header_len > r.remaining()) Reader::corrupt();
  for (std::uint32_t i = 0; i < header_len; ++i) r.pod<std::uint8_t>();

  MlmklModel model;
  model.metadata.config = r.text();
  model.metadata.dataset_fingerprint = r.text();
  model.metadata.seed = r.pod<std::uint64_t>();
  model.metadata.subsample = r.pod<std::int64_t>();

  const auto n_layers = r.count(8);
  for (std::size_t l = 0; l < n_layers; ++l) {
    model.layers.push_back(read_layer(r));
    if (l > 0 && model.layers[l].input_dim() != model.layers[l - 1].width()) Reader::corrupt();
  }

  SvmModel& svm = model.classifier;
  svm.spec = KernelSpec::parse(r.text());
  svm.C = r.pod<double>();
  const auto n_classes = r.count(4);
  for (std::size_t c = 0; c < n_classes; ++c) svm.classes.push_back(r.pod<std::int32_t>());
  svm.support_indices = r.indices();
  svm.support_vectors = r.matrix();
  svm.coefficients = r.matrix();
  svm.biases = r.vector();
  if (svm.support_vectors.rows() != svm.n_support() || svm.coefficients.rows() != svm.n_support() ||
      svm.coefficients.cols() != static_cast<Index>(n_classes) ||
      svm.biases.size() != static_cast<Index>(n_classes) || r.remaining() != sizeof(std::uint32_t)) {
    Reader::corrupt();
  }
  return model;
}

void save_model(const MlmklModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

MlmklModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  return deserialize_model(bytes);
}

}  // namespace mlmkl
