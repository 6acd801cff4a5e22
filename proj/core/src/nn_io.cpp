#include <cmath>
#include <fstream>
#include <vector>

#include "arraysel/nn.hpp"
#include "binary_io.hpp"

namespace arraysel {

namespace {

constexpr char kModelMagic[5] = "SANN";
constexpr std::uint16_t kModelVersion = 1;

std::uint32_t rate_ppm(double rate) { return static_cast<std::uint32_t>(std::lround(rate * 1e6)); }

std::vector<std::uint32_t> layer_dims(const Layer& l) {
  const auto u = [](int v) { return static_cast<std::uint32_t>(v); };
  switch (l.spec.kind) {
    case LayerKind::input:
      return {u(l.spec.input_shape.channels), u(l.spec.input_shape.height), u(l.spec.input_shape.width)};
    case LayerKind::conv2d:
      return {u(l.spec.units), u(l.in.channels), u(l.spec.kernel_h), u(l.spec.kernel_w), l.spec.same_padding ? 1u : 0u};
    case LayerKind::relu:
      return {};
    case LayerKind::fully_connected:
      return {u(l.spec.units), static_cast<std::uint32_t>(l.in.size()), rate_ppm(l.spec.dropout)};
    case LayerKind::dropout:
      return {rate_ppm(l.spec.dropout)};
    case LayerKind::softmax:
      return {u(l.spec.units), static_cast<std::uint32_t>(l.in.size())};
    case LayerKind::classification_output:
      return {u(l.spec.units)};
  }
  return {};
}

void expect_dims(const std::vector<std::uint32_t>& dims, std::size_t n, LayerKind kind) {
  if (dims.size() != n) throw FormatError("unexpected dimension count for " + to_string(kind) + " layer");
}

LayerSpec spec_from_dims(LayerKind kind, const std::vector<std::uint32_t>& d) {
  const auto i = [](std::uint32_t v) { return static_cast<int>(v); };
  switch (kind) {
    case LayerKind::input:
      expect_dims(d, 3, kind);
      return LayerSpec::input(i(d[1]), i(d[2]), i(d[0]));
    case LayerKind::conv2d:
      expect_dims(d, 5, kind);
      return LayerSpec::conv2d(i(d[0]), i(d[2]), i(d[3]), d[4] != 0);
    case LayerKind::relu:
      expect_dims(d, 0, kind);
      return LayerSpec::relu();
    case LayerKind::fully_connected:
      expect_dims(d, 3, kind);
      return LayerSpec::fully_connected(i(d[0]), d[2] / 1e6);
    case LayerKind::dropout:
      expect_dims(d, 1, kind);
      return LayerSpec::dropout_layer(d[0] / 1e6);
    case LayerKind::softmax:
      expect_dims(d, 2, kind);
      return LayerSpec::softmax(i(d[0]));
    case LayerKind::classification_output:
      expect_dims(d, 1, kind);
      return LayerSpec::classification_output(i(d[0]));
  }
  throw FormatError("unknown layer kind");
}

// Weighted layers store their fan-in alongside the output count; check it
// against the rebuilt chain.
std::size_t stored_fan_in(LayerKind kind, const std::vector<std::uint32_t>& d) {
  switch (kind) {
    case LayerKind::conv2d: return static_cast<std::size_t>(d[1]) * d[2] * d[3];
    case LayerKind::fully_connected:
    case LayerKind::softmax: return d[1];
    default: return 0;
  }
}

}  // namespace

void write_model(std::ostream& out, const NetworkModel& model) {
  using detail::write_le;
  out.write(kModelMagic, 4);
  write_le<std::uint16_t>(out, kModelVersion);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(model.layer_count()));
  for (const Layer& l : model.layers()) {
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.spec.kind));
    const auto dims = layer_dims(l);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
    for (std::uint32_t v : dims) write_le<std::uint32_t>(out, v);
    write_le<std::uint8_t>(out, l.frozen ? 1 : 0);
    for (double w : l.weights) write_le<float>(out, static_cast<float>(w));
    for (double b : l.bias) write_le<float>(out, static_cast<float>(b));
  }
  if (!out) throw IoError("failed writing model checkpoint");
}

NetworkModel read_model(std::istream& in) {
  using detail::read_le;
  detail::expect_magic(in, kModelMagic);
  const auto version = read_le<std::uint16_t>(in, "version");
  if (version != kModelVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto count = read_le<std::uint16_t>(in, "layer count");
  std::vector<Layer> layers;
  Shape shape;
  for (std::uint16_t n = 0; n < count; ++n) {
    const auto raw_kind = read_le<std::uint8_t>(in, "layer kind");
    if (raw_kind > static_cast<std::uint8_t>(LayerKind::classification_output))
      throw FormatError("unknown layer kind code " + std::to_string(raw_kind));
    const auto kind = static_cast<LayerKind>(raw_kind);
    const auto ndims = read_le<std::uint32_t>(in, "dimension count");
    if (ndims > 8) throw FormatError("implausible dimension count");
    std::vector<std::uint32_t> dims(ndims);
    for (auto& d : dims) d = read_le<std::uint32_t>(in, "layer dimension");
    Layer l;
    try {
      l.spec = spec_from_dims(kind, dims);
    } catch (const std::invalid_argument& e) {
      throw FormatError(std::string("invalid layer record: ") + e.what());
    }
    l.frozen = read_le<std::uint8_t>(in, "frozen flag") != 0;
    l.in = shape;
    std::size_t rows = 0;
    std::size_t fan_in = 0;
    if (kind == LayerKind::conv2d) {
      if (static_cast<int>(dims[1]) != shape.channels) throw FormatError("conv input channels do not match the chain");
      rows = dims[0];
      fan_in = stored_fan_in(kind, dims);
    } else if (kind == LayerKind::fully_connected || kind == LayerKind::softmax) {
      if (dims[1] != shape.size()) throw FormatError("dense fan-in does not match the chain");
      rows = dims[0];
      fan_in = stored_fan_in(kind, dims);
    }
    l.weights.resize(rows * fan_in);
    l.bias.resize(rows);
    for (double& w : l.weights) w = read_le<float>(in, "weights");
    for (double& b : l.bias) b = read_le<float>(in, "biases");
    // Chain shape for the next record; from_layers re-derives and validates.
    if (kind == LayerKind::input) shape = l.spec.input_shape;
    else if (kind == LayerKind::conv2d)
      shape = {l.spec.units, l.spec.same_padding ? shape.height : shape.height - l.spec.kernel_h + 1,
               l.spec.same_padding ? shape.width : shape.width - l.spec.kernel_w + 1};
    else if (kind == LayerKind::fully_connected || kind == LayerKind::softmax) shape = {l.spec.units, 1, 1};
    layers.push_back(std::move(l));
  }
  try {
    // Checkpoints are only written for models worth reusing; treat them as trained.
    return NetworkModel::from_layers(std::move(layers), true);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid layer stack: ") + e.what());
  }
}

void save_model(const NetworkModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_model(out, model);
}

NetworkModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_model(in);
}

}  // namespace arraysel
