#include "arraysel/nn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

namespace arraysel {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// Samples per gradient partial. Partials are reduced in a fixed order so the
// update does not depend on the worker count.
constexpr int kGradientChunks = 8;
// Above this many parameters the per-chunk gradient buffers cost too much memory.
constexpr std::size_t kChunkedParamLimit = 4'000'000;

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

int pad_h(const LayerSpec& s) { return s.same_padding ? (s.kernel_h - 1) / 2 : 0; }
int pad_w(const LayerSpec& s) { return s.same_padding ? (s.kernel_w - 1) / 2 : 0; }

bool is_dense(LayerKind k) { return k == LayerKind::fully_connected || k == LayerKind::softmax; }

Shape infer_shape(const LayerSpec& spec, const Shape& in) {
  switch (spec.kind) {
    case LayerKind::input:
      return spec.input_shape;
    case LayerKind::conv2d: {
      if (spec.units < 1 || spec.kernel_h < 1 || spec.kernel_w < 1)
        throw std::invalid_argument("conv2d needs positive filters and kernel size");
      if (spec.same_padding && (spec.kernel_h % 2 == 0 || spec.kernel_w % 2 == 0))
        throw std::invalid_argument("same padding requires odd kernel sizes");
      const int h = spec.same_padding ? in.height : in.height - spec.kernel_h + 1;
      const int w = spec.same_padding ? in.width : in.width - spec.kernel_w + 1;
      if (h < 1 || w < 1) throw std::invalid_argument("conv2d kernel larger than its input");
      return {spec.units, h, w};
    }
    case LayerKind::relu:
    case LayerKind::dropout:
      return in;
    case LayerKind::fully_connected:
    case LayerKind::softmax:
      if (spec.units < 1) throw std::invalid_argument("dense layer needs at least one unit");
      return {spec.units, 1, 1};
    case LayerKind::classification_output:
      if (spec.units != static_cast<int>(in.size()))
        throw std::invalid_argument("classification output width differs from the softmax width");
      return in;
  }
  throw std::invalid_argument("unknown layer kind");
}

void he_init(Layer& layer, std::mt19937_64& rng) {
  const std::size_t fan_in = layer.fan_in();
  const std::size_t rows = layer.spec.kind == LayerKind::conv2d ? static_cast<std::size_t>(layer.spec.units)
                                                                 : static_cast<std::size_t>(layer.out.size());
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  layer.weights.resize(rows * fan_in);
  for (double& w : layer.weights) w = to_float(dist(rng));
  layer.bias.assign(rows, 0.0);
}

void validate_stack(const std::vector<Layer>& layers) {
  if (layers.empty()) return;
  if (layers.size() < 3) throw std::invalid_argument("layer stack too short");
  if (layers.front().spec.kind != LayerKind::input) throw std::invalid_argument("stack must begin with an Input layer");
  if (layers.back().spec.kind != LayerKind::classification_output)
    throw std::invalid_argument("stack must end with a ClassificationOutput layer");
  if (layers[layers.size() - 2].spec.kind != LayerKind::softmax)
    throw std::invalid_argument("ClassificationOutput must follow a Softmax layer");
  for (std::size_t i = 1; i + 2 < layers.size(); ++i) {
    const LayerKind k = layers[i].spec.kind;
    if (k == LayerKind::input || k == LayerKind::softmax || k == LayerKind::classification_output)
      throw std::invalid_argument("Input/Softmax/ClassificationOutput may only appear at the ends of the stack");
  }
  for (const Layer& l : layers) {
    if (l.spec.dropout < 0.0 || l.spec.dropout >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
    if (l.spec.kind == LayerKind::input) continue;
    if (l.has_weights() != (l.spec.kind == LayerKind::conv2d || is_dense(l.spec.kind)))
      throw std::invalid_argument("weights present on a weightless layer or missing on a weighted one");
  }
}

// im2col for one (C, H, W) activation: rows are (c, ki, kj), columns output pixels.
void im2col(const double* in, const Shape& s, const LayerSpec& spec, int out_h, int out_w, RowMat& cols) {
  const int kh = spec.kernel_h, kw = spec.kernel_w, ph = pad_h(spec), pw = pad_w(spec);
  cols.resize(static_cast<Eigen::Index>(s.channels) * kh * kw, static_cast<Eigen::Index>(out_h) * out_w);
  for (int c = 0; c < s.channels; ++c) {
    const double* plane = in + static_cast<std::size_t>(c) * s.height * s.width;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        double* row = cols.row((c * kh + ki) * kw + kj).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy + ki - ph;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox + kj - pw;
            row[oy * out_w + ox] = (iy >= 0 && iy < s.height && ix >= 0 && ix < s.width) ? plane[iy * s.width + ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im(const RowMat& cols, const Shape& s, const LayerSpec& spec, int out_h, int out_w, double* out) {
  const int kh = spec.kernel_h, kw = spec.kernel_w, ph = pad_h(spec), pw = pad_w(spec);
  std::fill(out, out + s.size(), 0.0);
  for (int c = 0; c < s.channels; ++c) {
    double* plane = out + static_cast<std::size_t>(c) * s.height * s.width;
    for (int ki = 0; ki < kh; ++ki) {
      for (int kj = 0; kj < kw; ++kj) {
        const double* row = cols.row((c * kh + ki) * kw + kj).data();
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy + ki - ph;
          if (iy < 0 || iy >= s.height) continue;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox + kj - pw;
            if (ix >= 0 && ix < s.width) plane[iy * s.width + ix] += row[oy * out_w + ox];
          }
        }
      }
    }
  }
}

struct Workspace {
  std::vector<Vec> acts;    // acts[i] = output of layer i
  std::vector<RowMat> cols; // conv layers only
  std::vector<Vec> masks;   // dropout scale factors (train mode)
  std::vector<bool> masked;
  Vec grad;
  Vec grad_next;
  RowMat dcols;

  explicit Workspace(std::size_t layers) : acts(layers), cols(layers), masks(layers), masked(layers, false) {}
};

struct GradBuffers {
  std::vector<Vec> dw;
  std::vector<Vec> db;
  double loss = 0.0;

  void reset(std::span<const Layer> layers) {
    dw.resize(layers.size());
    db.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (!layers[i].has_weights() || layers[i].frozen) {
        dw[i].resize(0);
        db[i].resize(0);
        continue;
      }
      dw[i].setZero(static_cast<Eigen::Index>(layers[i].weights.size()));
      db[i].setZero(static_cast<Eigen::Index>(layers[i].bias.size()));
    }
    loss = 0.0;
  }
};

void apply_dropout(Workspace& ws, std::size_t i, double rate, std::mt19937_64* rng) {
  if (rng == nullptr || rate <= 0.0) {
    ws.masked[i] = false;
    return;
  }
  Vec& mask = ws.masks[i];
  mask.resize(ws.acts[i].size());
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index j = 0; j < mask.size(); ++j) mask[j] = keep(*rng) ? scale : 0.0;
  ws.acts[i].array() *= mask.array();
  ws.masked[i] = true;
}

// Fills ws.acts; returns the probability vector (last activation).
const Vec& forward_pass(const NetworkModel& model, std::span<const double> x, std::mt19937_64* rng, Workspace& ws) {
  const auto layers = model.layers();
  if (x.size() != model.input_shape().size()) throw std::invalid_argument("input size does not match the model input shape");
  ws.acts[0] = Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 1; i < layers.size(); ++i) {
    const Layer& L = layers[i];
    const Vec& in = ws.acts[i - 1];
    Vec& out = ws.acts[i];
    switch (L.spec.kind) {
      case LayerKind::conv2d: {
        im2col(in.data(), L.in, L.spec, L.out.height, L.out.width, ws.cols[i]);
        const Eigen::Index f = L.spec.units;
        Eigen::Map<const RowMat> w(L.weights.data(), f, ws.cols[i].rows());
        out.resize(static_cast<Eigen::Index>(L.out.size()));
        Eigen::Map<RowMat> o(out.data(), f, ws.cols[i].cols());
        o.noalias() = w * ws.cols[i];
        o.colwise() += Eigen::Map<const Vec>(L.bias.data(), f);
        break;
      }
      case LayerKind::relu:
        out = in.cwiseMax(0.0);
        break;
      case LayerKind::dropout:
        out = in;
        apply_dropout(ws, i, L.spec.dropout, rng);
        break;
      case LayerKind::fully_connected:
      case LayerKind::softmax: {
        const auto rows = static_cast<Eigen::Index>(L.bias.size());
        Eigen::Map<const RowMat> w(L.weights.data(), rows, in.size());
        out.noalias() = w * in;
        out += Eigen::Map<const Vec>(L.bias.data(), rows);
        if (L.spec.kind == LayerKind::fully_connected) {
          apply_dropout(ws, i, L.spec.dropout, rng);
        } else {
          const double peak = out.maxCoeff();
          out = (out.array() - peak).exp();
          out /= out.sum();
        }
        break;
      }
      case LayerKind::classification_output:
        out = in;
        break;
      case LayerKind::input:
        break;
    }
  }
  return ws.acts.back();
}

// dL/deta for one sample under the clamped per-class binary cross-entropy.
double loss_and_logit_grad(const Vec& eta, int label, Vec& dz) {
  const Eigen::Index c = eta.size();
  Vec g(c);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < c; ++j) {
    const double p = eta[j];
    const double q = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
    const bool inside = q == p;
    if (j == label) {
      loss -= std::log(q);
      g[j] = inside ? -1.0 / q : 0.0;
    } else {
      loss -= std::log(1.0 - q);
      g[j] = inside ? 1.0 / (1.0 - q) : 0.0;
    }
  }
  // Softmax Jacobian: dz = eta .* (g - eta^T g).
  dz = eta.array() * (g.array() - eta.dot(g));
  return loss;
}

std::size_t first_trainable(std::span<const Layer> layers) {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].has_weights() && !layers[i].frozen) return i;
  return layers.size();
}

// Accumulates parameter gradients of unfrozen layers, scaled by `scale`.
void backward_pass(const NetworkModel& model, Workspace& ws, const Vec& dz, double scale, GradBuffers& grads) {
  const auto layers = model.layers();
  const std::size_t stop = first_trainable(layers);
  if (stop >= layers.size()) return;
  ws.grad = dz * scale;
  for (std::size_t i = layers.size() - 2; i >= stop && i > 0; --i) {
    const Layer& L = layers[i];
    const Vec& in = ws.acts[i - 1];
    const bool need_input_grad = i > stop;
    switch (L.spec.kind) {
      case LayerKind::relu:
        ws.grad.array() *= (ws.acts[i].array() > 0.0).cast<double>();
        break;
      case LayerKind::dropout:
        if (ws.masked[i]) ws.grad.array() *= ws.masks[i].array();
        break;
      case LayerKind::fully_connected:
      case LayerKind::softmax: {
        if (L.spec.kind == LayerKind::fully_connected && ws.masked[i]) ws.grad.array() *= ws.masks[i].array();
        const auto rows = static_cast<Eigen::Index>(L.bias.size());
        if (!L.frozen) {
          Eigen::Map<RowMat> dw(grads.dw[i].data(), rows, in.size());
          dw.noalias() += ws.grad * in.transpose();
          grads.db[i] += ws.grad;
        }
        if (need_input_grad) {
          Eigen::Map<const RowMat> w(L.weights.data(), rows, in.size());
          ws.grad_next.noalias() = w.transpose() * ws.grad;
          ws.grad.swap(ws.grad_next);
        }
        break;
      }
      case LayerKind::conv2d: {
        const Eigen::Index f = L.spec.units;
        const RowMat& cols = ws.cols[i];
        Eigen::Map<const RowMat> g(ws.grad.data(), f, cols.cols());
        if (!L.frozen) {
          Eigen::Map<RowMat> dw(grads.dw[i].data(), f, cols.rows());
          dw.noalias() += g * cols.transpose();
          grads.db[i] += g.rowwise().sum();
        }
        if (need_input_grad) {
          Eigen::Map<const RowMat> w(L.weights.data(), f, cols.rows());
          ws.dcols.noalias() = w.transpose() * g;
          ws.grad_next.resize(static_cast<Eigen::Index>(L.in.size()));
          col2im(ws.dcols, L.in, L.spec, L.out.height, L.out.width, ws.grad_next.data());
          ws.grad.swap(ws.grad_next);
        }
        break;
      }
      case LayerKind::input:
      case LayerKind::classification_output:
        break;
    }
    if (i == stop) break;
  }
}

double sample_loss(const NetworkModel& model, std::span<const double> x, int label) {
  Workspace ws(model.layer_count());
  const Vec& eta = forward_pass(model, x, nullptr, ws);
  Vec dz;
  return loss_and_logit_grad(eta, label, dz);
}

void check_label(const NetworkModel& model, int label) {
  if (label < 0 || label >= model.num_classes()) throw std::invalid_argument("label outside the model's class range");
}

}  // namespace

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::input: return "Input";
    case LayerKind::conv2d: return "Conv2D";
    case LayerKind::relu: return "ReLU";
    case LayerKind::fully_connected: return "FullyConnected";
    case LayerKind::dropout: return "Dropout";
    case LayerKind::softmax: return "Softmax";
    case LayerKind::classification_output: return "ClassificationOutput";
  }
  return "?";
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::patience: return "patience";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::nothing_to_train: return "nothing_to_train";
  }
  return "?";
}

LayerSpec LayerSpec::input(int height, int width, int channels) {
  if (height < 1 || width < 1 || channels < 1) throw std::invalid_argument("input dimensions must be positive");
  LayerSpec s;
  s.kind = LayerKind::input;
  s.input_shape = {channels, height, width};
  return s;
}

LayerSpec LayerSpec::conv2d(int filters, int kernel_h, int kernel_w, bool same_padding) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.units = filters;
  s.kernel_h = kernel_h;
  s.kernel_w = kernel_w;
  s.same_padding = same_padding;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::fully_connected(int units, double dropout) {
  LayerSpec s;
  s.kind = LayerKind::fully_connected;
  s.units = units;
  s.dropout = dropout;
  return s;
}

LayerSpec LayerSpec::dropout_layer(double rate) {
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.dropout = rate;
  return s;
}

LayerSpec LayerSpec::softmax(int classes) {
  LayerSpec s;
  s.kind = LayerKind::softmax;
  s.units = classes;
  return s;
}

LayerSpec LayerSpec::classification_output(int classes) {
  LayerSpec s;
  s.kind = LayerKind::classification_output;
  s.units = classes;
  return s;
}

std::size_t Layer::fan_in() const {
  switch (spec.kind) {
    case LayerKind::conv2d:
      return static_cast<std::size_t>(in.channels) * spec.kernel_h * spec.kernel_w;
    case LayerKind::fully_connected:
    case LayerKind::softmax:
      return in.size();
    default:
      return 0;
  }
}

NetworkModel NetworkModel::from_specs(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  NetworkModel model;
  if (specs.empty()) return model;
  std::mt19937_64 rng(mix_seed({seed, 0x1417}));
  Shape shape;
  for (const LayerSpec& spec : specs) {
    Layer layer;
    layer.spec = spec;
    layer.in = shape;
    layer.out = infer_shape(spec, shape);
    if (spec.kind == LayerKind::conv2d || is_dense(spec.kind)) he_init(layer, rng);
    shape = layer.out;
    model.layers_.push_back(std::move(layer));
  }
  validate_stack(model.layers_);
  return model;
}

NetworkModel NetworkModel::from_layers(std::vector<Layer> layers, bool trained) {
  NetworkModel model;
  Shape shape;
  for (Layer& l : layers) {
    l.in = shape;
    l.out = infer_shape(l.spec, shape);
    if (l.has_weights()) {
      const std::size_t rows = l.spec.kind == LayerKind::conv2d ? static_cast<std::size_t>(l.spec.units) : l.out.size();
      if (l.weights.size() != rows * l.fan_in() || l.bias.size() != rows)
        throw FormatError("layer parameter count does not match its shape");
    }
    shape = l.out;
  }
  model.layers_ = std::move(layers);
  validate_stack(model.layers_);
  model.trained_ = trained;
  return model;
}

Shape NetworkModel::input_shape() const {
  if (layers_.empty()) throw std::logic_error("empty model has no input shape");
  return layers_.front().out;
}

int NetworkModel::num_classes() const {
  if (layers_.empty()) return 0;
  return layers_.back().spec.units;
}

std::size_t NetworkModel::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

void NetworkModel::set_frozen(std::size_t index, bool frozen) { layer(index).frozen = frozen; }

void NetworkModel::snap_to_float() {
  for (Layer& l : layers_) {
    for (double& w : l.weights) w = to_float(w);
    for (double& b : l.bias) b = to_float(b);
  }
}

NetworkModel build_paper_cnn(int m, int classes, int conv_filters, int fc_units, std::uint64_t seed) {
  if (m < 3) throw std::invalid_argument("input side must be >= 3");
  if (classes < 2) throw std::invalid_argument("classification needs at least 2 classes");
  if (conv_filters < 1 || fc_units < 1) throw std::invalid_argument("layer widths must be positive");
  std::vector<LayerSpec> specs{LayerSpec::input(m, m, 3)};
  for (int i = 0; i < 4; ++i) {
    specs.push_back(LayerSpec::conv2d(conv_filters, 3, 3, true));
    specs.push_back(LayerSpec::relu());
  }
  specs.push_back(LayerSpec::fully_connected(fc_units, 0.5));
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::fully_connected(fc_units, 0.5));
  specs.push_back(LayerSpec::relu());
  specs.push_back(LayerSpec::softmax(classes));
  specs.push_back(LayerSpec::classification_output(classes));
  return NetworkModel::from_specs(specs, seed);
}

std::vector<double> forward(const NetworkModel& model, std::span<const double> x, ForwardMode mode,
                            std::uint64_t dropout_seed) {
  if (model.empty()) throw std::invalid_argument("cannot run an empty model");
  Workspace ws(model.layer_count());
  std::mt19937_64 rng(dropout_seed);
  const Vec& eta = forward_pass(model, x, mode == ForwardMode::train ? &rng : nullptr, ws);
  return {eta.data(), eta.data() + eta.size()};
}

int predict_class(const NetworkModel& model, std::span<const double> x) {
  const std::vector<double> p = forward(model, x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

double cross_entropy_loss(std::span<const std::vector<double>> probs, std::span<const int> labels) {
  if (probs.size() != labels.size()) throw std::invalid_argument("probability and label batches differ in length");
  if (probs.empty()) throw std::invalid_argument("empty batch");
  double total = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    const auto& eta = probs[t];
    if (labels[t] < 0 || static_cast<std::size_t>(labels[t]) >= eta.size())
      throw std::invalid_argument("label outside the probability vector");
    for (std::size_t c = 0; c < eta.size(); ++c) {
      const double q = std::clamp(eta[c], kProbabilityClamp, 1.0 - kProbabilityClamp);
      total -= static_cast<int>(c) == labels[t] ? std::log(q) : std::log(1.0 - q);
    }
  }
  return total / static_cast<double>(probs.size());
}

ParameterGradients compute_gradients(const NetworkModel& model, std::span<const double> x, int label) {
  if (model.empty()) throw std::invalid_argument("cannot differentiate an empty model");
  check_label(model, label);
  Workspace ws(model.layer_count());
  const Vec& eta = forward_pass(model, x, nullptr, ws);
  Vec dz;
  loss_and_logit_grad(eta, label, dz);
  GradBuffers g;
  g.reset(model.layers());
  backward_pass(model, ws, dz, 1.0, g);
  ParameterGradients out;
  for (std::size_t i = 0; i < g.dw.size(); ++i) {
    out.weights.emplace_back(g.dw[i].data(), g.dw[i].data() + g.dw[i].size());
    out.bias.emplace_back(g.db[i].data(), g.db[i].data() + g.db[i].size());
  }
  return out;
}

double gradient_check(const NetworkModel& model, std::span<const double> x, int label, double h) {
  const ParameterGradients analytic = compute_gradients(model, x, label);
  NetworkModel probe = model;
  double worst = 0.0;
  auto compare = [&](double& param, double grad) {
    const double saved = param;
    param = saved + h;
    const double up = sample_loss(probe, x, label);
    param = saved - h;
    const double down = sample_loss(probe, x, label);
    param = saved;
    const double numeric = (up - down) / (2.0 * h);
    if (std::abs(numeric) < 1e-8 && std::abs(grad) < 1e-8) return;
    worst = std::max(worst, std::abs(numeric - grad) / std::max(std::abs(numeric), std::abs(grad)));
  };
  auto layers = probe.mutable_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].has_weights() || layers[i].frozen) continue;
    for (std::size_t j = 0; j < layers[i].weights.size(); ++j) compare(layers[i].weights[j], analytic.weights[i][j]);
    for (std::size_t j = 0; j < layers[i].bias.size(); ++j) compare(layers[i].bias[j], analytic.bias[i][j]);
  }
  return worst;
}

double learning_rate_at(const TrainConfig& cfg, int epoch) {
  if (epoch < 1) throw std::invalid_argument("epochs are numbered from 1");
  return cfg.learning_rate * std::pow(cfg.lr_decay, (epoch - 1) / cfg.lr_decay_every);
}

double evaluate_accuracy(const NetworkModel& model, const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw std::invalid_argument("no samples to evaluate");
  std::vector<char> hit(indices.size(), 0);
  const unsigned threads = resolve_threads(0);
  const std::size_t per = (indices.size() + threads - 1) / threads;
  parallel_for(threads, threads, [&](std::size_t w) {
    Workspace ws(model.layer_count());
    std::vector<double> x;
    for (std::size_t k = w * per; k < std::min(indices.size(), (w + 1) * per); ++k) {
      const TrainingSample& s = data.samples.at(indices[k]);
      x.assign(s.input.begin(), s.input.end());
      const Vec& eta = forward_pass(model, x, nullptr, ws);
      Eigen::Index best = 0;
      eta.maxCoeff(&best);
      hit[k] = static_cast<std::uint32_t>(best) == s.label;
    }
  });
  const auto correct = std::count(hit.begin(), hit.end(), 1);
  return 100.0 * static_cast<double>(correct) / static_cast<double>(indices.size());
}

TrainReport train(NetworkModel& model, const Dataset& data, const TrainConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (model.empty()) throw std::invalid_argument("cannot train an empty model");
  if (!(cfg.learning_rate > 0.0 && cfg.learning_rate <= 1.0) || !(cfg.momentum >= 0.0 && cfg.momentum < 1.0) ||
      !(cfg.lr_decay > 0.0 && cfg.lr_decay <= 1.0))
    throw std::invalid_argument("learning rate, momentum and decay must lie in (0, 1]");
  if (cfg.batch_size < 1 || cfg.max_epochs < 1 || cfg.patience < 1 || cfg.lr_decay_every < 1)
    throw std::invalid_argument("batch size, epoch counts and patience must be positive");

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> val_idx;
  if (data.split.empty()) {
    train_idx.resize(data.samples.size());
    std::iota(train_idx.begin(), train_idx.end(), std::size_t{0});
  } else {
    train_idx = data.indices(Split::train);
    val_idx = data.indices(Split::validation);
  }
  if (train_idx.empty()) throw std::invalid_argument("training split is empty");
  if (val_idx.empty()) log_warning("no validation split; early stopping monitors training accuracy");
  const std::vector<std::size_t>& monitor = val_idx.empty() ? train_idx : val_idx;
  const std::size_t input_size = model.input_shape().size();
  for (std::size_t i : train_idx) {
    if (data.samples[i].input.size() != input_size) throw std::invalid_argument("sample shape does not match the model");
    check_label(model, static_cast<int>(data.samples[i].label));
  }

  TrainReport report;
  auto layers = model.mutable_layers();
  const bool anything = first_trainable(layers) < layers.size();
  if (!anything) {
    report.stop_reason = StopReason::nothing_to_train;
    report.best_validation_accuracy = evaluate_accuracy(model, data, monitor);
    report.epochs.push_back({1, 0.0, report.best_validation_accuracy, learning_rate_at(cfg, 1)});
    report.best_epoch = 1;
    report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
  }

  const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), train_idx.size());
  const int chunks = model.parameter_count() > kChunkedParamLimit ? 1 : kGradientChunks;
  const unsigned threads = std::max(1u, resolve_threads(cfg.threads));

  std::vector<Vec> velocity_w(layers.size());
  std::vector<Vec> velocity_b(layers.size());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].has_weights() || layers[i].frozen) continue;
    velocity_w[i].setZero(static_cast<Eigen::Index>(layers[i].weights.size()));
    velocity_b[i].setZero(static_cast<Eigen::Index>(layers[i].bias.size()));
  }

  std::vector<GradBuffers> partial(static_cast<std::size_t>(chunks));
  std::vector<Workspace> spaces;
  for (int c = 0; c < chunks; ++c) spaces.emplace_back(layers.size());

  std::vector<Layer> best_layers(layers.begin(), layers.end());
  report.best_validation_accuracy = -1.0;
  int stall = 0;
  report.stop_reason = StopReason::max_epochs;

  std::vector<std::size_t> order = train_idx;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = learning_rate_at(cfg, epoch);
    std::mt19937_64 shuffle_rng(mix_seed({cfg.seed, 0x5f1e, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;

    for (std::size_t b0 = 0; b0 < order.size(); b0 += batch) {
      const std::size_t bn = std::min(batch, order.size() - b0);
      parallel_for(static_cast<std::size_t>(chunks), threads, [&](std::size_t c) {
        GradBuffers& g = partial[c];
        g.reset(model.layers());
        Workspace& ws = spaces[c];
        std::vector<double> x;
        Vec dz;
        const std::size_t lo = c * bn / static_cast<std::size_t>(chunks);
        const std::size_t hi = (c + 1) * bn / static_cast<std::size_t>(chunks);
        for (std::size_t k = lo; k < hi; ++k) {
          const std::size_t pos = b0 + k;
          const TrainingSample& s = data.samples[order[pos]];
          x.assign(s.input.begin(), s.input.end());
          std::mt19937_64 rng(mix_seed({cfg.seed, 0xd409, static_cast<std::uint64_t>(epoch), pos}));
          const Vec& eta = forward_pass(model, x, &rng, ws);
          g.loss += loss_and_logit_grad(eta, static_cast<int>(s.label), dz);
          backward_pass(model, ws, dz, 1.0 / static_cast<double>(bn), g);
        }
      });
      for (int c = 1; c < chunks; ++c) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
          if (partial[0].dw[i].size() == 0) continue;
          partial[0].dw[i] += partial[static_cast<std::size_t>(c)].dw[i];
          partial[0].db[i] += partial[static_cast<std::size_t>(c)].db[i];
        }
        partial[0].loss += partial[static_cast<std::size_t>(c)].loss;
      }
      epoch_loss += partial[0].loss;
      for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!layers[i].has_weights() || layers[i].frozen) continue;
        velocity_w[i] = cfg.momentum * velocity_w[i] - lr * partial[0].dw[i];
        velocity_b[i] = cfg.momentum * velocity_b[i] - lr * partial[0].db[i];
        for (std::size_t j = 0; j < layers[i].weights.size(); ++j)
          layers[i].weights[j] = to_float(layers[i].weights[j] + velocity_w[i][static_cast<Eigen::Index>(j)]);
        for (std::size_t j = 0; j < layers[i].bias.size(); ++j)
          layers[i].bias[j] = to_float(layers[i].bias[j] + velocity_b[i][static_cast<Eigen::Index>(j)]);
      }
    }

    const double acc = evaluate_accuracy(model, data, monitor);
    report.epochs.push_back({epoch, epoch_loss / static_cast<double>(order.size()), acc, lr});
    if (acc > report.best_validation_accuracy) {
      report.best_validation_accuracy = acc;
      report.best_epoch = epoch;
      std::copy(layers.begin(), layers.end(), best_layers.begin());
      stall = 0;
    } else if (++stall >= cfg.patience) {
      report.stop_reason = StopReason::patience;
      break;
    }
  }

  std::copy(best_layers.begin(), best_layers.end(), layers.begin());
  model.set_trained(true);
  report.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

NetworkModel make_transfer_model(const NetworkModel& source, int target_classes, const TransferOptions& options) {
  if (source.empty()) throw std::invalid_argument("source model is empty");
  if (target_classes < 2) throw std::invalid_argument("target class count must be >= 2");
  if (!source.trained()) log_warning("transferring from a model that has not been trained");
  std::vector<Layer> layers(source.layers().begin(), source.layers().end());
  for (Layer& l : layers) {
    if (l.spec.kind == LayerKind::conv2d) l.frozen = true;
    if (l.spec.kind == LayerKind::fully_connected) l.frozen = false;
  }
  if (target_classes != source.num_classes() || options.reinit_head) {
    Layer& head = layers[layers.size() - 2];
    head.spec.units = target_classes;
    head.out = {target_classes, 1, 1};
    head.frozen = false;
    std::mt19937_64 rng(mix_seed({options.seed, 0x4ead}));
    he_init(head, rng);
    Layer& out = layers.back();
    out.spec.units = target_classes;
  }
  return NetworkModel::from_layers(std::move(layers), source.trained());
}

FlopEstimate flop_estimate(const NetworkModel& model) {
  FlopEstimate f;
  for (const Layer& l : model.layers()) {
    if (l.spec.kind == LayerKind::conv2d) {
      const std::uint64_t base = static_cast<std::uint64_t>(l.out.height) * l.out.width * l.spec.kernel_h *
                                 l.spec.kernel_w * static_cast<std::uint64_t>(l.spec.units);
      f.conv_ops += base * static_cast<std::uint64_t>(l.in.channels);
      f.conv_ops_uniform_width += base * static_cast<std::uint64_t>(l.spec.units);
    } else if (l.spec.kind == LayerKind::fully_connected) {
      f.fc_ops += static_cast<std::uint64_t>(l.in.size()) * static_cast<std::uint64_t>(l.spec.units);
    }
  }
  return f;
}

std::uint64_t layer_digest(const Layer& layer) {
  // FNV-1a over the float images of the parameters.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](double v) {
    const float f = static_cast<float>(v);
    unsigned char bytes[sizeof f];
    std::memcpy(bytes, &f, sizeof f);
    for (unsigned char b : bytes) h = (h ^ b) * 0x100000001b3ULL;
  };
  for (double w : layer.weights) feed(w);
  for (double b : layer.bias) feed(b);
  return h;
}

}  // namespace arraysel
