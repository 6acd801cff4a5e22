#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "arraysel/dataset.hpp"

namespace arraysel {

enum class LayerKind : std::uint8_t {
  input = 0,
  conv2d = 1,
  relu = 2,
  fully_connected = 3,
  dropout = 4,
  softmax = 5,
  classification_output = 6,
};

std::string to_string(LayerKind kind);

struct Shape {
  int channels = 0;
  int height = 1;
  int width = 1;

  std::size_t size() const { return static_cast<std::size_t>(channels) * height * width; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int units = 0;  // conv filters, FC units, softmax / output classes
  int kernel_h = 0;
  int kernel_w = 0;
  bool same_padding = true;
  double dropout = 0.0;  // rate for dropout layers and FC layers with attached dropout
  Shape input_shape;     // Input layer only

  static LayerSpec input(int height, int width, int channels);
  static LayerSpec conv2d(int filters, int kernel_h, int kernel_w, bool same_padding = true);
  static LayerSpec relu();
  static LayerSpec fully_connected(int units, double dropout = 0.0);
  static LayerSpec dropout_layer(double rate);
  // Dense projection to `classes` logits followed by softmax.
  static LayerSpec softmax(int classes);
  static LayerSpec classification_output(int classes);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Layer {
  LayerSpec spec;
  Shape in;
  Shape out;
  std::vector<double> weights;  // row-major (outputs x fan_in)
  std::vector<double> bias;
  bool frozen = false;

  bool has_weights() const { return !weights.empty(); }
  std::size_t fan_in() const;
};

// Ordered layer stack. Parameters are kept exactly representable in single
// precision so checkpoints round-trip losslessly.
class NetworkModel {
 public:
  NetworkModel() = default;

  // Validates the stack (Input first, Softmax + ClassificationOutput last, odd
  // kernels for same padding) and draws He-normal weights with zero biases.
  static NetworkModel from_specs(const std::vector<LayerSpec>& specs, std::uint64_t seed);

  std::span<const Layer> layers() const { return layers_; }
  std::span<Layer> mutable_layers() { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  // 1-based, matching the usual layer numbering of the stack.
  const Layer& layer(std::size_t index) const { return layers_.at(index - 1); }
  Layer& layer(std::size_t index) { return layers_.at(index - 1); }

  bool empty() const { return layers_.empty(); }
  Shape input_shape() const;
  int num_classes() const;
  std::size_t parameter_count() const;

  void set_frozen(std::size_t index, bool frozen);
  bool trained() const { return trained_; }
  void set_trained(bool trained) { trained_ = trained; }

  // Rounds every parameter to the nearest float.
  void snap_to_float();

  // Internal constructor for deserialization; validates the stack.
  static NetworkModel from_layers(std::vector<Layer> layers, bool trained);

 private:
  std::vector<Layer> layers_;
  bool trained_ = false;
};

// 15-layer selection network: Input, 4 x (Conv 3x3 same + ReLU), FC + 50% dropout,
// ReLU, FC + 50% dropout, ReLU, Softmax(classes), ClassificationOutput.
NetworkModel build_paper_cnn(int m, int classes, int conv_filters = 256, int fc_units = 1024, std::uint64_t seed = 1);

enum class ForwardMode { train, infer };

// Class probabilities for one 3 x M x M input. Dropout is active only in train mode.
std::vector<double> forward(const NetworkModel& model, std::span<const double> x, ForwardMode mode = ForwardMode::infer,
                            std::uint64_t dropout_seed = 0);

int predict_class(const NetworkModel& model, std::span<const double> x);

inline constexpr double kProbabilityClamp = 1e-12;

// Binary cross-entropy summed over classes, averaged over the batch:
// -(1/N) sum_t sum_c [chi ln eta + (1 - chi) ln(1 - eta)], eta clamped to [eps, 1 - eps].
double cross_entropy_loss(std::span<const std::vector<double>> probs, std::span<const int> labels);

struct ParameterGradients {
  std::vector<std::vector<double>> weights;  // indexed by layer position (0-based)
  std::vector<std::vector<double>> bias;
};

// Analytic loss gradient for a single sample (dropout disabled).
ParameterGradients compute_gradients(const NetworkModel& model, std::span<const double> x, int label);

// Worst relative error between analytic and central-difference gradients,
// skipping parameters where both magnitudes are below 1e-8.
double gradient_check(const NetworkModel& model, std::span<const double> x, int label, double h = 1e-5);

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 512;
  double lr_decay = 0.9;
  int lr_decay_every = 10;
  int patience = 3;
  int max_epochs = 100;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// Learning rate in effect during a 1-based epoch.
double learning_rate_at(const TrainConfig& cfg, int epoch);

enum class StopReason { patience, max_epochs, nothing_to_train };
std::string to_string(StopReason reason);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double validation_accuracy = 0.0;
  double learning_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  StopReason stop_reason = StopReason::max_epochs;
  int best_epoch = 0;
  double best_validation_accuracy = 0.0;
  double wall_time_s = 0.0;
};

// SGD with momentum on all unfrozen layers; per-epoch seeded shuffling; step
// decay of the learning rate; early stop on stalled validation accuracy; the
// best-validation weights are restored at the end.
TrainReport train(NetworkModel& model, const Dataset& data, const TrainConfig& cfg);

// Percentage of the listed samples whose argmax matches the stored label.
double evaluate_accuracy(const NetworkModel& model, const Dataset& data, std::span<const std::size_t> indices);

struct TransferOptions {
  bool reinit_head = false;  // force a fresh head even when the class count matches
  std::uint64_t seed = 1;
};

// Copy of `source` with every convolution frozen. The softmax head is
// re-initialized at the new width when the class count changes.
NetworkModel make_transfer_model(const NetworkModel& source, int target_classes, const TransferOptions& options = {});

struct FlopEstimate {
  std::uint64_t conv_ops = 0;  // sum over conv layers of Dx Dy bx by N_in N_out
  std::uint64_t fc_ops = 0;    // sum over FC layers of D1 D2 N_units
  // Conv estimate with every layer's input width taken equal to its filter count.
  std::uint64_t conv_ops_uniform_width = 0;
};

FlopEstimate flop_estimate(const NetworkModel& model);

void write_model(std::ostream& out, const NetworkModel& model);
NetworkModel read_model(std::istream& in);
void save_model(const NetworkModel& model, const std::filesystem::path& path);
NetworkModel load_model(const std::filesystem::path& path);

// Order-sensitive 64-bit digest of a layer's parameters (freeze checks).
std::uint64_t layer_digest(const Layer& layer);

}  // namespace arraysel
