// Coordinate network learning the three-pole field of a single shape.
//
// Two heads are supported on a shared ReLU trunk:
//   triclass  3 logits for {inside, outside, null}, softmax cross-entropy;
//   br        1 logit for "non-null" (binary cross-entropy) and 1 regressed
//             signed distance (L1 on non-null points), weighted 1:1.
//
// Activations are stored column-per-point: a batch of N points is a
// (features x N) matrix.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "tpsdf/field.hpp"

namespace tpsdf {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrainMode : std::uint8_t { triclass = 0, br = 1 };
TrainMode parse_mode(std::string_view name);
std::string_view to_string(TrainMode mode);

struct TrainConfig {
  std::vector<int> hidden = {256, 256, 256, 256};
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  std::size_t batch_size = 4096;
  int epochs = 100;
  std::uint64_t seed = 0;
  TrainMode mode = TrainMode::triclass;
  /// Sinusoidal encoding frequencies of the input (0 disables it).
  int frequencies = 0;
  /// Inverse-frequency class weights in the triclass loss.
  bool class_weights = false;

  void validate() const;
};

template <typename T>
class BasicModel {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // out x in
    Vector bias;
  };
  using Gradients = std::vector<Layer>;

  /// Intermediate activations kept for backpropagation; activations[0] is the
  /// encoded input and the last entry the raw output.
  struct Tape {
    std::vector<Matrix> activations;
  };

  BasicModel() = default;
  /// Zero-initialised parameters with the layer chain implied by the widths.
  BasicModel(const std::vector<int>& hidden, TrainMode mode, int frequencies, const Box3& domain);

  TrainMode mode() const { return mode_; }
  int frequencies() const { return frequencies_; }
  const Box3& domain() const { return domain_; }
  const std::vector<int>& hidden() const { return hidden_; }
  int input_width() const { return 3 + 6 * frequencies_; }
  int output_width() const { return mode_ == TrainMode::triclass ? 3 : 2; }
  std::size_t parameter_count() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  /// Normalises points from the domain cube to [-1, 1] and applies the
  /// optional sinusoidal encoding.
  Matrix encode(std::span<const Vec3> points) const;
  Matrix forward(const Matrix& input, Tape* tape = nullptr) const;
  /// Inference in fixed zero-padded blocks, so a point's output does not depend
  /// on how many other points share the call.
  Matrix forward(std::span<const Vec3> points) const;
  /// Parameter gradients for d(loss)/d(output) given the tape of a forward pass.
  Gradients backward(const Tape& tape, const Matrix& d_output) const;

  template <typename U>
  BasicModel<U> cast() const {
    BasicModel<U> out(hidden_, mode_, frequencies_, domain_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      out.layers()[l].weight = layers_[l].weight.template cast<U>();
      out.layers()[l].bias = layers_[l].bias.template cast<U>();
    }
    return out;
  }

 private:
  std::vector<int> hidden_;
  TrainMode mode_ = TrainMode::triclass;
  int frequencies_ = 0;
  Box3 domain_{{-1, -1, -1}, {1, 1, 1}};
  std::vector<Layer> layers_;
};

using TriClassModel = BasicModel<float>;

/// He-uniform weights (bound sqrt(6 / fan_in)) and zero biases from `seed`.
TriClassModel init_model(const TrainConfig& config, const Box3& domain, std::uint64_t seed);

template <typename T>
struct LossOutput {
  T loss = 0;
  typename BasicModel<T>::Matrix d_output;
};

/// Mean softmax cross-entropy of 3 x N logits. Optional per-class weights give
/// sum_i w[y_i] l_i / sum_i w[y_i].
template <typename T>
LossOutput<T> triclass_loss(const typename BasicModel<T>::Matrix& logits,
                            std::span<const std::uint8_t> labels,
                            std::span<const T> class_weights = {});

/// Binary cross-entropy of row 0 against "target is not NaN" plus the mean
/// absolute error of row 1 over non-NaN targets (0 when there are none).
template <typename T>
LossOutput<T> br_loss(const typename BasicModel<T>::Matrix& outputs,
                      std::span<const float> targets);

template <typename T>
struct AdamState {
  std::vector<typename BasicModel<T>::Layer> m;
  std::vector<typename BasicModel<T>::Layer> v;
  std::uint64_t step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const BasicModel<T>& model);

template <typename T>
void adam_update(BasicModel<T>& model, const typename BasicModel<T>::Gradients& grads,
                 AdamState<T>& state, const TrainConfig& config);

struct TrainResult {
  TriClassModel model;
  std::vector<double> loss_log;  // mean loss per epoch
};

/// Shuffled mini-batch Adam over the batch. In br mode the targets are signed
/// distances (NaN for null), regressed in units of the domain half-size.
/// Throws TrainingError when the loss becomes non-finite.
TrainResult train(const SampleBatch& batch, const TrainConfig& config, const Box3& domain,
                  const std::function<void(int, double)>& on_epoch = {});

/// Argmax over logits with ties resolved to the lowest class.
std::vector<std::uint8_t> predict_labels(const TriClassModel& model,
                                         std::span<const Vec3> points);

double label_accuracy(const TriClassModel& model, std::span<const Vec3> points,
                      std::span<const std::uint8_t> labels);

/// Predicted field on the lattice of `geometry` (values are ignored).
/// triclass: argmax label mapped to -1 / +1 / null. br: null where the
/// non-null probability is below 0.5, otherwise the regressed distance.
FieldGrid predict_grid(const TriClassModel& model, const FieldGrid& geometry);

/// Merges a non-null probability and a distance per lattice point into a field.
FieldGrid merge_br_field(const FieldGrid& geometry, std::span<const float> nonnull_probability,
                         std::span<const float> distance);

/// "3PM1": magic, u32 version, u32 mode, u32 frequencies, u32 hidden count,
/// u32 widths, f64 domain min.xyz max.xyz, then per layer the f32 weights
/// (row-major, out x in) followed by the f32 biases.
void write_model(const std::filesystem::path& path, const TriClassModel& model);
TriClassModel read_model(const std::filesystem::path& path);

extern template class BasicModel<float>;
extern template class BasicModel<double>;

}  // namespace tpsdf
