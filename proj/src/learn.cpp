#include "tpsdf/learn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "tpsdf/formats.hpp"

namespace tpsdf {

TrainMode parse_mode(std::string_view name) {
  if (name == "triclass") return TrainMode::triclass;
  if (name == "br") return TrainMode::br;
  throw TrainingError("unknown training mode '" + std::string(name) + "'");
}

std::string_view to_string(TrainMode mode) {
  return mode == TrainMode::triclass ? "triclass" : "br";
}

void TrainConfig::validate() const {
  for (const int w : hidden) {
    if (w <= 0) throw TrainingError("hidden layer widths must be positive");
  }
  if (!(learning_rate > 0.0)) throw TrainingError("learning rate must be positive");
  if (batch_size == 0) throw TrainingError("batch size must be positive");
  if (epochs < 0) throw TrainingError("epoch count must be nonnegative");
  if (frequencies < 0 || frequencies > 16) throw TrainingError("frequencies must be in [0, 16]");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw TrainingError("Adam betas must be in [0, 1)");
  }
}

template <typename T>
BasicModel<T>::BasicModel(const std::vector<int>& hidden, TrainMode mode, int frequencies,
                          const Box3& domain)
    : hidden_(hidden), mode_(mode), frequencies_(frequencies), domain_(domain) {
  int in = input_width();
  std::vector<int> widths = hidden_;
  widths.push_back(output_width());
  for (const int out : widths) {
    layers_.push_back({Matrix::Zero(out, in), Vector::Zero(out)});
    in = out;
  }
}

template <typename T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

template <typename T>
typename BasicModel<T>::Matrix BasicModel<T>::encode(std::span<const Vec3> points) const {
  const auto n = static_cast<Eigen::Index>(points.size());
  Matrix x(input_width(), n);
  const Vec3 center = domain_.center();
  const Vec3 half = domain_.extent() * 0.5;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Vec3& p = points[static_cast<std::size_t>(j)];
    for (int a = 0; a < 3; ++a) {
      const double u = half[a] > 0.0 ? (p[a] - center[a]) / half[a] : 0.0;
      x(a, j) = static_cast<T>(u);
      for (int k = 0; k < frequencies_; ++k) {
        const double arg = std::ldexp(std::numbers::pi, k) * u;
        x(3 + 6 * k + a, j) = static_cast<T>(std::sin(arg));
        x(3 + 6 * k + 3 + a, j) = static_cast<T>(std::cos(arg));
      }
    }
  }
  return x;
}

template <typename T>
typename BasicModel<T>::Matrix BasicModel<T>::forward(const Matrix& input, Tape* tape) const {
  if (input.rows() != input_width()) {
    throw TrainingError("input has " + std::to_string(input.rows()) + " rows, expected " +
                        std::to_string(input_width()));
  }
  if (tape) {
    tape->activations.clear();
    tape->activations.push_back(input);
  }
  Matrix a = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(T(0));
    a = std::move(z);
    if (tape) tape->activations.push_back(a);
  }
  return a;
}

template <typename T>
typename BasicModel<T>::Matrix BasicModel<T>::forward(std::span<const Vec3> points) const {
  constexpr Eigen::Index kBlock = 64;
  const Matrix input = encode(points);
  const auto n = input.cols();
  Matrix out(output_width(), n);
  Matrix block = Matrix::Zero(input.rows(), kBlock);
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const auto count = std::min(kBlock, n - start);
    block.leftCols(count) = input.middleCols(start, count);
    if (count < kBlock) block.rightCols(kBlock - count).setZero();
    out.middleCols(start, count) = forward(block).leftCols(count);
  }
  return out;
}

template <typename T>
typename BasicModel<T>::Gradients BasicModel<T>::backward(const Tape& tape,
                                                          const Matrix& d_output) const {
  Gradients grads(layers_.size());
  Matrix delta = d_output;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Matrix& a_prev = tape.activations[l];
    grads[l].weight = delta * a_prev.transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l > 0) {
      Matrix back = layers_[l].weight.transpose() * delta;
      delta = back.cwiseProduct((a_prev.array() > T(0)).template cast<T>().matrix());
    }
  }
  return grads;
}

template class BasicModel<float>;
template class BasicModel<double>;

TriClassModel init_model(const TrainConfig& config, const Box3& domain, std::uint64_t seed) {
  config.validate();
  TriClassModel model(config.hidden, config.mode, config.frequencies, domain);
  std::mt19937_64 rng(seed);
  for (auto& layer : model.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(layer.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    // Row-major fill order so the stream maps to the checkpoint layout.
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        layer.weight(r, c) = static_cast<float>(dist(rng));
      }
    }
    layer.bias.setZero();
  }
  return model;
}

template <typename T>
LossOutput<T> triclass_loss(const typename BasicModel<T>::Matrix& logits,
                            std::span<const std::uint8_t> labels,
                            std::span<const T> class_weights) {
  const Eigen::Index n = logits.cols();
  if (logits.rows() != 3 || static_cast<std::size_t>(n) != labels.size() || n == 0) {
    throw TrainingError("triclass loss expects 3 x N logits and N >= 1 labels");
  }
  LossOutput<T> out;
  out.d_output.resize(3, n);
  double total_weight = 0.0;
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto y = labels[static_cast<std::size_t>(j)];
    const T w = class_weights.empty() ? T(1) : class_weights[y];
    const T m = logits.col(j).maxCoeff();
    T sum = 0;
    for (int c = 0; c < 3; ++c) sum += std::exp(logits(c, j) - m);
    const T lse = m + std::log(sum);
    total += static_cast<double>(w * (lse - logits(y, j)));
    total_weight += static_cast<double>(w);
    for (int c = 0; c < 3; ++c) {
      const T p = std::exp(logits(c, j) - lse);
      out.d_output(c, j) = w * (p - (c == y ? T(1) : T(0)));
    }
  }
  if (total_weight <= 0.0) {
    out.d_output.setZero();
    return out;
  }
  out.loss = static_cast<T>(total / total_weight);
  out.d_output /= static_cast<T>(total_weight);
  return out;
}

template <typename T>
LossOutput<T> br_loss(const typename BasicModel<T>::Matrix& outputs,
                      std::span<const float> targets) {
  const Eigen::Index n = outputs.cols();
  if (outputs.rows() != 2 || static_cast<std::size_t>(n) != targets.size() || n == 0) {
    throw TrainingError("br loss expects 2 x N outputs and N >= 1 targets");
  }
  LossOutput<T> out;
  out.d_output = BasicModel<T>::Matrix::Zero(2, n);
  std::size_t valid = 0;
  for (const float t : targets) valid += std::isnan(t) ? 0 : 1;

  double bce = 0.0;
  double l1 = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const float t = targets[static_cast<std::size_t>(j)];
    const T y = std::isnan(t) ? T(0) : T(1);
    const T z = outputs(0, j);
    bce += static_cast<double>(std::max(z, T(0)) - z * y + std::log1p(std::exp(-std::abs(z))));
    const T sigma = T(1) / (T(1) + std::exp(-z));
    out.d_output(0, j) = (sigma - y) / static_cast<T>(n);
    if (y > T(0)) {
      const T diff = outputs(1, j) - static_cast<T>(t);
      l1 += static_cast<double>(std::abs(diff));
      const T sign = diff > T(0) ? T(1) : (diff < T(0) ? T(-1) : T(0));
      out.d_output(1, j) = sign / static_cast<T>(valid);
    }
  }
  out.loss = static_cast<T>(bce / static_cast<double>(n) +
                            (valid > 0 ? l1 / static_cast<double>(valid) : 0.0));
  return out;
}

template LossOutput<float> triclass_loss<float>(const BasicModel<float>::Matrix&,
                                                std::span<const std::uint8_t>,
                                                std::span<const float>);
template LossOutput<double> triclass_loss<double>(const BasicModel<double>::Matrix&,
                                                  std::span<const std::uint8_t>,
                                                  std::span<const double>);
template LossOutput<float> br_loss<float>(const BasicModel<float>::Matrix&,
                                          std::span<const float>);
template LossOutput<double> br_loss<double>(const BasicModel<double>::Matrix&,
                                            std::span<const float>);

template <typename T>
AdamState<T> make_adam_state(const BasicModel<T>& model) {
  AdamState<T> state;
  for (const auto& l : model.layers()) {
    state.m.push_back({BasicModel<T>::Matrix::Zero(l.weight.rows(), l.weight.cols()),
                       BasicModel<T>::Vector::Zero(l.bias.size())});
  }
  state.v = state.m;
  return state;
}

template <typename T>
void adam_update(BasicModel<T>& model, const typename BasicModel<T>::Gradients& grads,
                 AdamState<T>& state, const TrainConfig& config) {
  ++state.step;
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T lr = static_cast<T>(config.learning_rate);
  const T eps = static_cast<T>(config.eps);
  const T wd = static_cast<T>(config.weight_decay);
  const T c1 = static_cast<T>(1.0 - std::pow(config.beta1, static_cast<double>(state.step)));
  const T c2 = static_cast<T>(1.0 - std::pow(config.beta2, static_cast<double>(state.step)));

  auto step = [&](auto& param, const auto& grad, auto& m, auto& v) {
    auto g = (grad + wd * param).eval();
    m = b1 * m + (T(1) - b1) * g;
    v = b2 * v + (T(1) - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < grads.size(); ++l) {
    auto& layer = model.layers()[l];
    step(layer.weight, grads[l].weight, state.m[l].weight, state.v[l].weight);
    step(layer.bias, grads[l].bias, state.m[l].bias, state.v[l].bias);
  }
}

template AdamState<float> make_adam_state<float>(const BasicModel<float>&);
template AdamState<double> make_adam_state<double>(const BasicModel<double>&);
template void adam_update<float>(BasicModel<float>&, const BasicModel<float>::Gradients&,
                                 AdamState<float>&, const TrainConfig&);
template void adam_update<double>(BasicModel<double>&, const BasicModel<double>::Gradients&,
                                  AdamState<double>&, const TrainConfig&);

namespace {

double domain_half_size(const Box3& domain) { return 0.5 * (domain.max.x - domain.min.x); }

}  // namespace

TrainResult train(const SampleBatch& batch, const TrainConfig& config, const Box3& domain,
                  const std::function<void(int, double)>& on_epoch) {
  config.validate();
  if (batch.size() == 0) throw TrainingError("cannot train on an empty sample batch");
  if (batch.labels.size() != batch.size()) throw TrainingError("label count mismatch");

  TrainResult result{init_model(config, domain, config.seed), {}};
  if (config.epochs == 0) return result;
  TriClassModel& model = result.model;
  using Matrix = TriClassModel::Matrix;

  const Matrix inputs = model.encode(batch.points);
  const auto n = batch.size();

  std::vector<float> targets;
  if (config.mode == TrainMode::br) {
    if (batch.targets.size() != n) throw TrainingError("br mode needs signed targets");
    const double scale = 1.0 / domain_half_size(domain);
    targets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const float t = batch.targets[i];
      targets[i] = std::isnan(t) ? t : static_cast<float>(t * scale);
    }
  }
  std::vector<float> weights;
  if (config.class_weights && config.mode == TrainMode::triclass) {
    const auto counts = batch.label_counts();
    weights.resize(3);
    for (int c = 0; c < 3; ++c) {
      weights[c] = counts[c] > 0 ? static_cast<float>(static_cast<double>(n) / (3.0 * counts[c]))
                                 : 0.0F;
    }
  }

  AdamState<float> adam = make_adam_state(model);
  std::mt19937_64 rng(config.seed ^ 0x5DEECE66DULL);
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0U);
  TriClassModel::Tape tape;
  Matrix xb;
  std::vector<std::uint8_t> yb;
  std::vector<float> tb;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - start);
      xb.resize(inputs.rows(), static_cast<Eigen::Index>(count));
      yb.resize(count);
      tb.resize(count);
      for (std::size_t j = 0; j < count; ++j) {
        const auto src = order[start + j];
        xb.col(static_cast<Eigen::Index>(j)) = inputs.col(src);
        yb[j] = batch.labels[src];
        if (!targets.empty()) tb[j] = targets[src];
      }
      const Matrix out = model.forward(xb, &tape);
      const LossOutput<float> loss =
          config.mode == TrainMode::triclass
              ? triclass_loss<float>(out, yb, std::span<const float>(weights))
              : br_loss<float>(out, tb);
      if (!std::isfinite(loss.loss)) {
        throw TrainingError("training diverged: non-finite loss at epoch " +
                            std::to_string(epoch) + ", sample offset " + std::to_string(start));
      }
      epoch_loss += static_cast<double>(loss.loss) * static_cast<double>(count);
      adam_update(model, model.backward(tape, loss.d_output), adam, config);
    }
    epoch_loss /= static_cast<double>(n);
    result.loss_log.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

namespace {

constexpr std::size_t kPredictChunk = 1 << 15;

template <typename Fn>
void for_each_chunk(const TriClassModel& model, std::span<const Vec3> points, Fn&& fn) {
  for (std::size_t start = 0; start < points.size(); start += kPredictChunk) {
    const auto count = std::min(kPredictChunk, points.size() - start);
    fn(start, model.forward(points.subspan(start, count)));
  }
}

std::uint8_t argmax3(const TriClassModel::Matrix& out, Eigen::Index j) {
  std::uint8_t best = 0;
  for (std::uint8_t c = 1; c < 3; ++c) {
    if (out(c, j) > out(best, j)) best = c;
  }
  return best;
}

}  // namespace

std::vector<std::uint8_t> predict_labels(const TriClassModel& model,
                                         std::span<const Vec3> points) {
  if (model.mode() != TrainMode::triclass) throw TrainingError("label prediction needs triclass");
  std::vector<std::uint8_t> labels(points.size());
  for_each_chunk(model, points, [&](std::size_t start, const TriClassModel::Matrix& out) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      labels[start + static_cast<std::size_t>(j)] = argmax3(out, j);
    }
  });
  return labels;
}

double label_accuracy(const TriClassModel& model, std::span<const Vec3> points,
                      std::span<const std::uint8_t> labels) {
  if (points.empty()) return 0.0;
  const auto predicted = predict_labels(model, points);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

FieldGrid merge_br_field(const FieldGrid& geometry, std::span<const float> nonnull_probability,
                         std::span<const float> distance) {
  FieldGrid grid = make_lattice(geometry.bbox, geometry.dims);
  if (nonnull_probability.size() != grid.size() || distance.size() != grid.size()) {
    throw TrainingError("br merge inputs do not match the lattice size");
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid.values[i] = nonnull_probability[i] >= 0.5F ? distance[i]
                                                    : std::numeric_limits<float>::quiet_NaN();
  }
  return grid;
}

FieldGrid predict_grid(const TriClassModel& model, const FieldGrid& geometry) {
  std::vector<Vec3> points;
  points.reserve(geometry.size());
  for (std::uint32_t k = 0; k < geometry.dims[2]; ++k) {
    for (std::uint32_t j = 0; j < geometry.dims[1]; ++j) {
      for (std::uint32_t i = 0; i < geometry.dims[0]; ++i) points.push_back(geometry.position(i, j, k));
    }
  }

  if (model.mode() == TrainMode::triclass) {
    FieldGrid grid = make_lattice(geometry.bbox, geometry.dims);
    for_each_chunk(model, points, [&](std::size_t start, const TriClassModel::Matrix& out) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        grid.values[start + static_cast<std::size_t>(j)] =
            label_to_value(static_cast<Label>(argmax3(out, j))).encode();
      }
    });
    return grid;
  }

  const auto scale = static_cast<float>(domain_half_size(model.domain()));
  std::vector<float> probability(points.size());
  std::vector<float> distance(points.size());
  for_each_chunk(model, points, [&](std::size_t start, const TriClassModel::Matrix& out) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const auto i = start + static_cast<std::size_t>(j);
      probability[i] = 1.0F / (1.0F + std::exp(-out(0, j)));
      distance[i] = out(1, j) * scale;
    }
  });
  return merge_br_field(geometry, probability, distance);
}

void write_model(const std::filesystem::path& path, const TriClassModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write '" + path.string() + "'");
  out.write("3PM1", 4);
  io::put_u32(out, 1);
  io::put_u32(out, static_cast<std::uint32_t>(model.mode()));
  io::put_u32(out, static_cast<std::uint32_t>(model.frequencies()));
  io::put_u32(out, static_cast<std::uint32_t>(model.hidden().size()));
  for (const int w : model.hidden()) io::put_u32(out, static_cast<std::uint32_t>(w));
  for (int a = 0; a < 3; ++a) io::put_f64(out, model.domain().min[a]);
  for (int a = 0; a < 3; ++a) io::put_f64(out, model.domain().max[a]);
  for (const auto& layer : model.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) io::put_f32(out, layer.weight(r, c));
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) io::put_f32(out, layer.bias(r));
  }
  out.flush();
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

TriClassModel read_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  io::expect_magic(in, "3PM1");
  if (io::get_u32(in) != 1) throw FormatError("unsupported 3PM1 version");
  const std::uint32_t mode = io::get_u32(in);
  if (mode > 1) throw FormatError("unknown model mode");
  const std::uint32_t frequencies = io::get_u32(in);
  const std::uint32_t depth = io::get_u32(in);
  if (frequencies > 16 || depth > 64) throw FormatError("implausible model header");
  std::vector<int> hidden(depth);
  for (auto& w : hidden) {
    w = static_cast<int>(io::get_u32(in));
    if (w <= 0 || w > (1 << 16)) throw FormatError("implausible layer width");
  }
  Box3 domain;
  for (int a = 0; a < 3; ++a) domain.min[a] = io::get_f64(in);
  for (int a = 0; a < 3; ++a) domain.max[a] = io::get_f64(in);
  TriClassModel model(hidden, static_cast<TrainMode>(mode), static_cast<int>(frequencies), domain);
  for (auto& layer : model.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = io::get_f32(in);
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = io::get_f32(in);
  }
  return model;
}

}  // namespace tpsdf
