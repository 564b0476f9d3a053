#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "advaware/common.hpp"
#include "advaware/data.hpp"

namespace advaware {

enum class Activation { relu, identity };

template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weights;  // out_dim x in_dim
  Vector<Scalar> bias;
  Activation activation = Activation::relu;

  [[nodiscard]] int in_dim() const { return static_cast<int>(weights.cols()); }
  [[nodiscard]] int out_dim() const { return static_cast<int>(weights.rows()); }
};

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerically stable softmax.
template <typename Derived>
auto softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Vector<Scalar> e = (z.array() - z.maxCoeff()).exp().matrix();
  return Vector<Scalar>(e / e.sum());
}

/// First index of the maximum entry.
template <typename Derived>
ClassIndex argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<ClassIndex>(best);
}

/// Feedforward classifier. The last layer produces logits; probabilities
/// are softmax(logits).
template <typename Scalar = double>
class NeuralNet {
 public:
  using Vec = Vector<Scalar>;
  using Mat = Matrix<Scalar>;

  NeuralNet() = default;

  explicit NeuralNet(std::vector<DenseLayer<Scalar>> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionError("network needs at least one layer");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.weights.rows()) throw DimensionError("bias length != layer out_dim");
      if (i > 0 && l.in_dim() != layers_[i - 1].out_dim())
        throw DimensionError("layer " + std::to_string(i) + " in_dim does not chain");
    }
    if (class_count() < 2) throw DimensionError("class_count must be >= 2");
  }

  /// dims = {input, hidden..., classes}. Hidden layers use ReLU, the output
  /// layer is linear. He-uniform weights, zero biases.
  static NeuralNet make(std::span<const int> dims, std::uint64_t seed) {
    if (dims.size() < 2) throw DimensionError("need input and output dims");
    std::mt19937_64 rng(splitmix64(seed));
    std::vector<DenseLayer<Scalar>> layers;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      DenseLayer<Scalar> l;
      l.weights.resize(dims[i + 1], dims[i]);
      l.bias = Vec::Zero(dims[i + 1]);
      l.activation = i + 2 == dims.size() ? Activation::identity : Activation::relu;
      const double limit = std::sqrt(6.0 / dims[i]);
      for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
          const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
          l.weights(r, c) = static_cast<Scalar>((2.0 * u - 1.0) * limit);
        }
      layers.push_back(std::move(l));
    }
    return NeuralNet(std::move(layers));
  }

  [[nodiscard]] int input_dim() const { return layers_.front().in_dim(); }
  [[nodiscard]] int class_count() const { return layers_.back().out_dim(); }
  [[nodiscard]] const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  [[nodiscard]] std::vector<DenseLayer<Scalar>>& layers() { return layers_; }

  [[nodiscard]] Vec logits(const Vec& x) const {
    check_input(x);
    Vec a = x;
    for (const auto& l : layers_) {
      a = l.weights * a + l.bias;
      if (l.activation == Activation::relu) a = a.cwiseMax(Scalar(0));
    }
    return a;
  }

  [[nodiscard]] Vec forward(const Vec& x) const { return softmax(logits(x)); }

  [[nodiscard]] ClassIndex predict(const Vec& x) const { return argmax(logits(x)); }

  /// Vector-Jacobian product: d(seed . logits(x)) / dx.
  [[nodiscard]] Vec backward_logits(const Vec& x, const Vec& seed) const {
    check_input(x);
    if (seed.size() != class_count()) throw DimensionError("seed length != class_count");
    std::vector<Vec> pre;
    pre.reserve(layers_.size());
    Vec a = x;
    for (const auto& l : layers_) {
      pre.push_back(l.weights * a + l.bias);
      a = l.activation == Activation::relu ? Vec(pre.back().cwiseMax(Scalar(0))) : pre.back();
    }
    Vec g = seed;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& l = layers_[i];
      if (l.activation == Activation::relu)
        g = (pre[i].array() > Scalar(0)).select(g, Vec::Zero(g.size()));
      g = l.weights.transpose() * g;
    }
    return g;
  }

  /// Gradient of softmax cross-entropy with respect to the input.
  [[nodiscard]] Vec input_gradient(const Vec& x, ClassIndex label) const {
    check_label(label);
    Vec p = forward(x);
    // Loss is exactly zero (and flat) once the label probability saturates.
    if (p[label] == Scalar(1)) return Vec::Zero(x.size());
    p[label] -= Scalar(1);
    return backward_logits(x, p);
  }

  /// Rows are d logit_c / dx.
  [[nodiscard]] Mat logit_jacobian(const Vec& x) const {
    Mat jac(class_count(), input_dim());
    for (int c = 0; c < class_count(); ++c) jac.row(c) = backward_logits(x, Vec::Unit(class_count(), c)).transpose();
    return jac;
  }

  [[nodiscard]] Scalar loss(const Vec& x, ClassIndex label) const {
    check_label(label);
    const Vec z = logits(x);
    const Scalar m = z.maxCoeff();
    return std::log((z.array() - m).exp().sum()) + m - z[label];
  }

  template <typename To>
  [[nodiscard]] NeuralNet<To> cast() const {
    std::vector<DenseLayer<To>> out;
    for (const auto& l : layers_)
      out.push_back(DenseLayer<To>{l.weights.template cast<To>(), l.bias.template cast<To>(), l.activation});
    return NeuralNet<To>(std::move(out));
  }

  friend bool operator==(const NeuralNet& a, const NeuralNet& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto& la = a.layers_[i];
      const auto& lb = b.layers_[i];
      if (la.activation != lb.activation || la.weights.rows() != lb.weights.rows() ||
          la.weights.cols() != lb.weights.cols() || la.weights != lb.weights || la.bias != lb.bias)
        return false;
    }
    return true;
  }

 private:
  void check_input(const Vec& x) const {
    if (layers_.empty()) throw DimensionError("empty network");
    if (x.size() != input_dim())
      throw DimensionError("input length " + std::to_string(x.size()) + " != input_dim " +
                           std::to_string(input_dim()));
  }
  void check_label(ClassIndex label) const {
    if (label < 0 || label >= class_count()) throw DimensionError("label out of range");
  }

  std::vector<DenseLayer<Scalar>> layers_;
};

struct TrainConfig {
  double learning_rate = 0.05;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

/// Mini-batch SGD on softmax cross-entropy, no momentum. Sample order is
/// reshuffled every epoch from the seed; the run is single-threaded and
/// bit-deterministic.
template <typename Scalar>
TrainResult train(NeuralNet<Scalar>& net, const Dataset& d, const TrainConfig& hp) {
  using Mat = Matrix<Scalar>;
  using Vec = Vector<Scalar>;
  if (d.empty()) throw std::invalid_argument("cannot train on an empty dataset");
  if (hp.learning_rate < 0) throw std::invalid_argument("learning rate must be >= 0");
  if (hp.batch_size < 1 || hp.epochs < 0) throw std::invalid_argument("bad batch size or epoch count");
  if (static_cast<int>(d.feature_dim()) != net.input_dim()) throw DimensionError("dataset dim != input_dim");
  if (d.class_count > net.class_count()) throw DimensionError("dataset has more classes than the network");

  auto& layers = net.layers();
  const std::size_t depth = layers.size();
  const Scalar lr = static_cast<Scalar>(hp.learning_rate);
  std::mt19937_64 rng(splitmix64(hp.seed));
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainResult result;
  std::vector<Mat> pre(depth), act(depth + 1);
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    shuffle(order, rng);
    double total_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      const auto batch = static_cast<Eigen::Index>(stop - start);
      Mat x(net.input_dim(), batch);
      for (Eigen::Index j = 0; j < batch; ++j)
        x.col(j) = d.images[order[start + static_cast<std::size_t>(j)]].pixels.template cast<Scalar>();

      act[0] = std::move(x);
      for (std::size_t i = 0; i < depth; ++i) {
        pre[i] = (layers[i].weights * act[i]).colwise() + layers[i].bias;
        act[i + 1] = layers[i].activation == Activation::relu ? Mat(pre[i].cwiseMax(Scalar(0))) : pre[i];
      }

      Mat g(net.class_count(), batch);
      for (Eigen::Index j = 0; j < batch; ++j) {
        const ClassIndex y = d.images[order[start + static_cast<std::size_t>(j)]].label;
        const Vec z = act[depth].col(j);
        const Scalar m = z.maxCoeff();
        const Vec e = (z.array() - m).exp().matrix();
        const Scalar s = e.sum();
        total_loss += static_cast<double>(std::log(s) + m - z[y]);
        g.col(j) = e / s;
        g(y, j) -= Scalar(1);
      }
      g /= static_cast<Scalar>(batch);

      for (std::size_t i = depth; i-- > 0;) {
        if (layers[i].activation == Activation::relu) g = (pre[i].array() > Scalar(0)).select(g, Mat::Zero(g.rows(), g.cols()));
        const Mat grad_w = g * act[i].transpose();
        const Vec grad_b = g.rowwise().sum();
        if (i > 0) g = layers[i].weights.transpose() * g;
        layers[i].weights -= lr * grad_w;
        layers[i].bias -= lr * grad_b;
      }
    }
    result.epoch_loss.push_back(total_loss / static_cast<double>(d.size()));
  }
  return result;
}

/// Convenience overloads for images stored in double precision.
template <typename Scalar>
Vector<Scalar> forward(const NeuralNet<Scalar>& net, const Image& x) {
  return net.forward(x.pixels.template cast<Scalar>());
}

template <typename Scalar>
ClassIndex predict(const NeuralNet<Scalar>& net, const Image& x) {
  return net.predict(x.pixels.template cast<Scalar>());
}

template <typename Scalar>
Vector<Scalar> input_gradient(const NeuralNet<Scalar>& net, const Image& x, ClassIndex label) {
  return net.input_gradient(x.pixels.template cast<Scalar>(), label);
}

double accuracy(const NeuralNet<double>& net, const Dataset& d);

}  // namespace advaware
