#pragma once

// Dense feed-forward network over a flat parameter vector.
//
// Parameters are laid out layer by layer: W (out x in, column-major) then b.
// Batches are column-major matrices with one sample per column.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctr/errors.hpp"

namespace ctr::rl {

enum class Activation { Identity, Relu, Tanh };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

template <typename Scalar>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using ConstMap = Eigen::Map<const Matrix>;
  using MutMap = Eigen::Map<Matrix>;

  Mlp() = default;
  Mlp(std::vector<int> sizes, Activation hidden, Activation output)
      : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
    if (sizes_.size() < 2) throw DimensionMismatch("network needs at least input and output sizes");
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(n);
      n += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
    }
    params_ = Vector::Zero(static_cast<Eigen::Index>(n));
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  Eigen::Index num_params() const { return params_.size(); }

  Vector& params() { return params_; }
  const Vector& params() const { return params_; }

  ConstMap weight(int l) const { return ConstMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]); }
  MutMap weight(int l) { return MutMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]); }
  Eigen::Map<const Vector> bias(int l) const {
    return Eigen::Map<const Vector>(params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
  }
  Eigen::Map<Vector> bias(int l) {
    return Eigen::Map<Vector>(params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
  }

  // Fan-in uniform init for hidden layers; the output layer is drawn from
  // U[-final_scale, final_scale].
  template <typename Gen>
  void init(Gen& rng, Scalar final_scale = Scalar(3e-3)) {
    for (int l = 0; l < num_layers(); ++l) {
      const Scalar bound = l + 1 == num_layers() ? final_scale : Scalar(1) / std::sqrt(Scalar(sizes_[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      auto W = weight(l);
      for (Eigen::Index k = 0; k < W.size(); ++k) W.data()[k] = Scalar(u(rng));
      auto b = bias(l);
      for (Eigen::Index k = 0; k < b.size(); ++k) b[k] = Scalar(u(rng));
    }
  }

  // Cached activations of the last forward pass, needed by backward().
  struct Tape {
    std::vector<Matrix> a;  // a[0] = input, a[l+1] = output of layer l
  };

  Matrix forward(const Matrix& x, Tape* tape = nullptr) const {
    check_input(x.rows());
    Matrix a = x;
    if (tape) {
      tape->a.resize(sizes_.size());
      tape->a[0] = x;
    }
    for (int l = 0; l < num_layers(); ++l) {
      Matrix z = weight(l) * a;
      z.colwise() += bias(l);
      apply(z, l + 1 == num_layers() ? output_ : hidden_);
      a = std::move(z);
      if (tape) tape->a[l + 1] = a;
    }
    return a;
  }

  Vector forward_one(const Vector& x) const { return forward(Matrix(x)).col(0); }

  // Given dLoss/dOutput for the taped batch, accumulates dLoss/dParams into
  // `grad` (resized and zeroed when empty) and returns dLoss/dInput.
  Matrix backward(const Tape& tape, const Matrix& grad_out, Vector& grad, bool want_params = true) const {
    if (grad_out.rows() != output_dim()) throw DimensionMismatch("gradient rows do not match network output");
    if (want_params && grad.size() != params_.size()) grad = Vector::Zero(params_.size());
    Matrix delta = grad_out;
    for (int l = num_layers() - 1; l >= 0; --l) {
      scale_by_derivative(delta, tape.a[l + 1], l + 1 == num_layers() ? output_ : hidden_);
      if (want_params) {
        MutMap gW(grad.data() + offsets_[l], sizes_[l + 1], sizes_[l]);
        gW.noalias() += delta * tape.a[l].transpose();
        Eigen::Map<Vector>(grad.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]) +=
            delta.rowwise().sum();
      }
      Matrix next = weight(l).transpose() * delta;
      delta = std::move(next);
    }
    return delta;
  }

  template <typename Other>
  Mlp<Other> cast() const {
    Mlp<Other> out(sizes_, hidden_, output_);
    out.params() = params_.template cast<Other>();
    return out;
  }

 private:
  void check_input(Eigen::Index rows) const {
    if (rows != input_dim()) {
      throw DimensionMismatch("network expects input dimension " + std::to_string(input_dim()) + ", got " +
                              std::to_string(rows));
    }
  }

  static void apply(Matrix& z, Activation act) {
    switch (act) {
      case Activation::Identity: break;
      case Activation::Relu: z = z.cwiseMax(Scalar(0)); break;
      case Activation::Tanh: z = z.array().tanh().matrix(); break;
    }
  }

  // Derivative expressed through the activation output.
  static void scale_by_derivative(Matrix& delta, const Matrix& out, Activation act) {
    switch (act) {
      case Activation::Identity: break;
      case Activation::Relu: delta = (out.array() > Scalar(0)).select(delta, Scalar(0)); break;
      case Activation::Tanh: delta.array() *= (Scalar(1) - out.array().square()); break;
    }
  }

  std::vector<int> sizes_;
  std::vector<std::size_t> offsets_;
  Activation hidden_ = Activation::Relu;
  Activation output_ = Activation::Identity;
  Vector params_;
};

// Adam on a flat parameter vector.
template <typename Scalar>
class Adam {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Adam() = default;
  Adam(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  void step(Vector& params, const Vector& grad) {
    ++t_;
    m_ = Scalar(b1_) * m_ + Scalar(1 - b1_) * grad;
    v_ = Scalar(b2_) * v_ + Scalar(1 - b2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
    const Scalar step = Scalar(lr_ * std::sqrt(c2) / c1);
    params.array() -= step * m_.array() / (v_.array().sqrt() + Scalar(eps_ * std::sqrt(c2)));
  }

  long long steps() const { return t_; }

 private:
  double lr_ = 1e-3, b1_ = 0.9, b2_ = 0.999, eps_ = 1e-8;
  long long t_ = 0;
  Vector m_, v_;
};

}  // namespace ctr::rl
