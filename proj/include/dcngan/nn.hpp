#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dcngan/ops.hpp"

namespace dcngan::nn {

using Rng = std::mt19937_64;

enum class Mode { kTrain, kEval };

template <typename T>
struct NamedParam {
  std::string name;
  Var<T> var;
};

template <typename T>
struct NamedBuffer {
  std::string name;
  Tensor<T>* tensor;
};

// Flat, ordered view of a model's learnable parameters and state buffers.
// Vars share storage with the owning layers.
template <typename T>
struct ParamList {
  std::vector<NamedParam<T>> params;
  std::vector<NamedBuffer<T>> buffers;

  void add(const std::string& name, const Var<T>& v) { params.push_back({name, v}); }
  void add_buffer(const std::string& name, Tensor<T>& t) { buffers.push_back({name, &t}); }
  void append(const ParamList& other) {
    params.insert(params.end(), other.params.begin(), other.params.end());
    buffers.insert(buffers.end(), other.buffers.begin(), other.buffers.end());
  }
  std::size_t parameter_count() const;
  void zero_grad();
  void set_requires_grad(bool on);
};

// Kaiming-uniform for LeakyReLU(0.2) fan-in; biases start at zero.
template <typename T>
Tensor<T> kaiming_uniform(const Shape& shape, int fan_in, Rng& rng);

template <typename T>
struct Conv2d {
  Var<T> weight;
  Var<T> bias;
  int stride = 1;
  int padding = 0;

  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding, Rng& rng);

  Var<T> operator()(const Var<T>& x) const { return ops::conv2d(x, weight, bias, stride, padding); }
  void collect(ParamList<T>& out, const std::string& prefix) const;
  void zero();
  int out_channels() const { return weight.dim(0); }
};

template <typename T>
struct Linear {
  Var<T> weight;
  Var<T> bias;

  Linear() = default;
  Linear(int in_features, int out_features, Rng& rng);

  Var<T> operator()(const Var<T>& x) const { return ops::linear(x, weight, bias); }
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct BatchNorm2d {
  Var<T> gamma;
  Var<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  BatchNorm2d() = default;
  explicit BatchNorm2d(int channels);

  Var<T> operator()(const Var<T>& x, Mode mode) {
    return ops::batch_norm(x, gamma, beta, running_mean, running_var, mode == Mode::kTrain, momentum, eps);
  }
  void collect(ParamList<T>& out, const std::string& prefix);
};

template <typename T>
struct InstanceNorm2d {
  Var<T> gamma;
  Var<T> beta;
  T eps = T(1e-5);

  InstanceNorm2d() = default;
  explicit InstanceNorm2d(int channels);

  Var<T> operator()(const Var<T>& x) const { return ops::instance_norm(x, gamma, beta, eps); }
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

inline constexpr double kLeakySlope = 0.2;

template <typename T>
Var<T> lrelu(const Var<T>& x) {
  return ops::leaky_relu(x, static_cast<T>(kLeakySlope));
}

}  // namespace dcngan::nn
