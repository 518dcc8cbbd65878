#include "dcngan/nn.hpp"

#include <cmath>

namespace dcngan::nn {

template <typename T>
std::size_t ParamList<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.var.value().size();
  return n;
}

template <typename T>
void ParamList<T>::zero_grad() {
  for (auto& p : params) p.var.zero_grad();
}

template <typename T>
void ParamList<T>::set_requires_grad(bool on) {
  for (auto& p : params) p.var.set_requires_grad(on);
}

template <typename T>
Tensor<T> kaiming_uniform(const Shape& shape, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / ((1.0 + kLeakySlope * kLeakySlope) * fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int s, int p, Rng& rng)
    : weight(kaiming_uniform<T>({out_channels, in_channels, kernel, kernel}, in_channels * kernel * kernel, rng),
             true),
      bias(Tensor<T>({out_channels}), true),
      stride(s),
      padding(p) {}

template <typename T>
void Conv2d<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.add(prefix + ".weight", weight);
  out.add(prefix + ".bias", bias);
}

template <typename T>
void Conv2d<T>::zero() {
  weight.mutable_value().fill(T(0));
  bias.mutable_value().fill(T(0));
}

template <typename T>
Linear<T>::Linear(int in_features, int out_features, Rng& rng)
    : weight(kaiming_uniform<T>({out_features, in_features}, in_features, rng), true),
      bias(Tensor<T>({out_features}), true) {}

template <typename T>
void Linear<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.add(prefix + ".weight", weight);
  out.add(prefix + ".bias", bias);
}

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int channels)
    : gamma(Tensor<T>({channels}, T(1)), true),
      beta(Tensor<T>({channels}), true),
      running_mean({channels}),
      running_var({channels}, T(1)) {}

template <typename T>
void BatchNorm2d<T>::collect(ParamList<T>& out, const std::string& prefix) {
  out.add(prefix + ".gamma", gamma);
  out.add(prefix + ".beta", beta);
  out.add_buffer(prefix + ".running_mean", running_mean);
  out.add_buffer(prefix + ".running_var", running_var);
}

template <typename T>
InstanceNorm2d<T>::InstanceNorm2d(int channels)
    : gamma(Tensor<T>({channels}, T(1)), true), beta(Tensor<T>({channels}), true) {}

template <typename T>
void InstanceNorm2d<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.add(prefix + ".gamma", gamma);
  out.add(prefix + ".beta", beta);
}

template struct ParamList<float>;
template struct ParamList<double>;
template Tensor<float> kaiming_uniform(const Shape&, int, Rng&);
template Tensor<double> kaiming_uniform(const Shape&, int, Rng&);
template struct Conv2d<float>;
template struct Conv2d<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct BatchNorm2d<float>;
template struct BatchNorm2d<double>;
template struct InstanceNorm2d<float>;
template struct InstanceNorm2d<double>;

}  // namespace dcngan::nn
