#include "dcngan/adam.hpp"

#include <cmath>

namespace dcngan {

template <typename T>
Adam<T>::Adam(nn::ParamList<T> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_.params) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

template <typename T>
void Adam<T>::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  const T b1 = static_cast<T>(config_.beta1), b2 = static_cast<T>(config_.beta2);
  const T step_size = static_cast<T>(config_.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(config_.eps);
  for (std::size_t i = 0; i < params_.params.size(); ++i) {
    auto& var = params_.params[i].var;
    const auto& g = var.grad();
    auto& value = var.mutable_value();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      m[j] = b1 * m[j] + (T(1) - b1) * g[j];
      v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
      value[j] -= step_size * m[j] / (std::sqrt(v[j] * inv_c2) + eps);
    }
  }
  params_.zero_grad();
}

template <typename T>
void Adam<T>::store_state(TensorArchive& archive, const std::string& prefix) const {
  for (std::size_t i = 0; i < params_.params.size(); ++i) {
    archive.add(prefix + "m." + params_.params[i].name, m_[i].template cast<float>());
    archive.add(prefix + "v." + params_.params[i].name, v_[i].template cast<float>());
  }
  archive.meta[prefix + "t"] = t_;
}

template <typename T>
void Adam<T>::load_state(const TensorArchive& archive, const std::string& prefix) {
  for (std::size_t i = 0; i < params_.params.size(); ++i) {
    m_[i] = archive.get(prefix + "m." + params_.params[i].name, m_[i].shape()).template cast<T>();
    v_[i] = archive.get(prefix + "v." + params_.params[i].name, v_[i].shape()).template cast<T>();
  }
  t_ = archive.meta.at(prefix + "t").template get<std::int64_t>();
}

template class Adam<float>;
template class Adam<double>;

}  // namespace dcngan
