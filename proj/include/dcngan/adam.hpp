#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcngan/archive.hpp"
#include "dcngan/nn.hpp"

namespace dcngan {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction over a fixed parameter list.
template <typename T>
class Adam {
 public:
  Adam(nn::ParamList<T> params, AdamConfig config);

  // Applies one update from the accumulated gradients (missing ones count as
  // zero) and then clears them.
  void step();
  void zero_grad() { params_.zero_grad(); }

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

  void store_state(TensorArchive& archive, const std::string& prefix) const;
  void load_state(const TensorArchive& archive, const std::string& prefix);

 private:
  nn::ParamList<T> params_;
  AdamConfig config_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  std::int64_t t_ = 0;
};

}  // namespace dcngan
