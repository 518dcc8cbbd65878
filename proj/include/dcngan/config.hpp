#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "dcngan/qp.hpp"

namespace dcngan {

enum class AlignBackend { kDeformable, kFlow };

AlignBackend parse_align_backend(const std::string& name);  // "dconv" | "flow"
std::string to_string(AlignBackend backend);

// Architecture of generator and discriminator. Defaults are the full-size
// network; desk() is the narrow variant used for CPU training runs.
struct ModelConfig {
  std::vector<int> qp_set = kDefaultQpSet;
  AlignBackend align_backend = AlignBackend::kDeformable;
  int align_channels = 64;  // C_a
  int unet_base = 32;
  int unet_levels = 3;
  int enc_base = 64;  // encoder widths enc_base, 2x, 4x; residual width C_r = 4x
  int res_blocks = 9;
  bool shared_qp_fc = false;
  bool modulate_after_bn = true;  // conv1 -> BN -> scale -> ReLU
  bool global_skip = false;
  int disc_base = 64;
  int flow_levels = 3;
  int flow_iterations = 3;

  int residual_channels() const { return 4 * enc_base; }
  void validate() const;
  static ModelConfig desk();

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

// Fixed feature extractor for the perceptual loss (19-layer VGG layout).
struct VggConfig {
  // Indices of the ReLU outputs used, among the 16 conv layers (0-based).
  std::vector<int> layer_ids{1, 3, 7, 11, 15};
  int width_divisor = 1;
  std::string weights_path;  // empty: seeded random weights
  unsigned long long seed = 19;

  void validate() const;
  static VggConfig desk();

  bool operator==(const VggConfig&) const = default;
};

void to_json(nlohmann::json& j, const VggConfig& c);
void from_json(const nlohmann::json& j, VggConfig& c);

}  // namespace dcngan
