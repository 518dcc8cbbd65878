#include "dcngan/config.hpp"

#include "dcngan/errors.hpp"

namespace dcngan {

AlignBackend parse_align_backend(const std::string& name) {
  if (name == "dconv") return AlignBackend::kDeformable;
  if (name == "flow") return AlignBackend::kFlow;
  throw ConfigError("unknown align backend '" + name + "' (expected dconv or flow)");
}

std::string to_string(AlignBackend backend) { return backend == AlignBackend::kFlow ? "flow" : "dconv"; }

void ModelConfig::validate() const {
  validate_qp_set(qp_set);
  auto positive = [](int v, const char* what) {
    if (v < 1) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(align_channels, "align_channels");
  positive(unet_base, "unet_base");
  positive(unet_levels, "unet_levels");
  positive(enc_base, "enc_base");
  positive(res_blocks, "res_blocks");
  positive(disc_base, "disc_base");
  positive(flow_levels, "flow_levels");
  positive(flow_iterations, "flow_iterations");
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.align_channels = 16;
  c.unet_base = 8;
  c.enc_base = 8;
  c.disc_base = 16;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"qp_set", c.qp_set},
                     {"align_backend", to_string(c.align_backend)},
                     {"align_channels", c.align_channels},
                     {"unet_base", c.unet_base},
                     {"unet_levels", c.unet_levels},
                     {"enc_base", c.enc_base},
                     {"res_blocks", c.res_blocks},
                     {"shared_qp_fc", c.shared_qp_fc},
                     {"modulate_after_bn", c.modulate_after_bn},
                     {"global_skip", c.global_skip},
                     {"disc_base", c.disc_base},
                     {"flow_levels", c.flow_levels},
                     {"flow_iterations", c.flow_iterations}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  ModelConfig d;
  c.qp_set = j.value("qp_set", d.qp_set);
  c.align_backend = parse_align_backend(j.value("align_backend", to_string(d.align_backend)));
  c.align_channels = j.value("align_channels", d.align_channels);
  c.unet_base = j.value("unet_base", d.unet_base);
  c.unet_levels = j.value("unet_levels", d.unet_levels);
  c.enc_base = j.value("enc_base", d.enc_base);
  c.res_blocks = j.value("res_blocks", d.res_blocks);
  c.shared_qp_fc = j.value("shared_qp_fc", d.shared_qp_fc);
  c.modulate_after_bn = j.value("modulate_after_bn", d.modulate_after_bn);
  c.global_skip = j.value("global_skip", d.global_skip);
  c.disc_base = j.value("disc_base", d.disc_base);
  c.flow_levels = j.value("flow_levels", d.flow_levels);
  c.flow_iterations = j.value("flow_iterations", d.flow_iterations);
  c.validate();
}

void VggConfig::validate() const {
  if (layer_ids.empty()) throw ConfigError("VGG layer list is empty");
  for (std::size_t i = 0; i < layer_ids.size(); ++i) {
    if (layer_ids[i] < 0 || layer_ids[i] > 15) throw ConfigError("VGG layer id outside [0, 15]");
    if (i && layer_ids[i] <= layer_ids[i - 1]) throw ConfigError("VGG layer ids must be strictly increasing");
  }
  if (width_divisor < 1 || width_divisor > 64) throw ConfigError("VGG width divisor must be in [1, 64]");
}

VggConfig VggConfig::desk() {
  VggConfig c;
  c.width_divisor = 8;
  return c;
}

void to_json(nlohmann::json& j, const VggConfig& c) {
  j = nlohmann::json{{"layer_ids", c.layer_ids},
                     {"width_divisor", c.width_divisor},
                     {"weights_path", c.weights_path},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, VggConfig& c) {
  VggConfig d;
  c.layer_ids = j.value("layer_ids", d.layer_ids);
  c.width_divisor = j.value("width_divisor", d.width_divisor);
  c.weights_path = j.value("weights_path", d.weights_path);
  c.seed = j.value("seed", d.seed);
  c.validate();
}

}  // namespace dcngan
