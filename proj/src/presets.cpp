#include "sinkcpd/presets.hpp"

#include "sinkcpd/error.hpp"

namespace sinkcpd {

const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = {
      {"gmm", 5, 10, 0.1, 0.01, 0.0, 0, 2000},
      {"freq", 50, 100, 1.0, 0.01, 0.0, 0, 2000},
      {"freq-slope", 50, 100, 1.0, 0.01, 5e-5, 0, 2000},
      {"beedance", 3, 15, 0.1, 0.01, 0.0, 0, 2000},
      {"hasc", 3, 200, 0.1, 0.01, 0.0, 0, 2000},
      {"yahoo", 5, 2, 0.1, 0.001, 0.0, 0, 2000},
      {"ecg", 2, 3, 0.001, 0.001, 0.0, 0, 2000},
      {"sleep", 42, 15, 1.0, 0.01, 0.01, 10, 2000},
  };
  return table;
}

const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  std::string known;
  for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw InputError("unknown preset '" + name + "' (known: " + known + ")");
}

void apply_preset(const Preset& preset, TrainConfig& cfg) {
  cfg.projection_dim = preset.projection_dim;
  cfg.window = preset.window;
  cfg.gamma = preset.gamma;
  cfg.learn_rate = preset.learn_rate;
  cfg.l1_weight = preset.l1_weight;
  cfg.buffer = preset.buffer;
  cfg.iterations = preset.iterations;
}

}  // namespace sinkcpd
