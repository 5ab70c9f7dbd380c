#pragma once

// Named hyper-parameter rows for the benchmark datasets.

#include "sinkcpd/metric_learn.hpp"

#include <string>
#include <vector>

namespace sinkcpd {

struct Preset {
  std::string name;
  Index projection_dim;
  Index window;
  double gamma;
  double learn_rate;
  double l1_weight;
  Index buffer;
  int iterations;
};

const std::vector<Preset>& presets();

/// Throws InputError listing the known names.
const Preset& find_preset(const std::string& name);

/// Copies the preset's fields into `cfg`; everything else is left alone.
void apply_preset(const Preset& preset, TrainConfig& cfg);

}  // namespace sinkcpd
