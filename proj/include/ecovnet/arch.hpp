#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ecovnet/errors.hpp"

namespace ecov {

enum class StageOp { kConv, kMBConv1, kMBConv6 };

inline const char* stage_op_name(StageOp op) {
  switch (op) {
    case StageOp::kConv: return "conv";
    case StageOp::kMBConv1: return "mbconv1";
    case StageOp::kMBConv6: return "mbconv6";
  }
  return "?";
}

inline int stage_expansion(StageOp op) {
  switch (op) {
    case StageOp::kMBConv1: return 1;
    case StageOp::kMBConv6: return 6;
    default: return 0;
  }
}

struct StageSpec {
  StageOp op;
  int kernel;
  int stride;
  int64_t channels; // output channels
  int repeats;
  int se_ratio;      // gate bottleneck divisor, 0 disables SE
  bool skip_allowed; // residual add when stride 1 and channels match
};

struct ScalingCoefficients {
  double alpha = 1.2;
  double beta = 1.1;
  double gamma = 1.15;
  double phi = 0.0;

  double constraint_product() const { return alpha * beta * beta * gamma * gamma; }
};

struct ArchSpec {
  std::string name;
  int64_t resolution = 224;
  int input_channels = 3;
  int num_classes = 3;
  int64_t head_width = 512;
  double head_dropout = 0.3;
  double residual_dropout = 0.2;
  double bn_momentum = 0.99;
  double l1 = 1e-5;
  double l2 = 1e-3;
  std::vector<StageSpec> stages;

  int64_t downsample() const {
    int64_t d = 1;
    for (const auto& s : stages) d *= s.stride;
    return d;
  }
};

// Baseline nine-stage network table at 224x224.
ArchSpec b0_base();

// Three-stage-of-blocks miniature for fast end-to-end runs at 48x48.
ArchSpec micro_arch();

// Named variants: "b0".."b5" (compound-scaled with published resolutions) or "micro".
ArchSpec preset(const std::string& name);

// Nearest multiple of 8 (ties upward), floored at 8, bumped up one step when
// rounding would fall below 90% of the requested width.
int64_t round_channels(double value);

ArchSpec scale_arch(const ArchSpec& base, const ScalingCoefficients& coeffs);

std::string format_stage_table(const ArchSpec& spec);

} // namespace ecov
