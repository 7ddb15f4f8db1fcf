#include "ecovnet/arch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

namespace ecov {

ArchSpec b0_base() {
  ArchSpec spec;
  spec.name = "b0";
  spec.resolution = 224;
  spec.input_channels = 3;
  spec.num_classes = 3;
  spec.head_width = 512;
  spec.stages = {
      {StageOp::kConv, 3, 2, 32, 1, 0, false},
      {StageOp::kMBConv1, 3, 1, 16, 1, 4, true},
      {StageOp::kMBConv6, 3, 2, 24, 2, 24, true},
      {StageOp::kMBConv6, 5, 2, 40, 2, 24, true},
      {StageOp::kMBConv6, 3, 2, 80, 3, 24, true},
      {StageOp::kMBConv6, 5, 1, 112, 3, 24, true},
      {StageOp::kMBConv6, 5, 2, 192, 4, 24, true},
      {StageOp::kMBConv6, 3, 1, 320, 1, 24, true},
      {StageOp::kConv, 1, 1, 1280, 1, 0, false},
  };
  return spec;
}

ArchSpec micro_arch() {
  ArchSpec spec;
  spec.name = "micro";
  spec.resolution = 48;
  spec.input_channels = 3;
  spec.num_classes = 3;
  spec.head_width = 96;
  // a net this small overfits nothing in a few hundred steps; dropout only slows it down
  spec.head_dropout = 0.0;
  spec.residual_dropout = 0.0;
  // short runs take few optimizer steps per epoch, so running statistics must track faster
  spec.bn_momentum = 0.90;
  spec.stages = {
      {StageOp::kConv, 3, 2, 16, 1, 0, false},
      {StageOp::kMBConv1, 3, 1, 16, 1, 4, true},
      {StageOp::kMBConv6, 3, 2, 24, 1, 24, true},
      {StageOp::kMBConv6, 5, 2, 32, 1, 24, true},
      {StageOp::kConv, 1, 1, 96, 1, 0, false},
  };
  return spec;
}

int64_t round_channels(double value) {
  if (!(value > 0)) throw ArgumentError("round_channels: width must be positive");
  int64_t rounded = static_cast<int64_t>(std::floor(value / 8.0 + 0.5)) * 8;
  rounded = std::max<int64_t>(rounded, 8);
  if (static_cast<double>(rounded) < 0.9 * value) rounded += 8;
  return rounded;
}

ArchSpec scale_arch(const ArchSpec& base, const ScalingCoefficients& coeffs) {
  if (coeffs.phi < 0) throw ArgumentError("scale_arch: phi must be nonnegative");
  if (coeffs.alpha < 1 || coeffs.beta < 1 || coeffs.gamma < 1)
    throw ArgumentError("scale_arch: alpha, beta, gamma must each be >= 1");

  const double product = coeffs.constraint_product();
  if (std::abs(product - 2.0) > 0.2)
    std::cerr << "warning: alpha*beta^2*gamma^2 = " << product << " deviates from 2 by more than 10%\n";

  const double depth_mult = std::pow(coeffs.alpha, coeffs.phi);
  const double width_mult = std::pow(coeffs.beta, coeffs.phi);
  const double res_mult = std::pow(coeffs.gamma, coeffs.phi);

  ArchSpec out = base;
  out.resolution = static_cast<int64_t>(std::llround(static_cast<double>(base.resolution) * res_mult));
  for (auto& st : out.stages) {
    st.channels = round_channels(static_cast<double>(st.channels) * width_mult);
    // depth scaling applies to the repeatable block stages, not the fixed stem
    // and top convolutions
    if (st.op != StageOp::kConv)
      st.repeats = static_cast<int>(std::ceil(st.repeats * depth_mult - 1e-9));
  }
  out.head_width = base.head_width;
  return out;
}

ArchSpec preset(const std::string& name) {
  if (name == "micro") return micro_arch();
  static const int64_t resolutions[] = {224, 240, 260, 360, 380, 456};
  if (name.size() == 2 && name[0] == 'b' && name[1] >= '0' && name[1] <= '5') {
    const int k = name[1] - '0';
    ScalingCoefficients coeffs;
    coeffs.phi = static_cast<double>(k);
    ArchSpec spec = scale_arch(b0_base(), coeffs);
    spec.resolution = resolutions[k]; // published resolutions, not the raw gamma^phi rounding
    spec.name = name;
    return spec;
  }
  throw ArgumentError("preset: unknown architecture '" + name + "' (expected b0..b5 or micro)");
}

std::string format_stage_table(const ArchSpec& spec) {
  std::ostringstream os;
  os << "arch: " << spec.name << "  input: " << spec.input_channels << "x" << spec.resolution << "x"
     << spec.resolution << "  classes: " << spec.num_classes << "  head width: " << spec.head_width
     << "\n";
  os << "stage  operator  kernel  stride  channels  repeats  resolution\n";
  int64_t res = spec.resolution;
  int idx = 1;
  for (const auto& st : spec.stages) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-5d  %-8s  %-6d  %-6d  %-8lld  %-7d  %lldx%lld\n", idx,
                  stage_op_name(st.op), st.kernel, st.stride, static_cast<long long>(st.channels),
                  st.repeats, static_cast<long long>(res), static_cast<long long>(res));
    os << line;
    res = (res + st.stride - 1) / st.stride;
    ++idx;
  }
  os << "final feature map: " << res << "x" << res << "\n";
  return os.str();
}

} // namespace ecov
