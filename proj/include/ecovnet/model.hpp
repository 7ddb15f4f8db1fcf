#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ecovnet/arch.hpp"
#include "ecovnet/ops.hpp"
#include "ecovnet/rng.hpp"
#include "ecovnet/tensor.hpp"

// Network assembly: backbone stages from an ArchSpec, global pooling, and the
// two-layer classifier head. Layers cache what their backward pass needs, so a
// forward call must precede the matching backward call.

namespace ecov {

template <typename T>
struct ParamView {
  std::string name;
  Tensor<T>* tensor;
  bool trainable;   // false for BN running stats
  bool regularized; // true only for head FC weights under the L1/L2 terms
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) = 0;
  // Consumes the cached forward state, accumulates parameter gradients, and
  // returns the gradient with respect to the layer input.
  virtual Tensor<T> backward(const Tensor<T>& gy) = 0;
  virtual void collect(const std::string& prefix, std::vector<ParamView<T>>& out) = 0;
};

template <typename T>
class Conv2dLayer final : public Layer<T> {
 public:
  Conv2dLayer(int64_t cin, int64_t cout, int kernel, int stride, Rng& rng)
      : kernel_({cout, cin, kernel, kernel}), stride_(stride) {
    const T scale = std::sqrt(T(2) / static_cast<T>(cin * kernel * kernel));
    for (auto& v : kernel_.data()) v = static_cast<T>(rng.normal()) * scale;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    x_ = x;
    return conv2d(x, kernel_, stride_, Padding::kSame);
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    x_.zero_grad();
    conv2d_backward(x_, kernel_, stride_, Padding::kSame, gy);
    return x_.take_grad();
  }

  void collect(const std::string& prefix, std::vector<ParamView<T>>& out) override {
    out.push_back({prefix + "/kernel", &kernel_, true, false});
  }

  Tensor<T>& kernel() { return kernel_; }

 private:
  Tensor<T> kernel_;
  int stride_;
  Tensor<T> x_;
};

template <typename T>
class DepthwiseLayer final : public Layer<T> {
 public:
  DepthwiseLayer(int64_t channels, int kernel, int stride, Rng& rng)
      : kernel_({channels, kernel, kernel}), stride_(stride) {
    const T scale = std::sqrt(T(2) / static_cast<T>(kernel * kernel));
    for (auto& v : kernel_.data()) v = static_cast<T>(rng.normal()) * scale;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    x_ = x;
    return depthwise_conv2d(x, kernel_, stride_, Padding::kSame);
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    x_.zero_grad();
    depthwise_conv2d_backward(x_, kernel_, stride_, Padding::kSame, gy);
    return x_.take_grad();
  }

  void collect(const std::string& prefix, std::vector<ParamView<T>>& out) override {
    out.push_back({prefix + "/kernel", &kernel_, true, false});
  }

 private:
  Tensor<T> kernel_;
  int stride_;
  Tensor<T> x_;
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  explicit BatchNormLayer(int64_t channels, double momentum = kMomentum)
      : momentum_(momentum),
        gamma_(Tensor<T>::full({channels}, T(1))),
        beta_({channels}),
        running_mean_({channels}),
        running_var_(Tensor<T>::full({channels}, T(1))) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng&) override {
    x_ = x;
    return batch_norm(x_, gamma_, beta_, running_mean_, running_var_, static_cast<T>(kEps),
                      static_cast<T>(momentum_), mode, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    x_.zero_grad();
    batch_norm_backward(x_, gamma_, beta_, cache_, gy);
    return x_.take_grad();
  }

  void collect(const std::string& prefix, std::vector<ParamView<T>>& out) override {
    out.push_back({prefix + "/gamma", &gamma_, true, false});
    out.push_back({prefix + "/beta", &beta_, true, false});
    out.push_back({prefix + "/running_mean", &running_mean_, false, false});
    out.push_back({prefix + "/running_var", &running_var_, false, false});
  }

  static constexpr double kEps = 1e-3;
  static constexpr double kMomentum = 0.99;

 private:
  double momentum_ = kMomentum;
  Tensor<T> gamma_, beta_, running_mean_, running_var_;
  BnCache<T> cache_;
  Tensor<T> x_;
};

template <typename T>
class ActLayer final : public Layer<T> {
 public:
  explicit ActLayer(Act kind) : kind_(kind) {}

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    x_ = x;
    return activation(kind_, x);
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    x_.zero_grad();
    activation_backward(kind_, x_, gy);
    return x_.take_grad();
  }

  void collect(const std::string&, std::vector<ParamView<T>>&) override {}

 private:
  Act kind_;
  Tensor<T> x_;
};

template <typename T>
class SeLayer final : public Layer<T> {
 public:
  SeLayer(int64_t channels, int reduce_ratio, Rng& rng)
      : ratio_(reduce_ratio), params_(make_se_params<T>(channels, reduce_ratio, rng)) {}

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    x_ = x;
    return squeeze_excite(x, ratio_, params_, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    x_.zero_grad();
    squeeze_excite_backward(x_, params_, cache_, gy);
    return x_.take_grad();
  }

  void collect(const std::string& prefix, std::vector<ParamView<T>>& out) override {
    out.push_back({prefix + "/w1", &params_.w1, true, false});
    out.push_back({prefix + "/b1", &params_.b1, true, false});
    out.push_back({prefix + "/w2", &params_.w2, true, false});
    out.push_back({prefix + "/b2", &params_.b2, true, false});
  }

 private:
  int ratio_;
  SeParams<T> params_;
  SeCache<T> cache_;
  Tensor<T> x_;
};

template <typename T>
class GapLayer final : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    x_ = x;
    return global_avg_pool(x);
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    x_.zero_grad();
    global_avg_pool_backward(x_, gy);
    return x_.take_grad();
  }

  void collect(const std::string&, std::vector<ParamView<T>>&) override {}

 private:
  Tensor<T> x_;
};

template <typename T>
class FcLayer final : public Layer<T> {
 public:
  FcLayer(int64_t cin, int64_t cout, bool regularized, Rng& rng)
      : weight_({cin, cout}), bias_({cout}), regularized_(regularized) {
    const T scale = std::sqrt(T(2) / static_cast<T>(cin));
    for (auto& v : weight_.data()) v = static_cast<T>(rng.normal()) * scale;
  }

  Tensor<T> forward(const Tensor<T>& x, Mode, Rng&) override {
    x_ = x;
    return fully_connected(x, weight_, bias_);
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    x_.zero_grad();
    fully_connected_backward(x_, weight_, bias_, gy);
    return x_.take_grad();
  }

  void collect(const std::string& prefix, std::vector<ParamView<T>>& out) override {
    out.push_back({prefix + "/weight", &weight_, true, regularized_});
    out.push_back({prefix + "/bias", &bias_, true, regularized_});
  }

 private:
  Tensor<T> weight_, bias_;
  bool regularized_;
  Tensor<T> x_;
};

template <typename T>
class DropoutLayer final : public Layer<T> {
 public:
  explicit DropoutLayer(double p) : p_(p) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override {
    shape_ = x.shape();
    return dropout(x, p_, mode, rng, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> holder(shape_);
    dropout_backward(holder, cache_, gy);
    return holder.take_grad();
  }

  void collect(const std::string&, std::vector<ParamView<T>>&) override {}

 private:
  double p_;
  DropoutCache<T> cache_;
  std::vector<int64_t> shape_;
};

// Mobile inverted bottleneck: optional 1x1 expansion, depthwise conv, channel
// gating, 1x1 projection, and a residual add with branch dropout when the
// geometry permits.
template <typename T>
class MBConvBlock final : public Layer<T> {
 public:
  MBConvBlock(int64_t cin, int64_t cout, int kernel, int stride, int expansion, int se_ratio,
              bool skip_allowed, double residual_dropout, double bn_momentum, Rng& rng)
      : skip_(skip_allowed && stride == 1 && cin == cout) {
    const int64_t mid = cin * expansion;
    if (expansion > 1) {
      expand_conv_ = std::make_unique<Conv2dLayer<T>>(cin, mid, 1, 1, rng);
      expand_bn_ = std::make_unique<BatchNormLayer<T>>(mid, bn_momentum);
      expand_act_ = std::make_unique<ActLayer<T>>(Act::kSwish);
    }
    dw_ = std::make_unique<DepthwiseLayer<T>>(mid, kernel, stride, rng);
    dw_bn_ = std::make_unique<BatchNormLayer<T>>(mid, bn_momentum);
    dw_act_ = std::make_unique<ActLayer<T>>(Act::kSwish);
    se_ = std::make_unique<SeLayer<T>>(mid, se_ratio, rng);
    project_conv_ = std::make_unique<Conv2dLayer<T>>(mid, cout, 1, 1, rng);
    project_bn_ = std::make_unique<BatchNormLayer<T>>(cout, bn_momentum);
    if (skip_) branch_dropout_ = std::make_unique<DropoutLayer<T>>(residual_dropout);
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) override {
    Tensor<T> h = x;
    if (expand_conv_) {
      h = expand_conv_->forward(h, mode, rng);
      h = expand_bn_->forward(h, mode, rng);
      h = expand_act_->forward(h, mode, rng);
    }
    h = dw_->forward(h, mode, rng);
    h = dw_bn_->forward(h, mode, rng);
    h = dw_act_->forward(h, mode, rng);
    h = se_->forward(h, mode, rng);
    h = project_conv_->forward(h, mode, rng);
    h = project_bn_->forward(h, mode, rng);
    if (skip_) {
      h = branch_dropout_->forward(h, mode, rng);
      for (int64_t i = 0; i < h.numel(); ++i) h[i] += x[i];
    }
    return h;
  }

  Tensor<T> backward(const Tensor<T>& gy) override {
    Tensor<T> g = gy;
    if (skip_) g = branch_dropout_->backward(g);
    g = project_bn_->backward(g);
    g = project_conv_->backward(g);
    g = se_->backward(g);
    g = dw_act_->backward(g);
    g = dw_bn_->backward(g);
    g = dw_->backward(g);
    if (expand_conv_) {
      g = expand_act_->backward(g);
      g = expand_bn_->backward(g);
      g = expand_conv_->backward(g);
    }
    if (skip_) {
      for (int64_t i = 0; i < g.numel(); ++i) g[i] += gy[i];
    }
    return g;
  }

  void collect(const std::string& prefix, std::vector<ParamView<T>>& out) override {
    if (expand_conv_) {
      expand_conv_->collect(prefix + "/expand", out);
      expand_bn_->collect(prefix + "/expand_bn", out);
    }
    dw_->collect(prefix + "/dw", out);
    dw_bn_->collect(prefix + "/dw_bn", out);
    se_->collect(prefix + "/se", out);
    project_conv_->collect(prefix + "/project", out);
    project_bn_->collect(prefix + "/project_bn", out);
  }

  bool has_skip() const { return skip_; }

 private:
  bool skip_;
  std::unique_ptr<Conv2dLayer<T>> expand_conv_;
  std::unique_ptr<BatchNormLayer<T>> expand_bn_;
  std::unique_ptr<ActLayer<T>> expand_act_;
  std::unique_ptr<DepthwiseLayer<T>> dw_;
  std::unique_ptr<BatchNormLayer<T>> dw_bn_;
  std::unique_ptr<ActLayer<T>> dw_act_;
  std::unique_ptr<SeLayer<T>> se_;
  std::unique_ptr<Conv2dLayer<T>> project_conv_;
  std::unique_ptr<BatchNormLayer<T>> project_bn_;
  std::unique_ptr<DropoutLayer<T>> branch_dropout_;
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;
  Tensor<T> probs;
};

template <typename T>
class Model {
 public:
  Model(const ArchSpec& spec, uint64_t seed) : spec_(spec) {
    if (spec.stages.empty()) throw ArgumentError("model: spec has no stages");
    if (spec.resolution < spec.downsample())
      throw ArgumentError("model: resolution " + std::to_string(spec.resolution) +
                          " is smaller than the total downsampling factor " +
                          std::to_string(spec.downsample()));
    Rng rng(mix_seed(seed, 0x6d6f64656cULL));

    int64_t cin = spec.input_channels;
    int stage_idx = 1, block_idx = 0;
    for (const auto& st : spec.stages) {
      for (int r = 0; r < st.repeats; ++r) {
        const int stride = r == 0 ? st.stride : 1;
        if (st.op == StageOp::kConv) {
          auto tag = "stage" + std::to_string(stage_idx) + (st.repeats > 1 ? "_" + std::to_string(r) : "");
          backbone_.push_back(named(tag + "/conv", std::make_unique<Conv2dLayer<T>>(
                                                       cin, st.channels, st.kernel, stride, rng)));
          backbone_.push_back(named(
              tag + "/bn", std::make_unique<BatchNormLayer<T>>(st.channels, spec.bn_momentum)));
          backbone_.push_back(named(tag + "/act", std::make_unique<ActLayer<T>>(Act::kSwish)));
        } else {
          auto tag = "block" + std::to_string(block_idx++);
          backbone_.push_back(named(
              tag, std::make_unique<MBConvBlock<T>>(cin, st.channels, st.kernel, stride,
                                                    stage_expansion(st.op), st.se_ratio,
                                                    st.skip_allowed, spec.residual_dropout,
                                                    spec.bn_momentum, rng)));
        }
        cin = st.channels;
      }
      ++stage_idx;
    }
    feature_channels_ = cin;

    gap_ = std::make_unique<GapLayer<T>>();
    fc1_ = std::make_unique<FcLayer<T>>(cin, spec.head_width, true, rng);
    bn1_ = std::make_unique<BatchNormLayer<T>>(spec.head_width, spec.bn_momentum);
    act1_ = std::make_unique<ActLayer<T>>(Act::kSwish);
    drop1_ = std::make_unique<DropoutLayer<T>>(spec.head_dropout);
    fc2_ = std::make_unique<FcLayer<T>>(spec.head_width, spec.head_width, true, rng);
    bn2_ = std::make_unique<BatchNormLayer<T>>(spec.head_width, spec.bn_momentum);
    act2_ = std::make_unique<ActLayer<T>>(Act::kSwish);
    drop2_ = std::make_unique<DropoutLayer<T>>(spec.head_dropout);
    fc_out_ = std::make_unique<FcLayer<T>>(spec.head_width, spec.num_classes, false, rng);
  }

  const ArchSpec& spec() const { return spec_; }
  int64_t feature_channels() const { return feature_channels_; }

  ForwardResult<T> forward(const Tensor<T>& batch, Mode mode, Rng& rng) {
    if (batch.rank() != 4) throw DimensionError("model forward: batch must be rank 4 NCHW");
    if (batch.dim(1) != spec_.input_channels || batch.dim(2) != spec_.resolution ||
        batch.dim(3) != spec_.resolution)
      throw DimensionError("model forward: batch " + shape_string(batch.shape()) +
                           " does not match spec input " + std::to_string(spec_.input_channels) + "x" +
                           std::to_string(spec_.resolution) + "x" + std::to_string(spec_.resolution));

    Tensor<T> h = batch;
    for (auto& entry : backbone_) h = entry.layer->forward(h, mode, rng);
    top_activation_ = h;

    h = gap_->forward(h, mode, rng);
    h = fc1_->forward(h, mode, rng);
    h = bn1_->forward(h, mode, rng);
    h = act1_->forward(h, mode, rng);
    h = drop1_->forward(h, mode, rng);
    h = fc2_->forward(h, mode, rng);
    h = bn2_->forward(h, mode, rng);
    h = act2_->forward(h, mode, rng);
    h = drop2_->forward(h, mode, rng);
    Tensor<T> logits = fc_out_->forward(h, mode, rng);

    ForwardResult<T> res{logits, softmax(logits)};
    if (!res.logits.all_finite())
      throw NumericError("model forward: non-finite logits produced");
    return res;
  }

  // Pushes a logit-space gradient back through the network. When
  // capture_feature_grad is set the gradient arriving at the final backbone
  // activation is stored (and the walk can stop there, which is all the
  // saliency pass needs).
  void backward(const Tensor<T>& dlogits, bool capture_feature_grad = false,
                bool stop_at_features = false) {
    Tensor<T> g = fc_out_->backward(dlogits);
    g = drop2_->backward(g);
    g = act2_->backward(g);
    g = bn2_->backward(g);
    g = fc2_->backward(g);
    g = drop1_->backward(g);
    g = act1_->backward(g);
    g = bn1_->backward(g);
    g = fc1_->backward(g);
    g = gap_->backward(g);
    if (capture_feature_grad) feature_grad_ = g;
    if (stop_at_features) return;
    for (auto it = backbone_.rbegin(); it != backbone_.rend(); ++it) g = it->layer->backward(g);
  }

  // Output of the last backbone activation from the most recent forward call.
  const Tensor<T>& retained_activation(const std::string& layer_name) const {
    if (layer_name != kTopActivation)
      throw ArgumentError("model: no retained activation named '" + layer_name +
                          "' (available: " + std::string(kTopActivation) + ")");
    if (top_activation_.numel() == 0)
      throw ArgumentError("model: no retained activation, run forward first");
    return top_activation_;
  }

  const Tensor<T>& feature_grad() const {
    if (feature_grad_.numel() == 0)
      throw ArgumentError("model: no captured feature gradient, run backward with capture first");
    return feature_grad_;
  }

  std::vector<ParamView<T>> params() {
    std::vector<ParamView<T>> out;
    for (auto& entry : backbone_) entry.layer->collect(entry.name, out);
    fc1_->collect("head/fc1", out);
    bn1_->collect("head/bn1", out);
    fc2_->collect("head/fc2", out);
    bn2_->collect("head/bn2", out);
    fc_out_->collect("head/out", out);
    return out;
  }

  // Trainable parameter count; BN running statistics are tracked separately.
  int64_t param_count() {
    int64_t n = 0;
    for (const auto& p : params())
      if (p.trainable) n += p.tensor->numel();
    return n;
  }

  int64_t state_count() {
    int64_t n = 0;
    for (const auto& p : params())
      if (!p.trainable) n += p.tensor->numel();
    return n;
  }

  void zero_grads() {
    for (auto& p : params()) p.tensor->zero_grad();
  }

  static constexpr const char* kTopActivation = "top_activation";

 private:
  struct Entry {
    std::string name;
    std::unique_ptr<Layer<T>> layer;
  };

  static Entry named(std::string name, std::unique_ptr<Layer<T>> layer) {
    return Entry{std::move(name), std::move(layer)};
  }

  ArchSpec spec_;
  int64_t feature_channels_ = 0;
  std::vector<Entry> backbone_;
  std::unique_ptr<GapLayer<T>> gap_;
  std::unique_ptr<FcLayer<T>> fc1_;
  std::unique_ptr<BatchNormLayer<T>> bn1_;
  std::unique_ptr<ActLayer<T>> act1_;
  std::unique_ptr<DropoutLayer<T>> drop1_;
  std::unique_ptr<FcLayer<T>> fc2_;
  std::unique_ptr<BatchNormLayer<T>> bn2_;
  std::unique_ptr<ActLayer<T>> act2_;
  std::unique_ptr<DropoutLayer<T>> drop2_;
  std::unique_ptr<FcLayer<T>> fc_out_;
  Tensor<T> top_activation_;
  Tensor<T> feature_grad_;
};

} // namespace ecov
