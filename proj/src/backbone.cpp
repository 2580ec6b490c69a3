#include "llie/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "llie/ops.hpp"

namespace llie {
namespace {

constexpr double kLeakySlope = 0.2;

template <typename Scalar>
void init_uniform(Tensor<Scalar>& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<Scalar>(dist(rng));
}

/// `gain` is sqrt(2) for layers feeding a rectifier, 1 otherwise.
template <typename Scalar>
void add_conv(ParameterSet<Scalar>& w, const std::string& name, int cout, int cin, int k, double gain,
              std::mt19937_64& rng) {
  const double fan_in = double(cin) * k * k;
  init_uniform(w.add(name + ".weight", {cout, cin, k, k}).value, gain * std::sqrt(3.0 / fan_in), rng);
  init_uniform(w.add(name + ".bias", {1, cout, 1, 1}).value, 1.0 / std::sqrt(fan_in), rng);
}

template <typename Scalar>
void add_up(ParameterSet<Scalar>& w, const std::string& name, int cin, int cout, std::mt19937_64& rng) {
  const double fan_in = cin;
  init_uniform(w.add(name + ".weight", {cin, cout, 2, 2}).value, std::sqrt(3.0 / fan_in), rng);
  init_uniform(w.add(name + ".bias", {1, cout, 1, 1}).value, 1.0 / std::sqrt(fan_in), rng);
}

template <typename Scalar>
Parameter<Scalar>& lookup(ParameterSet<Scalar>& w, const std::string& name) {
  Parameter<Scalar>* p = w.find(name);
  if (p == nullptr) throw Error(ErrorCode::ConfigMismatch, "missing parameter " + name);
  return *p;
}

template <typename Scalar>
Var<Scalar> conv(Var<Scalar> x, ParameterSet<Scalar>& w, const std::string& name, int pad) {
  Graph<Scalar>& g = *x.graph;
  return ops::conv2d(x, g.parameter(lookup(w, name + ".weight")), g.parameter(lookup(w, name + ".bias")), pad);
}

template <typename Scalar>
void add_block(ParameterSet<Scalar>& w, const std::string& prefix, int cin, int cout, const BackboneConfig& cfg,
               std::mt19937_64& rng) {
  const double gain = std::sqrt(2.0);
  add_conv(w, prefix + ".conv1", cout, cin, 3, gain, rng);
  add_conv(w, prefix + ".conv2", cout, cout, 3, gain, rng);
  add_cbam_weights(w, prefix + ".cbam", cout, cfg.cbam_reduction, cfg.cbam_spatial_kernel, rng);
}

/// conv3x3 -> LeakyReLU -> conv3x3 -> LeakyReLU -> CBAM
template <typename Scalar>
Var<Scalar> block(Var<Scalar> x, ParameterSet<Scalar>& w, const std::string& prefix) {
  const Scalar slope = Scalar(kLeakySlope);
  x = ops::leaky_relu(conv(x, w, prefix + ".conv1", 1), slope);
  x = ops::leaky_relu(conv(x, w, prefix + ".conv2", 1), slope);
  return cbam(x, w, prefix + ".cbam");
}

}  // namespace

void BackboneConfig::validate() const {
  if (depth < 1) throw Error(ErrorCode::InvalidConfig, "model.depth must be >= 1");
  if (base_channels < 1) throw Error(ErrorCode::InvalidConfig, "model.base_channels must be >= 1");
  if (cbam_reduction < 1) throw Error(ErrorCode::InvalidConfig, "model.cbam_reduction must be >= 1");
  if (cbam_spatial_kernel < 1 || cbam_spatial_kernel % 2 == 0) {
    throw Error(ErrorCode::InvalidConfig, "model.cbam_spatial_kernel must be a positive odd integer");
  }
  if (depth > 12 || (std::int64_t(base_channels) << depth) > (1 << 20)) {
    throw Error(ErrorCode::InvalidConfig, "model is too large");
  }
}

template <typename Scalar>
void add_cbam_weights(ParameterSet<Scalar>& w, const std::string& prefix, int channels, int reduction,
                      int spatial_kernel, std::mt19937_64& rng) {
  const int hidden = std::max(1, channels / reduction);
  add_conv(w, prefix + ".fc1", hidden, channels, 1, std::sqrt(2.0), rng);
  add_conv(w, prefix + ".fc2", channels, hidden, 1, 1.0, rng);
  add_conv(w, prefix + ".spatial", 1, 2, spatial_kernel, 1.0, rng);
}

template <typename Scalar>
Var<Scalar> cbam(Var<Scalar> f, ParameterSet<Scalar>& w, const std::string& prefix) {
  auto mlp = [&](Var<Scalar> v) {
    return conv(ops::relu(conv(v, w, prefix + ".fc1", 0)), w, prefix + ".fc2", 0);
  };
  const Var<Scalar> channel_gate =
      ops::sigmoid(ops::add(mlp(ops::global_avg_pool(f)), mlp(ops::global_max_pool(f))));
  const Var<Scalar> refined = ops::mul_channel(f, channel_gate);

  const Parameter<Scalar>& spatial = lookup(w, prefix + ".spatial.weight");
  const int pad = spatial.value.height() / 2;
  const Var<Scalar> pooled = ops::concat_channels(ops::channel_mean(refined), ops::channel_max(refined));
  const Var<Scalar> spatial_gate = ops::sigmoid(conv(pooled, w, prefix + ".spatial", pad));
  return ops::mul_spatial(refined, spatial_gate);
}

template <typename Scalar>
ParameterSet<Scalar> make_encoder_weights(const BackboneConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  ParameterSet<Scalar> w;
  int cin = cfg.in_channels;
  for (int level = 0; level <= cfg.depth; ++level) {
    add_block(w, "enc." + std::to_string(level), cin, cfg.channels(level), cfg, rng);
    cin = cfg.channels(level);
  }
  return w;
}

template <typename Scalar>
ParameterSet<Scalar> make_decoder_weights(const BackboneConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  ParameterSet<Scalar> w;
  int cin = cfg.channels(cfg.depth);
  for (int i = 1; i <= cfg.depth; ++i) {
    const int c = cfg.channels(cfg.depth - i);
    const std::string prefix = "dec." + std::to_string(i);
    add_up(w, prefix + ".up", cin, c, rng);
    add_block(w, prefix, 2 * c, c, cfg, rng);
    cin = c;
  }
  add_conv(w, "dec.head", cfg.out_channels, cfg.channels(0), 1, 1.0, rng);
  return w;
}

std::int64_t parameter_count(const BackboneConfig& cfg) {
  std::mt19937_64 rng(0);
  return make_encoder_weights<float>(cfg, rng).count() + make_decoder_weights<float>(cfg, rng).count();
}

template <typename Scalar>
EncoderOutput<Scalar> encode(const BackboneConfig& cfg, ParameterSet<Scalar>& w, Var<Scalar> image) {
  const Shape& s = image.shape();
  if (s.c != cfg.in_channels) {
    throw Error(ErrorCode::ChannelCountError, "encoder expects " + std::to_string(cfg.in_channels) +
                                                  " channels, got " + std::to_string(s.c));
  }
  if (s.h % cfg.divisor() != 0 || s.w % cfg.divisor() != 0 || s.h == 0 || s.w == 0) {
    throw Error(ErrorCode::IndivisibleDims, "input " + s.str() + " not divisible by " +
                                                std::to_string(cfg.divisor()));
  }
  EncoderOutput<Scalar> out;
  Var<Scalar> x = image;
  for (int level = 0; level < cfg.depth; ++level) {
    const Var<Scalar> h = block(x, w, "enc." + std::to_string(level));
    out.skips.push_back(h);
    x = ops::avg_pool2(h);
  }
  out.bottleneck = block(x, w, "enc." + std::to_string(cfg.depth));
  return out;
}

template <typename Scalar>
DecoderOutput<Scalar> decode(const BackboneConfig& cfg, ParameterSet<Scalar>& w, const EncoderOutput<Scalar>& enc) {
  if (int(enc.skips.size()) != cfg.depth) {
    throw Error(ErrorCode::ConfigMismatch, "encoder produced " + std::to_string(enc.skips.size()) +
                                               " skips, decoder depth is " + std::to_string(cfg.depth));
  }
  Graph<Scalar>& g = *enc.bottleneck.graph;
  DecoderOutput<Scalar> out;
  Var<Scalar> x = enc.bottleneck;
  for (int i = 1; i <= cfg.depth; ++i) {
    const std::string prefix = "dec." + std::to_string(i);
    const Var<Scalar> up = ops::conv_transpose2x2(x, g.parameter(lookup(w, prefix + ".up.weight")),
                                                  g.parameter(lookup(w, prefix + ".up.bias")));
    x = block(ops::concat_channels(up, enc.skips[cfg.depth - i]), w, prefix);
    out.pyramid.push_back(x);
  }
  out.image = ops::sigmoid(conv(x, w, "dec.head", 0));
  return out;
}

template <typename Scalar>
DecoderOutput<Scalar> forward(const BackboneConfig& cfg, ParameterSet<Scalar>& encoder, ParameterSet<Scalar>& decoder,
                              Var<Scalar> image) {
  return decode(cfg, decoder, encode(cfg, encoder, image));
}

#define LLIE_INSTANTIATE_BACKBONE(S)                                                                       \
  template ParameterSet<S> make_encoder_weights<S>(const BackboneConfig&, std::mt19937_64&);               \
  template ParameterSet<S> make_decoder_weights<S>(const BackboneConfig&, std::mt19937_64&);               \
  template EncoderOutput<S> encode(const BackboneConfig&, ParameterSet<S>&, Var<S>);                       \
  template DecoderOutput<S> decode(const BackboneConfig&, ParameterSet<S>&, const EncoderOutput<S>&);      \
  template DecoderOutput<S> forward(const BackboneConfig&, ParameterSet<S>&, ParameterSet<S>&, Var<S>);    \
  template Var<S> cbam(Var<S>, ParameterSet<S>&, const std::string&);                                      \
  template void add_cbam_weights(ParameterSet<S>&, const std::string&, int, int, int, std::mt19937_64&);

LLIE_INSTANTIATE_BACKBONE(float)
LLIE_INSTANTIATE_BACKBONE(double)

}  // namespace llie
