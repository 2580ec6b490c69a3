#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "llie/autodiff.hpp"

namespace llie {

struct BackboneConfig {
  int depth = 4;
  int base_channels = 32;
  int cbam_reduction = 16;
  int cbam_spatial_kernel = 7;
  int in_channels = 3;
  int out_channels = 3;

  /// Channel width at encoder level `level` (0 = full resolution, depth = bottleneck).
  int channels(int level) const { return base_channels << level; }
  int divisor() const { return 1 << depth; }
  void validate() const;
  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

template <typename Scalar>
struct EncoderOutput {
  Var<Scalar> bottleneck;
  std::vector<Var<Scalar>> skips;  // fine -> coarse
};

template <typename Scalar>
struct DecoderOutput {
  Var<Scalar> image;
  std::vector<Var<Scalar>> pyramid;  // coarse -> fine, captured after each level's CBAM
};

/// Fan-in scaled uniform initialization, deterministic for a given seed.
/// Encoder names start with "enc.", decoder names with "dec.".
template <typename Scalar>
ParameterSet<Scalar> make_encoder_weights(const BackboneConfig& config, std::mt19937_64& rng);
template <typename Scalar>
ParameterSet<Scalar> make_decoder_weights(const BackboneConfig& config, std::mt19937_64& rng);

/// Parameter count implied by a configuration (encoder + decoder).
std::int64_t parameter_count(const BackboneConfig& config);

/// Runs the encoder on `image`. Gradients are recorded iff the image's graph
/// has grad enabled.
template <typename Scalar>
EncoderOutput<Scalar> encode(const BackboneConfig& config, ParameterSet<Scalar>& weights, Var<Scalar> image);

template <typename Scalar>
DecoderOutput<Scalar> decode(const BackboneConfig& config, ParameterSet<Scalar>& weights,
                             const EncoderOutput<Scalar>& encoded);

template <typename Scalar>
DecoderOutput<Scalar> forward(const BackboneConfig& config, ParameterSet<Scalar>& encoder,
                              ParameterSet<Scalar>& decoder, Var<Scalar> image);

/// Channel attention followed by spatial attention; parameters are looked up
/// under `prefix` in `weights`.
template <typename Scalar>
Var<Scalar> cbam(Var<Scalar> f, ParameterSet<Scalar>& weights, const std::string& prefix);

/// Adds the parameters of one CBAM block for `channels` feature channels.
template <typename Scalar>
void add_cbam_weights(ParameterSet<Scalar>& weights, const std::string& prefix, int channels, int reduction,
                      int spatial_kernel, std::mt19937_64& rng);

}  // namespace llie
