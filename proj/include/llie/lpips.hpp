#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "llie/tensor.hpp"

namespace llie {

/// Full-reference perceptual distance supplied from outside the repo.
class PerceptualModel {
 public:
  virtual ~PerceptualModel() = default;
  /// Distance between two 1x3xHxW images in [0,1]; lower is more similar.
  virtual double distance(const Tensor<double>& x, const Tensor<double>& y) const = 0;
  virtual std::string name() const = 0;
};

/// Loads an LPIPS-style model description (JSON, format "llie-lpips-v1").
/// Throws ModelUnavailable if the file is missing or malformed.
///
///   {"format": "llie-lpips-v1",
///    "shift": [3], "scale": [3],
///    "layers": [{"type": "conv", "in": C, "out": D, "kernel": k, "pad": p,
///                "weight": [D*C*k*k], "bias": [D]},
///               {"type": "relu"}, {"type": "maxpool"},
///               {"type": "tap", "lin": [D]}]}
///
/// Inputs are mapped to [-1,1], shifted and scaled per channel, and run
/// through the layers. At every tap the features are unit-normalized across
/// channels, squared differences are weighted by `lin` and summed over
/// channels, and the spatial mean is added to the distance.
std::unique_ptr<PerceptualModel> load_perceptual_model(const std::filesystem::path& path);

}  // namespace llie
