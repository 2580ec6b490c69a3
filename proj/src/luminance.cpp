#include "llie/luminance.hpp"

#include <algorithm>
#include <cmath>

namespace llie {

template <typename Scalar>
Tensor<Scalar> luminance_map(const Tensor<Scalar>& image) {
  if (image.channels() != 3) {
    throw Error(ErrorCode::ChannelCountError,
                "luminance_map expects 3 channels, got " + std::to_string(image.channels()));
  }
  Tensor<Scalar> out(image.batch(), 1, image.height(), image.width());
  for (int n = 0; n < image.batch(); ++n) {
    const auto rgb = image.sample(n);
    out.sample(n) = Scalar(kLumaR) * rgb.row(0) + Scalar(kLumaG) * rgb.row(1) + Scalar(kLumaB) * rgb.row(2);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> normalize_luminance(const Tensor<Scalar>& luminance) {
  Tensor<Scalar> out(luminance.shape());
  for (int n = 0; n < luminance.batch(); ++n) {
    const auto src = luminance.sample(n);
    auto dst = out.sample(n);
    const Scalar lo = src.minCoeff();
    const Scalar hi = src.maxCoeff();
    if (hi > lo) {
      dst = (src.array() - lo) / (hi - lo);
    } else {
      dst.setConstant(Scalar(0.5));
    }
  }
  return out;
}

template <typename Scalar>
WeightMap<Scalar> emphasis_weights(const Tensor<Scalar>& normalized, Scalar beta) {
  if (!(beta >= Scalar(0))) {
    throw Error(ErrorCode::NegativeBeta, "beta must be non-negative, got " + std::to_string(beta));
  }
  WeightMap<Scalar> w{Tensor<Scalar>(normalized.shape()), beta};
  w.data.array() = Scalar(1) + beta * (Scalar(1) - normalized.array());
  return w;
}

template <typename Scalar>
WeightMap<Scalar> resize_weights(const WeightMap<Scalar>& weights, int target_h, int target_w) {
  const Tensor<Scalar>& src = weights.data;
  if (target_h < 1 || target_w < 1) {
    throw Error(ErrorCode::ShapeMismatch, "resize_weights target must be at least 1x1");
  }
  if (src.height() == target_h && src.width() == target_w) return weights;

  struct Tap {
    int lo;
    int hi;
    double t;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> v(out);
    const double scale = double(in) / double(out);
    for (int i = 0; i < out; ++i) {
      double s = (i + 0.5) * scale - 0.5;
      s = std::clamp(s, 0.0, double(in - 1));
      const int lo = static_cast<int>(std::floor(s));
      const int hi = std::min(lo + 1, in - 1);
      v[i] = {lo, hi, s - lo};
    }
    return v;
  };
  const auto ys = taps(src.height(), target_h);
  const auto xs = taps(src.width(), target_w);

  WeightMap<Scalar> out{Tensor<Scalar>(src.batch(), src.channels(), target_h, target_w), weights.beta};
  for (int n = 0; n < src.batch(); ++n)
    for (int c = 0; c < src.channels(); ++c)
      for (int y = 0; y < target_h; ++y)
        for (int x = 0; x < target_w; ++x) {
          const Tap& ty = ys[y];
          const Tap& tx = xs[x];
          const double top = (1 - tx.t) * src(n, c, ty.lo, tx.lo) + tx.t * src(n, c, ty.lo, tx.hi);
          const double bottom = (1 - tx.t) * src(n, c, ty.hi, tx.lo) + tx.t * src(n, c, ty.hi, tx.hi);
          out.data(n, c, y, x) = static_cast<Scalar>((1 - ty.t) * top + ty.t * bottom);
        }
  return out;
}

template <typename Scalar>
WeightMap<Scalar> illumination_weights(const Tensor<Scalar>& low_light, Scalar beta) {
  return emphasis_weights(normalize_luminance(luminance_map(low_light)), beta);
}

#define LLIE_INSTANTIATE_LUMINANCE(S)                                        \
  template Tensor<S> luminance_map(const Tensor<S>&);                        \
  template Tensor<S> normalize_luminance(const Tensor<S>&);                  \
  template WeightMap<S> emphasis_weights(const Tensor<S>&, S);               \
  template WeightMap<S> resize_weights(const WeightMap<S>&, int, int);       \
  template WeightMap<S> illumination_weights(const Tensor<S>&, S);

LLIE_INSTANTIATE_LUMINANCE(float)
LLIE_INSTANTIATE_LUMINANCE(double)

}  // namespace llie
