#include "llie/tensor.hpp"

#include <iostream>
#include <vector>

namespace llie {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingDirectory: return "MissingDirectory";
    case ErrorCode::EmptySplit: return "EmptySplit";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::NonRGBError: return "NonRGBError";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::ChannelCountError: return "ChannelCountError";
    case ErrorCode::NegativeBeta: return "NegativeBeta";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::PyramidDepthMismatch: return "PyramidDepthMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::UnknownConfigTag: return "UnknownConfigTag";
    case ErrorCode::IndivisibleDims: return "IndivisibleDims";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::CheckpointCorrupt: return "CheckpointCorrupt";
    case ErrorCode::ModelUnavailable: return "ModelUnavailable";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::TypeError: return "TypeError";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Error";
}

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::string Shape::str() const {
  return "[" + std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w) + "]";
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (!(a == b)) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + ": " + a.str() + " vs " + b.str());
  }
}

template <typename Scalar>
Tensor<Scalar> concat_batch(const std::vector<Tensor<Scalar>>& parts) {
  if (parts.empty()) return {};
  Shape shape = parts.front().shape();
  shape.n = 0;
  for (const auto& p : parts) {
    if (p.channels() != shape.c || p.height() != shape.h || p.width() != shape.w) {
      throw Error(ErrorCode::ShapeMismatch, "concat_batch: " + p.shape().str());
    }
    shape.n += p.batch();
  }
  Tensor<Scalar> out(shape);
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.array().segment(offset, p.size()) = p.array();
    offset += p.size();
  }
  return out;
}

template Tensor<float> concat_batch(const std::vector<Tensor<float>>&);
template Tensor<double> concat_batch(const std::vector<Tensor<double>>&);

}  // namespace llie
