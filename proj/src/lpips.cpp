#include "llie/lpips.hpp"

#include <json.hpp>

#include <fstream>
#include <variant>
#include <vector>

#include "llie/ops.hpp"

namespace llie {
namespace {

struct ConvLayer {
  Tensor<double> weight;
  Tensor<double> bias;
  int pad = 0;
};
struct ReluLayer {};
struct PoolLayer {};
struct TapLayer {
  Eigen::ArrayXd lin;
};
using Layer = std::variant<ConvLayer, ReluLayer, PoolLayer, TapLayer>;

class JsonPerceptualModel final : public PerceptualModel {
 public:
  JsonPerceptualModel(std::string name, Eigen::Array3d shift, Eigen::Array3d scale, std::vector<Layer> layers)
      : name_(std::move(name)), shift_(shift), scale_(scale), layers_(std::move(layers)) {}

  std::string name() const override { return name_; }

  double distance(const Tensor<double>& x, const Tensor<double>& y) const override {
    require_same_shape(x.shape(), y.shape(), "perceptual distance");
    Graph<double> g(false);
    Var<double> fx = g.constant(prepare(x));
    Var<double> fy = g.constant(prepare(y));
    double total = 0;
    for (const Layer& layer : layers_) {
      if (const auto* conv = std::get_if<ConvLayer>(&layer)) {
        fx = ops::conv2d(fx, g.constant(conv->weight), g.constant(conv->bias), conv->pad);
        fy = ops::conv2d(fy, g.constant(conv->weight), g.constant(conv->bias), conv->pad);
      } else if (std::holds_alternative<ReluLayer>(layer)) {
        fx = ops::relu(fx);
        fy = ops::relu(fy);
      } else if (std::holds_alternative<PoolLayer>(layer)) {
        fx = max_pool(fx);
        fy = max_pool(fy);
      } else {
        total += tap_distance(fx.value(), fy.value(), std::get<TapLayer>(layer).lin);
      }
    }
    return total;
  }

 private:
  Tensor<double> prepare(const Tensor<double>& image) const {
    if (image.channels() != 3) throw Error(ErrorCode::ChannelCountError, "perceptual model expects RGB input");
    Tensor<double> out(image.shape());
    for (int n = 0; n < image.batch(); ++n)
      for (int c = 0; c < 3; ++c)
        out.plane(n, c) = ((image.plane(n, c).array() * 2.0 - 1.0 - shift_[c]) / scale_[c]).matrix();
    return out;
  }

  static Var<double> max_pool(Var<double> v) {
    const Tensor<double>& t = v.value();
    Tensor<double> out(t.batch(), t.channels(), t.height() / 2, t.width() / 2);
    for (int n = 0; n < t.batch(); ++n)
      for (int c = 0; c < t.channels(); ++c)
        for (int y = 0; y < out.height(); ++y)
          for (int x = 0; x < out.width(); ++x) out.plane(n, c)(y, x) = t.plane(n, c).block(2 * y, 2 * x, 2, 2).maxCoeff();
    return v.graph->constant(std::move(out));
  }

  static double tap_distance(const Tensor<double>& a, const Tensor<double>& b, const Eigen::ArrayXd& lin) {
    if (lin.size() != a.channels()) throw Error(ErrorCode::ShapeMismatch, "tap weight count does not match features");
    double acc = 0;
    for (int n = 0; n < a.batch(); ++n) {
      const Eigen::ArrayXXd fa = a.sample(n).array();
      const Eigen::ArrayXXd fb = b.sample(n).array();
      const Eigen::ArrayXXd na = fa.rowwise() / (fa.square().colwise().sum().sqrt() + 1e-10);
      const Eigen::ArrayXXd nb = fb.rowwise() / (fb.square().colwise().sum().sqrt() + 1e-10);
      acc += ((na - nb).square().colwise() * lin).colwise().sum().mean();
    }
    return acc / a.batch();
  }

  std::string name_;
  Eigen::Array3d shift_;
  Eigen::Array3d scale_;
  std::vector<Layer> layers_;
};

[[noreturn]] void unavailable(const std::filesystem::path& path, const std::string& why) {
  throw Error(ErrorCode::ModelUnavailable, path.string() + ": " + why);
}

Tensor<double> read_tensor(const nlohmann::json& values, const Shape& shape, const std::filesystem::path& path,
                           const char* what) {
  if (!values.is_array() || std::int64_t(values.size()) != shape.size()) {
    unavailable(path, std::string(what) + " has the wrong number of values");
  }
  Tensor<double> t(shape);
  for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = values[std::size_t(i)].get<double>();
  return t;
}

}  // namespace

std::unique_ptr<PerceptualModel> load_perceptual_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) unavailable(path, "cannot open perceptual model");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    unavailable(path, e.what());
  }
  try {
    if (doc.value("format", "") != "llie-lpips-v1") unavailable(path, "unsupported format");
    Eigen::Array3d shift = Eigen::Array3d::Zero();
    Eigen::Array3d scale = Eigen::Array3d::Ones();
    if (doc.contains("shift")) shift = Eigen::Array3d(doc["shift"][0], doc["shift"][1], doc["shift"][2]);
    if (doc.contains("scale")) scale = Eigen::Array3d(doc["scale"][0], doc["scale"][1], doc["scale"][2]);
    std::vector<Layer> layers;
    int channels = 3;
    bool has_tap = false;
    for (const auto& layer : doc.at("layers")) {
      const std::string type = layer.at("type");
      if (type == "conv") {
        const int cin = layer.at("in");
        const int cout = layer.at("out");
        const int k = layer.at("kernel");
        if (cin != channels) unavailable(path, "conv input width does not match previous layer");
        ConvLayer conv;
        conv.weight = read_tensor(layer.at("weight"), {cout, cin, k, k}, path, "conv weight");
        conv.bias = read_tensor(layer.at("bias"), {1, cout, 1, 1}, path, "conv bias");
        conv.pad = layer.value("pad", k / 2);
        layers.emplace_back(std::move(conv));
        channels = cout;
      } else if (type == "relu") {
        layers.emplace_back(ReluLayer{});
      } else if (type == "maxpool") {
        layers.emplace_back(PoolLayer{});
      } else if (type == "tap") {
        const auto& lin = layer.at("lin");
        if (int(lin.size()) != channels) unavailable(path, "tap weight count does not match features");
        TapLayer tap{Eigen::ArrayXd(channels)};
        for (int c = 0; c < channels; ++c) tap.lin[c] = lin[std::size_t(c)].get<double>();
        layers.emplace_back(std::move(tap));
        has_tap = true;
      } else {
        unavailable(path, "unknown layer type " + type);
      }
    }
    if (!has_tap) unavailable(path, "model has no tap layer");
    return std::make_unique<JsonPerceptualModel>(doc.value("name", path.stem().string()), shift, scale,
                                                 std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    unavailable(path, e.what());
  }
}

}  // namespace llie
