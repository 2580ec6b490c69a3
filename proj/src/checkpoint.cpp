#include "llie/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

namespace llie {
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'L', 'L', 'I', 'E', 'C', 'K', 'P', 'T'};

std::uint64_t fnv1a(const char* data, std::size_t size) {
  std::uint64_t h = 1469598103934665603ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    buf_.append(s);
  }
  template <typename Scalar>
  void tensor(const std::string& name, const Tensor<Scalar>& t) {
    str(name);
    pod<std::uint8_t>(sizeof(Scalar));
    for (int e : {t.batch(), t.channels(), t.height(), t.width()}) pod<std::int32_t>(e);
    buf_.append(reinterpret_cast<const char*>(t.data()), sizeof(Scalar) * std::size_t(t.size()));
  }
  std::string& buffer() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& buf, std::size_t end, const fs::path& path) : buf_(buf), end_(end), path_(path) {}

  template <typename T>
  T pod() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, buf_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename Scalar>
  Tensor<Scalar> tensor(const std::string& expected_name) {
    const std::string name = str();
    if (name != expected_name) corrupt("expected tensor " + expected_name + ", found " + name);
    const auto width = pod<std::uint8_t>();
    Shape s;
    s.n = pod<std::int32_t>();
    s.c = pod<std::int32_t>();
    s.h = pod<std::int32_t>();
    s.w = pod<std::int32_t>();
    if (s.n < 0 || s.c < 0 || s.h < 0 || s.w < 0) corrupt("negative extent in " + name);
    Tensor<Scalar> t(s);
    const std::size_t count = std::size_t(t.size());
    if (width == 4) {
      need(count * 4);
      Eigen::ArrayXf src(t.size());
      std::memcpy(src.data(), buf_.data() + pos_, count * 4);
      t.array() = src.template cast<Scalar>();
    } else if (width == 8) {
      need(count * 8);
      Eigen::ArrayXd src(t.size());
      std::memcpy(src.data(), buf_.data() + pos_, count * 8);
      t.array() = src.template cast<Scalar>();
    } else {
      corrupt("unknown element width in " + name);
    }
    pos_ += count * width;
    return t;
  }
  std::size_t position() const { return pos_; }
  [[noreturn]] void corrupt(const std::string& what) const {
    throw Error(ErrorCode::CheckpointCorrupt, path_.string() + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > end_) corrupt("truncated");
  }
  const std::string& buf_;
  std::size_t end_;
  fs::path path_;
  std::size_t pos_ = 0;
};

void write_model(Writer& w, const BackboneConfig& m) {
  for (int v : {m.depth, m.base_channels, m.cbam_reduction, m.cbam_spatial_kernel, m.in_channels, m.out_channels}) {
    w.pod<std::int32_t>(v);
  }
}

BackboneConfig read_model(Reader& r) {
  BackboneConfig m;
  for (int* v : {&m.depth, &m.base_channels, &m.cbam_reduction, &m.cbam_spatial_kernel, &m.in_channels,
                 &m.out_channels}) {
    *v = r.pod<std::int32_t>();
  }
  return m;
}

void write_train(Writer& w, const TrainConfig& t) {
  for (double v : {t.lr, t.adam_beta1, t.adam_beta2, t.adam_eps, t.ema_mu, t.grad_clip}) w.pod(v);
  for (std::int64_t v : {std::int64_t(t.epochs), std::int64_t(t.batch_size), std::int64_t(t.crop), t.max_steps,
                         t.checkpoint_every, std::int64_t(t.flip), std::int64_t(t.pairs)}) {
    w.pod(v);
  }
  w.pod(t.seed);
}

TrainConfig read_train(Reader& r) {
  TrainConfig t;
  for (double* v : {&t.lr, &t.adam_beta1, &t.adam_beta2, &t.adam_eps, &t.ema_mu, &t.grad_clip}) {
    *v = r.pod<double>();
  }
  t.epochs = int(r.pod<std::int64_t>());
  t.batch_size = int(r.pod<std::int64_t>());
  t.crop = int(r.pod<std::int64_t>());
  t.max_steps = r.pod<std::int64_t>();
  t.checkpoint_every = r.pod<std::int64_t>();
  t.flip = r.pod<std::int64_t>() != 0;
  t.pairs = int(r.pod<std::int64_t>());
  t.seed = r.pod<std::uint64_t>();
  return t;
}

void write_loss(Writer& w, const LossConfig& l) {
  w.pod<std::int32_t>(static_cast<std::int32_t>(l.tag));
  for (double v : {l.lambda, l.beta, l.eps, l.ssim.gaussian_sigma, l.ssim.k1, l.ssim.k2, l.ssim.dynamic_range}) {
    w.pod(v);
  }
  w.pod<std::int32_t>(l.ssim.window_size);
  w.pod<std::uint64_t>(l.levels.size());
  for (int level : l.levels) w.pod<std::int32_t>(level);
}

LossConfig read_loss(Reader& r) {
  LossConfig l;
  const auto tag = r.pod<std::int32_t>();
  if (tag < 0 || tag >= std::int32_t(kAllConfigTags.size())) r.corrupt("bad loss tag");
  l.tag = static_cast<ConfigTag>(tag);
  for (double* v : {&l.lambda, &l.beta, &l.eps, &l.ssim.gaussian_sigma, &l.ssim.k1, &l.ssim.k2,
                    &l.ssim.dynamic_range}) {
    *v = r.pod<double>();
  }
  l.ssim.window_size = r.pod<std::int32_t>();
  const auto n = r.pod<std::uint64_t>();
  if (n > 1024) r.corrupt("bad level count");
  for (std::uint64_t i = 0; i < n; ++i) l.levels.push_back(r.pod<std::int32_t>());
  return l;
}

template <typename Scalar>
void write_set(Writer& w, const std::string& prefix, const ParameterSet<Scalar>& set) {
  for (const auto& p : set) w.tensor(prefix + p.name, p.value);
}

template <typename Scalar>
void read_set(Reader& r, const std::string& prefix, ParameterSet<Scalar>& set) {
  for (auto& p : set) {
    Tensor<Scalar> t = r.tensor<Scalar>(prefix + p.name);
    if (!(t.shape() == p.value.shape())) r.corrupt("shape of " + prefix + p.name + " does not match");
    p.value = std::move(t);
  }
}

}  // namespace

template <typename Scalar>
void save_checkpoint(const fs::path& path, const TrainState<Scalar>& state) {
  Writer w;
  w.buffer().append(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(state.config_text);
  write_model(w, state.model);
  write_train(w, state.train);
  write_loss(w, state.loss);
  w.pod<std::int64_t>(state.step);
  w.pod<std::int64_t>(state.adam.t);
  w.pod<std::uint64_t>(state.adam.m.size());
  write_set(w, "student.encoder.", state.encoder);
  write_set(w, "student.decoder.", state.decoder);
  write_set(w, "teacher.decoder.", state.teacher_decoder);
  std::size_t i = 0;
  for (const auto* set : {&state.encoder, &state.decoder}) {
    for (const auto& p : *set) {
      if (i >= state.adam.m.size()) break;
      w.tensor("adam.m." + p.name, state.adam.m[i]);
      w.tensor("adam.v." + p.name, state.adam.v[i]);
      ++i;
    }
  }
  const std::uint64_t sum = fnv1a(w.buffer().data(), w.buffer().size());
  w.pod(sum);

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(w.buffer().data(), std::streamsize(w.buffer().size()));
    if (!out) throw Error(ErrorCode::IoError, "failed to write " + tmp.string());
  }
  fs::rename(tmp, path);
}

template <typename Scalar>
TrainState<Scalar> load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open checkpoint " + path.string());
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < sizeof(kMagic) + 4 + 8 || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::CheckpointCorrupt, path.string() + ": not a checkpoint");
  }
  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  if (stored != fnv1a(buf.data(), body)) throw Error(ErrorCode::CheckpointCorrupt, path.string() + ": checksum");

  Reader r(buf, body, path);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.pod<char>();
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) r.corrupt("unsupported version " + std::to_string(version));
  const std::string config_text = r.str();
  const BackboneConfig model = read_model(r);
  const TrainConfig train = read_train(r);
  const LossConfig loss = read_loss(r);
  try {
    model.validate();
  } catch (const Error& e) {
    r.corrupt(std::string("bad architecture: ") + e.what());
  }

  TrainState<Scalar> state = init_state<Scalar>(model, train, loss);
  state.config_text = config_text;
  state.step = r.pod<std::int64_t>();
  state.adam.t = r.pod<std::int64_t>();
  const auto moments = r.pod<std::uint64_t>();
  read_set(r, "student.encoder.", state.encoder);
  read_set(r, "student.decoder.", state.decoder);
  read_set(r, "teacher.decoder.", state.teacher_decoder);
  if (moments != state.adam.m.size()) r.corrupt("optimizer moment count");
  std::size_t i = 0;
  for (const auto* set : {&state.encoder, &state.decoder}) {
    for (const auto& p : *set) {
      state.adam.m[i] = r.tensor<Scalar>("adam.m." + p.name);
      state.adam.v[i] = r.tensor<Scalar>("adam.v." + p.name);
      if (!(state.adam.m[i].shape() == p.value.shape()) || !(state.adam.v[i].shape() == p.value.shape())) {
        r.corrupt("optimizer moment shape for " + p.name);
      }
      ++i;
    }
  }
  if (r.position() != body) r.corrupt("trailing bytes");
  return state;
}

template <typename Scalar>
TrainState<Scalar> load_checkpoint(const fs::path& path, const BackboneConfig& expected) {
  TrainState<Scalar> state = load_checkpoint<Scalar>(path);
  if (!(state.model == expected)) {
    throw Error(ErrorCode::ConfigMismatch, path.string() + " was written for a different model configuration");
  }
  return state;
}

#define LLIE_INSTANTIATE_CKPT(S)                                                   \
  template void save_checkpoint(const fs::path&, const TrainState<S>&);            \
  template TrainState<S> load_checkpoint(const fs::path&);                         \
  template TrainState<S> load_checkpoint(const fs::path&, const BackboneConfig&);

LLIE_INSTANTIATE_CKPT(float)
LLIE_INSTANTIATE_CKPT(double)

}  // namespace llie
