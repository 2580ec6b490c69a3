#include "llie/ops.hpp"

#include <algorithm>
#include <cmath>

namespace llie::ops {
namespace {

template <typename Scalar>
void im2col(const Tensor<Scalar>& x, int n, int k, int pad, int ho, int wo, RowMatrix<Scalar>& cols) {
  const int cin = x.channels();
  const int h = x.height();
  const int w = x.width();
  cols.resize(Eigen::Index(cin) * k * k, Eigen::Index(ho) * wo);
  for (int ci = 0; ci < cin; ++ci) {
    const Scalar* src = x.data() + x.index(n, ci, 0, 0);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* dst = cols.row((Eigen::Index(ci) * k + ky) * k + kx).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy + ky - pad;
          Scalar* row = dst + Eigen::Index(oy) * wo;
          if (iy < 0 || iy >= h) {
            std::fill(row, row + wo, Scalar(0));
            continue;
          }
          const Scalar* srow = src + Eigen::Index(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox + kx - pad;
            row[ox] = (ix >= 0 && ix < w) ? srow[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const RowMatrix<Scalar>& cols, int n, int k, int pad, int ho, int wo, Tensor<Scalar>& dx) {
  const int cin = dx.channels();
  const int h = dx.height();
  const int w = dx.width();
  for (int ci = 0; ci < cin; ++ci) {
    Scalar* dst = dx.data() + dx.index(n, ci, 0, 0);
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* src = cols.row((Eigen::Index(ci) * k + ky) * k + kx).data();
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const Scalar* row = src + Eigen::Index(oy) * wo;
          Scalar* drow = dst + Eigen::Index(iy) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox + kx - pad;
            if (ix >= 0 && ix < w) drow[ix] += row[ox];
          }
        }
      }
    }
  }
}

template <typename Scalar>
Eigen::Map<const RowMatrix<Scalar>> as_matrix(const Tensor<Scalar>& t, Eigen::Index rows) {
  return Eigen::Map<const RowMatrix<Scalar>>(t.data(), rows, t.size() / rows);
}

template <typename Scalar>
Eigen::Map<RowMatrix<Scalar>> as_matrix(Tensor<Scalar>& t, Eigen::Index rows) {
  return Eigen::Map<RowMatrix<Scalar>>(t.data(), rows, t.size() / rows);
}

}  // namespace

template <typename Scalar>
Var<Scalar> conv2d(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias, int pad) {
  Graph<Scalar>& g = *x.graph;
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& wv = weight.value();
  const int k = wv.height();
  const int cout = wv.batch();
  const int cin = xv.channels();
  if (wv.channels() != cin || wv.width() != k || bias.value().size() != cout) {
    throw Error(ErrorCode::ShapeMismatch,
                "conv2d: input " + xv.shape().str() + " weight " + wv.shape().str());
  }
  const int ho = xv.height() + 2 * pad - k + 1;
  const int wo = xv.width() + 2 * pad - k + 1;
  if (ho <= 0 || wo <= 0) {
    throw Error(ErrorCode::ShapeMismatch, "conv2d: kernel larger than padded input");
  }
  const Eigen::Index patch = Eigen::Index(cin) * k * k;
  Tensor<Scalar> out(xv.batch(), cout, ho, wo);
  const auto wmat = as_matrix(wv, cout);
  const auto bvec = Eigen::Map<const VectorX<Scalar>>(bias.value().data(), cout);
  RowMatrix<Scalar> cols;
  for (int n = 0; n < xv.batch(); ++n) {
    auto dst = out.sample(n);
    if (k == 1 && pad == 0) {
      dst.noalias() = wmat * xv.sample(n);
    } else {
      im2col(xv, n, k, pad, ho, wo, cols);
      dst.noalias() = wmat * cols;
    }
    dst.colwise() += bvec;
  }
  return g.record(std::move(out), {x, weight, bias},
                  [x, weight, bias, k, pad, ho, wo, cout, patch](Graph<Scalar>& g, int self) {
                    const Tensor<Scalar>& gout = g.grad(self);
                    const Tensor<Scalar>& xv = g.value(x.id);
                    const auto wmat = as_matrix(g.value(weight.id), cout);
                    const bool pointwise = (k == 1 && pad == 0);
                    RowMatrix<Scalar> cols;
                    RowMatrix<Scalar> dcols;
                    for (int n = 0; n < xv.batch(); ++n) {
                      const auto go = gout.sample(n);
                      if (bias.requires_grad()) {
                        Eigen::Map<VectorX<Scalar>>(g.grad(bias.id).data(), cout) +=
                            go.rowwise().sum();
                      }
                      if (weight.requires_grad()) {
                        auto dw = as_matrix(g.grad(weight.id), cout);
                        if (pointwise) {
                          dw.noalias() += go * xv.sample(n).transpose();
                        } else {
                          im2col(xv, n, k, pad, ho, wo, cols);
                          dw.noalias() += go * cols.transpose();
                        }
                      }
                      if (x.requires_grad()) {
                        Tensor<Scalar>& dx = g.grad(x.id);
                        if (pointwise) {
                          dx.sample(n).noalias() += wmat.transpose() * go;
                        } else {
                          dcols.resize(patch, Eigen::Index(ho) * wo);
                          dcols.noalias() = wmat.transpose() * go;
                          col2im_add(dcols, n, k, pad, ho, wo, dx);
                        }
                      }
                    }
                  });
}

template <typename Scalar>
Var<Scalar> conv_transpose2x2(Var<Scalar> x, Var<Scalar> weight, Var<Scalar> bias) {
  Graph<Scalar>& g = *x.graph;
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& wv = weight.value();
  const int cin = xv.channels();
  const int cout = wv.channels();
  if (wv.batch() != cin || wv.height() != 2 || wv.width() != 2 || bias.value().size() != cout) {
    throw Error(ErrorCode::ShapeMismatch,
                "conv_transpose2x2: input " + xv.shape().str() + " weight " + wv.shape().str());
  }
  const int h = xv.height();
  const int w = xv.width();
  // taps[a*2+b](co, ci) = weight(ci, co, a, b)
  auto taps = [cin, cout](const Tensor<Scalar>& wt) {
    std::vector<RowMatrix<Scalar>> m(4, RowMatrix<Scalar>(cout, cin));
    for (int ci = 0; ci < cin; ++ci)
      for (int co = 0; co < cout; ++co)
        for (int t = 0; t < 4; ++t) m[t](co, ci) = wt(ci, co, t / 2, t % 2);
    return m;
  };
  const auto wt = taps(wv);
  Tensor<Scalar> out(xv.batch(), cout, 2 * h, 2 * w);
  RowMatrix<Scalar> tmp;
  for (int n = 0; n < xv.batch(); ++n) {
    for (int t = 0; t < 4; ++t) {
      const int a = t / 2;
      const int b = t % 2;
      tmp.noalias() = wt[t] * xv.sample(n);
      for (int co = 0; co < cout; ++co) {
        const Scalar bc = bias.value().data()[co];
        for (int y = 0; y < h; ++y)
          for (int xx = 0; xx < w; ++xx)
            out(n, co, 2 * y + a, 2 * xx + b) = tmp(co, Eigen::Index(y) * w + xx) + bc;
      }
    }
  }
  return g.record(std::move(out), {x, weight, bias},
                  [x, weight, bias, cin, cout, h, w, taps](Graph<Scalar>& g, int self) {
                    const Tensor<Scalar>& gout = g.grad(self);
                    const Tensor<Scalar>& xv = g.value(x.id);
                    const auto wt = taps(g.value(weight.id));
                    RowMatrix<Scalar> go(cout, Eigen::Index(h) * w);
                    for (int n = 0; n < xv.batch(); ++n) {
                      for (int t = 0; t < 4; ++t) {
                        const int a = t / 2;
                        const int b = t % 2;
                        for (int co = 0; co < cout; ++co)
                          for (int y = 0; y < h; ++y)
                            for (int xx = 0; xx < w; ++xx)
                              go(co, Eigen::Index(y) * w + xx) = gout(n, co, 2 * y + a, 2 * xx + b);
                        if (bias.requires_grad()) {
                          Eigen::Map<VectorX<Scalar>>(g.grad(bias.id).data(), cout) +=
                              go.rowwise().sum();
                        }
                        if (weight.requires_grad()) {
                          const RowMatrix<Scalar> dwt = go * xv.sample(n).transpose();  // cout x cin
                          Tensor<Scalar>& dw = g.grad(weight.id);
                          for (int ci = 0; ci < cin; ++ci)
                            for (int co = 0; co < cout; ++co) dw(ci, co, a, b) += dwt(co, ci);
                        }
                        if (x.requires_grad()) {
                          g.grad(x.id).sample(n).noalias() += wt[t].transpose() * go;
                        }
                      }
                    }
                  });
}

template <typename Scalar>
Var<Scalar> leaky_relu(Var<Scalar> x, Scalar slope) {
  Tensor<Scalar> out(x.shape());
  out.array() = (x.value().array() > Scalar(0)).select(x.value().array(), slope * x.value().array());
  return x.graph->record(std::move(out), {x}, [x, slope](Graph<Scalar>& g, int self) {
    const auto& xv = g.value(x.id).array();
    g.grad(x.id).array() +=
        (xv > Scalar(0)).select(g.grad(self).array(), slope * g.grad(self).array());
  });
}

template <typename Scalar>
Var<Scalar> relu(Var<Scalar> x) {
  return leaky_relu(x, Scalar(0));
}

template <typename Scalar>
Var<Scalar> sigmoid(Var<Scalar> x) {
  Tensor<Scalar> out(x.shape());
  out.array() = Scalar(1) / (Scalar(1) + (-x.value().array()).exp());
  return x.graph->record(std::move(out), {x}, [x](Graph<Scalar>& g, int self) {
    const auto& y = g.value(self).array();
    g.grad(x.id).array() += g.grad(self).array() * y * (Scalar(1) - y);
  });
}

template <typename Scalar>
Var<Scalar> avg_pool2(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  if (xv.height() % 2 != 0 || xv.width() % 2 != 0) {
    throw Error(ErrorCode::IndivisibleDims, "avg_pool2 on odd spatial dims " + xv.shape().str());
  }
  const int ho = xv.height() / 2;
  const int wo = xv.width() / 2;
  Tensor<Scalar> out(xv.batch(), xv.channels(), ho, wo);
  for (int n = 0; n < xv.batch(); ++n)
    for (int c = 0; c < xv.channels(); ++c)
      for (int y = 0; y < ho; ++y)
        for (int xx = 0; xx < wo; ++xx)
          out(n, c, y, xx) = Scalar(0.25) * (xv(n, c, 2 * y, 2 * xx) + xv(n, c, 2 * y, 2 * xx + 1) +
                                             xv(n, c, 2 * y + 1, 2 * xx) +
                                             xv(n, c, 2 * y + 1, 2 * xx + 1));
  return x.graph->record(std::move(out), {x}, [x, ho, wo](Graph<Scalar>& g, int self) {
    const Tensor<Scalar>& go = g.grad(self);
    Tensor<Scalar>& dx = g.grad(x.id);
    for (int n = 0; n < go.batch(); ++n)
      for (int c = 0; c < go.channels(); ++c)
        for (int y = 0; y < ho; ++y)
          for (int xx = 0; xx < wo; ++xx) {
            const Scalar v = Scalar(0.25) * go(n, c, y, xx);
            dx(n, c, 2 * y, 2 * xx) += v;
            dx(n, c, 2 * y, 2 * xx + 1) += v;
            dx(n, c, 2 * y + 1, 2 * xx) += v;
            dx(n, c, 2 * y + 1, 2 * xx + 1) += v;
          }
  });
}

template <typename Scalar>
Var<Scalar> concat_channels(Var<Scalar> a, Var<Scalar> b) {
  const Tensor<Scalar>& av = a.value();
  const Tensor<Scalar>& bv = b.value();
  if (av.batch() != bv.batch() || !av.shape().same_spatial(bv.shape())) {
    throw Error(ErrorCode::ShapeMismatch, "concat_channels: " + av.shape().str() + " vs " +
                                              bv.shape().str());
  }
  const int ca = av.channels();
  const int cb = bv.channels();
  Tensor<Scalar> out(av.batch(), ca + cb, av.height(), av.width());
  for (int n = 0; n < av.batch(); ++n) {
    out.sample(n).topRows(ca) = av.sample(n);
    out.sample(n).bottomRows(cb) = bv.sample(n);
  }
  return a.graph->record(std::move(out), {a, b}, [a, b, ca, cb](Graph<Scalar>& g, int self) {
    const Tensor<Scalar>& go = g.grad(self);
    for (int n = 0; n < go.batch(); ++n) {
      if (a.requires_grad()) g.grad(a.id).sample(n) += go.sample(n).topRows(ca);
      if (b.requires_grad()) g.grad(b.id).sample(n) += go.sample(n).bottomRows(cb);
    }
  });
}

template <typename Scalar>
Var<Scalar> add(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<Scalar> out(a.shape());
  out.array() = a.value().array() + b.value().array();
  return a.graph->record(std::move(out), {a, b}, [a, b](Graph<Scalar>& g, int self) {
    if (a.requires_grad()) g.grad(a.id).array() += g.grad(self).array();
    if (b.requires_grad()) g.grad(b.id).array() += g.grad(self).array();
  });
}

template <typename Scalar>
Var<Scalar> affine(Var<Scalar> x, Scalar a, Scalar b) {
  Tensor<Scalar> out(x.shape());
  out.array() = a * x.value().array() + b;
  return x.graph->record(std::move(out), {x}, [x, a](Graph<Scalar>& g, int self) {
    g.grad(x.id).array() += a * g.grad(self).array();
  });
}

template <typename Scalar>
Var<Scalar> mul_channel(Var<Scalar> x, Var<Scalar> gate) {
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& gv = gate.value();
  if (gv.batch() != xv.batch() || gv.channels() != xv.channels() || gv.height() != 1 ||
      gv.width() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "mul_channel: gate " + gv.shape().str());
  }
  Tensor<Scalar> out(xv.shape());
  for (int n = 0; n < xv.batch(); ++n) {
    const auto gcol = Eigen::Map<const VectorX<Scalar>>(gv.data() + n * xv.channels(), xv.channels());
    out.sample(n) = gcol.asDiagonal() * xv.sample(n);
  }
  return x.graph->record(std::move(out), {x, gate}, [x, gate](Graph<Scalar>& g, int self) {
    const Tensor<Scalar>& go = g.grad(self);
    const Tensor<Scalar>& xv = g.value(x.id);
    const Tensor<Scalar>& gv = g.value(gate.id);
    const int c = xv.channels();
    for (int n = 0; n < xv.batch(); ++n) {
      if (x.requires_grad()) {
        const auto gcol = Eigen::Map<const VectorX<Scalar>>(gv.data() + n * c, c);
        g.grad(x.id).sample(n) += gcol.asDiagonal() * go.sample(n);
      }
      if (gate.requires_grad()) {
        Eigen::Map<VectorX<Scalar>>(g.grad(gate.id).data() + n * c, c) +=
            go.sample(n).cwiseProduct(xv.sample(n)).rowwise().sum();
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> mul_spatial(Var<Scalar> x, Var<Scalar> gate) {
  const Tensor<Scalar>& xv = x.value();
  const Tensor<Scalar>& gv = gate.value();
  if (gv.batch() != xv.batch() || gv.channels() != 1 || !gv.shape().same_spatial(xv.shape())) {
    throw Error(ErrorCode::ShapeMismatch, "mul_spatial: gate " + gv.shape().str());
  }
  Tensor<Scalar> out(xv.shape());
  for (int n = 0; n < xv.batch(); ++n) {
    out.sample(n) = xv.sample(n).array().rowwise() * gv.sample(n).array().row(0);
  }
  return x.graph->record(std::move(out), {x, gate}, [x, gate](Graph<Scalar>& g, int self) {
    const Tensor<Scalar>& go = g.grad(self);
    const Tensor<Scalar>& xv = g.value(x.id);
    const Tensor<Scalar>& gv = g.value(gate.id);
    for (int n = 0; n < xv.batch(); ++n) {
      if (x.requires_grad()) {
        g.grad(x.id).sample(n).array() += go.sample(n).array().rowwise() * gv.sample(n).array().row(0);
      }
      if (gate.requires_grad()) {
        g.grad(gate.id).sample(n) += go.sample(n).cwiseProduct(xv.sample(n)).colwise().sum();
      }
    }
  });
}

template <typename Scalar>
Var<Scalar> global_avg_pool(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  Tensor<Scalar> out(xv.batch(), xv.channels(), 1, 1);
  const Scalar inv = Scalar(1) / Scalar(xv.shape().plane());
  for (int n = 0; n < xv.batch(); ++n) {
    Eigen::Map<VectorX<Scalar>>(out.data() + n * xv.channels(), xv.channels()) =
        xv.sample(n).rowwise().sum() * inv;
  }
  return x.graph->record(std::move(out), {x}, [x, inv](Graph<Scalar>& g, int self) {
    const Tensor<Scalar>& go = g.grad(self);
    Tensor<Scalar>& dx = g.grad(x.id);
    const int c = dx.channels();
    for (int n = 0; n < dx.batch(); ++n) {
      const auto gcol = Eigen::Map<const VectorX<Scalar>>(go.data() + n * c, c);
      dx.sample(n).colwise() += gcol * inv;
    }
  });
}

template <typename Scalar>
Var<Scalar> global_max_pool(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  const int c = xv.channels();
  Tensor<Scalar> out(xv.batch(), c, 1, 1);
  std::vector<Eigen::Index> arg(std::size_t(xv.batch()) * c);
  for (int n = 0; n < xv.batch(); ++n)
    for (int ch = 0; ch < c; ++ch) {
      Eigen::Index at = 0;
      out(n, ch, 0, 0) = xv.sample(n).row(ch).maxCoeff(&at);
      arg[std::size_t(n) * c + ch] = at;
    }
  return x.graph->record(std::move(out), {x}, [x, arg, c](Graph<Scalar>& g, int self) {
    const Tensor<Scalar>& go = g.grad(self);
    Tensor<Scalar>& dx = g.grad(x.id);
    for (int n = 0; n < dx.batch(); ++n)
      for (int ch = 0; ch < c; ++ch) dx.sample(n)(ch, arg[std::size_t(n) * c + ch]) += go(n, ch, 0, 0);
  });
}

template <typename Scalar>
Var<Scalar> channel_mean(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  Tensor<Scalar> out(xv.batch(), 1, xv.height(), xv.width());
  const Scalar inv = Scalar(1) / Scalar(xv.channels());
  for (int n = 0; n < xv.batch(); ++n) out.sample(n) = xv.sample(n).colwise().sum() * inv;
  return x.graph->record(std::move(out), {x}, [x, inv](Graph<Scalar>& g, int self) {
    const Tensor<Scalar>& go = g.grad(self);
    Tensor<Scalar>& dx = g.grad(x.id);
    for (int n = 0; n < dx.batch(); ++n) dx.sample(n).rowwise() += go.sample(n).row(0) * inv;
  });
}

template <typename Scalar>
Var<Scalar> channel_max(Var<Scalar> x) {
  const Tensor<Scalar>& xv = x.value();
  const Eigen::Index plane = xv.shape().plane();
  Tensor<Scalar> out(xv.batch(), 1, xv.height(), xv.width());
  std::vector<int> arg(std::size_t(xv.batch()) * plane);
  for (int n = 0; n < xv.batch(); ++n) {
    const auto s = xv.sample(n);
    for (Eigen::Index p = 0; p < plane; ++p) {
      Eigen::Index at = 0;
      out.sample(n)(0, p) = s.col(p).maxCoeff(&at);
      arg[std::size_t(n) * plane + p] = static_cast<int>(at);
    }
  }
  return x.graph->record(std::move(out), {x}, [x, arg, plane](Graph<Scalar>& g, int self) {
    const Tensor<Scalar>& go = g.grad(self);
    Tensor<Scalar>& dx = g.grad(x.id);
    for (int n = 0; n < dx.batch(); ++n)
      for (Eigen::Index p = 0; p < plane; ++p)
        dx.sample(n)(arg[std::size_t(n) * plane + p], p) += go.sample(n)(0, p);
  });
}

template <typename Scalar>
Var<Scalar> mean_of(const std::vector<Var<Scalar>>& scalars) {
  if (scalars.empty()) throw Error(ErrorCode::ShapeMismatch, "mean_of: no terms");
  Scalar total = 0;
  for (const auto& v : scalars) total += v.value().item();
  const Scalar inv = Scalar(1) / Scalar(scalars.size());
  return scalars.front().graph->record(Tensor<Scalar>::scalar(total * inv), scalars,
                                       [scalars, inv](Graph<Scalar>& g, int self) {
                                         const Scalar go = g.grad(self).item();
                                         for (const auto& v : scalars) {
                                           if (v.requires_grad()) g.grad(v.id).array() += go * inv;
                                         }
                                       });
}

template <typename Scalar>
Var<Scalar> mse(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a.shape(), b.shape(), "mse");
  const Scalar inv = Scalar(1) / Scalar(a.value().size());
  const Scalar value = (a.value().array() - b.value().array()).square().sum() * inv;
  return a.graph->record(Tensor<Scalar>::scalar(value), {a, b}, [a, b, inv](Graph<Scalar>& g, int self) {
    const Scalar go = g.grad(self).item();
    const auto diff = g.value(a.id).array() - g.value(b.id).array();
    if (a.requires_grad()) g.grad(a.id).array() += (Scalar(2) * inv * go) * diff;
    if (b.requires_grad()) g.grad(b.id).array() -= (Scalar(2) * inv * go) * diff;
  });
}

#define LLIE_INSTANTIATE_OPS(S)                                                     \
  template Var<S> conv2d(Var<S>, Var<S>, Var<S>, int);                              \
  template Var<S> conv_transpose2x2(Var<S>, Var<S>, Var<S>);                        \
  template Var<S> leaky_relu(Var<S>, S);                                            \
  template Var<S> relu(Var<S>);                                                     \
  template Var<S> sigmoid(Var<S>);                                                  \
  template Var<S> avg_pool2(Var<S>);                                                \
  template Var<S> concat_channels(Var<S>, Var<S>);                                  \
  template Var<S> add(Var<S>, Var<S>);                                              \
  template Var<S> affine(Var<S>, S, S);                                             \
  template Var<S> mul_channel(Var<S>, Var<S>);                                      \
  template Var<S> mul_spatial(Var<S>, Var<S>);                                      \
  template Var<S> global_avg_pool(Var<S>);                                          \
  template Var<S> global_max_pool(Var<S>);                                          \
  template Var<S> channel_mean(Var<S>);                                             \
  template Var<S> channel_max(Var<S>);                                              \
  template Var<S> mean_of(const std::vector<Var<S>>&);                              \
  template Var<S> mse(Var<S>, Var<S>);

LLIE_INSTANTIATE_OPS(float)
LLIE_INSTANTIATE_OPS(double)

}  // namespace llie::ops
