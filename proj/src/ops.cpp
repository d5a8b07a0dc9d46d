#include "lrdet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "lrdet/errors.hpp"

namespace lrdet::ops {
namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using ConstMapVec = Eigen::Map<const Eigen::VectorXf>;
using MapVec = Eigen::Map<Eigen::VectorXf>;

ConstMapMat as_mat(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMapMat(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MapMat as_mat(Tensor& t, std::size_t rows, std::size_t cols) {
  return MapMat(t.data().data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
ConstMapVec as_vec(const Tensor& t) { return ConstMapVec(t.data().data(), static_cast<Eigen::Index>(t.size())); }
MapVec as_vec(Tensor& t) { return MapVec(t.data().data(), static_cast<Eigen::Index>(t.size())); }

std::string mismatch(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b);
}

void accumulate(Tensor* dst, const Tensor& src) {
  if (dst) as_vec(*dst) += as_vec(src);
}

// Sum of `g` into a single-element slot (scalar-broadcast operand).
void accumulate_reduced(Tensor* dst, const Tensor& g) {
  if (dst) (*dst)[0] += as_vec(g).sum();
}

template <typename Fwd>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* name, Fwd f) {
  const bool same = a.shape() == b.shape();
  LRDET_REQUIRE(same || a.size() == 1 || b.size() == 1, mismatch(name, a.shape(), b.shape()));
  const Tensor& big = a.size() >= b.size() ? a : b;
  Tensor out(big.shape());
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  const std::size_t sa = a.size() == 1 ? 0 : 1;
  const std::size_t sb = b.size() == 1 ? 0 : 1;
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(x[i * sa], y[i * sb]);
  return out;
}

}  // namespace

Var add(const Var& a, const Var& b) {
  Tensor out = map_binary(a.value(), b.value(), "add", [](float x, float y) { return x + y; });
  const bool ra = a.value().size() != out.size();
  const bool rb = b.value().size() != out.size();
  std::array<const Var*, 2> in{&a, &b};
  return Tape::record(std::move(out), in, [ra, rb](const Tensor& g, std::span<Tensor* const> d) {
    ra ? accumulate_reduced(d[0], g) : accumulate(d[0], g);
    rb ? accumulate_reduced(d[1], g) : accumulate(d[1], g);
  });
}

Var sub(const Var& a, const Var& b) {
  Tensor out = map_binary(a.value(), b.value(), "sub", [](float x, float y) { return x - y; });
  const bool ra = a.value().size() != out.size();
  const bool rb = b.value().size() != out.size();
  std::array<const Var*, 2> in{&a, &b};
  return Tape::record(std::move(out), in, [ra, rb](const Tensor& g, std::span<Tensor* const> d) {
    ra ? accumulate_reduced(d[0], g) : accumulate(d[0], g);
    if (d[1]) {
      if (rb) {
        (*d[1])[0] -= as_vec(g).sum();
      } else {
        as_vec(*d[1]) -= as_vec(g);
      }
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Tensor out = map_binary(a.value(), b.value(), "mul", [](float x, float y) { return x * y; });
  const bool ra = a.value().size() != out.size();
  const bool rb = b.value().size() != out.size();
  std::array<const Var*, 2> in{&a, &b};
  return Tape::record(std::move(out), in,
                      [av = a.value(), bv = b.value(), ra, rb](const Tensor& g, std::span<Tensor* const> d) {
                        // d(a*b)/da = b and vice versa, with scalar operands reduced.
                        if (d[0]) {
                          Tensor ga = map_binary(g, bv, "mul", [](float x, float y) { return x * y; });
                          ra ? accumulate_reduced(d[0], ga) : accumulate(d[0], ga);
                        }
                        if (d[1]) {
                          Tensor gb = map_binary(g, av, "mul", [](float x, float y) { return x * y; });
                          rb ? accumulate_reduced(d[1], gb) : accumulate(d[1], gb);
                        }
                      });
}

Var scale(const Var& a, float factor) {
  Tensor out = a.value();
  as_vec(out) *= factor;
  std::array<const Var*, 1> in{&a};
  return Tape::record(std::move(out), in, [factor](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0]) as_vec(*d[0]) += factor * as_vec(g);
  });
}

Var square(const Var& a) {
  Tensor out = a.value();
  as_vec(out) = as_vec(out).array().square().matrix();
  std::array<const Var*, 1> in{&a};
  return Tape::record(std::move(out), in, [av = a.value()](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0]) as_vec(*d[0]).array() += 2.0f * as_vec(av).array() * as_vec(g).array();
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (float& v : out.data()) v = v > 0.0f ? v : 0.0f;
  std::array<const Var*, 1> in{&a};
  return Tape::record(std::move(out), in, [av = a.value()](const Tensor& g, std::span<Tensor* const> d) {
    if (!d[0]) return;
    auto x = av.data();
    auto gg = g.data();
    auto dst = d[0]->data();
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] > 0.0f) dst[i] += gg[i];
  });
}

Var log(const Var& a) {
  Tensor out = a.value();
  for (float v : out.data()) LRDET_REQUIRE(v > 0.0f, "log: non-positive input");
  for (float& v : out.data()) v = std::log(v);
  std::array<const Var*, 1> in{&a};
  return Tape::record(std::move(out), in, [av = a.value()](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0]) as_vec(*d[0]).array() += as_vec(g).array() / as_vec(av).array();
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  LRDET_REQUIRE(x.rank() == 2 && y.rank() == 2 && x.dim(1) == y.dim(0), mismatch("matmul", x.shape(), y.shape()));
  const std::size_t m = x.dim(0), k = x.dim(1), n = y.dim(1);
  Tensor out(Shape{m, n});
  as_mat(out, m, n).noalias() = as_mat(x, m, k) * as_mat(y, k, n);
  std::array<const Var*, 2> in{&a, &b};
  return Tape::record(std::move(out), in, [x, y, m, k, n](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0]) as_mat(*d[0], m, k).noalias() += as_mat(g, m, n) * as_mat(y, k, n).transpose();
    if (d[1]) as_mat(*d[1], k, n).noalias() += as_mat(x, m, k).transpose() * as_mat(g, m, n);
  });
}

Var linear(const Var& xv, const Var& wv, const Var& bv) {
  const Tensor& x = xv.value();
  const Tensor& w = wv.value();
  const Tensor& b = bv.value();
  LRDET_REQUIRE(x.rank() == 2 && w.rank() == 2 && x.dim(1) == w.dim(0), mismatch("linear", x.shape(), w.shape()));
  LRDET_REQUIRE(b.size() == w.dim(1), mismatch("linear bias", b.shape(), w.shape()));
  const std::size_t m = x.dim(0), k = x.dim(1), n = w.dim(1);
  Tensor out(Shape{m, n});
  auto o = as_mat(out, m, n);
  o.noalias() = as_mat(x, m, k) * as_mat(w, k, n);
  o.rowwise() += as_vec(b).transpose();
  std::array<const Var*, 3> in{&xv, &wv, &bv};
  // Saves x only when the weight gradient is needed, w only for the input gradient.
  Tensor saved_x = wv.tracked() ? x : Tensor();
  Tensor saved_w = xv.tracked() ? w : Tensor();
  return Tape::record(std::move(out), in,
                      [sx = std::move(saved_x), sw = std::move(saved_w), m, k, n](const Tensor& g,
                                                                                  std::span<Tensor* const> d) {
                        auto gm = as_mat(g, m, n);
                        if (d[0]) as_mat(*d[0], m, k).noalias() += gm * as_mat(sw, k, n).transpose();
                        if (d[1]) as_mat(*d[1], k, n).noalias() += as_mat(sx, m, k).transpose() * gm;
                        if (d[2]) as_vec(*d[2]) += gm.colwise().sum().transpose();
                      });
}

namespace {

struct ConvGeom {
  std::size_t batch, in_ch, h, w, out_ch, k, pad, out_h, out_w;
  std::size_t patch() const { return in_ch * k * k; }
  std::size_t pixels() const { return out_h * out_w; }
};

// cols[(c*k + i)*k + j, oy*out_w + ox] = x[c, oy+i-pad, ox+j-pad]
void im2col(const float* x, const ConvGeom& g, float* cols) {
  const std::size_t px = g.pixels();
  for (std::size_t c = 0; c < g.in_ch; ++c)
    for (std::size_t i = 0; i < g.k; ++i)
      for (std::size_t j = 0; j < g.k; ++j) {
        float* row = cols + ((c * g.k + i) * g.k + j) * px;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + i) - static_cast<std::ptrdiff_t>(g.pad);
          float* dst = row + oy * g.out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.out_w, 0.0f);
            continue;
          }
          const float* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + j) - static_cast<std::ptrdiff_t>(g.pad);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0f : src[ix];
          }
        }
      }
}

void col2im_add(const float* cols, const ConvGeom& g, float* dx) {
  const std::size_t px = g.pixels();
  for (std::size_t c = 0; c < g.in_ch; ++c)
    for (std::size_t i = 0; i < g.k; ++i)
      for (std::size_t j = 0; j < g.k; ++j) {
        const float* row = cols + ((c * g.k + i) * g.k + j) * px;
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + i) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          float* dst = dx + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + j) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += row[oy * g.out_w + ox];
          }
        }
      }
}

}  // namespace

Var conv2d(const Var& xv, const Var& wv, const Var& bv, Padding padding) {
  const Tensor& x = xv.value();
  const Tensor& w = wv.value();
  const Tensor& b = bv.value();
  LRDET_REQUIRE(x.rank() == 4 && w.rank() == 4 && w.dim(2) == w.dim(3) && x.dim(1) == w.dim(1),
                mismatch("conv2d", x.shape(), w.shape()));
  LRDET_REQUIRE(b.size() == w.dim(0), mismatch("conv2d bias", b.shape(), w.shape()));
  ConvGeom g{};
  g.batch = x.dim(0);
  g.in_ch = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.out_ch = w.dim(0);
  g.k = w.dim(2);
  g.pad = padding == Padding::same ? (g.k - 1) / 2 : 0;
  LRDET_REQUIRE(g.h + 2 * g.pad >= g.k && g.w + 2 * g.pad >= g.k, mismatch("conv2d kernel/input", x.shape(), w.shape()));
  g.out_h = g.h + 2 * g.pad - g.k + 1;
  g.out_w = g.w + 2 * g.pad - g.k + 1;

  const std::size_t in_sz = g.in_ch * g.h * g.w;
  const std::size_t out_sz = g.out_ch * g.pixels();
  Tensor out(Shape{g.batch, g.out_ch, g.out_h, g.out_w});
  std::vector<float> cols(g.patch() * g.pixels());
  const auto wm = as_mat(w, g.out_ch, g.patch());
  for (std::size_t n = 0; n < g.batch; ++n) {
    im2col(x.data().data() + n * in_sz, g, cols.data());
    MapMat o(out.data().data() + n * out_sz, static_cast<Eigen::Index>(g.out_ch), static_cast<Eigen::Index>(g.pixels()));
    o.noalias() = wm * ConstMapMat(cols.data(), static_cast<Eigen::Index>(g.patch()), static_cast<Eigen::Index>(g.pixels()));
    o.colwise() += as_vec(b);
  }

  std::array<const Var*, 3> in{&xv, &wv, &bv};
  Tensor saved_x = wv.tracked() ? x : Tensor();
  Tensor saved_w = xv.tracked() ? w : Tensor();
  return Tape::record(std::move(out), in,
                      [sx = std::move(saved_x), sw = std::move(saved_w), g, in_sz, out_sz](
                          const Tensor& grad, std::span<Tensor* const> d) {
                        std::vector<float> cols(g.patch() * g.pixels());
                        const auto P = static_cast<Eigen::Index>(g.patch());
                        const auto Q = static_cast<Eigen::Index>(g.pixels());
                        const auto O = static_cast<Eigen::Index>(g.out_ch);
                        for (std::size_t n = 0; n < g.batch; ++n) {
                          ConstMapMat go(grad.data().data() + n * out_sz, O, Q);
                          if (d[1]) {
                            im2col(sx.data().data() + n * in_sz, g, cols.data());
                            as_mat(*d[1], g.out_ch, g.patch()).noalias() +=
                                go * ConstMapMat(cols.data(), P, Q).transpose();
                          }
                          if (d[2]) as_vec(*d[2]) += go.rowwise().sum();
                          if (d[0]) {
                            MapMat(cols.data(), P, Q).noalias() = as_mat(sw, g.out_ch, g.patch()).transpose() * go;
                            col2im_add(cols.data(), g, d[0]->data().data() + n * in_sz);
                          }
                        }
                      });
}

Var max_pool2x2(const Var& xv) {
  const Tensor& x = xv.value();
  LRDET_REQUIRE(x.rank() == 4 && x.dim(2) % 2 == 0 && x.dim(3) % 2 == 0,
                "max_pool2x2: expected [B,C,H,W] with even H,W, got " + shape_str(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  Tensor out(Shape{x.dim(0), x.dim(1), oh, ow});
  std::vector<std::uint32_t> argmax(out.size());
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t base = p * h * w + 2 * oy * w + 2 * ox;
        std::size_t best = base;
        // First maximum in row-major window order wins ties.
        for (std::size_t idx : {base + 1, base + w, base + w + 1})
          if (src[idx] > src[best]) best = idx;
        const std::size_t o = (p * oh + oy) * ow + ox;
        dst[o] = src[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
  std::array<const Var*, 1> in{&xv};
  return Tape::record(std::move(out), in, [argmax = std::move(argmax)](const Tensor& g, std::span<Tensor* const> d) {
    if (!d[0]) return;
    auto gg = g.data();
    auto dx = d[0]->data();
    for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += gg[o];
  });
}

namespace {

void require_matrix(const Tensor& t, const char* op) {
  LRDET_REQUIRE(t.rank() == 2, std::string(op) + ": expected [B,K], got " + shape_str(t.shape()));
}

}  // namespace

Var softmax(const Var& logits) {
  const Tensor& z = logits.value();
  require_matrix(z, "softmax");
  const std::size_t rows = z.dim(0), k = z.dim(1);
  Tensor out(z.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* src = z.data().data() + r * k;
    float* dst = out.data().data() + r * k;
    const float mx = *std::max_element(src, src + k);
    float total = 0.0f;
    for (std::size_t j = 0; j < k; ++j) total += dst[j] = std::exp(src[j] - mx);
    for (std::size_t j = 0; j < k; ++j) dst[j] /= total;
  }
  std::array<const Var*, 1> in{&logits};
  return Tape::record(out, in, [p = out, rows, k](const Tensor& g, std::span<Tensor* const> d) {
    if (!d[0]) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const float* pr = p.data().data() + r * k;
      const float* gr = g.data().data() + r * k;
      float dot = 0.0f;
      for (std::size_t j = 0; j < k; ++j) dot += pr[j] * gr[j];
      float* dr = d[0]->data().data() + r * k;
      for (std::size_t j = 0; j < k; ++j) dr[j] += pr[j] * (gr[j] - dot);
    }
  });
}

Var log_softmax(const Var& logits) {
  const Tensor& z = logits.value();
  require_matrix(z, "log_softmax");
  const std::size_t rows = z.dim(0), k = z.dim(1);
  Tensor out(z.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const float* src = z.data().data() + r * k;
    float* dst = out.data().data() + r * k;
    const float mx = *std::max_element(src, src + k);
    float total = 0.0f;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(src[j] - mx);
    const float lse = mx + std::log(total);
    for (std::size_t j = 0; j < k; ++j) dst[j] = src[j] - lse;
  }
  std::array<const Var*, 1> in{&logits};
  return Tape::record(out, in, [ls = out, rows, k](const Tensor& g, std::span<Tensor* const> d) {
    if (!d[0]) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const float* lr = ls.data().data() + r * k;
      const float* gr = g.data().data() + r * k;
      float gsum = 0.0f;
      for (std::size_t j = 0; j < k; ++j) gsum += gr[j];
      float* dr = d[0]->data().data() + r * k;
      for (std::size_t j = 0; j < k; ++j) dr[j] += gr[j] - std::exp(lr[j]) * gsum;
    }
  });
}

Var pick(const Var& xv, std::span<const std::uint32_t> index) {
  const Tensor& x = xv.value();
  require_matrix(x, "pick");
  LRDET_REQUIRE(index.size() == x.dim(0), "pick: " + std::to_string(index.size()) + " indices for " + shape_str(x.shape()));
  const std::size_t k = x.dim(1);
  Tensor out(Shape{x.dim(0)});
  for (std::size_t r = 0; r < index.size(); ++r) {
    LRDET_REQUIRE(index[r] < k, "pick: index " + std::to_string(index[r]) + " out of range for " + shape_str(x.shape()));
    out[r] = x[r * k + index[r]];
  }
  std::array<const Var*, 1> in{&xv};
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  return Tape::record(std::move(out), in, [idx = std::move(idx), k](const Tensor& g, std::span<Tensor* const> d) {
    if (!d[0]) return;
    for (std::size_t r = 0; r < idx.size(); ++r) (*d[0])[r * k + idx[r]] += g[r];
  });
}

Var sum(const Var& a) {
  Tensor out = Tensor::scalar(as_vec(a.value()).sum());
  std::array<const Var*, 1> in{&a};
  return Tape::record(std::move(out), in, [](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0]) as_vec(*d[0]).array() += g[0];
  });
}

Var mean(const Var& a) {
  const auto n = static_cast<float>(a.value().size());
  Tensor out = Tensor::scalar(as_vec(a.value()).sum() / n);
  std::array<const Var*, 1> in{&a};
  return Tape::record(std::move(out), in, [n](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0]) as_vec(*d[0]).array() += g[0] / n;
  });
}

Var row_mean(const Var& a) {
  const Tensor& x = a.value();
  LRDET_REQUIRE(x.rank() >= 2, "row_mean: expected [B,...], got " + shape_str(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.row_size();
  Tensor out(Shape{rows});
  as_vec(out) = as_mat(x, rows, cols).rowwise().mean();
  std::array<const Var*, 1> in{&a};
  return Tape::record(std::move(out), in, [rows, cols](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0]) as_mat(*d[0], rows, cols).colwise() += as_vec(g) / static_cast<float>(cols);
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  std::array<const Var*, 1> in{&a};
  return Tape::record(std::move(out), in, [](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0]) as_vec(*d[0]) += as_vec(g);
  });
}

Var flatten(const Var& a) {
  LRDET_REQUIRE(a.value().rank() >= 1, "flatten: rank-0 input");
  if (a.value().rank() == 2) return a;
  return reshape(a, Shape{a.value().dim(0), a.value().row_size()});
}

Var slice_cols(const Var& xv, std::size_t begin, std::size_t end) {
  const Tensor& x = xv.value();
  require_matrix(x, "slice_cols");
  LRDET_REQUIRE(begin < end && end <= x.dim(1), "slice_cols: [" + std::to_string(begin) + "," + std::to_string(end) +
                                                    ") out of " + shape_str(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1), width = end - begin;
  Tensor out(Shape{rows, width});
  as_mat(out, rows, width) = as_mat(x, rows, cols).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(width));
  std::array<const Var*, 1> in{&xv};
  return Tape::record(std::move(out), in, [rows, cols, begin, width](const Tensor& g, std::span<Tensor* const> d) {
    if (d[0])
      as_mat(*d[0], rows, cols).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(width)) +=
          as_mat(g, rows, width);
  });
}

Var concat_cols(std::span<const Var> parts) {
  LRDET_REQUIRE(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts[0].value().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    require_matrix(p.value(), "concat_cols");
    LRDET_REQUIRE(p.value().dim(0) == rows, mismatch("concat_cols", parts[0].shape(), p.shape()));
    widths.push_back(p.value().dim(1));
    total += widths.back();
  }
  Tensor out(Shape{rows, total});
  std::size_t offset = 0;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    as_mat(out, rows, total).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(widths[i])) =
        as_mat(parts[i].value(), rows, widths[i]);
    offset += widths[i];
  }
  std::vector<const Var*> in;
  for (const Var& p : parts) in.push_back(&p);
  return Tape::record(std::move(out), in, [rows, total, widths](const Tensor& g, std::span<Tensor* const> d) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      if (d[i])
        as_mat(*d[i], rows, widths[i]) +=
            as_mat(g, rows, total).middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(widths[i]));
      off += widths[i];
    }
  });
}

}  // namespace lrdet::ops
