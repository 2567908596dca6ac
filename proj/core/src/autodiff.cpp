#include "refacer/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

#include "refacer/error.hpp"

namespace refacer::ad {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

[[noreturn]] void shape_error(const std::string& what) { throw Error(ErrorKind::ShapeMismatch, what); }

void require_same(const Shape& a, const Shape& b, const char* op) {
  if (!(a == b)) shape_error(std::string(op) + ": " + to_string(a) + " vs " + to_string(b));
}

std::ptrdiff_t mirror(std::ptrdiff_t t, std::ptrdiff_t n) {
  if (n == 1) return 0;
  const std::ptrdiff_t period = 2 * (n - 1);
  t %= period;
  if (t < 0) t += period;
  return t >= n ? period - t : t;
}

/// Sampling geometry of a convolution: `channels` x `height` x `width`
/// image, K x K kernel, output grid out_h x out_w. For every kernel offset
/// the source coordinate of each output row/column, or -1 for zero padding.
struct ConvGeometry {
  std::size_t channels, height, width, kernel, out_h, out_w;
  std::vector<std::ptrdiff_t> row_src;  // kernel x out_h
  std::vector<std::ptrdiff_t> col_src;  // kernel x out_w

  ConvGeometry(std::size_t c, std::size_t h, std::size_t w, std::size_t k, std::size_t stride, std::size_t pad,
               PadMode mode, std::size_t oh, std::size_t ow)
      : channels(c), height(h), width(w), kernel(k), out_h(oh), out_w(ow), row_src(k * oh), col_src(k * ow) {
    auto source = [&](std::size_t o, std::size_t kk, std::size_t extent) -> std::ptrdiff_t {
      const auto pos = static_cast<std::ptrdiff_t>(o * stride + kk) - static_cast<std::ptrdiff_t>(pad);
      const auto n = static_cast<std::ptrdiff_t>(extent);
      if (pos >= 0 && pos < n) return pos;
      return mode == PadMode::Reflect ? mirror(pos, n) : -1;
    };
    for (std::size_t kk = 0; kk < k; ++kk) {
      for (std::size_t o = 0; o < oh; ++o) row_src[kk * oh + o] = source(o, kk, h);
      for (std::size_t o = 0; o < ow; ++o) col_src[kk * ow + o] = source(o, kk, w);
    }
  }

  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return out_h * out_w; }
};

template <typename T>
void im2col(const T* image, const ConvGeometry& g, T* cols) {
  const std::size_t plane = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* src_plane = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        T* dst = cols + ((c * g.kernel + ky) * g.kernel + kx) * plane;
        const std::ptrdiff_t* xs = g.col_src.data() + kx * g.out_w;
        for (std::size_t oy = 0; oy < g.out_h; ++oy, dst += g.out_w) {
          const std::ptrdiff_t iy = g.row_src[ky * g.out_h + oy];
          if (iy < 0) {
            std::fill(dst, dst + g.out_w, T(0));
            continue;
          }
          const T* src_row = src_plane + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox) dst[ox] = xs[ox] < 0 ? T(0) : src_row[xs[ox]];
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-adds columns back onto the image.
template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* image) {
  const std::size_t plane = g.col_cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* dst_plane = image + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const T* src = cols + ((c * g.kernel + ky) * g.kernel + kx) * plane;
        const std::ptrdiff_t* xs = g.col_src.data() + kx * g.out_w;
        for (std::size_t oy = 0; oy < g.out_h; ++oy, src += g.out_w) {
          const std::ptrdiff_t iy = g.row_src[ky * g.out_h + oy];
          if (iy < 0) continue;
          T* dst_row = dst_plane + static_cast<std::size_t>(iy) * g.width;
          for (std::size_t ox = 0; ox < g.out_w; ++ox)
            if (xs[ox] >= 0) dst_row[xs[ox]] += src[ox];
        }
      }
    }
  }
}

template <typename T>
void check_bias(const Tape<T>& tape, std::optional<Var> bias, std::size_t channels, const char* op) {
  if (!bias) return;
  const Shape s = tape.value(*bias).shape;
  if (!(s == Shape{1, channels, 1, 1})) shape_error(std::string(op) + ": bias shape " + to_string(s));
}

template <typename T>
void add_bias(Tensor<T>& y, const Tensor<T>& b) {
  const std::size_t plane = y.shape.h * y.shape.w;
  for (std::size_t n = 0; n < y.shape.n; ++n)
    for (std::size_t c = 0; c < y.shape.c; ++c) {
      T* p = y.data.data() + (n * y.shape.c + c) * plane;
      const T bias = b.data[c];
      for (std::size_t i = 0; i < plane; ++i) p[i] += bias;
    }
}

template <typename T>
void accumulate_bias_grad(const Tensor<T>& out_grad, Tensor<T>& bias_grad) {
  const std::size_t plane = out_grad.shape.h * out_grad.shape.w;
  for (std::size_t n = 0; n < out_grad.shape.n; ++n)
    for (std::size_t c = 0; c < out_grad.shape.c; ++c) {
      const T* p = out_grad.data.data() + (n * out_grad.shape.c + c) * plane;
      T acc = T(0);
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      bias_grad.data[c] += acc;
    }
}

template <typename T, typename Fwd, typename Deriv>
Var unary(Tape<T>& tape, Var x, Fwd fwd, Deriv deriv) {
  const Tensor<T>& in = tape.value(x);
  Tensor<T> out(in.shape);
  for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = fwd(in.data[i]);
  return tape.record(std::move(out), {x}, [x, deriv](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& in = t.value(x);
    Tensor<T>& gx = t.grad_accumulator(x);
    for (std::size_t i = 0; i < in.size(); ++i) gx.data[i] += g.data[i] * deriv(in.data[i]);
  });
}

}  // namespace

std::string to_string(const Shape& s) {
  return "(" + std::to_string(s.n) + "," + std::to_string(s.c) + "," + std::to_string(s.h) + "," +
         std::to_string(s.w) + ")";
}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (stride == 0 || in + 2 * pad < kernel) return 0;
  return (in + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Tensor<T>::Tensor(Shape s, std::vector<T> values) : shape(s), data(std::move(values)) {
  if (data.size() != shape.size()) shape_error("tensor data length does not match shape " + to_string(shape));
}

template <typename T>
bool Tensor<T>::all_finite() const noexcept {
  return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------- Tape

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::input(Tensor<T> value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad, nullptr, {}});
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::parameter(Parameter<T>& param, bool trainable) {
  nodes_.push_back(Node{param.value, {}, trainable, trainable ? &param : nullptr, {}});
  return Var{nodes_.size() - 1};
}

template <typename T>
Var Tape<T>::record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (Var v : inputs) needs = needs || nodes_.at(v.id).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(backward) : BackwardFn{}});
  return Var{nodes_.size() - 1};
}

template <typename T>
const Tensor<T>& Tape<T>::grad(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.shape.size() != node.value.shape.size() || node.grad.data.empty()) node.grad = Tensor<T>(node.value.shape);
  return node.grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_accumulator(Var v) {
  Node& node = nodes_.at(v.id);
  if (node.grad.data.empty()) node.grad = Tensor<T>(node.value.shape);
  return node.grad;
}

template <typename T>
void Tape<T>::backward(Var loss) {
  Node& root = nodes_.at(loss.id);
  if (!(root.value.shape == Shape{1, 1, 1, 1}))
    throw Error(ErrorKind::NonScalarLoss, "backward needs a 1x1x1x1 loss, got " + to_string(root.value.shape));
  if (!root.requires_grad) return;
  root.grad = Tensor<T>(root.value.shape, T(1));
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.data.empty()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.param) {
      auto& pg = node.param->grad;
      if (pg.data.size() != node.grad.data.size()) pg = Tensor<T>(node.param->value.shape);
      for (std::size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += node.grad.data[i];
    }
  }
}

// ---------------------------------------------------------------- convolution

template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var weights, std::optional<Var> bias, ConvOptions opt) {
  const Tensor<T>& x = tape.value(input);
  const Tensor<T>& w = tape.value(weights);
  const Shape xs = x.shape, ws = w.shape;
  if (ws.h != ws.w) shape_error("conv2d: kernel must be square, got " + to_string(ws));
  if (ws.c != xs.c) shape_error("conv2d: input has " + std::to_string(xs.c) + " channels, weights expect " + std::to_string(ws.c));
  if (opt.pad_mode == PadMode::Reflect && (opt.pad >= xs.h || opt.pad >= xs.w))
    shape_error("conv2d: reflection pad must be smaller than the image");
  check_bias(tape, bias, ws.n, "conv2d");
  const std::size_t K = ws.h;
  const std::size_t oh = conv_output_size(xs.h, K, opt.stride, opt.pad);
  const std::size_t ow = conv_output_size(xs.w, K, opt.stride, opt.pad);
  if (oh == 0 || ow == 0) shape_error("conv2d: kernel larger than padded input " + to_string(xs));

  auto geom = std::make_shared<ConvGeometry>(xs.c, xs.h, xs.w, K, opt.stride, opt.pad, opt.pad_mode, oh, ow);
  const std::size_t rows = geom->col_rows(), cols_n = geom->col_cols();
  const bool keep_cols = tape.requires_grad(weights);
  auto cols = std::make_shared<std::vector<T>>(keep_cols ? xs.n * rows * cols_n : rows * cols_n);

  Tensor<T> y(Shape{xs.n, ws.n, oh, ow});
  const ConstMapMat<T> wm(w.data.data(), ws.n, rows);
  for (std::size_t n = 0; n < xs.n; ++n) {
    T* col = cols->data() + (keep_cols ? n * rows * cols_n : 0);
    im2col(x.data.data() + n * xs.c * xs.h * xs.w, *geom, col);
    MapMat<T> out(y.data.data() + n * ws.n * cols_n, ws.n, cols_n);
    out.noalias() = wm * ConstMapMat<T>(col, rows, cols_n);
  }
  if (bias) add_bias(y, tape.value(*bias));
  if (!keep_cols) cols.reset();

  const std::optional<Var> b = bias;
  const std::initializer_list<Var> with_bias = {input, weights, bias.value_or(weights)};
  return tape.record(std::move(y), with_bias, [input, weights, b, geom, cols](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& w = t.value(weights);
    const Shape ws = w.shape;
    const std::size_t rows = geom->col_rows(), cols_n = geom->col_cols();
    const std::size_t batch = g.shape.n;
    if (t.requires_grad(weights)) {
      MapMat<T> gw(t.grad_accumulator(weights).data.data(), ws.n, rows);
      for (std::size_t n = 0; n < batch; ++n)
        gw.noalias() += ConstMapMat<T>(g.data.data() + n * ws.n * cols_n, ws.n, cols_n) *
                        ConstMapMat<T>(cols->data() + n * rows * cols_n, rows, cols_n).transpose();
    }
    if (b && t.requires_grad(*b)) accumulate_bias_grad(g, t.grad_accumulator(*b));
    if (t.requires_grad(input)) {
      Tensor<T>& gx = t.grad_accumulator(input);
      const ConstMapMat<T> wm(w.data.data(), ws.n, rows);
      RowMat<T> dcols(rows, cols_n);
      const std::size_t image = geom->channels * geom->height * geom->width;
      for (std::size_t n = 0; n < batch; ++n) {
        dcols.noalias() = wm.transpose() * ConstMapMat<T>(g.data.data() + n * ws.n * cols_n, ws.n, cols_n);
        col2im_add(dcols.data(), *geom, gx.data.data() + n * image);
      }
    }
  });
}

template <typename T>
Var conv2d_transpose(Tape<T>& tape, Var input, Var weights, std::optional<Var> bias, std::size_t stride,
                     std::size_t pad) {
  const Tensor<T>& x = tape.value(input);
  const Tensor<T>& w = tape.value(weights);
  const Shape xs = x.shape, ws = w.shape;
  if (ws.h != ws.w) shape_error("conv2d_transpose: kernel must be square, got " + to_string(ws));
  if (ws.n != xs.c) shape_error("conv2d_transpose: input has " + std::to_string(xs.c) + " channels, weights expect " + std::to_string(ws.n));
  if (stride == 0) shape_error("conv2d_transpose: stride must be >= 1");
  check_bias(tape, bias, ws.c, "conv2d_transpose");
  const std::size_t K = ws.h;
  const auto full_h = static_cast<std::ptrdiff_t>((xs.h - 1) * stride + K) - static_cast<std::ptrdiff_t>(2 * pad);
  const auto full_w = static_cast<std::ptrdiff_t>((xs.w - 1) * stride + K) - static_cast<std::ptrdiff_t>(2 * pad);
  if (full_h <= 0 || full_w <= 0) shape_error("conv2d_transpose: padding removes the whole output");
  const auto oh = static_cast<std::size_t>(full_h), ow = static_cast<std::size_t>(full_w);

  // Geometry of the forward convolution this operator is the adjoint of.
  auto geom = std::make_shared<ConvGeometry>(ws.c, oh, ow, K, stride, pad, PadMode::Zero, xs.h, xs.w);
  const std::size_t rows = geom->col_rows(), plane = geom->col_cols();

  Tensor<T> y(Shape{xs.n, ws.c, oh, ow});
  const ConstMapMat<T> wm(w.data.data(), ws.n, rows);
  RowMat<T> cols(rows, plane);
  for (std::size_t n = 0; n < xs.n; ++n) {
    cols.noalias() = wm.transpose() * ConstMapMat<T>(x.data.data() + n * xs.c * plane, xs.c, plane);
    col2im_add(cols.data(), *geom, y.data.data() + n * ws.c * oh * ow);
  }
  if (bias) add_bias(y, tape.value(*bias));

  const std::optional<Var> b = bias;
  const std::initializer_list<Var> deps = {input, weights, bias.value_or(weights)};
  return tape.record(std::move(y), deps, [input, weights, b, geom](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& x = t.value(input);
    const Tensor<T>& w = t.value(weights);
    const Shape ws = w.shape;
    const std::size_t rows = geom->col_rows(), plane = geom->col_cols();
    const std::size_t out_image = geom->channels * geom->height * geom->width;
    if (b && t.requires_grad(*b)) accumulate_bias_grad(g, t.grad_accumulator(*b));
    const bool need_w = t.requires_grad(weights), need_x = t.requires_grad(input);
    if (!need_w && !need_x) return;
    RowMat<T> gcols(rows, plane);
    const ConstMapMat<T> wm(w.data.data(), ws.n, rows);
    for (std::size_t n = 0; n < g.shape.n; ++n) {
      im2col(g.data.data() + n * out_image, *geom, gcols.data());
      if (need_w) {
        MapMat<T> gw(t.grad_accumulator(weights).data.data(), ws.n, rows);
        gw.noalias() += ConstMapMat<T>(x.data.data() + n * ws.n * plane, ws.n, plane) * gcols.transpose();
      }
      if (need_x) {
        MapMat<T> gx(t.grad_accumulator(input).data.data() + n * ws.n * plane, ws.n, plane);
        gx.noalias() += wm * gcols;
      }
    }
  });
}

// ---------------------------------------------------------------- normalisation

template <typename T>
Var instance_norm(Tape<T>& tape, Var input, Var gain, Var offset, T eps) {
  const Tensor<T>& x = tape.value(input);
  const Shape xs = x.shape;
  const Shape param_shape{1, xs.c, 1, 1};
  require_same(tape.value(gain).shape, param_shape, "instance_norm gain");
  require_same(tape.value(offset).shape, param_shape, "instance_norm offset");
  if (!(eps > T(0))) throw Error(ErrorKind::InvalidArgument, "instance_norm eps must be > 0");

  const std::size_t plane = xs.h * xs.w;
  auto normalized = std::make_shared<std::vector<T>>(x.size());
  auto inv_std = std::make_shared<std::vector<T>>(xs.n * xs.c);
  const Tensor<T>& gv = tape.value(gain);
  const Tensor<T>& ov = tape.value(offset);
  Tensor<T> y(xs);
  for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
    const std::size_t c = nc % xs.c;
    const T* p = x.data.data() + nc * plane;
    T mean = T(0);
    for (std::size_t i = 0; i < plane; ++i) mean += p[i];
    mean /= static_cast<T>(plane);
    T var = T(0);
    for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<T>(plane);
    const T istd = T(1) / std::sqrt(var + eps);
    (*inv_std)[nc] = istd;
    T* xh = normalized->data() + nc * plane;
    T* out = y.data.data() + nc * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      xh[i] = (p[i] - mean) * istd;
      out[i] = gv.data[c] * xh[i] + ov.data[c];
    }
  }

  return tape.record(std::move(y), {input, gain, offset},
                     [input, gain, offset, normalized, inv_std, xs](Tape<T>& t, const Tensor<T>& g) {
    const std::size_t plane = xs.h * xs.w;
    const Tensor<T>& gv = t.value(gain);
    const bool need_gain = t.requires_grad(gain), need_offset = t.requires_grad(offset);
    const bool need_x = t.requires_grad(input);
    for (std::size_t nc = 0; nc < xs.n * xs.c; ++nc) {
      const std::size_t c = nc % xs.c;
      const T* gp = g.data.data() + nc * plane;
      const T* xh = normalized->data() + nc * plane;
      T sum_g = T(0), sum_gx = T(0);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += gp[i];
        sum_gx += gp[i] * xh[i];
      }
      if (need_gain) t.grad_accumulator(gain).data[c] += sum_gx;
      if (need_offset) t.grad_accumulator(offset).data[c] += sum_g;
      if (need_x) {
        T* gx = t.grad_accumulator(input).data.data() + nc * plane;
        const T scale = gv.data[c] * (*inv_std)[nc];
        const T mean_g = sum_g / static_cast<T>(plane);
        const T mean_gx = sum_gx / static_cast<T>(plane);
        for (std::size_t i = 0; i < plane; ++i) gx[i] += scale * (gp[i] - mean_g - xh[i] * mean_gx);
      }
    }
  });
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  return unary(tape, x, [](T v) { return v > T(0) ? v : T(0); }, [](T v) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Var leaky_relu(Tape<T>& tape, Var x, T slope) {
  return unary(tape, x, [slope](T v) { return v > T(0) ? v : slope * v; },
               [slope](T v) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Var tanh(Tape<T>& tape, Var x) {
  return unary(tape, x, [](T v) { return std::tanh(v); },
               [](T v) {
                 const T th = std::tanh(v);
                 return T(1) - th * th;
               });
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor) {
  return unary(tape, x, [factor](T v) { return factor * v; }, [factor](T) { return factor; });
}

template <typename T>
Var add_scalar(Tape<T>& tape, Var x, T value) {
  return unary(tape, x, [value](T v) { return v + value; }, [](T) { return T(1); });
}

template <typename T>
Var square(Tape<T>& tape, Var x) {
  return unary(tape, x, [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <typename T>
Var abs(Tape<T>& tape, Var x) {
  return unary(tape, x, [](T v) { return std::abs(v); },
               [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require_same(av.shape, bv.shape, "add");
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] + bv.data[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
    for (Var v : {a, b}) {
      if (!t.requires_grad(v)) continue;
      Tensor<T>& gv = t.grad_accumulator(v);
      for (std::size_t i = 0; i < g.size(); ++i) gv.data[i] += g.data[i];
    }
  });
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require_same(av.shape, bv.shape, "sub");
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] - bv.data[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
    if (t.requires_grad(a)) {
      Tensor<T>& ga = t.grad_accumulator(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
    }
    if (t.requires_grad(b)) {
      Tensor<T>& gb = t.grad_accumulator(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] -= g.data[i];
    }
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  require_same(av.shape, bv.shape, "mul");
  Tensor<T> out(av.shape);
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] = av.data[i] * bv.data[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& g) {
    const Tensor<T>& av = t.value(a);
    const Tensor<T>& bv = t.value(b);
    if (t.requires_grad(a)) {
      Tensor<T>& ga = t.grad_accumulator(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data[i] += g.data[i] * bv.data[i];
    }
    if (t.requires_grad(b)) {
      Tensor<T>& gb = t.grad_accumulator(b);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data[i] += g.data[i] * av.data[i];
    }
  });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  const Tensor<T>& in = tape.value(x);
  T acc = T(0);
  for (T v : in.data) acc += v;
  return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, acc), {x}, [x](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& gx = t.grad_accumulator(x);
    for (auto& v : gx.data) v += g.data[0];
  });
}

template <typename T>
Var mean(Tape<T>& tape, Var x) {
  const Tensor<T>& in = tape.value(x);
  T acc = T(0);
  for (T v : in.data) acc += v;
  const T count = static_cast<T>(in.size());
  return tape.record(Tensor<T>(Shape{1, 1, 1, 1}, acc / count), {x}, [x, count](Tape<T>& t, const Tensor<T>& g) {
    Tensor<T>& gx = t.grad_accumulator(x);
    const T share = g.data[0] / count;
    for (auto& v : gx.data) v += share;
  });
}

#define REFACER_INSTANTIATE_AD(T)                                                                        \
  template struct Tensor<T>;                                                                             \
  template class Tape<T>;                                                                                \
  template Var conv2d<T>(Tape<T>&, Var, Var, std::optional<Var>, ConvOptions);                          \
  template Var conv2d_transpose<T>(Tape<T>&, Var, Var, std::optional<Var>, std::size_t, std::size_t);    \
  template Var instance_norm<T>(Tape<T>&, Var, Var, Var, T);                                            \
  template Var relu<T>(Tape<T>&, Var);                                                                   \
  template Var leaky_relu<T>(Tape<T>&, Var, T);                                                          \
  template Var tanh<T>(Tape<T>&, Var);                                                                   \
  template Var add<T>(Tape<T>&, Var, Var);                                                               \
  template Var sub<T>(Tape<T>&, Var, Var);                                                               \
  template Var mul<T>(Tape<T>&, Var, Var);                                                               \
  template Var scale<T>(Tape<T>&, Var, T);                                                               \
  template Var add_scalar<T>(Tape<T>&, Var, T);                                                          \
  template Var square<T>(Tape<T>&, Var);                                                                 \
  template Var abs<T>(Tape<T>&, Var);                                                                    \
  template Var sum<T>(Tape<T>&, Var);                                                                    \
  template Var mean<T>(Tape<T>&, Var);

REFACER_INSTANTIATE_AD(float)
REFACER_INSTANTIATE_AD(double)

}  // namespace refacer::ad
