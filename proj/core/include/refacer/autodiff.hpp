#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace refacer::ad {

/// (batch, channel, height, width); convolution weights reuse it as
/// (out, in, kh, kw), or (in, out, kh, kw) for transposed convolutions.
struct Shape {
  std::size_t n = 1, c = 1, h = 1, w = 1;

  constexpr std::size_t size() const noexcept { return n * c * h * w; }
  constexpr bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& s);

template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, std::vector<T> values);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return ((n * shape.c + c) * shape.h + h) * shape.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept { return data[offset(n, c, h, w)]; }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept { return data[offset(n, c, h, w)]; }
  bool all_finite() const noexcept;
};

/// Named trainable tensor owned by a model; the tape adds into `grad`.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape) {}
  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), T(0)); }
};

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const noexcept { return id != static_cast<std::size_t>(-1); }
};

/// Records values and backward rules in creation order, which is a
/// topological order by construction. One tape per forward/backward pass.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>& out_grad)>;

  /// Leaf that never receives a gradient.
  Var constant(Tensor<T> value);
  /// Leaf whose gradient is kept on the tape (read it with grad()).
  Var input(Tensor<T> value, bool requires_grad = true);
  /// Leaf bound to a model parameter; backward() adds into param.grad when
  /// `trainable`. The value is copied, so later parameter updates do not
  /// change this pass.
  Var parameter(Parameter<T>& param, bool trainable = true);

  /// Result of an operation. `backward` is dropped when no input needs a gradient.
  Var record(Tensor<T> value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Tensor<T>& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  /// Gradient of the last backward() target; zero-filled if the node got none.
  const Tensor<T>& grad(Var v);
  /// Accumulator for an input gradient, allocated on first use. Only valid
  /// for nodes with requires_grad.
  Tensor<T>& grad_accumulator(Var v);

  /// Loss must have shape 1x1x1x1 (NonScalarLoss otherwise).
  void backward(Var loss);
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    Parameter<T>* param = nullptr;
    BackwardFn backward;
  };
  std::deque<Node> nodes_;
};

enum class PadMode { Zero, Reflect };

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t pad = 0;
  PadMode pad_mode = PadMode::Zero;
};

/// Cross-correlation; weights (Cout, Cin, K, K), bias (1, Cout, 1, 1).
/// Output side = floor((H + 2 pad - K) / stride) + 1.
template <typename T>
Var conv2d(Tape<T>& tape, Var input, Var weights, std::optional<Var> bias, ConvOptions opt);

/// Adjoint of a zero-padded conv2d; weights (Cin, Cout, K, K).
/// Output side = (H - 1) stride - 2 pad + K.
template <typename T>
Var conv2d_transpose(Tape<T>& tape, Var input, Var weights, std::optional<Var> bias, std::size_t stride,
                     std::size_t pad);

/// Per (batch, channel) spatial standardisation, then gain * x + offset with
/// gain/offset of shape (1, C, 1, 1).
template <typename T>
Var instance_norm(Tape<T>& tape, Var input, Var gain, Var offset, T eps = T(1e-5));

template <typename T> Var relu(Tape<T>& tape, Var x);
template <typename T> Var leaky_relu(Tape<T>& tape, Var x, T slope);
template <typename T> Var tanh(Tape<T>& tape, Var x);
template <typename T> Var add(Tape<T>& tape, Var a, Var b);
template <typename T> Var sub(Tape<T>& tape, Var a, Var b);
template <typename T> Var mul(Tape<T>& tape, Var a, Var b);
template <typename T> Var scale(Tape<T>& tape, Var x, T factor);
template <typename T> Var add_scalar(Tape<T>& tape, Var x, T value);
template <typename T> Var square(Tape<T>& tape, Var x);
template <typename T> Var abs(Tape<T>& tape, Var x);
/// Scalar (1x1x1x1) reductions.
template <typename T> Var sum(Tape<T>& tape, Var x);
template <typename T> Var mean(Tape<T>& tape, Var x);

/// Output spatial extent of conv2d along one axis, or 0 when the kernel does
/// not fit.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

}  // namespace refacer::ad
