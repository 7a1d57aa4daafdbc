#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace drmn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorNode {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient arrives
  bool requires_grad = false;
};

}  // namespace detail

/// Dense row-major float64 array. Copies share storage; values are fixed at
/// construction except through `assign`, which optimizers use on leaves.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);
  static Tensor vector(std::vector<double> data, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  std::uint64_t id() const;
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  double operator[](std::size_t i) const { return data()[i]; }
  double operator()(std::size_t r, std::size_t c) const;
  double item() const;
  std::vector<double> to_vector() const;

  bool requires_grad() const;
  bool has_grad() const;
  /// Accumulated gradient; zeros when nothing has flowed back yet.
  std::vector<double> grad() const;
  void zero_grad();

  /// Overwrite values in place (shape unchanged, finite values only).
  void assign(std::span<const double> values);

  /// Same values, no gradient tracking, separate storage.
  Tensor detach() const;
  Tensor with_requires_grad(bool requires_grad) const;

  bool same_storage(const Tensor& other) const noexcept { return node_ == other.node_; }

 private:
  friend class Tape;
  std::shared_ptr<detail::TensorNode> node_;
};

/// Ordered record of primitive applications for reverse-mode
/// differentiation. Each op appends one entry after its inputs exist, so the
/// entry list is already in topological order.
class Tape {
 public:
  using Backward = std::function<void(std::span<const double> grad_out)>;

  struct Entry {
    std::string_view op;
    std::vector<std::uint64_t> input_ids;
    std::uint64_t output_id;
  };

  Tape() = default;
  /// A tape that never records; outputs never require gradients.
  static Tape inference();

  bool recording() const noexcept { return recording_; }

  /// Wrap freshly computed `values` as the output of `op`. `backward` is kept
  /// only if recording and some input requires a gradient.
  Tensor record(std::string_view op, Shape shape, std::vector<double> values,
                std::vector<Tensor> inputs, Backward backward);

  /// Propagate d(loss)/d(leaf) into every leaf that requires a gradient.
  /// Gradients accumulate into existing leaf buffers.
  void backward(const Tensor& loss);
  void reset();

  std::size_t size() const noexcept { return entries_.size(); }
  std::vector<Entry> entries() const;

  /// Add `g` into `t`'s gradient buffer when `t` requires a gradient.
  static void accumulate(const Tensor& t, std::span<const double> g);
  /// Writable gradient buffer of `t` (allocated on first use), or nullptr
  /// when `t` does not require a gradient.
  static double* grad_buffer(const Tensor& t);

 private:
  struct Record {
    std::string_view op;
    std::vector<Tensor> inputs;
    Tensor output;
    Backward backward;
  };

  std::vector<Record> entries_;
  bool recording_ = true;
  bool consumed_ = false;
};

}  // namespace drmn
