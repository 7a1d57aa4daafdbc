#include "drmn/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "drmn/errors.hpp"
#include "drmn/rng.hpp"

namespace drmn {

namespace {

std::atomic<std::uint64_t> g_next_id{1};

void check_finite(std::span<const double> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      std::ostringstream os;
      os << what << ": non-finite value " << values[i] << " at flat index " << i;
      throw NumericError(os.str());
    }
  }
}

std::shared_ptr<detail::TensorNode> make_node(Shape shape, std::vector<double> data,
                                              bool requires_grad, std::string_view what) {
  for (std::size_t e : shape) {
    if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_string(shape));
  }
  if (shape_size(shape) != data.size()) {
    throw DimensionError("tensor shape " + shape_string(shape) + " does not match " +
                         std::to_string(data.size()) + " values");
  }
  check_finite(data, what);
  auto node = std::make_shared<detail::TensorNode>();
  node->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

std::size_t shape_size(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---------------------------------------------------------------- Tensor

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : node_(make_node(std::move(shape), std::move(data), requires_grad, "tensor")) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(data), requires_grad);
}

Tensor Tensor::vector(std::vector<double> data, bool requires_grad) {
  std::size_t n = data.size();
  return Tensor(Shape{n}, std::move(data), requires_grad);
}

std::uint64_t Tensor::id() const { return node_ ? node_->id : 0; }

const Shape& Tensor::shape() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  }
  return s[axis];
}

std::size_t Tensor::size() const { return shape_size(shape()); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_string(shape()));
  return shape()[1];
}

std::span<const double> Tensor::data() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return node_->data;
}

double Tensor::operator()(std::size_t r, std::size_t c) const {
  return node_->data[r * node_->shape[1] + c];
}

double Tensor::item() const {
  if (size() != 1) throw DimensionError("item() on non-scalar " + shape_string(shape()));
  return node_->data[0];
}

std::vector<double> Tensor::to_vector() const {
  auto d = data();
  return {d.begin(), d.end()};
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::vector<double> Tensor::grad() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  if (node_->grad.empty()) return std::vector<double>(node_->data.size(), 0.0);
  return node_->grad;
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

void Tensor::assign(std::span<const double> values) {
  if (values.size() != size()) {
    throw DimensionError("assign: expected " + std::to_string(size()) + " values, got " +
                         std::to_string(values.size()));
  }
  check_finite(values, "assign");
  std::copy(values.begin(), values.end(), node_->data.begin());
}

Tensor Tensor::detach() const { return Tensor(shape(), to_vector(), false); }

Tensor Tensor::with_requires_grad(bool requires_grad) const {
  return Tensor(shape(), to_vector(), requires_grad);
}

// ---------------------------------------------------------------- Tape

Tape Tape::inference() {
  Tape t;
  t.recording_ = false;
  return t;
}

Tensor Tape::record(std::string_view op, Shape shape, std::vector<double> values,
                    std::vector<Tensor> inputs, Backward backward) {
  bool needs_grad = false;
  if (recording_) {
    for (const Tensor& in : inputs) needs_grad = needs_grad || in.requires_grad();
  }
  Tensor out;
  out.node_ = make_node(std::move(shape), std::move(values), needs_grad, op);
  if (needs_grad) {
    if (consumed_) throw ContractError("tape already ran backward; call reset() first");
    entries_.push_back(Record{op, std::move(inputs), out, std::move(backward)});
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) throw ContractError("backward called twice without reset()");
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward needs a scalar loss, got " +
                        (loss.defined() ? shape_string(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) throw ContractError("loss does not depend on any tracked tensor");
  consumed_ = true;
  const double one = 1.0;
  accumulate(loss, std::span<const double>(&one, 1));
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const auto& grad = it->output.node_->grad;
    if (grad.empty()) continue;
    it->backward(grad);
  }
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

std::vector<Tape::Entry> Tape::entries() const {
  std::vector<Entry> out;
  out.reserve(entries_.size());
  for (const Record& r : entries_) {
    Entry e{r.op, {}, r.output.id()};
    for (const Tensor& in : r.inputs) e.input_ids.push_back(in.id());
    out.push_back(std::move(e));
  }
  return out;
}

void Tape::accumulate(const Tensor& t, std::span<const double> g) {
  double* buf = grad_buffer(t);
  if (!buf) return;
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

double* Tape::grad_buffer(const Tensor& t) {
  if (!t.requires_grad()) return nullptr;
  auto& grad = t.node_->grad;
  if (grad.empty()) grad.assign(t.node_->data.size(), 0.0);
  return grad.data();
}

// ---------------------------------------------------------------- RngState

std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t RngState::next_u64() noexcept {
  ++counter_;
  return mix64(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
}

double RngState::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::normal() noexcept {
  double u1 = uniform();
  double u2 = uniform();
  // u1 in (0, 1] keeps the log finite.
  u1 = 1.0 - u1;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::uint64_t RngState::below(std::uint64_t n) noexcept {
  if (n <= 1) return 0;
  // Rejection keeps the draw unbiased.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

RngState RngState::fork(std::uint64_t stream) const noexcept {
  return RngState(mix64(seed_ ^ mix64(stream + 0xD1B54A32D192ED03ULL)), 0);
}

}  // namespace drmn
