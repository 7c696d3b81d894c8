#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "aapl/error.hpp"
#include "aapl/rng.hpp"

namespace aapl {

using Shape = std::vector<int>;

int shape_numel(const Shape& shape);
bool shape_equal(const Shape& a, const Shape& b);
std::string shape_str(const Shape& shape);

class Tape;
class Gradients;

/// Dense 64-bit float tensor. Plain value type: copying copies the data.
///
/// A tensor participates in differentiation when it is marked requires_grad
/// (a leaf) or is the result of an operation recorded on the active tape. The
/// tape handle below is a cache keyed by tape generation, so a tensor that
/// outlives one tape is transparently re-registered as a fresh leaf on the
/// next one.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from_vector(std::vector<double> values);
  static Tensor matrix(int rows, int cols, std::vector<double> values);
  /// Entries drawn i.i.d. N(0, stddev^2) from the given stream.
  static Tensor randn(Shape shape, Rng& rng, double stddev);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int size() const { return static_cast<int>(data_.size()); }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& mutable_data() { return data_; }

  double operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  /// Row-major access for rank-2 tensors.
  double at(int r, int c) const;

  /// Value of a one-element tensor.
  double value() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  /// True when this tensor would contribute gradient on the given tape.
  bool participates(const Tape& tape) const;

 private:
  Shape shape_{};
  std::vector<double> data_{};
  bool requires_grad_ = false;

  // Node handle on the most recent tape that saw this tensor. Stale handles
  // (tape_id mismatch) are ignored.
  mutable std::uint64_t tape_id_ = 0;
  mutable int node_ = -1;

  friend class Tape;
  friend class Gradients;
};

/// Result of a backward pass: gradient tensors keyed by tape node. Tensors
/// that did not participate in the forward pass have no entry.
class Gradients {
 public:
  /// Gradient of the loss w.r.t. t, or nullptr when t did not participate.
  const Tensor* find(const Tensor& t) const;
  /// Like find(), but a missing gradient is a ContractError.
  const Tensor& at(const Tensor& t) const;
  bool contains(const Tensor& t) const { return find(t) != nullptr; }
  std::size_t size() const { return by_node_.size(); }

 private:
  std::uint64_t tape_id_ = 0;
  std::unordered_map<int, Tensor> by_node_;
  friend class Tape;
};

/// Append-only record of one forward pass. Constructing a Tape makes it the
/// active tape for the current thread; destruction restores the previous one
/// (tapes nest). Creation order is a topological order of the graph, so the
/// backward sweep is a single reverse walk that visits each node once.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// The innermost active tape on this thread, or nullptr.
  static Tape* active();

  /// Gradients of a scalar loss w.r.t. everything reachable from it.
  Gradients backward(const Tensor& loss);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  std::uint64_t id() const { return id_; }

  /// Node handle for t on this tape; registers a leaf when t requires grad.
  /// Returns -1 for constants.
  int node_of(const Tensor& t);

  using BackwardFn =
      std::function<void(const std::vector<double>& out_grad,
                         const std::vector<std::vector<double>*>& parent_grads)>;

  int record(Shape shape, std::vector<int> parents, BackwardFn backward);

  /// Attaches an existing node handle to a freshly produced tensor.
  void tag(const Tensor& t, int node) const;

 private:
  struct Node {
    Shape shape;
    std::vector<int> parents;
    BackwardFn backward;
  };

  std::uint64_t id_;
  std::vector<Node> nodes_;
  Tape* previous_ = nullptr;
};

/// Suspends tape recording for the current scope. Used by evaluation paths
/// and finite-difference probes that must not pollute an outer tape.
class TapeSuspend {
 public:
  TapeSuspend();
  ~TapeSuspend();
  TapeSuspend(const TapeSuspend&) = delete;
  TapeSuspend& operator=(const TapeSuspend&) = delete;

 private:
  Tape* saved_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Every op validates shapes, checks the result for
// NaN/Inf, and records itself when an input participates in the active tape.
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);  // subgradient 0 at the kink
Tensor sum(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);
/// (m x k)·(k x n) -> (m x n), or (m x k)·(k) -> (m).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor concat(std::span<const Tensor> parts);
Tensor stack_scalars(std::span<const Tensor> scalars);
Tensor l2_normalize(const Tensor& v, double min_norm = 1e-12);
Tensor cosine_similarity(const Tensor& u, const Tensor& v);
/// Gradient at u == v is defined as zero.
Tensor euclidean_distance(const Tensor& u, const Tensor& v);
Tensor softmax_cross_entropy(const Tensor& logits, int label);
/// Off-tape copy: same values, no gradient flow.
Tensor detach(const Tensor& t);

/// Numerically stable softmax of raw values (no tape participation).
std::vector<double> softmax_values(const std::vector<double>& logits);

void check_finite(std::span<const double> values, const char* what);

}  // namespace aapl
