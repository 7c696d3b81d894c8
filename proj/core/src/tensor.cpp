#include "aapl/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

namespace aapl {

int shape_numel(const Shape& shape) {
  int n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("shape dimensions must be positive");
    n *= d;
  }
  return n;
}

bool shape_equal(const Shape& a, const Shape& b) { return a == b; }

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

void check_finite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(what) + ": non-finite value produced");
    }
  }
}

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)), data_(std::move(data)),
      requires_grad_(requires_grad) {
  if (shape_numel(shape_) != static_cast<int>(data_.size())) {
    throw ShapeError("tensor data length does not match shape " +
                     shape_str(shape_));
  }
}

Tensor Tensor::zeros(Shape shape) {
  const int n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(Shape shape, double value) {
  const int n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::from_vector(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(int rows, int cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  const int n = shape_numel(shape);
  std::vector<double> data(n);
  for (double& v : data) v = rng.gaussian(0.0, stddev);
  return Tensor(std::move(shape), std::move(data));
}

double Tensor::at(int r, int c) const {
  if (rank() != 2) throw ShapeError("at(r, c) needs a rank-2 tensor");
  return data_[static_cast<std::size_t>(r) * shape_[1] + c];
}

double Tensor::value() const {
  if (size() != 1) {
    throw ContractError("value() called on tensor of size " +
                        std::to_string(size()));
  }
  return data_[0];
}

bool Tensor::participates(const Tape& tape) const {
  return requires_grad_ || (tape_id_ == tape.id() && node_ >= 0);
}

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

namespace {
thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_tape_counter{1};
}  // namespace

Tape::Tape() : id_(g_tape_counter.fetch_add(1)) {
  previous_ = g_active_tape;
  g_active_tape = this;
}

Tape::~Tape() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

TapeSuspend::TapeSuspend() : saved_(g_active_tape) { g_active_tape = nullptr; }

TapeSuspend::~TapeSuspend() { g_active_tape = saved_; }

int Tape::record(Shape shape, std::vector<int> parents, BackwardFn backward) {
  nodes_.push_back(
      Node{std::move(shape), std::move(parents), std::move(backward)});
  return static_cast<int>(nodes_.size()) - 1;
}

int Tape::node_of(const Tensor& t) {
  if (t.tape_id_ == id_ && t.node_ >= 0) return t.node_;
  if (!t.requires_grad_) return -1;
  // First use of a leaf on this tape.
  const int node = record(t.shape_, {}, nullptr);
  tag(t, node);
  return node;
}

void Tape::tag(const Tensor& t, int node) const {
  t.tape_id_ = id_;
  t.node_ = node;
}

Gradients Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() requires a scalar loss");
  }
  if (loss.tape_id_ != id_ || loss.node_ < 0) {
    throw ContractError("backward() loss was not produced on this tape");
  }

  std::vector<std::optional<std::vector<double>>> grads(nodes_.size());
  grads[loss.node_] = std::vector<double>{1.0};

  for (int n = loss.node_; n >= 0; --n) {
    if (!grads[n].has_value()) continue;  // unreachable from the loss
    const Node& node = nodes_[n];
    if (!node.backward) continue;  // leaf
    std::vector<std::vector<double>*> parent_grads(node.parents.size());
    for (std::size_t p = 0; p < node.parents.size(); ++p) {
      const int parent = node.parents[p];
      if (!grads[parent].has_value()) {
        grads[parent] = std::vector<double>(
            static_cast<std::size_t>(shape_numel(nodes_[parent].shape)), 0.0);
      }
      parent_grads[p] = &*grads[parent];
    }
    node.backward(*grads[n], parent_grads);
  }

  Gradients out;
  out.tape_id_ = id_;
  for (std::size_t n = 0; n < nodes_.size(); ++n) {
    if (!grads[n].has_value()) continue;
    out.by_node_.emplace(
        static_cast<int>(n),
        Tensor(nodes_[n].shape, std::move(*grads[n])));
  }
  return out;
}

const Tensor* Gradients::find(const Tensor& t) const {
  if (t.tape_id_ != tape_id_ || t.node_ < 0) return nullptr;
  auto it = by_node_.find(t.node_);
  return it == by_node_.end() ? nullptr : &it->second;
}

const Tensor& Gradients::at(const Tensor& t) const {
  const Tensor* g = find(t);
  if (!g) throw ContractError("no gradient recorded for this tensor");
  return *g;
}

// ---------------------------------------------------------------------------
// Op plumbing
// ---------------------------------------------------------------------------

namespace {

// Records `result` on the active tape when any input participates.
void maybe_record(Tensor& result, std::span<const Tensor* const> inputs,
                  const std::function<Tape::BackwardFn(Tape&)>& make_backward) {
  Tape* tape = Tape::active();
  if (!tape) return;
  bool any = false;
  for (const Tensor* in : inputs) {
    if (in->participates(*tape)) {
      any = true;
      break;
    }
  }
  if (!any) return;

  std::vector<int> parents(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    parents[i] = tape->node_of(*inputs[i]);
    if (parents[i] < 0) {
      // Constant input: give it a throwaway leaf so slot indices line up.
      parents[i] = tape->record(inputs[i]->shape(), {}, nullptr);
    }
  }
  const int node =
      tape->record(result.shape(), std::move(parents), make_backward(*tape));
  tape->tag(result, node);
  result.set_requires_grad(true);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!shape_equal(a.shape(), b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

void require_vector(const Tensor& t, const char* op) {
  if (t.rank() != 1) {
    throw ShapeError(std::string(op) + ": expected a rank-1 tensor, got " +
                     shape_str(t.shape()));
  }
}

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.data());
  for (int i = 0; i < b.size(); ++i) out[i] += b[i];
  check_finite(out, "add");
  Tensor result(a.shape(), std::move(out));
  const Tensor* inputs[] = {&a, &b};
  maybe_record(result, inputs, [](Tape&) {
    return [](const std::vector<double>& g,
              const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*pg[0])[i] += g[i];
        (*pg[1])[i] += g[i];
      }
    };
  });
  return result;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.data());
  for (int i = 0; i < b.size(); ++i) out[i] -= b[i];
  check_finite(out, "sub");
  Tensor result(a.shape(), std::move(out));
  const Tensor* inputs[] = {&a, &b};
  maybe_record(result, inputs, [](Tape&) {
    return [](const std::vector<double>& g,
              const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*pg[0])[i] += g[i];
        (*pg[1])[i] -= g[i];
      }
    };
  });
  return result;
}

Tensor scale(const Tensor& a, double c) {
  if (!std::isfinite(c)) throw NumericError("scale: non-finite factor");
  std::vector<double> out(a.data());
  for (double& v : out) v *= c;
  check_finite(out, "scale");
  Tensor result(a.shape(), std::move(out));
  const Tensor* inputs[] = {&a};
  maybe_record(result, inputs, [c](Tape&) {
    return [c](const std::vector<double>& g,
               const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += c * g[i];
    };
  });
  return result;
}

Tensor add_scalar(const Tensor& a, double c) {
  if (!std::isfinite(c)) throw NumericError("add_scalar: non-finite addend");
  std::vector<double> out(a.data());
  for (double& v : out) v += c;
  check_finite(out, "add_scalar");
  Tensor result(a.shape(), std::move(out));
  const Tensor* inputs[] = {&a};
  maybe_record(result, inputs, [](Tape&) {
    return [](const std::vector<double>& g,
              const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[0])[i] += g[i];
    };
  });
  return result;
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.data());
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  Tensor result(a.shape(), std::move(out));
  const Tensor* inputs[] = {&a};
  maybe_record(result, inputs, [&a](Tape&) {
    std::vector<double> input_copy(a.data());
    return [input_copy = std::move(input_copy)](const std::vector<double>& g,
                        const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (input_copy[i] > 0.0) (*pg[0])[i] += g[i];
      }
    };
  });
  return result;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  check_finite(std::span<const double>(&s, 1), "sum");
  Tensor result = Tensor::scalar(s);
  const Tensor* inputs[] = {&a};
  const std::size_t n = a.data().size();
  maybe_record(result, inputs, [n](Tape&) {
    return [n](const std::vector<double>& g,
               const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < n; ++i) (*pg[0])[i] += g[0];
    };
  });
  return result;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_vector(a, "dot");
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
  check_finite(std::span<const double>(&s, 1), "dot");
  Tensor result = Tensor::scalar(s);
  const Tensor* inputs[] = {&a, &b};
  maybe_record(result, inputs, [&a, &b](Tape&) {
    return [av = a.data(), bv = b.data()](const std::vector<double>& g,
                    const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < av.size(); ++i) {
        (*pg[0])[i] += g[0] * bv[i];
        (*pg[1])[i] += g[0] * av[i];
      }
    };
  });
  return result;
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2) {
    throw ShapeError("matmul: left operand must be rank-2, got " +
                     shape_str(a.shape()));
  }
  const int m = a.shape()[0];
  const int k = a.shape()[1];

  if (b.rank() == 1) {
    if (b.shape()[0] != k) {
      throw ShapeError("matmul: inner dimensions disagree, " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    std::vector<double> out(m, 0.0);
    for (int r = 0; r < m; ++r) {
      double s = 0.0;
      const double* row = a.data().data() + static_cast<std::size_t>(r) * k;
      for (int j = 0; j < k; ++j) s += row[j] * b[j];
      out[r] = s;
    }
    check_finite(out, "matmul");
    Tensor result({m}, std::move(out));
    const Tensor* inputs[] = {&a, &b};
    maybe_record(result, inputs, [&a, &b, m, k](Tape&) {
      return [av = a.data(), bv = b.data(), m, k](const std::vector<double>& g,
                            const std::vector<std::vector<double>*>& pg) {
        for (int r = 0; r < m; ++r) {
          const double gr = g[r];
          for (int j = 0; j < k; ++j) {
            (*pg[0])[static_cast<std::size_t>(r) * k + j] += gr * bv[j];
            (*pg[1])[j] += gr * av[static_cast<std::size_t>(r) * k + j];
          }
        }
      };
    });
    return result;
  }

  if (b.rank() != 2 || b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions disagree, " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const int n = b.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < k; ++j) {
      const double arj = a.data()[static_cast<std::size_t>(r) * k + j];
      const double* brow = b.data().data() + static_cast<std::size_t>(j) * n;
      double* orow = out.data() + static_cast<std::size_t>(r) * n;
      for (int c = 0; c < n; ++c) orow[c] += arj * brow[c];
    }
  }
  check_finite(out, "matmul");
  Tensor result({m, n}, std::move(out));
  const Tensor* inputs[] = {&a, &b};
  maybe_record(result, inputs, [&a, &b, m, k, n](Tape&) {
    return [av = a.data(), bv = b.data(), m, k, n](const std::vector<double>& g,
                             const std::vector<std::vector<double>*>& pg) {
      // dA = G B^T, dB = A^T G
      for (int r = 0; r < m; ++r) {
        for (int j = 0; j < k; ++j) {
          double s = 0.0;
          for (int c = 0; c < n; ++c) {
            s += g[static_cast<std::size_t>(r) * n + c] *
                 bv[static_cast<std::size_t>(j) * n + c];
          }
          (*pg[0])[static_cast<std::size_t>(r) * k + j] += s;
        }
      }
      for (int j = 0; j < k; ++j) {
        for (int c = 0; c < n; ++c) {
          double s = 0.0;
          for (int r = 0; r < m; ++r) {
            s += av[static_cast<std::size_t>(r) * k + j] *
                 g[static_cast<std::size_t>(r) * n + c];
          }
          (*pg[1])[static_cast<std::size_t>(j) * n + c] += s;
        }
      }
    };
  });
  return result;
}

// ---------------------------------------------------------------------------
// Structural ops
// ---------------------------------------------------------------------------

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  std::vector<double> out;
  std::vector<std::size_t> sizes;
  for (const Tensor& p : parts) {
    require_vector(p, "concat");
    sizes.push_back(p.data().size());
    out.insert(out.end(), p.data().begin(), p.data().end());
  }
  Tensor result({static_cast<int>(out.size())}, std::move(out));
  std::vector<const Tensor*> inputs;
  for (const Tensor& p : parts) inputs.push_back(&p);
  maybe_record(result, inputs, [sizes](Tape&) {
    return [sizes](const std::vector<double>& g,
                   const std::vector<std::vector<double>*>& pg) {
      std::size_t offset = 0;
      for (std::size_t p = 0; p < sizes.size(); ++p) {
        for (std::size_t i = 0; i < sizes[p]; ++i) {
          (*pg[p])[i] += g[offset + i];
        }
        offset += sizes[p];
      }
    };
  });
  return result;
}

Tensor stack_scalars(std::span<const Tensor> scalars) {
  if (scalars.empty()) throw ContractError("stack_scalars: no inputs");
  std::vector<double> out;
  for (const Tensor& s : scalars) out.push_back(s.value());
  Tensor result({static_cast<int>(out.size())}, std::move(out));
  std::vector<const Tensor*> inputs;
  for (const Tensor& s : scalars) inputs.push_back(&s);
  maybe_record(result, inputs, [](Tape&) {
    return [](const std::vector<double>& g,
              const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < g.size(); ++i) (*pg[i])[0] += g[i];
    };
  });
  return result;
}

Tensor detach(const Tensor& t) {
  return Tensor(t.shape(), t.data(), false);
}

// ---------------------------------------------------------------------------
// Geometry ops
// ---------------------------------------------------------------------------

Tensor l2_normalize(const Tensor& v, double min_norm) {
  require_vector(v, "l2_normalize");
  const double n = norm2(v.data());
  if (n < min_norm) {
    throw DegenerateInputError("l2_normalize: norm " + std::to_string(n) +
                               " below minimum");
  }
  std::vector<double> out(v.data());
  for (double& x : out) x /= n;
  check_finite(out, "l2_normalize");
  Tensor result(v.shape(), std::move(out));
  const Tensor* inputs[] = {&v};
  maybe_record(result, inputs, [&result, n](Tape&) {
    return [unit = result.data(), n](const std::vector<double>& g,
                     const std::vector<std::vector<double>*>& pg) {
      double gy = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * unit[i];
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*pg[0])[i] += (g[i] - unit[i] * gy) / n;
      }
    };
  });
  return result;
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
  require_vector(u, "cosine_similarity");
  require_same_shape(u, v, "cosine_similarity");
  const double nu = norm2(u.data());
  const double nv = norm2(v.data());
  if (nu == 0.0 || nv == 0.0) {
    throw DegenerateInputError("cosine_similarity: zero-norm input");
  }
  double uv = 0.0;
  for (int i = 0; i < u.size(); ++i) uv += u[i] * v[i];
  const double c = uv / (nu * nv);
  check_finite(std::span<const double>(&c, 1), "cosine_similarity");
  Tensor result = Tensor::scalar(c);
  const Tensor* inputs[] = {&u, &v};
  maybe_record(result, inputs, [&u, &v, nu, nv, c](Tape&) {
    return [uu = u.data(), vv = v.data(), nu, nv, c](const std::vector<double>& g,
                               const std::vector<std::vector<double>*>& pg) {
      const double g0 = g[0];
      for (std::size_t i = 0; i < uu.size(); ++i) {
        (*pg[0])[i] += g0 * (vv[i] / (nu * nv) - c * uu[i] / (nu * nu));
        (*pg[1])[i] += g0 * (uu[i] / (nu * nv) - c * vv[i] / (nv * nv));
      }
    };
  });
  return result;
}

Tensor euclidean_distance(const Tensor& u, const Tensor& v) {
  require_vector(u, "euclidean_distance");
  require_same_shape(u, v, "euclidean_distance");
  double s = 0.0;
  for (int i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  const double dist = std::sqrt(s);
  check_finite(std::span<const double>(&dist, 1), "euclidean_distance");
  Tensor result = Tensor::scalar(dist);
  const Tensor* inputs[] = {&u, &v};
  maybe_record(result, inputs, [&u, &v, dist](Tape&) {
    std::vector<double> diff(u.data());
    for (int i = 0; i < v.size(); ++i) diff[static_cast<std::size_t>(i)] -= v[i];
    return [diff = std::move(diff), dist](const std::vector<double>& g,
                        const std::vector<std::vector<double>*>& pg) {
      if (dist == 0.0) return;  // defined as zero gradient at coincidence
      const double g0 = g[0];
      for (std::size_t i = 0; i < diff.size(); ++i) {
        const double d = g0 * diff[i] / dist;
        (*pg[0])[i] += d;
        (*pg[1])[i] -= d;
      }
    };
  });
  return result;
}

std::vector<double> softmax_values(const std::vector<double>& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, int label) {
  require_vector(logits, "softmax_cross_entropy");
  if (label < 0 || label >= logits.size()) {
    throw IndexError("softmax_cross_entropy: label " + std::to_string(label) +
                     " out of range for K=" + std::to_string(logits.size()));
  }
  double mx = logits[0];
  for (double v : logits.data()) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : logits.data()) z += std::exp(v - mx);
  const double loss = std::log(z) - (logits[label] - mx);
  check_finite(std::span<const double>(&loss, 1), "softmax_cross_entropy");
  Tensor result = Tensor::scalar(loss);
  const Tensor* inputs[] = {&logits};
  maybe_record(result, inputs, [&logits, label](Tape&) {
    std::vector<double> probs = softmax_values(logits.data());
    return [probs = std::move(probs), label](const std::vector<double>& g,
                          const std::vector<std::vector<double>*>& pg) {
      for (std::size_t i = 0; i < probs.size(); ++i) {
        double d = probs[i];
        if (static_cast<int>(i) == label) d -= 1.0;
        (*pg[0])[i] += g[0] * d;
      }
    };
  });
  return result;
}

}  // namespace aapl
