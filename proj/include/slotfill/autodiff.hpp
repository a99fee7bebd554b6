#pragma once

#include <functional>
#include <random>
#include <unordered_map>
#include <vector>

#include "slotfill/tensor.hpp"

namespace slotfill {

// Gradients keyed by parameter identity (the tensor bound via Tape::param).
using GradientMap = std::unordered_map<const Tensor*, Tensor>;

// Dynamic computation tape. Nodes are appended in topological order, so
// backward is a reverse sweep over the node list. One tape per sentence;
// the whole graph is dropped after the optimizer step.
class Tape {
 public:
  using NodeId = std::size_t;

  NodeId input(Tensor value) { return push(std::move(value), nullptr, {}); }

  // Leaf bound to an external parameter tensor; backward() collects its
  // gradient into the GradientMap.
  NodeId param(Tensor* p) {
    NodeId id = push(*p, nullptr, {});
    nodes_[id].bound = p;
    return id;
  }

  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

  NodeId matmul(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.rank() != 2 || B.rank() != 2 || A.cols() != B.rows())
      throw ShapeError("matmul: incompatible shapes " + A.shape_str() + " and " +
                       B.shape_str());
    const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C = Tensor::matrix(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        const double av = A.at(i, p);
        for (std::size_t j = 0; j < n; ++j) C.at(i, j) += av * B.at(p, j);
      }
    return push(std::move(C), [a, b, m, k, n](Tape& t, Node& out) {
      const Tensor& A = t.nodes_[a].value;
      const Tensor& B = t.nodes_[b].value;
      Tensor& dA = t.nodes_[a].grad;
      Tensor& dB = t.nodes_[b].grad;
      // dA += dC * B^T, dB += A^T * dC
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double g = out.grad.at(i, j);
          for (std::size_t p = 0; p < k; ++p) {
            dA.at(i, p) += g * B.at(p, j);
            dB.at(p, j) += A.at(i, p) * g;
          }
        }
    }, {a, b});
  }

  // W: [r x c] matrix, x: [c] vector -> [r] vector. The affine workhorse.
  NodeId matvec(NodeId w, NodeId x) {
    const Tensor& W = nodes_[w].value;
    const Tensor& X = nodes_[x].value;
    if (W.rank() != 2 || X.rank() != 1 || W.cols() != X.rows())
      throw ShapeError("matvec: incompatible shapes " + W.shape_str() + " and " +
                       X.shape_str());
    const std::size_t r = W.rows(), c = W.cols();
    Tensor y = Tensor::vector(r);
    const double* wd = W.data();
    const double* xd = X.data();
    for (std::size_t i = 0; i < r; ++i) {
      const double* row = wd + i * c;
      double acc = 0.0;
      for (std::size_t j = 0; j < c; ++j) acc += row[j] * xd[j];
      y[i] = acc;
    }
    return push(std::move(y), [w, x, r, c](Tape& t, Node& out) {
      const double* wd = t.nodes_[w].value.data();
      const double* xd = t.nodes_[x].value.data();
      double* dw = t.nodes_[w].grad.data();
      double* dx = t.nodes_[x].grad.data();
      const double* g = out.grad.data();
      for (std::size_t i = 0; i < r; ++i) {
        const double gi = g[i];
        if (gi == 0.0) continue;
        const double* row = wd + i * c;
        double* drow = dw + i * c;
        for (std::size_t j = 0; j < c; ++j) {
          drow[j] += gi * xd[j];
          dx[j] += gi * row[j];
        }
      }
    }, {w, x});
  }

  NodeId add(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    require_same_shape(A, B, "add");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] += B[i];
    return push(std::move(C), [a, b](Tape& t, Node& out) {
      Tensor& dA = t.nodes_[a].grad;
      Tensor& dB = t.nodes_[b].grad;
      for (std::size_t i = 0; i < out.grad.size(); ++i) {
        dA[i] += out.grad[i];
        dB[i] += out.grad[i];
      }
    }, {a, b});
  }

  // Adds a bias vector to every row of a matrix. The only broadcast allowed.
  NodeId add_bias(NodeId m, NodeId bias) {
    const Tensor& M = nodes_[m].value;
    const Tensor& B = nodes_[bias].value;
    if (B.rank() != 1 || M.cols() != B.rows())
      throw ShapeError("add_bias: bias " + B.shape_str() + " does not match " +
                       M.shape_str());
    Tensor C = M;
    for (std::size_t i = 0; i < M.rows(); ++i)
      for (std::size_t j = 0; j < M.cols(); ++j) C.at(i, j) += B[j];
    return push(std::move(C), [m, bias](Tape& t, Node& out) {
      Tensor& dM = t.nodes_[m].grad;
      Tensor& dB = t.nodes_[bias].grad;
      for (std::size_t i = 0; i < out.grad.rows(); ++i)
        for (std::size_t j = 0; j < out.grad.cols(); ++j) {
          dM.at(i, j) += out.grad.at(i, j);
          dB[j] += out.grad.at(i, j);
        }
    }, {m, bias});
  }

  NodeId mul(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    require_same_shape(A, B, "mul");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= B[i];
    return push(std::move(C), [a, b](Tape& t, Node& out) {
      const Tensor& A = t.nodes_[a].value;
      const Tensor& B = t.nodes_[b].value;
      Tensor& dA = t.nodes_[a].grad;
      Tensor& dB = t.nodes_[b].grad;
      for (std::size_t i = 0; i < out.grad.size(); ++i) {
        dA[i] += out.grad[i] * B[i];
        dB[i] += out.grad[i] * A[i];
      }
    }, {a, b});
  }

  NodeId sigmoid(NodeId x) {
    Tensor y = nodes_[x].value;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / (1.0 + std::exp(-y[i]));
    return push(std::move(y), [x](Tape& t, Node& out) {
      Tensor& dx = t.nodes_[x].grad;
      for (std::size_t i = 0; i < out.grad.size(); ++i) {
        const double s = out.value[i];
        dx[i] += out.grad[i] * s * (1.0 - s);
      }
    }, {x});
  }

  NodeId tanh(NodeId x) {
    Tensor y = nodes_[x].value;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(y[i]);
    return push(std::move(y), [x](Tape& t, Node& out) {
      Tensor& dx = t.nodes_[x].grad;
      for (std::size_t i = 0; i < out.grad.size(); ++i) {
        const double th = out.value[i];
        dx[i] += out.grad[i] * (1.0 - th * th);
      }
    }, {x});
  }

  NodeId concat(NodeId a, NodeId b) {
    const Tensor& A = nodes_[a].value;
    const Tensor& B = nodes_[b].value;
    if (A.rank() != 1 || B.rank() != 1)
      throw ShapeError("concat: vector operands required");
    Tensor y = Tensor::vector(A.size() + B.size());
    for (std::size_t i = 0; i < A.size(); ++i) y[i] = A[i];
    for (std::size_t i = 0; i < B.size(); ++i) y[A.size() + i] = B[i];
    return push(std::move(y), [a, b](Tape& t, Node& out) {
      Tensor& dA = t.nodes_[a].grad;
      Tensor& dB = t.nodes_[b].grad;
      for (std::size_t i = 0; i < dA.size(); ++i) dA[i] += out.grad[i];
      for (std::size_t i = 0; i < dB.size(); ++i) dB[i] += out.grad[dA.size() + i];
    }, {a, b});
  }

  // Flat-index slice; works on any rank (used for embedding-row lookup),
  // always yields a vector.
  NodeId slice(NodeId x, std::size_t begin, std::size_t len) {
    const Tensor& X = nodes_[x].value;
    if (begin + len > X.size())
      throw ShapeError("slice: range out of bounds for " + X.shape_str());
    Tensor y = Tensor::vector(len);
    for (std::size_t i = 0; i < len; ++i) y[i] = X[begin + i];
    return push(std::move(y), [x, begin, len](Tape& t, Node& out) {
      Tensor& dx = t.nodes_[x].grad;
      for (std::size_t i = 0; i < len; ++i) dx[begin + i] += out.grad[i];
    }, {x});
  }

  NodeId scale(NodeId x, double k) {
    Tensor y = nodes_[x].value;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= k;
    return push(std::move(y), [x, k](Tape& t, Node& out) {
      Tensor& dx = t.nodes_[x].grad;
      for (std::size_t i = 0; i < out.grad.size(); ++i) dx[i] += k * out.grad[i];
    }, {x});
  }

  // Inverted dropout: identity at inference, mask-and-rescale in training.
  NodeId dropout(NodeId x, double p, std::mt19937_64& rng, bool training) {
    if (!training || p == 0.0) return x;
    const Tensor& X = nodes_[x].value;
    std::vector<double> mask(X.size());
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - p);
    for (auto& m : mask) m = (dist(rng) < p) ? 0.0 : keep_scale;
    Tensor y = X;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
    return push(std::move(y), [x, mask = std::move(mask)](Tape& t, Node& out) {
      Tensor& dx = t.nodes_[x].grad;
      for (std::size_t i = 0; i < out.grad.size(); ++i)
        dx[i] += out.grad[i] * mask[i];
    }, {x});
  }

  // -log softmax(logits)[target], computed with max subtraction.
  NodeId softmax_xent(NodeId logits, std::size_t target) {
    const Tensor& L = nodes_[logits].value;
    if (L.rank() != 1)
      throw ShapeError("softmax_xent: logit vector required, got " + L.shape_str());
    if (target >= L.size())
      throw std::out_of_range("softmax_xent: target " + std::to_string(target) +
                              " out of range for " + std::to_string(L.size()) +
                              " labels");
    std::vector<double> probs = softmax(L);
    double mx = L[0];
    for (std::size_t i = 1; i < L.size(); ++i) mx = std::max(mx, L[i]);
    double lse = 0.0;
    for (std::size_t i = 0; i < L.size(); ++i) lse += std::exp(L[i] - mx);
    Tensor loss = Tensor::vector(1);
    loss[0] = std::log(lse) + mx - L[target];
    return push(std::move(loss),
                [logits, target, probs = std::move(probs)](Tape& t, Node& out) {
      Tensor& dl = t.nodes_[logits].grad;
      const double g = out.grad[0];
      for (std::size_t i = 0; i < dl.size(); ++i)
        dl[i] += g * (probs[i] - (i == target ? 1.0 : 0.0));
    }, {logits});
  }

  // Sums all entries into a scalar.
  NodeId sum(NodeId x) {
    const Tensor& X = nodes_[x].value;
    Tensor y = Tensor::vector(1);
    for (std::size_t i = 0; i < X.size(); ++i) y[0] += X[i];
    return push(std::move(y), [x](Tape& t, Node& out) {
      Tensor& dx = t.nodes_[x].grad;
      for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += out.grad[0];
    }, {x});
  }

  static std::vector<double> softmax(const Tensor& logits) {
    std::vector<double> p(logits.size());
    double mx = logits[0];
    for (std::size_t i = 1; i < logits.size(); ++i) mx = std::max(mx, logits[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      p[i] = std::exp(logits[i] - mx);
      z += p[i];
    }
    for (auto& v : p) v /= z;
    return p;
  }

  // Reverse accumulation from a scalar loss. Gradients of all nodes are
  // zeroed first; fan-out sums naturally because every backward op adds.
  GradientMap backward(NodeId loss) {
    if (nodes_[loss].value.size() != 1)
      throw std::logic_error("backward: loss must be scalar, got " +
                             nodes_[loss].value.shape_str());
    for (auto& n : nodes_) n.grad.fill(0.0);
    nodes_[loss].grad[0] = 1.0;
    for (std::size_t i = loss + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.back) n.back(*this, n);
    }
    GradientMap grads;
    for (auto& n : nodes_)
      if (n.bound) {
        auto [it, fresh] = grads.try_emplace(n.bound, n.grad);
        if (!fresh)
          for (std::size_t i = 0; i < n.grad.size(); ++i)
            it->second[i] += n.grad[i];
      }
    return grads;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, Node&)> back;
    std::vector<NodeId> parents;
    Tensor* bound = nullptr;
  };

  NodeId push(Tensor value, std::function<void(Tape&, Node&)> back,
              std::vector<NodeId> parents) {
    Node n;
    n.grad = Tensor(value.shape());
    n.value = std::move(value);
    n.back = std::move(back);
    n.parents = std::move(parents);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
};

// Accumulates `src` into `dst`, summing where a parameter already has a
// gradient (used to pool gradients across the sentences of a minibatch).
inline void accumulate(GradientMap& dst, const GradientMap& src) {
  for (const auto& [p, g] : src) {
    auto [it, fresh] = dst.try_emplace(p, g);
    if (!fresh)
      for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
  }
}

}  // namespace slotfill
