#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ptsearch/graph.hpp"
#include "ptsearch/matrix.hpp"
#include "ptsearch/optim.hpp"
#include "ptsearch/rng.hpp"

namespace ptsearch {

using ValueId = int;

inline real sigmoid_scalar(real x) {
  if (x >= 0) {
    const real e = std::exp(-x);
    return real(1) / (real(1) + e);
  }
  const real e = std::exp(x);
  return e / (real(1) + e);
}

// Max-subtracted softmax of a flat vector; components are positive and sum to 1.
inline std::vector<real> softmax_vec(const std::vector<real>& a) {
  if (a.empty()) throw std::invalid_argument("softmax_vec: empty input");
  real m = a[0];
  for (real v : a) m = std::max(m, v);
  std::vector<real> out(a.size());
  real sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[i] = std::exp(a[i] - m);
    sum += out[i];
  }
  for (real& v : out) v /= sum;
  return out;
}

// Reverse-mode tape over dense matrices. Every differentiable op appends a
// node holding its forward value plus a closure that scatters the node's
// gradient back to its inputs. backward() walks nodes newest-to-oldest and
// accumulates gradients additively, so inputs shared by several ops combine.
class Tape {
 public:
  ValueId constant(Matrix value) { return push(std::move(value), nullptr); }

  // Trainable leaf; after backward() its gradient is added into the store.
  ValueId param(ParamStore& store, const std::string& name) {
    ValueId id = push(store.value(name), nullptr);
    nodes_[id].store = &store;
    nodes_[id].param_name = name;
    return id;
  }

  const Matrix& value(ValueId id) const { return at(id).value; }
  const Matrix& grad(ValueId id) const { return at(id).grad; }
  std::size_t size() const { return nodes_.size(); }

  // min |input| seen by leaky_relu since clear(); grad-check fixtures use it
  // to reject points too close to the activation kink for finite differences
  double kink_margin() const { return kink_margin_; }

  void clear() {
    nodes_.clear();
    kink_margin_ = std::numeric_limits<double>::infinity();
  }

  // --- ops -----------------------------------------------------------------

  ValueId matmul(ValueId a, ValueId b) {
    Matrix out = ::ptsearch::matmul(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      addmm_nt(t.at(a).grad, g, t.at(b).value);
      addmm_tn(t.at(b).grad, t.at(a).value, g);
    });
  }

  // x*w + bias, bias broadcast over rows (bias is 1 x d_out)
  ValueId affine(ValueId x, ValueId w, ValueId bias) {
    const Matrix& X = value(x);
    const Matrix& W = value(w);
    const Matrix& B = value(bias);
    if (B.rows != 1 || B.cols != W.cols)
      throw std::invalid_argument("affine: bias must be 1x" + std::to_string(W.cols) +
                                  ", got " + shape_str(B));
    Matrix out = ::ptsearch::matmul(X, W);
    for (int i = 0; i < out.rows; ++i) {
      real* orow = out.row(i);
      for (int j = 0; j < out.cols; ++j) orow[j] += B.data[j];
    }
    return push(std::move(out), [x, w, bias](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      addmm_nt(t.at(x).grad, g, t.at(w).value);
      addmm_tn(t.at(w).grad, t.at(x).value, g);
      Matrix& db = t.at(bias).grad;
      for (int i = 0; i < g.rows; ++i) {
        const real* grow = g.row(i);
        for (int j = 0; j < g.cols; ++j) db.data[j] += grow[j];
      }
    });
  }

  ValueId add(ValueId a, ValueId b) {
    check_same_shape(value(a), value(b), "add");
    Matrix out = value(a);
    add_inplace(out, value(b));
    return push(std::move(out), [a, b](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      add_inplace(t.at(a).grad, g);
      add_inplace(t.at(b).grad, g);
    });
  }

  ValueId leaky_relu(ValueId x, real slope) {
    if (!(slope > real(0) && slope < real(1)))
      throw std::invalid_argument("leaky_relu: slope must be in (0,1)");
    const Matrix& X = value(x);
    Matrix out(X.rows, X.cols);
    for (std::size_t i = 0; i < X.data.size(); ++i) {
      const real v = X.data[i];
      out.data[i] = v > 0 ? v : slope * v;
      kink_margin_ = std::min(kink_margin_, double(std::abs(v)));
    }
    return push(std::move(out), [x, slope](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      const Matrix& X = t.at(x).value;
      Matrix& dx = t.at(x).grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        dx.data[i] += g.data[i] * (X.data[i] > 0 ? real(1) : slope);
    });
  }

  ValueId sigmoid(ValueId x) {
    const Matrix& X = value(x);
    Matrix out(X.rows, X.cols);
    for (std::size_t i = 0; i < X.data.size(); ++i) out.data[i] = sigmoid_scalar(X.data[i]);
    return push(std::move(out), [x](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      const Matrix& y = t.at(self).value;
      Matrix& dx = t.at(x).grad;
      for (std::size_t i = 0; i < g.data.size(); ++i)
        dx.data[i] += g.data[i] * y.data[i] * (real(1) - y.data[i]);
    });
  }

  // Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).
  // Inference mode is the identity and records nothing.
  ValueId dropout(ValueId x, real rate, bool training, Rng* rng) {
    if (rate < 0 || rate >= 1) throw std::invalid_argument("dropout: rate must be in [0,1)");
    if (!training || rate == 0) return x;
    if (!rng) throw std::invalid_argument("dropout: rng required in training mode");
    const Matrix& X = value(x);
    Matrix mask(X.rows, X.cols);
    const real keep_scale = real(1) / (real(1) - rate);
    for (std::size_t i = 0; i < mask.data.size(); ++i)
      mask.data[i] = rng->bernoulli(rate) ? real(0) : keep_scale;
    Matrix out(X.rows, X.cols);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = X.data[i] * mask.data[i];
    return push(std::move(out), [x, mask = std::move(mask)](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      Matrix& dx = t.at(x).grad;
      for (std::size_t i = 0; i < g.data.size(); ++i) dx.data[i] += g.data[i] * mask.data[i];
    });
  }

  // Per-relation in-neighbor mean: out_i = (1/|N_i^r|) sum_{j in N_i^r} h_j,
  // zero rows for nodes with no in-neighbors. The graph must outlive the tape.
  ValueId neighbor_mean(ValueId h, const HeteroGraph& graph, int relation) {
    const Matrix& H = value(h);
    if (H.rows != graph.num_nodes())
      throw std::invalid_argument("neighbor_mean: feature rows do not match node count");
    Matrix out(H.rows, H.cols);
    for (int i = 0; i < H.rows; ++i) {
      auto nbrs = graph.in_neighbors(relation, i);
      if (nbrs.empty()) continue;
      real* orow = out.row(i);
      for (int j : nbrs) {
        const real* hrow = H.row(j);
        for (int c = 0; c < H.cols; ++c) orow[c] += hrow[c];
      }
      const real inv = real(1) / real(nbrs.size());
      for (int c = 0; c < H.cols; ++c) orow[c] *= inv;
    }
    return push(std::move(out), [h, g = &graph, relation](Tape& t, ValueId self) {
      const Matrix& go = t.at(self).grad;
      Matrix& dh = t.at(h).grad;
      for (int i = 0; i < go.rows; ++i) {
        auto nbrs = g->in_neighbors(relation, i);
        if (nbrs.empty()) continue;
        const real inv = real(1) / real(nbrs.size());
        const real* grow = go.row(i);
        for (int j : nbrs) {
          real* drow = dh.row(j);
          for (int c = 0; c < go.cols; ++c) drow[c] += inv * grow[c];
        }
      }
    });
  }

  // Column-wise concatenation; all parts share a row count.
  ValueId concat_cols(const std::vector<ValueId>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int rows = value(parts[0]).rows;
    int cols = 0;
    for (ValueId p : parts) {
      if (value(p).rows != rows) throw std::invalid_argument("concat_cols: row mismatch");
      cols += value(p).cols;
    }
    Matrix out(rows, cols);
    int off = 0;
    for (ValueId p : parts) {
      const Matrix& m = value(p);
      for (int i = 0; i < rows; ++i) {
        const real* src = m.row(i);
        real* dst = out.row(i) + off;
        for (int c = 0; c < m.cols; ++c) dst[c] = src[c];
      }
      off += m.cols;
    }
    return push(std::move(out), [parts](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      int off = 0;
      for (ValueId p : parts) {
        Matrix& dp = t.at(p).grad;
        for (int i = 0; i < g.rows; ++i) {
          const real* src = g.row(i) + off;
          real* dst = dp.row(i);
          for (int c = 0; c < dp.cols; ++c) dst[c] += src[c];
        }
        off += dp.cols;
      }
    });
  }

  // Row-wise max-subtracted softmax.
  ValueId softmax_rows(ValueId x) {
    const Matrix& X = value(x);
    if (X.cols < 1) throw std::invalid_argument("softmax_rows: need at least one column");
    Matrix out(X.rows, X.cols);
    for (int i = 0; i < X.rows; ++i) {
      const real* xrow = X.row(i);
      real* orow = out.row(i);
      real m = xrow[0];
      for (int j = 1; j < X.cols; ++j) m = std::max(m, xrow[j]);
      real sum = 0;
      for (int j = 0; j < X.cols; ++j) {
        orow[j] = std::exp(xrow[j] - m);
        sum += orow[j];
      }
      for (int j = 0; j < X.cols; ++j) orow[j] /= sum;
    }
    return push(std::move(out), [x](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      const Matrix& y = t.at(self).value;
      Matrix& dx = t.at(x).grad;
      for (int i = 0; i < g.rows; ++i) {
        const real* grow = g.row(i);
        const real* yrow = y.row(i);
        real* drow = dx.row(i);
        real dot = 0;
        for (int j = 0; j < g.cols; ++j) dot += grow[j] * yrow[j];
        for (int j = 0; j < g.cols; ++j) drow[j] += yrow[j] * (grow[j] - dot);
      }
    });
  }

  // Per-node convex mix: out(n,:) = sum_i weights(n,i) * inputs[i](n,:).
  ValueId mix_rows(const std::vector<ValueId>& inputs, ValueId weights) {
    if (inputs.empty()) throw std::invalid_argument("mix_rows: no inputs");
    const Matrix& W = value(weights);
    if (W.cols != static_cast<int>(inputs.size()))
      throw std::invalid_argument("mix_rows: weight columns must match input count");
    const int rows = W.rows;
    const int cols = value(inputs[0]).cols;
    for (ValueId z : inputs)
      if (value(z).rows != rows || value(z).cols != cols)
        throw std::invalid_argument("mix_rows: input shape mismatch");
    Matrix out(rows, cols);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const Matrix& Z = value(inputs[k]);
      for (int i = 0; i < rows; ++i) {
        const real w = W.at(i, static_cast<int>(k));
        const real* zrow = Z.row(i);
        real* orow = out.row(i);
        for (int c = 0; c < cols; ++c) orow[c] += w * zrow[c];
      }
    }
    return push(std::move(out), [inputs, weights](Tape& t, ValueId self) {
      const Matrix& g = t.at(self).grad;
      Matrix& dw = t.at(weights).grad;
      for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Matrix& Z = t.at(inputs[k]).value;
        Matrix& dz = t.at(inputs[k]).grad;
        const Matrix& W = t.at(weights).value;
        for (int i = 0; i < g.rows; ++i) {
          const real w = W.at(i, static_cast<int>(k));
          const real* grow = g.row(i);
          const real* zrow = Z.row(i);
          real* drow = dz.row(i);
          real dot = 0;
          for (int c = 0; c < g.cols; ++c) {
            drow[c] += w * grow[c];
            dot += grow[c] * zrow[c];
          }
          dw.at(i, static_cast<int>(k)) += dot;
        }
      }
    });
  }

  // Mean over masked rows of -log softmax(logits)[label]; result is 1x1.
  ValueId cross_entropy(ValueId logits, const std::vector<int>& labels,
                        const std::vector<int>& mask_rows) {
    if (mask_rows.empty()) throw std::invalid_argument("cross_entropy: empty mask");
    const Matrix& L = value(logits);
    if (L.rows != static_cast<int>(labels.size()))
      throw std::invalid_argument("cross_entropy: label count does not match logit rows");
    double total = 0;
    for (int i : mask_rows) {
      if (i < 0 || i >= L.rows) throw std::invalid_argument("cross_entropy: mask row out of range");
      const int y = labels[i];
      if (y < 0 || y >= L.cols) throw std::invalid_argument("cross_entropy: label out of range");
      const real* row = L.row(i);
      real m = row[0];
      for (int j = 1; j < L.cols; ++j) m = std::max(m, row[j]);
      double lse = 0;
      for (int j = 0; j < L.cols; ++j) lse += std::exp(double(row[j] - m));
      lse = double(m) + std::log(lse);
      total += lse - double(row[y]);
    }
    Matrix out(1, 1);
    out.data[0] = real(total / double(mask_rows.size()));
    return push(std::move(out),
                [logits, labels, mask_rows](Tape& t, ValueId self) {
                  const real g = t.at(self).grad.data[0];
                  const Matrix& L = t.at(logits).value;
                  Matrix& dl = t.at(logits).grad;
                  const real inv = real(1) / real(mask_rows.size());
                  for (int i : mask_rows) {
                    const real* row = L.row(i);
                    real* drow = dl.row(i);
                    real m = row[0];
                    for (int j = 1; j < L.cols; ++j) m = std::max(m, row[j]);
                    real sum = 0;
                    for (int j = 0; j < L.cols; ++j) sum += std::exp(row[j] - m);
                    for (int j = 0; j < L.cols; ++j) {
                      const real p = std::exp(row[j] - m) / sum;
                      const real target = (j == labels[i]) ? real(1) : real(0);
                      drow[j] += g * inv * (p - target);
                    }
                  }
                });
  }

  // Sum of all entries; 1x1 result. Mostly a test utility.
  ValueId sum_all(ValueId x) {
    const Matrix& X = value(x);
    Matrix out(1, 1);
    double s = 0;
    for (real v : X.data) s += double(v);
    out.data[0] = real(s);
    return push(std::move(out), [x](Tape& t, ValueId self) {
      const real g = t.at(self).grad.data[0];
      Matrix& dx = t.at(x).grad;
      for (real& v : dx.data) v += g;
    });
  }

  // --- backward ------------------------------------------------------------

  // loss must be the most recent 1x1 node. Gradients of parameter leaves are
  // added into their ParamStore when the walk reaches them.
  void backward(ValueId loss) {
    if (nodes_.empty()) throw std::logic_error("backward: tape is empty (backward before forward)");
    if (loss != static_cast<ValueId>(nodes_.size()) - 1)
      throw std::logic_error("backward: loss must be the last recorded op");
    const Matrix& lv = nodes_[loss].value;
    if (lv.rows != 1 || lv.cols != 1) throw std::invalid_argument("backward: loss must be 1x1");
    for (Node& n : nodes_) n.grad = Matrix::zeros(n.value.rows, n.value.cols);
    nodes_[loss].grad.data[0] = real(1);
    for (ValueId i = loss; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backprop) n.backprop(*this, i);
      if (n.store) add_inplace(n.store->grad(n.param_name), n.grad);
    }
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, ValueId)> backprop;
    ParamStore* store = nullptr;
    std::string param_name;
  };

  Node& at(ValueId id) {
    if (id < 0 || id >= static_cast<ValueId>(nodes_.size()))
      throw std::out_of_range("Tape: bad value id");
    return nodes_[id];
  }
  const Node& at(ValueId id) const {
    if (id < 0 || id >= static_cast<ValueId>(nodes_.size()))
      throw std::out_of_range("Tape: bad value id");
    return nodes_[id];
  }

  ValueId push(Matrix value, std::function<void(Tape&, ValueId)> backprop) {
    Node n;
    n.value = std::move(value);
    n.backprop = std::move(backprop);
    nodes_.push_back(std::move(n));
    return static_cast<ValueId>(nodes_.size()) - 1;
  }

  std::vector<Node> nodes_;
  double kink_margin_ = std::numeric_limits<double>::infinity();
};

}  // namespace ptsearch
