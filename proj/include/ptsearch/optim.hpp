#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "ptsearch/matrix.hpp"

namespace ptsearch {

// Named parameter matrices with matching gradient and Adam moment buffers.
// Iteration follows insertion order so updates are deterministic.
class ParamStore {
 public:
  struct Entry {
    Matrix value;
    Matrix grad;
    Matrix m;
    Matrix v;
  };

  Matrix& create(const std::string& name, Matrix init) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    Entry e;
    e.grad = Matrix::zeros(init.rows, init.cols);
    e.m = Matrix::zeros(init.rows, init.cols);
    e.v = Matrix::zeros(init.rows, init.cols);
    e.value = std::move(init);
    index_[name] = entries_.size();
    order_.push_back(name);
    entries_.push_back(std::move(e));
    return entries_.back().value;
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  Matrix& value(const std::string& name) { return entry(name).value; }
  const Matrix& value(const std::string& name) const { return entry(name).value; }
  Matrix& grad(const std::string& name) { return entry(name).grad; }
  const Matrix& grad(const std::string& name) const { return entry(name).grad; }

  Entry& entry(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return entries_[it->second];
  }
  const Entry& entry(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::invalid_argument("ParamStore: unknown parameter " + name);
    return entries_[it->second];
  }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t count() const { return entries_.size(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const Entry& e : entries_) n += e.value.size();
    return n;
  }

  // resets gradients only; values and moments are untouched
  void zero_grad() {
    for (Entry& e : entries_)
      std::fill(e.grad.data.begin(), e.grad.data.end(), real(0));
  }

  std::int64_t step_count() const { return step_; }
  void bump_step() { ++step_; }

 private:
  std::vector<std::string> order_;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::int64_t step_ = 0;

  friend struct AdamConfig;
  friend void adam_step(ParamStore&, const struct AdamConfig&);
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 added to the gradient before the moment update
};

inline void adam_step(ParamStore& params, const AdamConfig& cfg) {
  params.bump_step();
  const double t = static_cast<double>(params.step_count());
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (const std::string& name : params.names()) {
    ParamStore::Entry& e = params.entry(name);
    for (std::size_t i = 0; i < e.value.data.size(); ++i) {
      double g = double(e.grad.data[i]) + cfg.weight_decay * double(e.value.data[i]);
      double m = cfg.beta1 * double(e.m.data[i]) + (1.0 - cfg.beta1) * g;
      double v = cfg.beta2 * double(e.v.data[i]) + (1.0 - cfg.beta2) * g * g;
      e.m.data[i] = real(m);
      e.v.data[i] = real(v);
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      e.value.data[i] -= real(cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps));
    }
  }
}

}  // namespace ptsearch
