#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

namespace vecsac {

/// Complete binary tree over a power-of-two number of leaves; node i has
/// children 2i and 2i+1, the root is node 1 and leaves start at `leaves()`.
template <typename T, typename Op>
class SegmentTree {
 public:
  explicit SegmentTree(std::size_t capacity, T identity = T{}, Op op = Op{})
      : identity_(identity), op_(op) {
    leaves_ = 1;
    while (leaves_ < std::max<std::size_t>(capacity, 1)) leaves_ <<= 1;
    nodes_.assign(2 * leaves_, identity_);
  }

  std::size_t leaves() const { return leaves_; }
  T root() const { return nodes_[1]; }
  T get(std::size_t i) const { return nodes_[leaves_ + i]; }

  void set(std::size_t i, T v) {
    std::size_t n = leaves_ + i;
    nodes_[n] = v;
    for (n >>= 1; n >= 1; n >>= 1) nodes_[n] = op_(nodes_[2 * n], nodes_[2 * n + 1]);
  }

  /// Writes a leaf without updating ancestors; call rebuild() afterwards.
  void set_leaf(std::size_t i, T v) { nodes_[leaves_ + i] = v; }

  void rebuild() {
    for (std::size_t n = leaves_ - 1; n >= 1; --n) nodes_[n] = op_(nodes_[2 * n], nodes_[2 * n + 1]);
  }

 protected:
  std::size_t leaves_;
  std::vector<T> nodes_;
  T identity_;
  Op op_;
};

struct MaxOp {
  double operator()(double a, double b) const { return std::max(a, b); }
};

class SumTree : public SegmentTree<double, std::plus<double>> {
 public:
  explicit SumTree(std::size_t capacity) : SegmentTree(capacity, 0.0) {}

  double total() const { return root(); }

  /// Leaf whose cumulative range contains `mass` in [0, total()). Leaves
  /// with zero value are never returned while total() > 0.
  std::size_t find_prefix(double mass) const {
    std::size_t n = 1;
    while (n < leaves_) {
      const double left = nodes_[2 * n];
      if (mass < left || nodes_[2 * n + 1] <= 0) {
        n = 2 * n;
      } else {
        mass -= left;
        n = 2 * n + 1;
      }
    }
    return n - leaves_;
  }
};

class MaxTree : public SegmentTree<double, MaxOp> {
 public:
  explicit MaxTree(std::size_t capacity) : SegmentTree(capacity, 0.0) {}
  double max() const { return root(); }
};

}  // namespace vecsac
