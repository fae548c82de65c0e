#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace quantband {

inline constexpr std::size_t kDefaultQuadratureOrder = 256;

// Gauss-Legendre rule on [-1, 1]. Nodes are strictly increasing and exactly
// antisymmetric (node[n-1-i] == -node[i]); weights are positive.
class QuadratureRule {
 public:
  explicit QuadratureRule(std::size_t order = kDefaultQuadratureOrder);

  std::size_t order() const noexcept { return nodes_.size(); }
  std::span<const double> nodes() const noexcept { return nodes_; }
  std::span<const double> weights() const noexcept { return weights_; }

  // Nodes in (0, 1] with their weights; order/2 entries, ascending.
  std::span<const double> positive_nodes() const noexcept {
    return nodes().subspan(order() / 2);
  }
  std::span<const double> positive_weights() const noexcept {
    return weights().subspan(order() / 2);
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

// Shared immutable rule of the given order, built on first use.
const QuadratureRule& gauss_legendre(std::size_t order);

}  // namespace quantband
