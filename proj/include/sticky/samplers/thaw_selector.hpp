#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace sticky {

// Weighted index sampling with O(log d) updates (Fenwick tree over the
// per-coordinate thaw rates of the frozen set).
class ThawSelector {
 public:
  ThawSelector() = default;
  explicit ThawSelector(std::size_t n) : tree_(n + 1, 0.0), w_(n, 0.0) {
    top_ = 1;
    while (top_ * 2 <= n) top_ *= 2;
  }

  std::size_t size() const { return w_.size(); }
  std::size_t count() const { return positive_; }
  double weight(std::size_t i) const { return w_[i]; }
  double total() const { return positive_ == 0 ? 0.0 : total_; }

  void set(std::size_t i, double w) {
    if (w < 0.0) throw std::invalid_argument("ThawSelector: negative weight");
    const double delta = w - w_[i];
    if (w_[i] > 0.0) --positive_;
    if (w > 0.0) ++positive_;
    w_[i] = w;
    total_ += delta;
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += delta;
  }

  // Index whose cumulative weight interval contains u * total, u in (0,1).
  std::size_t sample(double u) const {
    if (positive_ == 0) throw std::logic_error("ThawSelector: nothing to sample");
    double target = u * total();
    std::size_t pos = 0;
    for (std::size_t step = top_; step > 0; step >>= 1) {
      const std::size_t nxt = pos + step;
      if (nxt < tree_.size() && tree_[nxt] < target) {
        pos = nxt;
        target -= tree_[nxt];
      }
    }
    // Guard against rounding landing on a zero-weight slot.
    std::size_t i = pos < w_.size() ? pos : w_.size() - 1;
    if (w_[i] > 0.0) return i;
    for (std::size_t k = i; k-- > 0;)
      if (w_[k] > 0.0) return k;
    for (std::size_t k = i + 1; k < w_.size(); ++k)
      if (w_[k] > 0.0) return k;
    return i;
  }

 private:
  std::vector<double> tree_;
  std::vector<double> w_;
  std::size_t top_ = 0;
  std::size_t positive_ = 0;
  double total_ = 0.0;
};

}  // namespace sticky
