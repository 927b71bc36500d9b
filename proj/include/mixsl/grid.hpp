#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mixsl/errors.hpp"

namespace mixsl {

/// Uniform node-centred axis. Periodic axes omit the duplicate endpoint, so
/// node i sits at min + i*spacing for i in [0, n).
class Axis {
 public:
  Axis() = default;
  Axis(std::string name, double min, double max, std::size_t n, bool periodic)
      : name_(std::move(name)), min_(min), max_(max), n_(n), periodic_(periodic) {
    if (n_ < 5) throw ConfigError("axis '" + name_ + "': need at least 5 nodes");
    if (!(max_ > min_) || !std::isfinite(min_) || !std::isfinite(max_))
      throw ConfigError("axis '" + name_ + "': require finite min < max");
  }

  static Axis bounded(std::string name, double min, double max, std::size_t n) {
    return Axis(std::move(name), min, max, n, false);
  }
  static Axis periodic(std::string name, double min, double max, std::size_t n) {
    return Axis(std::move(name), min, max, n, true);
  }

  const std::string& name() const { return name_; }
  double min() const { return min_; }
  double max() const { return max_; }
  std::size_t n() const { return n_; }
  bool is_periodic() const { return periodic_; }
  double length() const { return max_ - min_; }
  double spacing() const {
    return (max_ - min_) / static_cast<double>(periodic_ ? n_ : n_ - 1);
  }
  double coord(std::ptrdiff_t i) const {
    return min_ + spacing() * static_cast<double>(i);
  }

  /// Maps an index that may lie outside [0, n) back onto the axis: wraps on
  /// periodic axes, clamps otherwise.
  std::size_t resolve(std::ptrdiff_t i) const {
    const auto n = static_cast<std::ptrdiff_t>(n_);
    if (periodic_) return static_cast<std::size_t>(((i % n) + n) % n);
    return static_cast<std::size_t>(i < 0 ? 0 : (i >= n ? n - 1 : i));
  }

  bool operator==(const Axis&) const = default;

 private:
  std::string name_ = "x";
  double min_ = 0.0;
  double max_ = 1.0;
  std::size_t n_ = 5;
  bool periodic_ = false;
};

using MultiIndex = std::array<std::size_t, 4>;

/// Tensor mesh of 1 to 4 axes. Row-major: the last axis is contiguous.
class Grid {
 public:
  Grid() = default;
  explicit Grid(std::vector<Axis> axes) : axes_(std::move(axes)) {
    if (axes_.empty() || axes_.size() > 4)
      throw ConfigError("grid must have between 1 and 4 axes");
    std::size_t s = 1;
    for (std::size_t k = axes_.size(); k-- > 0;) {
      strides_[k] = s;
      s *= axes_[k].n();
    }
    size_ = s;
  }

  std::size_t dim() const { return axes_.size(); }
  const Axis& axis(std::size_t k) const { return axes_.at(k); }
  const std::vector<Axis>& axes() const { return axes_; }
  std::size_t size() const { return size_; }
  std::size_t stride(std::size_t k) const { return strides_.at(k); }
  std::size_t n(std::size_t k) const { return axes_.at(k).n(); }
  double spacing(std::size_t k) const { return axes_.at(k).spacing(); }

  double min_spacing() const {
    double h = axes_.front().spacing();
    for (const auto& a : axes_) h = std::min(h, a.spacing());
    return h;
  }

  std::size_t flat(const MultiIndex& idx) const {
    std::size_t f = 0;
    for (std::size_t k = 0; k < dim(); ++k) {
      if (idx[k] >= axes_[k].n()) throw std::out_of_range("grid index out of range");
      f += idx[k] * strides_[k];
    }
    return f;
  }

  MultiIndex unflatten(std::size_t f) const {
    MultiIndex idx{0, 0, 0, 0};
    for (std::size_t k = 0; k < dim(); ++k) {
      idx[k] = f / strides_[k];
      f %= strides_[k];
    }
    return idx;
  }

  bool operator==(const Grid& o) const { return axes_ == o.axes_; }

 private:
  std::vector<Axis> axes_;
  std::array<std::size_t, 4> strides_{0, 0, 0, 0};
  std::size_t size_ = 0;
};

/// Node-valued scalar array over a Grid.
class Field {
 public:
  Field() = default;
  explicit Field(Grid grid, double value = 0.0)
      : grid_(std::move(grid)), data_(grid_.size(), value) {}
  Field(Grid grid, std::vector<double> data) : grid_(std::move(grid)), data_(std::move(data)) {
    if (data_.size() != grid_.size())
      throw std::invalid_argument("field data length does not match grid");
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return data_.size(); }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t f) { return data_[f]; }
  double operator[](std::size_t f) const { return data_[f]; }

  template <class... I>
  double& operator()(I... i) {
    return data_[grid_.flat(MultiIndex{static_cast<std::size_t>(i)...})];
  }
  template <class... I>
  double operator()(I... i) const {
    return data_[grid_.flat(MultiIndex{static_cast<std::size_t>(i)...})];
  }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  Grid grid_;
  std::vector<double> data_;
};

/// Strided 1D window into a field.
template <class T>
class StridedLine {
 public:
  StridedLine(T* base, std::size_t n, std::size_t stride) : base_(base), n_(n), stride_(stride) {}

  std::size_t size() const { return n_; }
  T& operator[](std::size_t i) const { return base_[i * stride_]; }

  std::vector<double> to_vector() const {
    std::vector<double> v(n_);
    for (std::size_t i = 0; i < n_; ++i) v[i] = (*this)[i];
    return v;
  }

  void assign(std::span<const double> v) const
    requires(!std::is_const_v<T>)
  {
    if (v.size() != n_) throw std::invalid_argument("line length mismatch");
    for (std::size_t i = 0; i < n_; ++i) (*this)[i] = v[i];
  }

 private:
  T* base_;
  std::size_t n_;
  std::size_t stride_;
};

namespace detail {
inline std::size_t line_base(const Grid& g, std::size_t axis, const MultiIndex& fixed) {
  if (axis >= g.dim()) throw std::out_of_range("line axis out of range");
  MultiIndex idx = fixed;
  idx[axis] = 0;
  for (std::size_t k = g.dim(); k < 4; ++k) idx[k] = 0;
  return g.flat(idx);
}
}  // namespace detail

/// The 1D slice along `axis` through `fixed` (the entry of `fixed` for
/// `axis` itself is ignored).
inline StridedLine<double> line_view(Field& f, std::size_t axis, const MultiIndex& fixed) {
  const auto base = detail::line_base(f.grid(), axis, fixed);
  return {f.data().data() + base, f.grid().n(axis), f.grid().stride(axis)};
}

inline StridedLine<const double> line_view(const Field& f, std::size_t axis,
                                           const MultiIndex& fixed) {
  const auto base = detail::line_base(f.grid(), axis, fixed);
  return {f.data().data() + base, f.grid().n(axis), f.grid().stride(axis)};
}

/// Neumaier-compensated running sum; order of additions is the caller's
/// loop order, so results are run-to-run identical.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      c_ += (sum_ - t) + v;
    else
      c_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

/// Default 1D quadrature weights (spacing included): rectangle rule on
/// periodic axes, trapezoid on bounded ones.
inline std::vector<double> default_weights(const Axis& a) {
  std::vector<double> w(a.n(), a.spacing());
  if (!a.is_periodic()) {
    w.front() *= 0.5;
    w.back() *= 0.5;
  }
  return w;
}

/// Tensor-product quadrature with an optional node mask on the first two
/// axes. Masked axes use the plain rectangle rule (embedded domains).
class Quadrature {
 public:
  explicit Quadrature(const Grid& g) : grid_(g) {
    for (std::size_t k = 0; k < g.dim(); ++k) weights_[k] = default_weights(g.axis(k));
  }

  Quadrature(const Grid& g, std::span<const std::uint8_t> plane_mask) : Quadrature(g) {
    if (g.dim() < 2) throw std::invalid_argument("plane mask needs a grid with >= 2 axes");
    if (plane_mask.size() != g.n(0) * g.n(1))
      throw std::invalid_argument("plane mask size does not match grid");
    mask_.assign(plane_mask.begin(), plane_mask.end());
    weights_[0].assign(g.n(0), g.spacing(0));
    weights_[1].assign(g.n(1), g.spacing(1));
  }

  void set_axis_weights(std::size_t k, std::vector<double> w) {
    if (w.size() != grid_.n(k)) throw std::invalid_argument("weight vector size mismatch");
    weights_[k] = std::move(w);
  }

  const std::vector<double>& axis_weights(std::size_t k) const { return weights_.at(k); }
  bool masked() const { return !mask_.empty(); }
  bool included(std::size_t plane_node) const { return mask_.empty() || mask_[plane_node] != 0; }

  /// Σ w · g(f) over all (unmasked) nodes.
  template <class G>
  double sum(std::span<const double> f, G&& g) const {
    if (f.size() != grid_.size()) throw std::invalid_argument("field size mismatch");
    CompensatedSum acc;
    const std::size_t d = grid_.dim();
    std::array<std::size_t, 4> n{1, 1, 1, 1};
    for (std::size_t k = 0; k < d; ++k) n[k] = grid_.n(k);
    auto w = [&](std::size_t k, std::size_t i) { return k < d ? weights_[k][i] : 1.0; };
    std::size_t flat = 0;
    for (std::size_t i0 = 0; i0 < n[0]; ++i0) {
      for (std::size_t i1 = 0; i1 < n[1]; ++i1) {
        const bool keep = d < 2 || included(i0 * n[1] + i1);
        const double w01 = w(0, i0) * w(1, i1);
        for (std::size_t i2 = 0; i2 < n[2]; ++i2) {
          const double w012 = w01 * w(2, i2);
          for (std::size_t i3 = 0; i3 < n[3]; ++i3, ++flat) {
            if (!keep) continue;
            acc.add(w012 * w(3, i3) * g(f[flat]));
          }
        }
      }
    }
    return acc.value();
  }

  double integrate(std::span<const double> f) const {
    return sum(f, [](double v) { return v; });
  }

 private:
  Grid grid_;
  std::array<std::vector<double>, 4> weights_;
  std::vector<std::uint8_t> mask_;
};

/// ∫ field with the default per-axis rule, or with explicit per-axis
/// weights (an empty vector keeps the default for that axis).
inline double reduce_integral(const Field& f,
                              const std::optional<std::vector<std::vector<double>>>& weights = {}) {
  Quadrature q(f.grid());
  if (weights) {
    for (std::size_t k = 0; k < weights->size() && k < f.grid().dim(); ++k)
      if (!(*weights)[k].empty()) q.set_axis_weights(k, (*weights)[k]);
  }
  return q.integrate(f.data());
}

/// ∫ over the nodes flagged in `plane_mask` (first two axes).
inline double reduce_integral(const Field& f, std::span<const std::uint8_t> plane_mask) {
  return Quadrature(f.grid(), plane_mask).integrate(f.data());
}

}  // namespace mixsl
