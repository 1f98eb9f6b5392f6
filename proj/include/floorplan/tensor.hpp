#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include "floorplan/core.hpp"

namespace floorplan {

// Dense rank-4 extents in (batch, channel, height, width) order.
struct Shape4 {
  int b = 0, c = 0, h = 0, w = 0;

  std::int64_t numel() const {
    return static_cast<std::int64_t>(b) * c * h * w;
  }
  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(b) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Dense rank-4 tensor, row-major in (b,c,h,w). `grad` is populated only for
// tensors flagged requires_grad, and always matches `data` in length.
template <typename S>
struct TensorT {
  Shape4 shape{};
  std::vector<S> data;
  bool requires_grad = false;
  std::vector<S> grad;

  TensorT() = default;
  explicit TensorT(Shape4 s, S fill = S(0))
      : shape(s), data(checked_numel(s), fill) {}

  bool operator==(const TensorT&) const = default;

  static std::size_t checked_numel(Shape4 s) {
    if (s.b < 0 || s.c < 0 || s.h < 0 || s.w < 0)
      throw ShapeError("negative tensor extent " + s.str());
    return static_cast<std::size_t>(s.numel());
  }

  static TensorT zeros(Shape4 s) { return TensorT(s); }
  static TensorT full(Shape4 s, S v) { return TensorT(s, v); }
  static TensorT scalar(S v) {
    TensorT t(Shape4{1, 1, 1, 1});
    t.data[0] = v;
    return t;
  }
  // single-channel map from a row-major list; test convenience
  static TensorT from_hw(int h, int w, std::initializer_list<S> vals) {
    TensorT t(Shape4{1, 1, h, w});
    if (static_cast<std::int64_t>(vals.size()) != t.shape.numel())
      throw ShapeError("from_hw: value count does not match " + t.shape.str());
    std::size_t i = 0;
    for (S v : vals) t.data[i++] = v;
    return t;
  }

  std::int64_t numel() const { return shape.numel(); }

  std::size_t index(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * shape.c + c) * shape.h + y) * shape.w + x;
  }
  S& at(int b, int c, int y, int x) { return data[index(b, c, y, x)]; }
  const S& at(int b, int c, int y, int x) const { return data[index(b, c, y, x)]; }

  void set_requires_grad(bool on) {
    requires_grad = on;
    if (on)
      grad.assign(data.size(), S(0));
    else
      grad.clear();
  }

  bool all_finite() const {
    for (S v : data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }
};

using Tensor = TensorT<float>;

template <typename To, typename From>
TensorT<To> tensor_cast(const TensorT<From>& t) {
  TensorT<To> out(t.shape);
  for (std::size_t i = 0; i < t.data.size(); ++i)
    out.data[i] = static_cast<To>(t.data[i]);
  out.requires_grad = t.requires_grad;
  if (t.requires_grad) {
    out.grad.resize(t.grad.size());
    for (std::size_t i = 0; i < t.grad.size(); ++i)
      out.grad[i] = static_cast<To>(t.grad[i]);
  }
  return out;
}

}  // namespace floorplan
