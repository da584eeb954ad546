#pragma once

// Reverse-mode autodiff on rank-2 tensors. Every op computes its value
// eagerly and, when an input requires gradients and a Tape is active on this
// thread, records a backward closure. Tape::backward runs the closures in
// reverse, accumulating into requires_grad leaves. Scalars are [1x1]; there
// is no implicit broadcasting (softmax masks excepted) — mismatched shapes
// throw ShapeError naming the primitive and the shapes involved.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "edag/errors.hpp"
#include "edag/rng.hpp"

namespace edag {

inline std::string shape_str(int64_t rows, int64_t cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

template <typename T>
class Tape;

template <typename T>
struct Tensor {
  int64_t rows = 0;
  int64_t cols = 0;
  std::shared_ptr<std::vector<T>> data;
  std::shared_ptr<std::vector<T>> grad;  // allocated iff requires_grad
  bool requires_grad = false;

  static Tensor zeros(int64_t rows, int64_t cols, bool requires_grad = false) {
    check_dims(rows, cols);
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.data = std::make_shared<std::vector<T>>(static_cast<size_t>(rows * cols), T(0));
    if (requires_grad) t.mark_parameter();
    return t;
  }

  static Tensor from(int64_t rows, int64_t cols, std::vector<T> values,
                     bool requires_grad = false) {
    check_dims(rows, cols);
    if (static_cast<int64_t>(values.size()) != rows * cols)
      throw ShapeError("tensor: " + std::to_string(values.size()) +
                       " values do not fill shape " + shape_str(rows, cols));
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.data = std::make_shared<std::vector<T>>(std::move(values));
    if (requires_grad) t.mark_parameter();
    return t;
  }

  static Tensor scalar(T v) { return from(1, 1, {v}); }

  int64_t size() const { return rows * cols; }

  T& at(int64_t r, int64_t c) { return (*data)[static_cast<size_t>(r * cols + c)]; }
  T at(int64_t r, int64_t c) const { return (*data)[static_cast<size_t>(r * cols + c)]; }

  // Scalar extraction; shape-checked so misuse fails loudly.
  T item() const {
    if (rows != 1 || cols != 1)
      throw ShapeError("item: tensor is " + shape_str(rows, cols) + ", not scalar");
    return (*data)[0];
  }

  Tensor& mark_parameter() {
    requires_grad = true;
    if (!grad) grad = std::make_shared<std::vector<T>>(data->size(), T(0));
    return *this;
  }

  // Value copy with gradients stripped; shareable for parallel inference.
  Tensor frozen() const {
    Tensor t;
    t.rows = rows;
    t.cols = cols;
    t.data = std::make_shared<std::vector<T>>(*data);
    return t;
  }

  void zero_grad() {
    if (grad) std::fill(grad->begin(), grad->end(), T(0));
  }

 private:
  static void check_dims(int64_t rows, int64_t cols) {
    if (rows <= 0 || cols <= 0)
      throw ShapeError("tensor: non-positive shape " + shape_str(rows, cols));
  }
};

// Recording context for one forward pass. Construction makes this tape the
// active one for the current thread; destruction restores the previous tape.
// backward() may run once per tape; a second call is an error because the
// recorded closures have already consumed their gradients.
template <typename T>
class Tape {
 public:
  Tape() : prev_(active_tape()) { active_tape() = this; }
  ~Tape() { active_tape() = prev_; }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active() { return active_tape(); }

  void record(std::function<void()> op) { ops_.push_back(std::move(op)); }

  size_t size() const { return ops_.size(); }

  void backward(const Tensor<T>& loss) {
    if (consumed_)
      throw Error("backward: tape already consumed; rebuild the forward pass");
    if (loss.rows != 1 || loss.cols != 1)
      throw ShapeError("backward: loss must be scalar, got " +
                       shape_str(loss.rows, loss.cols));
    if (!loss.requires_grad || !loss.grad)
      throw Error("backward: loss was not recorded on a tape");
    consumed_ = true;
    (*loss.grad)[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

 private:
  static Tape*& active_tape() {
    thread_local Tape* active = nullptr;
    return active;
  }

  std::vector<std::function<void()>> ops_;
  bool consumed_ = false;
  Tape* prev_;
};

namespace detail {

template <typename T>
bool recording(std::initializer_list<const Tensor<T>*> inputs) {
  if (!Tape<T>::active()) return false;
  for (const Tensor<T>* t : inputs)
    if (t->requires_grad) return true;
  return false;
}

template <typename T>
void make_output_tracked(Tensor<T>& out) {
  out.requires_grad = true;
  if (!out.grad) out.grad = std::make_shared<std::vector<T>>(out.data->size(), T(0));
}

// Gradient buffer to accumulate into, or null when the input is constant.
template <typename T>
std::shared_ptr<std::vector<T>> grad_sink(const Tensor<T>& t) {
  return t.requires_grad ? t.grad : nullptr;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: inner dimensions differ: " +
                     shape_str(a.rows, a.cols) + " x " + shape_str(b.rows, b.cols));
  const int64_t m = a.rows, k = a.cols, n = b.cols;
  Tensor<T> out = Tensor<T>::zeros(m, n);
  const T* ad = a.data->data();
  const T* bd = b.data->data();
  T* od = out.data->data();
  for (int64_t i = 0; i < m; ++i)
    for (int64_t p = 0; p < k; ++p) {
      const T av = ad[i * k + p];
      if (av == T(0)) continue;
      const T* brow = bd + p * n;
      T* orow = od + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  if (detail::recording<T>({&a, &b})) {
    detail::make_output_tracked(out);
    auto adp = a.data, bdp = b.data, og = out.grad;
    auto ag = detail::grad_sink(a), bg = detail::grad_sink(b);
    Tape<T>::active()->record([=] {
      const T* g = og->data();
      if (ag) {
        T* agp = ag->data();
        const T* bp = bdp->data();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t j = 0; j < n; ++j) {
            const T gv = g[i * n + j];
            if (gv == T(0)) continue;
            for (int64_t p = 0; p < k; ++p) agp[i * k + p] += gv * bp[p * n + j];
          }
      }
      if (bg) {
        T* bgp = bg->data();
        const T* ap = adp->data();
        for (int64_t i = 0; i < m; ++i)
          for (int64_t p = 0; p < k; ++p) {
            const T av = ap[i * k + p];
            if (av == T(0)) continue;
            for (int64_t j = 0; j < n; ++j) bgp[p * n + j] += av * g[i * n + j];
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.cols, x.rows);
  for (int64_t i = 0; i < x.rows; ++i)
    for (int64_t j = 0; j < x.cols; ++j) out.at(j, i) = x.at(i, j);
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t r = x.rows, c = x.cols;
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) (*xg)[i * c + j] += (*og)[j * r + i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeError("add: shapes differ: " + shape_str(a.rows, a.cols) + " vs " +
                     shape_str(b.rows, b.cols));
  Tensor<T> out = Tensor<T>::zeros(a.rows, a.cols);
  for (int64_t i = 0; i < a.size(); ++i)
    (*out.data)[i] = (*a.data)[i] + (*b.data)[i];
  if (detail::recording<T>({&a, &b})) {
    detail::make_output_tracked(out);
    auto ag = detail::grad_sink(a), bg = detail::grad_sink(b), og = out.grad;
    const int64_t n = a.size();
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < n; ++i) {
        if (ag) (*ag)[i] += (*og)[i];
        if (bg) (*bg)[i] += (*og)[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out = Tensor<T>::zeros(x.rows, x.cols);
  for (int64_t i = 0; i < x.size(); ++i) (*out.data)[i] = (*x.data)[i] * factor;
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t n = x.size();
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < n; ++i) (*xg)[i] += factor * (*og)[i];
    });
  }
  return out;
}

// axis 0 stacks blocks of rows, axis 1 lays blocks side by side.
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("concat: axis must be 0 or 1");
  if (parts.empty()) throw ShapeError("concat: no tensors given");
  int64_t rows = parts[0].rows, cols = parts[0].cols;
  for (size_t p = 1; p < parts.size(); ++p) {
    if (axis == 0) {
      if (parts[p].cols != cols)
        throw ShapeError("concat: column counts differ: " + shape_str(rows, cols) +
                         " vs " + shape_str(parts[p].rows, parts[p].cols));
      rows += parts[p].rows;
    } else {
      if (parts[p].rows != rows)
        throw ShapeError("concat: row counts differ: " + shape_str(rows, cols) +
                         " vs " + shape_str(parts[p].rows, parts[p].cols));
      cols += parts[p].cols;
    }
  }
  Tensor<T> out = Tensor<T>::zeros(rows, cols);
  int64_t offset = 0;
  for (const Tensor<T>& part : parts) {
    for (int64_t i = 0; i < part.rows; ++i)
      for (int64_t j = 0; j < part.cols; ++j) {
        if (axis == 0)
          out.at(offset + i, j) = part.at(i, j);
        else
          out.at(i, offset + j) = part.at(i, j);
      }
    offset += axis == 0 ? part.rows : part.cols;
  }
  bool any_grad = false;
  for (const Tensor<T>& part : parts)
    if (part.requires_grad) any_grad = true;
  if (any_grad && Tape<T>::active()) {
    detail::make_output_tracked(out);
    auto og = out.grad;
    struct Piece {
      std::shared_ptr<std::vector<T>> grad;
      int64_t rows, cols, offset;
    };
    std::vector<Piece> pieces;
    int64_t off = 0;
    for (const Tensor<T>& part : parts) {
      pieces.push_back({detail::grad_sink(part), part.rows, part.cols, off});
      off += axis == 0 ? part.rows : part.cols;
    }
    Tape<T>::active()->record([=] {
      for (const Piece& pc : pieces) {
        if (!pc.grad) continue;
        for (int64_t i = 0; i < pc.rows; ++i)
          for (int64_t j = 0; j < pc.cols; ++j) {
            const int64_t src = axis == 0 ? (pc.offset + i) * cols + j
                                          : i * cols + (pc.offset + j);
            (*pc.grad)[i * pc.cols + j] += (*og)[src];
          }
      }
    });
  }
  return out;
}

// Contiguous [begin, end) along the axis.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int64_t begin, int64_t end) {
  if (axis != 0 && axis != 1) throw ShapeError("slice: axis must be 0 or 1");
  const int64_t extent = axis == 0 ? x.rows : x.cols;
  if (begin < 0 || end > extent || begin >= end)
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " +
                     std::to_string(end) + ") invalid for axis " +
                     std::to_string(axis) + " of " + shape_str(x.rows, x.cols));
  const int64_t rows = axis == 0 ? end - begin : x.rows;
  const int64_t cols = axis == 0 ? x.cols : end - begin;
  Tensor<T> out = Tensor<T>::zeros(rows, cols);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j)
      out.at(i, j) = axis == 0 ? x.at(begin + i, j) : x.at(i, begin + j);
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t xcols = x.cols;
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) {
          const int64_t dst =
              axis == 0 ? (begin + i) * xcols + j : i * xcols + (begin + j);
          (*xg)[dst] += (*og)[i * cols + j];
        }
    });
  }
  return out;
}

template <typename T>
Tensor<T> tile_rows(const Tensor<T>& x, int64_t n) {
  if (x.rows != 1)
    throw ShapeError("tile_rows: expected a single row, got " +
                     shape_str(x.rows, x.cols));
  Tensor<T> out = Tensor<T>::zeros(n, x.cols);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < x.cols; ++j) out.at(i, j) = x.at(0, j);
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t cols = x.cols;
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < cols; ++j) (*xg)[j] += (*og)[i * cols + j];
    });
  }
  return out;
}

template <typename T>
Tensor<T> tile_cols(const Tensor<T>& x, int64_t n) {
  if (x.cols != 1)
    throw ShapeError("tile_cols: expected a single column, got " +
                     shape_str(x.rows, x.cols));
  Tensor<T> out = Tensor<T>::zeros(x.rows, n);
  for (int64_t i = 0; i < x.rows; ++i)
    for (int64_t j = 0; j < n; ++j) out.at(i, j) = x.at(i, 0);
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t rows = x.rows;
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < n; ++j) (*xg)[i] += (*og)[i * n + j];
    });
  }
  return out;
}

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, const std::vector<int64_t>& ids) {
  if (ids.empty()) throw ShapeError("embedding_lookup: empty id list");
  for (int64_t id : ids)
    if (id < 0 || id >= table.rows)
      throw ShapeError("embedding_lookup: id " + std::to_string(id) +
                       " outside table " + shape_str(table.rows, table.cols));
  const int64_t n = static_cast<int64_t>(ids.size());
  Tensor<T> out = Tensor<T>::zeros(n, table.cols);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < table.cols; ++j) out.at(i, j) = table.at(ids[i], j);
  if (detail::recording<T>({&table})) {
    detail::make_output_tracked(out);
    auto tg = table.grad, og = out.grad;
    const int64_t cols = table.cols;
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < cols; ++j)
          (*tg)[ids[i] * cols + j] += (*og)[i * cols + j];
    });
  }
  return out;
}

namespace detail {

// Mask lookup with broadcast: full shape always allowed; a [1 x cols] mask
// broadcasts down rows for axis-1 softmax, a [rows x 1] mask across columns
// for axis-0 softmax.
template <typename T>
struct MaskView {
  const Tensor<T>* mask = nullptr;
  int axis = 1;

  bool masked(int64_t i, int64_t j, int64_t rows, int64_t cols) const {
    if (!mask) return false;
    T v;
    if (mask->rows == rows && mask->cols == cols)
      v = mask->at(i, j);
    else if (axis == 1 && mask->rows == 1 && mask->cols == cols)
      v = mask->at(0, j);
    else if (axis == 0 && mask->cols == 1 && mask->rows == rows)
      v = mask->at(i, 0);
    else
      throw ShapeError("softmax: mask " + shape_str(mask->rows, mask->cols) +
                       " does not broadcast to " + shape_str(rows, cols) +
                       " on axis " + std::to_string(axis));
    if (v != T(0) && v != T(1))
      throw ShapeError("softmax: mask entries must be 0 or 1");
    return v == T(0);
  }
};

}  // namespace detail

// Normalizes along `axis` (1 = across columns within each row). Masked
// positions get probability exactly 0; a fully masked line is an error.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis, const Tensor<T>* mask = nullptr) {
  if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
  detail::MaskView<T> mv{mask, axis};
  const int64_t lines = axis == 1 ? x.rows : x.cols;
  const int64_t len = axis == 1 ? x.cols : x.rows;
  Tensor<T> out = Tensor<T>::zeros(x.rows, x.cols);
  auto idx = [&](int64_t line, int64_t k) {
    return axis == 1 ? line * x.cols + k : k * x.cols + line;
  };
  for (int64_t line = 0; line < lines; ++line) {
    T max_v = -std::numeric_limits<T>::infinity();
    int64_t live = 0;
    for (int64_t k = 0; k < len; ++k) {
      const int64_t i = axis == 1 ? line : k, j = axis == 1 ? k : line;
      if (mv.masked(i, j, x.rows, x.cols)) continue;
      ++live;
      max_v = std::max(max_v, (*x.data)[idx(line, k)]);
    }
    if (live == 0)
      throw ShapeError("softmax: all entries masked on axis-" +
                       std::to_string(axis) + " line " + std::to_string(line));
    T z = T(0);
    for (int64_t k = 0; k < len; ++k) {
      const int64_t i = axis == 1 ? line : k, j = axis == 1 ? k : line;
      if (mv.masked(i, j, x.rows, x.cols)) continue;
      const T e = std::exp((*x.data)[idx(line, k)] - max_v);
      (*out.data)[idx(line, k)] = e;
      z += e;
    }
    for (int64_t k = 0; k < len; ++k) (*out.data)[idx(line, k)] /= z == T(0) ? T(1) : z;
  }
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad, od = out.data;
    const int64_t xcols = x.cols;
    Tape<T>::active()->record([=] {
      for (int64_t line = 0; line < lines; ++line) {
        T dot = T(0);
        for (int64_t k = 0; k < len; ++k) {
          const int64_t at = axis == 1 ? line * xcols + k : k * xcols + line;
          dot += (*og)[at] * (*od)[at];
        }
        for (int64_t k = 0; k < len; ++k) {
          const int64_t at = axis == 1 ? line * xcols + k : k * xcols + line;
          (*xg)[at] += (*od)[at] * ((*og)[at] - dot);  // masked entries have p=0
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.rows, x.cols);
  for (int64_t i = 0; i < x.size(); ++i) {
    const T v = (*x.data)[i];
    (*out.data)[i] = v >= T(0) ? T(1) / (T(1) + std::exp(-v))
                               : std::exp(v) / (T(1) + std::exp(v));
  }
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad, od = out.data;
    const int64_t n = x.size();
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < n; ++i) {
        const T y = (*od)[i];
        (*xg)[i] += (*og)[i] * y * (T(1) - y);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(x.rows, x.cols);
  for (int64_t i = 0; i < x.size(); ++i)
    (*out.data)[i] = std::max(T(0), (*x.data)[i]);
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad, xd = x.data;
    const int64_t n = x.size();
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < n; ++i)
        if ((*xd)[i] > T(0)) (*xg)[i] += (*og)[i];
    });
  }
  return out;
}

// Normalizes each row to zero mean / unit variance (epsilon 1e-5 inside the
// square root), then applies the affine gain and bias (both [1 x cols]).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias) {
  if (gain.rows != 1 || gain.cols != x.cols || bias.rows != 1 || bias.cols != x.cols)
    throw ShapeError("layer_norm: input " + shape_str(x.rows, x.cols) +
                     " needs gain/bias [1x" + std::to_string(x.cols) + "], got " +
                     shape_str(gain.rows, gain.cols) + " and " +
                     shape_str(bias.rows, bias.cols));
  const int64_t rows = x.rows, cols = x.cols;
  const T eps = T(1e-5);
  Tensor<T> out = Tensor<T>::zeros(rows, cols);
  auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(rows * cols));
  auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(rows));
  for (int64_t i = 0; i < rows; ++i) {
    T mean = T(0);
    for (int64_t j = 0; j < cols; ++j) mean += x.at(i, j);
    mean /= static_cast<T>(cols);
    T var = T(0);
    for (int64_t j = 0; j < cols; ++j) {
      const T d = x.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<T>(cols);
    const T s = T(1) / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(i)] = s;
    for (int64_t j = 0; j < cols; ++j) {
      const T xh = (x.at(i, j) - mean) * s;
      (*xhat)[static_cast<size_t>(i * cols + j)] = xh;
      out.at(i, j) = gain.at(0, j) * xh + bias.at(0, j);
    }
  }
  if (detail::recording<T>({&x, &gain, &bias})) {
    detail::make_output_tracked(out);
    auto og = out.grad;
    auto xg = detail::grad_sink(x);
    auto gg = detail::grad_sink(gain);
    auto bg = detail::grad_sink(bias);
    auto gd = gain.data;
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < rows; ++i) {
        const T s = (*inv_std)[static_cast<size_t>(i)];
        T mean_gh = T(0), mean_ghx = T(0);
        for (int64_t j = 0; j < cols; ++j) {
          const size_t at = static_cast<size_t>(i * cols + j);
          const T gh = (*og)[at] * (*gd)[static_cast<size_t>(j)];
          mean_gh += gh;
          mean_ghx += gh * (*xhat)[at];
        }
        mean_gh /= static_cast<T>(cols);
        mean_ghx /= static_cast<T>(cols);
        for (int64_t j = 0; j < cols; ++j) {
          const size_t at = static_cast<size_t>(i * cols + j);
          const T g = (*og)[at];
          const T gh = g * (*gd)[static_cast<size_t>(j)];
          if (xg) (*xg)[at] += s * (gh - mean_gh - (*xhat)[at] * mean_ghx);
          if (gg) (*gg)[static_cast<size_t>(j)] += g * (*xhat)[at];
          if (bg) (*bg)[static_cast<size_t>(j)] += g;
        }
      }
    });
  }
  return out;
}

// Inverted dropout: kept activations are scaled by 1/(1-p) at train time so
// inference is the identity.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool train, Rng& rng) {
  if (p < 0.0 || p >= 1.0)
    throw ConfigError("dropout: p must be in [0, 1), got " + std::to_string(p));
  if (!train || p == 0.0) return x;
  Tensor<T> out = Tensor<T>::zeros(x.rows, x.cols);
  auto keep = std::make_shared<std::vector<T>>(static_cast<size_t>(x.size()));
  const T inv = T(1.0 / (1.0 - p));
  for (int64_t i = 0; i < x.size(); ++i) {
    const T k = rng.bernoulli(p) ? T(0) : inv;
    (*keep)[static_cast<size_t>(i)] = k;
    (*out.data)[i] = (*x.data)[i] * k;
  }
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t n = x.size();
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < n; ++i)
        (*xg)[i] += (*og)[i] * (*keep)[static_cast<size_t>(i)];
    });
  }
  return out;
}

// Sum over rows of w[label_i] * (-log softmax(logits_i)[label_i]). Class
// weights are plain constants (the loss is not differentiated w.r.t. them).
template <typename T>
Tensor<T> weighted_ce(const Tensor<T>& logits, const std::vector<int64_t>& labels,
                      const std::vector<T>& class_weights) {
  const int64_t n = logits.rows, classes = logits.cols;
  if (static_cast<int64_t>(labels.size()) != n)
    throw ShapeError("weighted_ce: " + std::to_string(labels.size()) +
                     " labels for logits " + shape_str(n, classes));
  if (static_cast<int64_t>(class_weights.size()) != classes)
    throw ShapeError("weighted_ce: " + std::to_string(class_weights.size()) +
                     " class weights for " + std::to_string(classes) + " classes");
  for (int64_t i = 0; i < n; ++i)
    if (labels[static_cast<size_t>(i)] < 0 || labels[static_cast<size_t>(i)] >= classes)
      throw ShapeError("weighted_ce: label " +
                       std::to_string(labels[static_cast<size_t>(i)]) + " at row " +
                       std::to_string(i) + " outside " + std::to_string(classes) +
                       " classes");
  Tensor<T> out = Tensor<T>::zeros(1, 1);
  auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(n * classes));
  T total = T(0);
  for (int64_t i = 0; i < n; ++i) {
    T max_v = logits.at(i, 0);
    for (int64_t j = 1; j < classes; ++j) max_v = std::max(max_v, logits.at(i, j));
    T z = T(0);
    for (int64_t j = 0; j < classes; ++j) {
      const T e = std::exp(logits.at(i, j) - max_v);
      (*probs)[static_cast<size_t>(i * classes + j)] = e;
      z += e;
    }
    for (int64_t j = 0; j < classes; ++j)
      (*probs)[static_cast<size_t>(i * classes + j)] /= z;
    const int64_t y = labels[static_cast<size_t>(i)];
    const T lse = max_v + std::log(z);
    total += class_weights[static_cast<size_t>(y)] * (lse - logits.at(i, y));
  }
  (*out.data)[0] = total;
  if (detail::recording<T>({&logits})) {
    detail::make_output_tracked(out);
    auto lg = logits.grad, og = out.grad;
    Tape<T>::active()->record([=] {
      const T g = (*og)[0];
      for (int64_t i = 0; i < n; ++i) {
        const int64_t y = labels[static_cast<size_t>(i)];
        const T w = class_weights[static_cast<size_t>(y)];
        for (int64_t j = 0; j < classes; ++j) {
          const T p = (*probs)[static_cast<size_t>(i * classes + j)];
          (*lg)[i * classes + j] += g * w * (p - (j == y ? T(1) : T(0)));
        }
      }
    });
  }
  return out;
}

// axis 0 reduces rows into [1 x cols]; axis 1 reduces columns into [rows x 1].
template <typename T>
Tensor<T> logsumexp(const Tensor<T>& x, int axis) {
  if (axis != 0 && axis != 1) throw ShapeError("logsumexp: axis must be 0 or 1");
  const int64_t lines = axis == 1 ? x.rows : x.cols;
  const int64_t len = axis == 1 ? x.cols : x.rows;
  Tensor<T> out = axis == 1 ? Tensor<T>::zeros(x.rows, 1) : Tensor<T>::zeros(1, x.cols);
  auto idx = [&](int64_t line, int64_t k) {
    return axis == 1 ? line * x.cols + k : k * x.cols + line;
  };
  for (int64_t line = 0; line < lines; ++line) {
    T max_v = (*x.data)[idx(line, 0)];
    for (int64_t k = 1; k < len; ++k)
      max_v = std::max(max_v, (*x.data)[idx(line, k)]);
    T z = T(0);
    for (int64_t k = 0; k < len; ++k)
      z += std::exp((*x.data)[idx(line, k)] - max_v);
    (*out.data)[line] = max_v + std::log(z);
  }
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad, od = out.data, xd = x.data;
    const int64_t xcols = x.cols;
    Tape<T>::active()->record([=] {
      for (int64_t line = 0; line < lines; ++line) {
        const T lse = (*od)[line];
        const T g = (*og)[line];
        if (g == T(0)) continue;
        for (int64_t k = 0; k < len; ++k) {
          const int64_t at = axis == 1 ? line * xcols + k : k * xcols + line;
          (*xg)[at] += g * std::exp((*xd)[at] - lse);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros(1, 1);
  T total = T(0);
  for (int64_t i = 0; i < x.size(); ++i) total += (*x.data)[i];
  (*out.data)[0] = total;
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t n = x.size();
    Tape<T>::active()->record([=] {
      const T g = (*og)[0];
      for (int64_t i = 0; i < n; ++i) (*xg)[i] += g;
    });
  }
  return out;
}

// Sum of the selected entries; repeated indices count with multiplicity
// (a CRF gold path reuses transition cells).
template <typename T>
Tensor<T> gather_sum(const Tensor<T>& x,
                     const std::vector<std::pair<int64_t, int64_t>>& indices) {
  if (indices.empty()) throw ShapeError("gather_sum: empty index list");
  for (const auto& [r, c] : indices)
    if (r < 0 || r >= x.rows || c < 0 || c >= x.cols)
      throw ShapeError("gather_sum: index (" + std::to_string(r) + ", " +
                       std::to_string(c) + ") outside " + shape_str(x.rows, x.cols));
  Tensor<T> out = Tensor<T>::zeros(1, 1);
  T total = T(0);
  for (const auto& [r, c] : indices) total += x.at(r, c);
  (*out.data)[0] = total;
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t cols = x.cols;
    Tape<T>::active()->record([=] {
      const T g = (*og)[0];
      for (const auto& [r, c] : indices) (*xg)[r * cols + c] += g;
    });
  }
  return out;
}

// Zeroes the rows where keep[i] == 0; gradients flow only through kept rows.
template <typename T>
Tensor<T> mask_rows(const Tensor<T>& x, const std::vector<uint8_t>& keep) {
  if (static_cast<int64_t>(keep.size()) != x.rows)
    throw ShapeError("mask_rows: " + std::to_string(keep.size()) +
                     " flags for " + shape_str(x.rows, x.cols));
  Tensor<T> out = Tensor<T>::zeros(x.rows, x.cols);
  for (int64_t i = 0; i < x.rows; ++i) {
    if (!keep[static_cast<size_t>(i)]) continue;
    for (int64_t j = 0; j < x.cols; ++j) out.at(i, j) = x.at(i, j);
  }
  if (detail::recording<T>({&x})) {
    detail::make_output_tracked(out);
    auto xg = x.grad, og = out.grad;
    const int64_t rows = x.rows, cols = x.cols;
    Tape<T>::active()->record([=] {
      for (int64_t i = 0; i < rows; ++i) {
        if (!keep[static_cast<size_t>(i)]) continue;
        for (int64_t j = 0; j < cols; ++j) (*xg)[i * cols + j] += (*og)[i * cols + j];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checker
// ---------------------------------------------------------------------------

// Compares the analytic gradient of the scalar function f at x against
// central differences, returning the max relative error with denominator
// max(|analytic|, |numeric|, 1e-8). f must be deterministic (dropout off);
// two differing forward evaluations are detected and rejected.
template <typename F>
double grad_check(F&& f, Tensor<double>& x, double eps = 1e-5) {
  if (Tape<double>::active())
    throw Error("grad_check: must run outside any active tape");
  x.mark_parameter();
  auto run_value = [&]() -> double {
    Tensor<double> out = f(x);
    if (out.rows != 1 || out.cols != 1)
      throw ShapeError("grad_check: f must be scalar-valued, got " +
                       shape_str(out.rows, out.cols));
    return (*out.data)[0];
  };
  const double v1 = run_value();
  const double v2 = run_value();
  if (v1 != v2)
    throw Error("grad_check: f is non-deterministic (two forwards differ)");
  x.zero_grad();
  {
    Tape<double> tape;
    Tensor<double> loss = f(x);
    tape.backward(loss);
  }
  const std::vector<double> analytic = *x.grad;
  double max_rel = 0.0;
  for (size_t i = 0; i < x.data->size(); ++i) {
    const double keep = (*x.data)[i];
    (*x.data)[i] = keep + eps;
    const double up = run_value();
    (*x.data)[i] = keep - eps;
    const double down = run_value();
    (*x.data)[i] = keep;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
  }
  return max_rel;
}

}  // namespace edag
