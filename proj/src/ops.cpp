#include "fssc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace fssc {

namespace {

template <typename S>
using Arr2 = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using ArrMap = Eigen::Map<Arr2<S>>;
template <typename S>
using ConstArrMap = Eigen::Map<const Arr2<S>>;
template <typename S>
using MatMap = Eigen::Map<RowMatrix<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const RowMatrix<S>>;

template <typename S>
ArrMap<S> grad_arr(TensorNode<S>& n, Index rows, Index cols) {
  return {n.grad_buffer().data(), rows, cols};
}
template <typename S>
MatMap<S> grad_mat(TensorNode<S>& n, Index rows, Index cols) {
  return {n.grad_buffer().data(), rows, cols};
}

// Number of trailing elements b covers when broadcast against a.
template <typename S>
Index broadcast_inner(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (!a.defined() || !b.defined()) throw DimensionError(std::string(op) + ": undefined operand");
  if (b.numel() == 1) return 1;
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sb.size() <= sa.size() && std::equal(sb.rbegin(), sb.rend(), sa.rbegin())) return b.numel();
  throw DimensionError(std::string(op) + ": cannot broadcast " + shape_str(sb) + " onto " +
                       shape_str(sa));
}

template <typename S>
Index normalize_axis(Index axis, Index rank, const char* op) {
  const Index a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  }
  return a;
}

// dst (+)= op(x) * op(y) for row-major maps.
template <typename Dst, typename X, typename Y>
void gemm(Dst&& dst, const X& x, bool tx, const Y& y, bool ty, bool accumulate) {
  if (!tx && !ty) {
    if (accumulate) dst.noalias() += x * y; else dst.noalias() = x * y;
  } else if (!tx && ty) {
    if (accumulate) dst.noalias() += x * y.transpose(); else dst.noalias() = x * y.transpose();
  } else if (tx && !ty) {
    if (accumulate) dst.noalias() += x.transpose() * y; else dst.noalias() = x.transpose() * y;
  } else {
    if (accumulate) {
      dst.noalias() += x.transpose() * y.transpose();
    } else {
      dst.noalias() = x.transpose() * y.transpose();
    }
  }
}

template <typename S>
S gelu_value(S x) {
  constexpr S c = S(0.7978845608028654);  // sqrt(2/pi)
  const S u = c * (x + S(0.044715) * x * x * x);
  return S(0.5) * x * (S(1) + std::tanh(u));
}

template <typename S>
S gelu_derivative(S x) {
  constexpr S c = S(0.7978845608028654);
  const S u = c * (x + S(0.044715) * x * x * x);
  const S t = std::tanh(u);
  return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * c * (S(1) + S(3 * 0.044715) * x * x);
}

struct ConvGeometry {
  Index batch, cin, cout, h, w, k, stride, pad, ho, wo;
};

// Unfolds one image [cin, h, w] into columns [cin*k*k, ho*wo].
template <typename S>
void im2col(const S* x, const ConvGeometry& g, S* cols) {
  const Index ncol = g.ho * g.wo;
  for (Index c = 0; c < g.cin; ++c) {
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        S* row = cols + ((c * g.k + ky) * g.k + kx) * ncol;
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy * g.stride + ky - g.pad;
          for (Index ox = 0; ox < g.wo; ++ox) {
            const Index ix = ox * g.stride + kx - g.pad;
            const bool inside = iy >= 0 && iy < g.h && ix >= 0 && ix < g.w;
            row[oy * g.wo + ox] = inside ? x[(c * g.h + iy) * g.w + ix] : S(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back into an image (accumulating).
template <typename S>
void col2im(const S* cols, const ConvGeometry& g, S* x) {
  const Index ncol = g.ho * g.wo;
  for (Index c = 0; c < g.cin; ++c) {
    for (Index ky = 0; ky < g.k; ++ky) {
      for (Index kx = 0; kx < g.k; ++kx) {
        const S* row = cols + ((c * g.k + ky) * g.k + kx) * ncol;
        for (Index oy = 0; oy < g.ho; ++oy) {
          const Index iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          for (Index ox = 0; ox < g.wo; ++ox) {
            const Index ix = ox * g.stride + kx - g.pad;
            if (ix < 0 || ix >= g.w) continue;
            x[(c * g.h + iy) * g.w + ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  const Index inner = broadcast_inner(a, b, "add");
  const Index outer = a.numel() / inner;
  Vec<S> out(a.numel());
  ArrMap<S>(out.data(), outer, inner) =
      ConstArrMap<S>(a.data(), outer, inner).rowwise() + ConstArrMap<S>(b.data(), 1, inner).row(0);
  return detail::make_result<S>(a.shape(), std::move(out), {&a, &b},
                                [an = a.node(), bn = b.node(), outer, inner](TensorNode<S>& o) {
                                  ConstArrMap<S> g(o.grad.data(), outer, inner);
                                  if (an->requires_grad) grad_arr(*an, outer, inner) += g;
                                  if (bn->requires_grad) grad_arr(*bn, 1, inner) += g.colwise().sum();
                                });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  const Index inner = broadcast_inner(a, b, "sub");
  const Index outer = a.numel() / inner;
  Vec<S> out(a.numel());
  ArrMap<S>(out.data(), outer, inner) =
      ConstArrMap<S>(a.data(), outer, inner).rowwise() - ConstArrMap<S>(b.data(), 1, inner).row(0);
  return detail::make_result<S>(a.shape(), std::move(out), {&a, &b},
                                [an = a.node(), bn = b.node(), outer, inner](TensorNode<S>& o) {
                                  ConstArrMap<S> g(o.grad.data(), outer, inner);
                                  if (an->requires_grad) grad_arr(*an, outer, inner) += g;
                                  if (bn->requires_grad) grad_arr(*bn, 1, inner) -= g.colwise().sum();
                                });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  const Index inner = broadcast_inner(a, b, "mul");
  const Index outer = a.numel() / inner;
  Vec<S> out(a.numel());
  ArrMap<S>(out.data(), outer, inner) =
      ConstArrMap<S>(a.data(), outer, inner).rowwise() * ConstArrMap<S>(b.data(), 1, inner).row(0);
  return detail::make_result<S>(
      a.shape(), std::move(out), {&a, &b},
      [an = a.node(), bn = b.node(), outer, inner](TensorNode<S>& o) {
        ConstArrMap<S> g(o.grad.data(), outer, inner);
        ConstArrMap<S> av(an->value.data(), outer, inner);
        ConstArrMap<S> bv(bn->value.data(), 1, inner);
        if (an->requires_grad) grad_arr(*an, outer, inner) += g.rowwise() * bv.row(0);
        if (bn->requires_grad) grad_arr(*bn, 1, inner) += (g * av).colwise().sum();
      });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S factor) {
  Vec<S> out = x.value() * factor;
  return detail::make_result<S>(x.shape(), std::move(out), {&x},
                                [xn = x.node(), factor](TensorNode<S>& o) {
                                  xn->grad_buffer() += o.grad * factor;
                                });
}

template <typename S>
Tensor<S> gelu(const Tensor<S>& x) {
  Vec<S> out = x.value().unaryExpr([](S v) { return gelu_value(v); });
  return detail::make_result<S>(x.shape(), std::move(out), {&x}, [xn = x.node()](TensorNode<S>& o) {
    xn->grad_buffer().array() +=
        o.grad.array() * xn->value.unaryExpr([](S v) { return gelu_derivative(v); }).array();
  });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  Vec<S> out = x.value().unaryExpr([](S v) { return S(1) / (S(1) + std::exp(-v)); });
  return detail::make_result<S>(x.shape(), std::move(out), {&x}, [xn = x.node()](TensorNode<S>& o) {
    const auto y = o.value.array();
    xn->grad_buffer().array() += o.grad.array() * y * (S(1) - y);
  });
}

template <typename S>
Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b, bool transpose_a, bool transpose_b) {
  if (a.rank() != b.rank() || (a.rank() != 2 && a.rank() != 3) ||
      (a.rank() == 3 && a.dim(0) != b.dim(0))) {
    throw DimensionError("matmul: incompatible operands " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  const bool batched = a.rank() == 3;
  const Index batch = batched ? a.dim(0) : 1;
  const Index ra = a.dim(-2), ca = a.dim(-1), rb = b.dim(-2), cb = b.dim(-1);
  const Index m = transpose_a ? ca : ra;
  const Index k = transpose_a ? ra : ca;
  const Index kb = transpose_b ? cb : rb;
  const Index n = transpose_b ? rb : cb;
  if (k != kb) {
    throw DimensionError("matmul: inner extents differ for " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
  }
  Vec<S> out(batch * m * n);
  for (Index g = 0; g < batch; ++g) {
    ConstMatMap<S> A(a.data() + g * ra * ca, ra, ca);
    ConstMatMap<S> B(b.data() + g * rb * cb, rb, cb);
    MatMap<S> C(out.data() + g * m * n, m, n);
    gemm(C, A, transpose_a, B, transpose_b, false);
  }
  Shape shape = batched ? Shape{batch, m, n} : Shape{m, n};
  return detail::make_result<S>(
      std::move(shape), std::move(out), {&a, &b},
      [an = a.node(), bn = b.node(), batch, ra, ca, rb, cb, m, n, ta = transpose_a,
       tb = transpose_b](TensorNode<S>& o) {
        for (Index g = 0; g < batch; ++g) {
          ConstMatMap<S> A(an->value.data() + g * ra * ca, ra, ca);
          ConstMatMap<S> B(bn->value.data() + g * rb * cb, rb, cb);
          ConstMatMap<S> dC(o.grad.data() + g * m * n, m, n);
          if (an->requires_grad) {
            MatMap<S> dA(an->grad_buffer().data() + g * ra * ca, ra, ca);
            if (!ta && !tb) gemm(dA, dC, false, B, true, true);
            else if (!ta && tb) gemm(dA, dC, false, B, false, true);
            else if (ta && !tb) gemm(dA, B, false, dC, true, true);
            else gemm(dA, B, true, dC, true, true);
          }
          if (bn->requires_grad) {
            MatMap<S> dB(bn->grad_buffer().data() + g * rb * cb, rb, cb);
            if (!ta && !tb) gemm(dB, A, true, dC, false, true);
            else if (!ta && tb) gemm(dB, dC, true, A, false, true);
            else if (ta && !tb) gemm(dB, A, false, dC, false, true);
            else gemm(dB, dC, true, A, true, true);
          }
        }
      });
}

template <typename S>
Tensor<S> linear(const Tensor<S>& x, const Tensor<S>& weight, const Tensor<S>& bias) {
  if (weight.rank() != 2 || x.dim(-1) != weight.dim(0)) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  const Index in = weight.dim(0), outd = weight.dim(1);
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != outd) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
  }
  const Index rows = x.numel() / in;
  Vec<S> out(rows * outd);
  MatMap<S> Y(out.data(), rows, outd);
  Y.noalias() = x.matrix(rows, in) * weight.matrix(in, outd);
  if (has_bias) Y.rowwise() += bias.matrix(1, outd).row(0);
  Shape shape = x.shape();
  shape.back() = outd;
  return detail::make_result<S>(
      std::move(shape), std::move(out), {&x, &weight, &bias},
      [xn = x.node(), wn = weight.node(), bn = has_bias ? bias.node() : nullptr, rows, in,
       outd](TensorNode<S>& o) {
        ConstMatMap<S> dY(o.grad.data(), rows, outd);
        if (xn->requires_grad) {
          grad_mat(*xn, rows, in).noalias() +=
              dY * ConstMatMap<S>(wn->value.data(), in, outd).transpose();
        }
        if (wn->requires_grad) {
          grad_mat(*wn, in, outd).noalias() +=
              ConstMatMap<S>(xn->value.data(), rows, in).transpose() * dY;
        }
        if (bn && bn->requires_grad) grad_mat(*bn, 1, outd) += dY.colwise().sum();
      });
}

template <typename S>
Tensor<S> softmax(const Tensor<S>& x, Index axis) {
  const Index ax = normalize_axis<S>(axis, x.rank(), "softmax");
  Index outer = 1, inner = 1;
  for (Index i = 0; i < ax; ++i) outer *= x.dim(i);
  for (Index i = ax + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const Index n = x.dim(ax);
  Vec<S> out(x.numel());
  const S* xv = x.data();
  for (Index o = 0; o < outer; ++o) {
    for (Index in = 0; in < inner; ++in) {
      const Index base = o * n * inner + in;
      S mx = xv[base];
      for (Index j = 1; j < n; ++j) mx = std::max(mx, xv[base + j * inner]);
      S total = 0;
      for (Index j = 0; j < n; ++j) {
        const S e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        total += e;
      }
      for (Index j = 0; j < n; ++j) out[base + j * inner] /= total;
    }
  }
  return detail::make_result<S>(x.shape(), std::move(out), {&x},
                                [xn = x.node(), outer, inner, n](TensorNode<S>& o) {
                                  Vec<S>& gx = xn->grad_buffer();
                                  const S* y = o.value.data();
                                  const S* g = o.grad.data();
                                  for (Index oo = 0; oo < outer; ++oo) {
                                    for (Index in = 0; in < inner; ++in) {
                                      const Index base = oo * n * inner + in;
                                      S dot = 0;
                                      for (Index j = 0; j < n; ++j) {
                                        dot += g[base + j * inner] * y[base + j * inner];
                                      }
                                      for (Index j = 0; j < n; ++j) {
                                        const Index p = base + j * inner;
                                        gx[p] += y[p] * (g[p] - dot);
                                      }
                                    }
                                  }
                                });
}

template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gain, const Tensor<S>& bias, S eps) {
  const Index d = x.dim(-1);
  if (gain.numel() != d || bias.numel() != d) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + " vs gain " +
                         shape_str(gain.shape()) + " / bias " + shape_str(bias.shape()));
  }
  const Index rows = x.numel() / d;
  ConstArrMap<S> X(x.data(), rows, d);
  auto xhat = std::make_shared<Arr2<S>>(rows, d);
  auto inv_std = std::make_shared<Eigen::Array<S, Eigen::Dynamic, 1>>(rows);
  for (Index r = 0; r < rows; ++r) {
    const S mu = X.row(r).mean();
    const S var = (X.row(r) - mu).square().mean();
    const S is = S(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    xhat->row(r) = (X.row(r) - mu) * is;
  }
  Vec<S> out(x.numel());
  ArrMap<S>(out.data(), rows, d) =
      (xhat->rowwise() * ConstArrMap<S>(gain.data(), 1, d).row(0)).rowwise() +
      ConstArrMap<S>(bias.data(), 1, d).row(0);
  return detail::make_result<S>(
      x.shape(), std::move(out), {&x, &gain, &bias},
      [xn = x.node(), gn = gain.node(), bn = bias.node(), xhat, inv_std, rows,
       d](TensorNode<S>& o) {
        ConstArrMap<S> g(o.grad.data(), rows, d);
        if (gn->requires_grad) grad_arr(*gn, 1, d) += (g * *xhat).colwise().sum();
        if (bn->requires_grad) grad_arr(*bn, 1, d) += g.colwise().sum();
        if (xn->requires_grad) {
          ArrMap<S> gx = grad_arr(*xn, rows, d);
          const auto gamma = ConstArrMap<S>(gn->value.data(), 1, d).row(0);
          for (Index r = 0; r < rows; ++r) {
            const Eigen::Array<S, 1, Eigen::Dynamic> dxhat = g.row(r) * gamma;
            const S s1 = dxhat.sum();
            const S s2 = (dxhat * xhat->row(r)).sum();
            gx.row(r) += ((*inv_std)[r] / S(d)) * (S(d) * dxhat - s1 - xhat->row(r) * s2);
          }
        }
      });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  return detail::make_result<S>(std::move(shape), x.value(), {&x},
                                [xn = x.node()](TensorNode<S>& o) { xn->grad_buffer() += o.grad; });
}

template <typename S>
Tensor<S> permute(const Tensor<S>& x, const std::vector<Index>& axes) {
  const Index rank = x.rank();
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  if (static_cast<Index>(axes.size()) != rank) {
    throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for tensor " +
                         shape_str(x.shape()));
  }
  for (Index a : axes) {
    if (a < 0 || a >= rank || seen[static_cast<std::size_t>(a)]) {
      throw DimensionError("permute: invalid axis list for tensor " + shape_str(x.shape()));
    }
    seen[static_cast<std::size_t>(a)] = true;
  }
  std::vector<Index> in_stride(static_cast<std::size_t>(rank), 1);
  for (Index i = rank - 2; i >= 0; --i) {
    in_stride[static_cast<std::size_t>(i)] =
        in_stride[static_cast<std::size_t>(i + 1)] * x.dim(i + 1);
  }
  Shape shape(static_cast<std::size_t>(rank));
  std::vector<Index> step(static_cast<std::size_t>(rank));
  for (Index i = 0; i < rank; ++i) {
    shape[static_cast<std::size_t>(i)] = x.dim(axes[static_cast<std::size_t>(i)]);
    step[static_cast<std::size_t>(i)] = in_stride[static_cast<std::size_t>(axes[static_cast<std::size_t>(i)])];
  }
  const Index n = x.numel();
  auto src = std::make_shared<std::vector<Index>>(static_cast<std::size_t>(n));
  std::vector<Index> counter(static_cast<std::size_t>(rank), 0);
  Index offset = 0;
  for (Index i = 0; i < n; ++i) {
    (*src)[static_cast<std::size_t>(i)] = offset;
    for (Index d = rank - 1; d >= 0; --d) {
      auto du = static_cast<std::size_t>(d);
      if (++counter[du] < shape[du]) {
        offset += step[du];
        break;
      }
      offset -= step[du] * (shape[du] - 1);
      counter[du] = 0;
    }
  }
  Vec<S> out(n);
  const S* xv = x.data();
  for (Index i = 0; i < n; ++i) out[i] = xv[(*src)[static_cast<std::size_t>(i)]];
  return detail::make_result<S>(std::move(shape), std::move(out), {&x},
                                [xn = x.node(), src, n](TensorNode<S>& o) {
                                  Vec<S>& gx = xn->grad_buffer();
                                  for (Index i = 0; i < n; ++i) {
                                    gx[(*src)[static_cast<std::size_t>(i)]] += o.grad[i];
                                  }
                                });
}

template <typename S>
Tensor<S> gather(const Tensor<S>& x, Index axis, const std::vector<Index>& indices) {
  const Index ax = normalize_axis<S>(axis, x.rank(), "gather");
  const Index n = x.dim(ax);
  for (Index i : indices) {
    if (i < 0 || i >= n) {
      throw DimensionError("gather: index " + std::to_string(i) + " out of range for axis of " +
                           std::to_string(n));
    }
  }
  if (indices.empty()) throw DimensionError("gather: empty index list");
  Index outer = 1, inner = 1;
  for (Index i = 0; i < ax; ++i) outer *= x.dim(i);
  for (Index i = ax + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const auto m = static_cast<Index>(indices.size());
  Shape shape = x.shape();
  shape[static_cast<std::size_t>(ax)] = m;
  Vec<S> out(outer * m * inner);
  for (Index o = 0; o < outer; ++o) {
    for (Index j = 0; j < m; ++j) {
      const S* from = x.data() + (o * n + indices[static_cast<std::size_t>(j)]) * inner;
      std::copy(from, from + inner, out.data() + (o * m + j) * inner);
    }
  }
  auto idx = std::make_shared<std::vector<Index>>(indices);
  return detail::make_result<S>(std::move(shape), std::move(out), {&x},
                                [xn = x.node(), idx, outer, inner, n, m](TensorNode<S>& o) {
                                  Vec<S>& gx = xn->grad_buffer();
                                  for (Index oo = 0; oo < outer; ++oo) {
                                    for (Index j = 0; j < m; ++j) {
                                      const Index src = (oo * n + (*idx)[static_cast<std::size_t>(j)]) * inner;
                                      gx.segment(src, inner) += o.grad.segment((oo * m + j) * inner, inner);
                                    }
                                  }
                                });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  Vec<S> out(1);
  out[0] = x.value().sum();
  return detail::make_result<S>(Shape{1}, std::move(out), {&x}, [xn = x.node()](TensorNode<S>& o) {
    xn->grad_buffer().array() += o.grad[0];
  });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
  return scale(sum(x), S(1) / S(x.numel()));
}

template <typename S>
Tensor<S> mse_loss(const Tensor<S>& x, const Tensor<S>& target) {
  if (x.shape() != target.shape()) {
    throw DimensionError("mse_loss: shapes " + shape_str(x.shape()) + " and " +
                         shape_str(target.shape()) + " differ");
  }
  const S inv_n = S(1) / S(x.numel());
  Vec<S> out(1);
  out[0] = (x.value() - target.value()).squaredNorm() * inv_n;
  return detail::make_result<S>(Shape{1}, std::move(out), {&x, &target},
                                [xn = x.node(), tn = target.node(), inv_n](TensorNode<S>& o) {
                                  const S c = S(2) * inv_n * o.grad[0];
                                  if (xn->requires_grad) {
                                    xn->grad_buffer() += c * (xn->value - tn->value);
                                  }
                                  if (tn->requires_grad) {
                                    tn->grad_buffer() -= c * (xn->value - tn->value);
                                  }
                                });
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& x, const Tensor<S>& kernels, const Tensor<S>& bias,
                 Index stride) {
  if (x.rank() != 4 || kernels.rank() != 4 || kernels.dim(1) != x.dim(1) ||
      kernels.dim(2) != kernels.dim(3) || stride < 1) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " incompatible with kernels " +
                         shape_str(kernels.shape()));
  }
  ConvGeometry g{x.dim(0), x.dim(1), kernels.dim(0), x.dim(2), x.dim(3), kernels.dim(2), stride,
                 kernels.dim(2) / 2, 0, 0};
  g.ho = (g.h + 2 * g.pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / stride + 1;
  if (g.h + 2 * g.pad < g.k || g.w + 2 * g.pad < g.k) {
    throw DimensionError("conv2d: kernel larger than padded input " + shape_str(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != g.cout) throw DimensionError("conv2d: bias size mismatch");
  const Index kk = g.cin * g.k * g.k, ncol = g.ho * g.wo;
  Vec<S> out(g.batch * g.cout * ncol);
  RowMatrix<S> cols(kk, ncol);
  for (Index b = 0; b < g.batch; ++b) {
    im2col(x.data() + b * g.cin * g.h * g.w, g, cols.data());
    MatMap<S> Y(out.data() + b * g.cout * ncol, g.cout, ncol);
    Y.noalias() = kernels.matrix(g.cout, kk) * cols;
    if (has_bias) Y.colwise() += bias.matrix(g.cout, 1).col(0);
  }
  return detail::make_result<S>(
      Shape{g.batch, g.cout, g.ho, g.wo}, std::move(out), {&x, &kernels, &bias},
      [xn = x.node(), wn = kernels.node(), bn = has_bias ? bias.node() : nullptr, g, kk,
       ncol](TensorNode<S>& o) {
        RowMatrix<S> cols(kk, ncol), dcols(kk, ncol);
        ConstMatMap<S> W(wn->value.data(), g.cout, kk);
        for (Index b = 0; b < g.batch; ++b) {
          ConstMatMap<S> dY(o.grad.data() + b * g.cout * ncol, g.cout, ncol);
          if (wn->requires_grad) {
            im2col(xn->value.data() + b * g.cin * g.h * g.w, g, cols.data());
            grad_mat(*wn, g.cout, kk).noalias() += dY * cols.transpose();
          }
          if (xn->requires_grad) {
            dcols.noalias() = W.transpose() * dY;
            col2im(dcols.data(), g, xn->grad_buffer().data() + b * g.cin * g.h * g.w);
          }
          if (bn && bn->requires_grad) grad_mat(*bn, g.cout, 1) += dY.rowwise().sum();
        }
      });
}

template <typename S>
Tensor<S> conv2d_transposed(const Tensor<S>& x, const Tensor<S>& kernels, const Tensor<S>& bias,
                            Index stride) {
  if (x.rank() != 4 || kernels.rank() != 4 || kernels.dim(0) != x.dim(1) ||
      kernels.dim(2) != kernels.dim(3) || stride < 1) {
    throw DimensionError("conv2d_transposed: input " + shape_str(x.shape()) +
                         " incompatible with kernels " + shape_str(kernels.shape()));
  }
  // Geometry of the forward convolution this operator is the adjoint of.
  ConvGeometry g{x.dim(0), kernels.dim(1), kernels.dim(0), x.dim(2) * stride, x.dim(3) * stride,
                 kernels.dim(2), stride, kernels.dim(2) / 2, 0, 0};
  g.ho = (g.h + 2 * g.pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - g.k) / stride + 1;
  if (g.ho != x.dim(2) || g.wo != x.dim(3)) {
    throw DimensionError("conv2d_transposed: kernel " + shape_str(kernels.shape()) +
                         " with stride " + std::to_string(stride) + " cannot invert to " +
                         shape_str(x.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != g.cin) {
    throw DimensionError("conv2d_transposed: bias size mismatch");
  }
  const Index kk = g.cin * g.k * g.k, ncol = g.ho * g.wo, plane = g.h * g.w;
  Vec<S> out = Vec<S>::Zero(g.batch * g.cin * plane);
  RowMatrix<S> cols(kk, ncol);
  for (Index b = 0; b < g.batch; ++b) {
    cols.noalias() = kernels.matrix(g.cout, kk).transpose() * x.matrix(g.batch * g.cout, ncol)
                                                                  .middleRows(b * g.cout, g.cout);
    col2im(cols.data(), g, out.data() + b * g.cin * plane);
    if (has_bias) {
      MatMap<S>(out.data() + b * g.cin * plane, g.cin, plane).colwise() +=
          bias.matrix(g.cin, 1).col(0);
    }
  }
  return detail::make_result<S>(
      Shape{g.batch, g.cin, g.h, g.w}, std::move(out), {&x, &kernels, &bias},
      [xn = x.node(), wn = kernels.node(), bn = has_bias ? bias.node() : nullptr, g, kk, ncol,
       plane](TensorNode<S>& o) {
        RowMatrix<S> dcols(kk, ncol);
        ConstMatMap<S> W(wn->value.data(), g.cout, kk);
        for (Index b = 0; b < g.batch; ++b) {
          im2col(o.grad.data() + b * g.cin * plane, g, dcols.data());
          if (xn->requires_grad) {
            grad_mat(*xn, g.batch * g.cout, ncol).middleRows(b * g.cout, g.cout).noalias() +=
                W * dcols;
          }
          if (wn->requires_grad) {
            grad_mat(*wn, g.cout, kk).noalias() +=
                ConstMatMap<S>(xn->value.data() + b * g.cout * ncol, g.cout, ncol) *
                dcols.transpose();
          }
          if (bn && bn->requires_grad) {
            grad_mat(*bn, g.cin, 1) +=
                ConstMatMap<S>(o.grad.data() + b * g.cin * plane, g.cin, plane).rowwise().sum();
          }
        }
      });
}

#define FSSC_INSTANTIATE_OPS(S)                                                              \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> scale(const Tensor<S>&, S);                                             \
  template Tensor<S> gelu(const Tensor<S>&);                                                 \
  template Tensor<S> sigmoid(const Tensor<S>&);                                              \
  template Tensor<S> matmul(const Tensor<S>&, const Tensor<S>&, bool, bool);                 \
  template Tensor<S> linear(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);           \
  template Tensor<S> softmax(const Tensor<S>&, Index);                                       \
  template Tensor<S> layer_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, S);    \
  template Tensor<S> reshape(const Tensor<S>&, Shape);                                       \
  template Tensor<S> permute(const Tensor<S>&, const std::vector<Index>&);                   \
  template Tensor<S> gather(const Tensor<S>&, Index, const std::vector<Index>&);             \
  template Tensor<S> sum(const Tensor<S>&);                                                  \
  template Tensor<S> mean(const Tensor<S>&);                                                 \
  template Tensor<S> mse_loss(const Tensor<S>&, const Tensor<S>&);                           \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, Index);    \
  template Tensor<S> conv2d_transposed(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, \
                                       Index);

FSSC_INSTANTIATE_OPS(float)
FSSC_INSTANTIATE_OPS(double)

}  // namespace fssc
