#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "jamlab/tensor.hpp"

namespace jamlab {

// Reverse-mode tape. Every operation appends one node holding the forward
// value; backward() seeds the scalar output with 1 and replays the record in
// reverse, accumulating into per-node gradient buffers. A tape is confined to
// a single training step on a single thread.
template <class S>
class Tape {
 public:
  using Var = int;
  using T = Tensor<S>;

  Var input(T value) { return push(std::move(value), true, {}, nullptr); }
  Var constant(T value) { return push(std::move(value), false, {}, nullptr); }

  const T& value(Var v) const { return nodes_[v].value; }
  const T& grad(Var v) const { return nodes_[v].grad; }
  std::size_t num_nodes() const { return nodes_.size(); }
  long warning_count() const { return warnings_; }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    check_same(a, b, "add");
    T out = nodes_[a].value;
    out.data += nodes_[b].value.data;
    return push(std::move(out), needs(a) || needs(b), {a, b}, [this](Node& n) {
      accum(n.inputs[0], n.grad.data);
      accum(n.inputs[1], n.grad.data);
    });
  }

  Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    T out = nodes_[a].value;
    out.data -= nodes_[b].value.data;
    return push(std::move(out), needs(a) || needs(b), {a, b}, [this](Node& n) {
      accum(n.inputs[0], n.grad.data);
      accum(n.inputs[1], -n.grad.data);
    });
  }

  Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    T out = nodes_[a].value;
    out.data = out.data.cwiseProduct(nodes_[b].value.data);
    return push(std::move(out), needs(a) || needs(b), {a, b}, [this](Node& n) {
      accum(n.inputs[0], n.grad.data.cwiseProduct(nodes_[n.inputs[1]].value.data));
      accum(n.inputs[1], n.grad.data.cwiseProduct(nodes_[n.inputs[0]].value.data));
    });
  }

  Var scale(Var a, S c) {
    T out = nodes_[a].value;
    out.data *= c;
    return push(std::move(out), needs(a), {a}, [this, c](Node& n) {
      accum(n.inputs[0], (n.grad.data * c).eval());
    });
  }

  Var add_scalar(Var a, S c) {
    T out = nodes_[a].value;
    out.data.array() += c;
    return push(std::move(out), needs(a), {a},
                [this](Node& n) { accum(n.inputs[0], n.grad.data); });
  }

  // elementwise multiply by a constant tensor (masking)
  Var cmul(Var a, const T& mask) {
    if (!nodes_[a].value.same_shape(mask))
      throw ShapeError("cmul: shape mismatch " + shape_str(nodes_[a].value.shape) +
                       " vs " + shape_str(mask.shape));
    T out = nodes_[a].value;
    out.data = out.data.cwiseProduct(mask.data);
    typename T::Buffer m = mask.data;
    return push(std::move(out), needs(a), {a}, [this, m](Node& n) {
      accum(n.inputs[0], n.grad.data.cwiseProduct(m));
    });
  }

  Var cadd(Var a, const T& c) {
    if (!nodes_[a].value.same_shape(c)) throw ShapeError("cadd: shape mismatch");
    T out = nodes_[a].value;
    out.data += c.data;
    return push(std::move(out), needs(a), {a},
                [this](Node& n) { accum(n.inputs[0], n.grad.data); });
  }

  Var exp(Var a) {
    T out = nodes_[a].value;
    out.data = out.data.array().exp().matrix();
    return push(std::move(out), needs(a), {a}, [this](Node& n) {
      accum(n.inputs[0], n.grad.data.cwiseProduct(n.value.data));
    });
  }

  Var log(Var a) {
    T out = nodes_[a].value;
    out.data = out.data.array().log().matrix();
    return push(std::move(out), needs(a), {a}, [this](Node& n) {
      accum(n.inputs[0], n.grad.data.cwiseQuotient(nodes_[n.inputs[0]].value.data));
    });
  }

  Var relu(Var a) {
    T out = nodes_[a].value;
    out.data = out.data.cwiseMax(S(0));
    return push(std::move(out), needs(a), {a}, [this](Node& n) {
      const auto& x = nodes_[n.inputs[0]].value.data;
      typename T::Buffer g = n.grad.data;
      for (long i = 0; i < g.size(); ++i)
        if (x[i] <= S(0)) g[i] = S(0);
      accum(n.inputs[0], g);
    });
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    const T& A = nodes_[a].value;
    const T& B = nodes_[b].value;
    if (A.ndim() != 2 || B.ndim() != 2 || A.shape[1] != B.shape[0])
      throw ShapeError("matmul: incompatible shapes " + shape_str(A.shape) + " x " +
                       shape_str(B.shape));
    T out({A.shape[0], B.shape[1]});
    out.mat().noalias() = A.mat() * B.mat();
    return push(std::move(out), needs(a) || needs(b), {a, b}, [this](Node& n) {
      auto G = n.grad_mat();
      auto& na = nodes_[n.inputs[0]];
      auto& nb = nodes_[n.inputs[1]];
      if (na.requires_grad) {
        ensure_grad(n.inputs[0]);
        na.grad_mat().noalias() += G * nb.value.mat().transpose();
      }
      if (nb.requires_grad) {
        ensure_grad(n.inputs[1]);
        nb.grad_mat().noalias() += na.value.mat().transpose() * G;
      }
    });
  }

  // A * B^T
  Var matmul_nt(Var a, Var b) {
    const T& A = nodes_[a].value;
    const T& B = nodes_[b].value;
    if (A.ndim() != 2 || B.ndim() != 2 || A.shape[1] != B.shape[1])
      throw ShapeError("matmul_nt: incompatible shapes " + shape_str(A.shape) +
                       " x " + shape_str(B.shape) + "^T");
    T out({A.shape[0], B.shape[0]});
    out.mat().noalias() = A.mat() * B.mat().transpose();
    return push(std::move(out), needs(a) || needs(b), {a, b}, [this](Node& n) {
      auto G = n.grad_mat();
      auto& na = nodes_[n.inputs[0]];
      auto& nb = nodes_[n.inputs[1]];
      if (na.requires_grad) {
        ensure_grad(n.inputs[0]);
        na.grad_mat().noalias() += G * nb.value.mat();
      }
      if (nb.requires_grad) {
        ensure_grad(n.inputs[1]);
        nb.grad_mat().noalias() += G.transpose() * na.value.mat();
      }
    });
  }

  // add a length-C bias to every row of an R x C matrix
  Var bias_add(Var m, Var b) {
    const T& M = nodes_[m].value;
    const T& B = nodes_[b].value;
    if (M.ndim() != 2 || B.ndim() != 1 || B.shape[0] != M.shape[1])
      throw ShapeError("bias_add: shapes " + shape_str(M.shape) + " + " +
                       shape_str(B.shape));
    T out = M;
    out.mat().rowwise() += B.data.transpose();
    return push(std::move(out), needs(m) || needs(b), {m, b}, [this](Node& n) {
      accum(n.inputs[0], n.grad.data);
      auto& nb = nodes_[n.inputs[1]];
      if (nb.requires_grad) {
        ensure_grad(n.inputs[1]);
        nb.grad.data += n.grad_mat().colwise().sum().transpose();
      }
    });
  }

  // ---- reductions ----

  Var row_sum(Var m) {
    const T& M = nodes_[m].value;
    if (M.ndim() != 2) throw ShapeError("row_sum: not 2-D");
    T out({M.shape[0]});
    out.data = M.mat().rowwise().sum();
    return push(std::move(out), needs(m), {m}, [this](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      ni.grad_mat().colwise() += n.grad.data;
    });
  }

  Var sum(Var a) {
    T out({1});
    out.data[0] = nodes_[a].value.data.sum();
    return push(std::move(out), needs(a), {a}, [this](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      ni.grad.data.array() += n.grad.data[0];
    });
  }

  Var mean(Var a) {
    const long n = nodes_[a].value.size();
    return scale(sum(a), S(1) / static_cast<S>(n));
  }

  Var reduce_max(Var a) {
    long arg = 0;
    nodes_[a].value.data.maxCoeff(&arg);
    T out({1});
    out.data[0] = nodes_[a].value.data[arg];
    return push(std::move(out), needs(a), {a}, [this, arg](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      ni.grad.data[arg] += n.grad.data[0];
    });
  }

  Var gather_rows(Var m, const std::vector<int>& idx) {
    const T& M = nodes_[m].value;
    if (M.ndim() != 2) throw ShapeError("gather_rows: not 2-D");
    const int C = M.shape[1];
    T out({static_cast<int>(idx.size()), C});
    for (std::size_t r = 0; r < idx.size(); ++r) {
      if (idx[r] < 0 || idx[r] >= M.shape[0]) throw ShapeError("gather_rows: index out of range");
      out.mat().row(static_cast<long>(r)) = M.mat().row(idx[r]);
    }
    return push(std::move(out), needs(m), {m}, [this, idx](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      for (std::size_t r = 0; r < idx.size(); ++r)
        ni.grad_mat().row(idx[r]) += n.grad_mat().row(static_cast<long>(r));
    });
  }

  // ---- softmax family ----

  Var softmax_rows(Var a) {
    const T& A = nodes_[a].value;
    if (A.ndim() != 2) throw ShapeError("softmax_rows: not 2-D");
    T out = A;
    auto M = out.mat();
    for (long r = 0; r < M.rows(); ++r) {
      auto row = M.row(r);
      row.array() -= row.maxCoeff();
      row = row.array().exp();
      row /= row.sum();
    }
    return push(std::move(out), needs(a), {a}, [this](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      auto P = n.value.mat();
      auto G = n.grad_mat();
      for (long r = 0; r < P.rows(); ++r) {
        S dot = P.row(r).dot(G.row(r));
        ni.grad_mat().row(r) +=
            (P.row(r).array() * (G.row(r).array() - dot)).matrix();
      }
    });
  }

  Var log_softmax_rows(Var a) {
    const T& A = nodes_[a].value;
    if (A.ndim() != 2) throw ShapeError("log_softmax_rows: not 2-D");
    T out = A;
    auto M = out.mat();
    for (long r = 0; r < M.rows(); ++r) {
      auto row = M.row(r);
      S mx = row.maxCoeff();
      S lse = std::log((row.array() - mx).exp().sum()) + mx;
      row.array() -= lse;
    }
    return push(std::move(out), needs(a), {a}, [this](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      auto LP = n.value.mat();
      auto G = n.grad_mat();
      for (long r = 0; r < LP.rows(); ++r) {
        S gsum = G.row(r).sum();
        ni.grad_mat().row(r) +=
            (G.row(r).array() - LP.row(r).array().exp() * gsum).matrix();
      }
    });
  }

  // each row divided by max(||row||, 1e-12); clamped rows bump a warning counter
  Var l2_normalize_rows(Var a) {
    const T& A = nodes_[a].value;
    if (A.ndim() != 2) throw ShapeError("l2_normalize_rows: not 2-D");
    T out = A;
    auto M = out.mat();
    std::vector<S> norms(M.rows());
    for (long r = 0; r < M.rows(); ++r) {
      S nrm = M.row(r).norm();
      if (nrm < S(1e-12)) {
        nrm = S(1e-12);
        ++warnings_;
      }
      norms[r] = nrm;
      M.row(r) /= nrm;
    }
    return push(std::move(out), needs(a), {a}, [this, norms](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      auto Y = n.value.mat();
      auto G = n.grad_mat();
      for (long r = 0; r < Y.rows(); ++r) {
        S dot = Y.row(r).dot(G.row(r));
        ni.grad_mat().row(r) +=
            ((G.row(r).array() - Y.row(r).array() * dot) / norms[r]).matrix();
      }
    });
  }

  // ---- spatial ops (NCHW) ----

  // 2-D convolution, stride 1. pad = k/2 gives 'same', pad = 0 gives 'valid'.
  Var conv2d(Var x, Var w, Var b, int pad) {
    const T& X = nodes_[x].value;
    const T& W = nodes_[w].value;
    const T& Bv = nodes_[b].value;
    if (X.ndim() != 4 || W.ndim() != 4)
      throw ShapeError("conv2d: expects 4-D input and weight");
    const int batch = X.shape[0], cin = X.shape[1], h = X.shape[2], wd = X.shape[3];
    const int cout = W.shape[0], k = W.shape[2];
    if (W.shape[1] != cin || W.shape[3] != k)
      throw ShapeError("conv2d: weight " + shape_str(W.shape) + " vs input " +
                       shape_str(X.shape));
    if (Bv.ndim() != 1 || Bv.shape[0] != cout) throw ShapeError("conv2d: bad bias");
    const int oh = h + 2 * pad - k + 1;
    const int ow = wd + 2 * pad - k + 1;
    if (oh <= 0 || ow <= 0) throw ShapeError("conv2d: output would be empty");

    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;  // col-major
    T out({batch, cout, oh, ow});
    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        Wmat(W.data.data(), cout, cin * k * k);
    Mat col(cin * k * k, oh * ow);
    for (int n = 0; n < batch; ++n) {
      im2col(X, n, k, pad, oh, ow, col);
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          O(out.data.data() + static_cast<long>(n) * cout * oh * ow, cout, oh * ow);
      O.noalias() = Wmat * col;
      O.colwise() += Bv.data;
    }
    const int kk = k, pd = pad;
    return push(std::move(out), needs(x) || needs(w) || needs(b), {x, w, b},
                [this, kk, pd](Node& n) { conv2d_backward(n, kk, pd); });
  }

  Var maxpool2x2(Var x) {
    const T& X = nodes_[x].value;
    if (X.ndim() != 4) throw ShapeError("maxpool2x2: expects 4-D input");
    const int batch = X.shape[0], c = X.shape[1], h = X.shape[2], w = X.shape[3];
    if (h % 2 || w % 2) throw ShapeError("maxpool2x2: spatial dims must be even");
    const int oh = h / 2, ow = w / 2;
    T out({batch, c, oh, ow});
    std::vector<long> argmax(static_cast<std::size_t>(out.size()));
    long oi = 0;
    for (int n = 0; n < batch; ++n)
      for (int ch = 0; ch < c; ++ch) {
        const long base = (static_cast<long>(n) * c + ch) * h * w;
        for (int y = 0; y < oh; ++y)
          for (int x2 = 0; x2 < ow; ++x2) {
            long i00 = base + (2 * y) * w + 2 * x2;
            long cand[4] = {i00, i00 + 1, i00 + w, i00 + w + 1};
            long best = cand[0];
            for (int q = 1; q < 4; ++q)
              if (X.data[cand[q]] > X.data[best]) best = cand[q];
            out.data[oi] = X.data[best];
            argmax[oi++] = best;
          }
      }
    return push(std::move(out), needs(x), {x}, [this, argmax](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      for (long i = 0; i < n.grad.size(); ++i) ni.grad.data[argmax[i]] += n.grad.data[i];
    });
  }

  Var global_avg_pool(Var x) {
    const T& X = nodes_[x].value;
    if (X.ndim() != 4) throw ShapeError("global_avg_pool: expects 4-D input");
    const int batch = X.shape[0], c = X.shape[1];
    const long hw = static_cast<long>(X.shape[2]) * X.shape[3];
    T out({batch, c});
    for (int n = 0; n < batch; ++n)
      for (int ch = 0; ch < c; ++ch)
        out.data[static_cast<long>(n) * c + ch] =
            X.data.segment((static_cast<long>(n) * c + ch) * hw, hw).sum() /
            static_cast<S>(hw);
    return push(std::move(out), needs(x), {x}, [this, hw](Node& n) {
      auto& ni = nodes_[n.inputs[0]];
      if (!ni.requires_grad) return;
      ensure_grad(n.inputs[0]);
      for (long i = 0; i < n.grad.size(); ++i)
        ni.grad.data.segment(i * hw, hw).array() += n.grad.data[i] / static_cast<S>(hw);
    });
  }

  // ---- backward ----

  void backward(Var out) {
    if (nodes_[out].value.size() != 1)
      throw ShapeError("backward: output must be scalar");
    for (auto& n : nodes_) n.grad = T();
    ensure_grad(out);
    nodes_[out].grad.data[0] = S(1);
    for (long i = out; i >= 0; --i) {
      Node& n = nodes_[i];
      if (n.backprop && n.grad.size() > 0) n.backprop(n);
    }
  }

 private:
  struct Node {
    T value;
    T grad;
    bool requires_grad = false;
    std::vector<Var> inputs;
    std::function<void(Node&)> backprop;

    typename T::MatMap grad_mat() {
      return typename T::MatMap(grad.data.data(), value.shape[0],
                                value.size() / value.shape[0]);
    }
  };

  std::vector<Node> nodes_;
  long warnings_ = 0;

  bool needs(Var v) const { return nodes_[v].requires_grad; }

  Var push(T value, bool requires_grad, std::vector<Var> inputs,
           std::function<void(Node&)> backprop) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.inputs = std::move(inputs);
    n.backprop = requires_grad ? std::move(backprop) : nullptr;
    nodes_.push_back(std::move(n));
    return static_cast<Var>(nodes_.size() - 1);
  }

  void ensure_grad(Var v) {
    if (nodes_[v].grad.size() == 0) nodes_[v].grad = T::zeros(nodes_[v].value.shape);
  }

  template <class Expr>
  void accum(Var v, const Expr& g) {
    if (!nodes_[v].requires_grad) return;
    ensure_grad(v);
    nodes_[v].grad.data += g;
  }

  void check_same(Var a, Var b, const char* op) {
    if (!nodes_[a].value.same_shape(nodes_[b].value))
      throw ShapeError(std::string(op) + ": shape mismatch " +
                       shape_str(nodes_[a].value.shape) + " vs " +
                       shape_str(nodes_[b].value.shape));
  }

  static void im2col(const T& X, int n, int k, int pad, int oh, int ow,
                     Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>& col) {
    const int cin = X.shape[1], h = X.shape[2], w = X.shape[3];
    col.setZero();
    for (int ci = 0; ci < cin; ++ci) {
      const long base = (static_cast<long>(n) * cin + ci) * h * w;
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const int r = (ci * k + ky) * k + kx;
          for (int y = 0; y < oh; ++y) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= h) continue;
            for (int x = 0; x < ow; ++x) {
              const int sx = x + kx - pad;
              if (sx < 0 || sx >= w) continue;
              col(r, static_cast<long>(y) * ow + x) = X.data[base + static_cast<long>(sy) * w + sx];
            }
          }
        }
    }
  }

  void conv2d_backward(Node& n, int k, int pad) {
    using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
    auto& nx = nodes_[n.inputs[0]];
    auto& nw = nodes_[n.inputs[1]];
    auto& nb = nodes_[n.inputs[2]];
    const T& X = nx.value;
    const T& W = nw.value;
    const int batch = X.shape[0], cin = X.shape[1], h = X.shape[2], wd = X.shape[3];
    const int cout = W.shape[0];
    const int oh = n.value.shape[2], ow = n.value.shape[3];

    if (nx.requires_grad) ensure_grad(n.inputs[0]);
    if (nw.requires_grad) ensure_grad(n.inputs[1]);
    if (nb.requires_grad) ensure_grad(n.inputs[2]);

    Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
        Wmat(W.data.data(), cout, cin * k * k);
    Mat col(cin * k * k, oh * ow);
    Mat dcol(cin * k * k, oh * ow);
    for (int nn = 0; nn < batch; ++nn) {
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
          G(n.grad.data.data() + static_cast<long>(nn) * cout * oh * ow, cout, oh * ow);
      if (nw.requires_grad) {
        im2col(X, nn, k, pad, oh, ow, col);
        Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            dW(nodes_[n.inputs[1]].grad.data.data(), cout, cin * k * k);
        dW.noalias() += G * col.transpose();
      }
      if (nb.requires_grad) nodes_[n.inputs[2]].grad.data += G.rowwise().sum();
      if (nx.requires_grad) {
        dcol.noalias() = Wmat.transpose() * G;
        // col2im scatter-add
        T& dX = nodes_[n.inputs[0]].grad;
        for (int ci = 0; ci < cin; ++ci) {
          const long base = (static_cast<long>(nn) * cin + ci) * h * wd;
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int r = (ci * k + ky) * k + kx;
              for (int y = 0; y < oh; ++y) {
                const int sy = y + ky - pad;
                if (sy < 0 || sy >= h) continue;
                for (int x = 0; x < ow; ++x) {
                  const int sx = x + kx - pad;
                  if (sx < 0 || sx >= wd) continue;
                  dX.data[base + static_cast<long>(sy) * wd + sx] +=
                      dcol(r, static_cast<long>(y) * ow + x);
                }
              }
            }
        }
      }
    }
  }
};

}  // namespace jamlab
