#include "flairsyn/nn_ops.hpp"

#include <Eigen/Core>

#include <cmath>
#include <stdexcept>

namespace flairsyn::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ColMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using MapRow = Eigen::Map<RowMat>;
using MapRowC = Eigen::Map<const RowMat>;
using MapCol = Eigen::Map<ColMat>;
using MapColC = Eigen::Map<const ColMat>;
using StridedRow = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using StridedRowC = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// One convolution geometry: a "source" grid of size (D,H,W) sampled with a
// k/stride/pad window at every point of a "grid" of size (OD,OH,OW).
struct Geom {
  int64_t C;  // source channels
  int64_t D, H, W;
  int64_t OD, OH, OW;
  int64_t k, stride, pad;

  int64_t rows() const { return C * k * k * k; }
  int64_t grid() const { return OD * OH * OW; }
  int64_t src_spatial() const { return D * H * W; }
};

// Column-major patch matrix col[r, p] for grid points p in [p0, p1).
// r enumerates (c, kd, kh, kw).
void im2col(const double* src, const Geom& g, int64_t p0, int64_t p1, double* col) {
  const int64_t R = g.rows();
  const int64_t HW = g.H * g.W;
  for (int64_t p = p0; p < p1; ++p) {
    double* out = col + (p - p0) * R;
    const int64_t od = p / (g.OH * g.OW);
    const int64_t oh = (p / g.OW) % g.OH;
    const int64_t ow = p % g.OW;
    const int64_t d0 = od * g.stride - g.pad;
    const int64_t h0 = oh * g.stride - g.pad;
    const int64_t w0 = ow * g.stride - g.pad;
    int64_t r = 0;
    for (int64_t c = 0; c < g.C; ++c) {
      const double* sc = src + c * g.src_spatial();
      for (int64_t kd = 0; kd < g.k; ++kd) {
        const int64_t d = d0 + kd;
        const bool dok = d >= 0 && d < g.D;
        for (int64_t kh = 0; kh < g.k; ++kh) {
          const int64_t h = h0 + kh;
          if (!dok || h < 0 || h >= g.H) {
            for (int64_t kw = 0; kw < g.k; ++kw) out[r++] = 0.0;
            continue;
          }
          const double* row = sc + d * HW + h * g.W;
          for (int64_t kw = 0; kw < g.k; ++kw) {
            const int64_t w = w0 + kw;
            out[r++] = (w >= 0 && w < g.W) ? row[w] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add of a patch matrix back onto the source grid (adjoint of im2col).
void col2im_add(const double* col, const Geom& g, int64_t p0, int64_t p1, double* dst) {
  const int64_t R = g.rows();
  const int64_t HW = g.H * g.W;
  for (int64_t p = p0; p < p1; ++p) {
    const double* in = col + (p - p0) * R;
    const int64_t od = p / (g.OH * g.OW);
    const int64_t oh = (p / g.OW) % g.OH;
    const int64_t ow = p % g.OW;
    const int64_t d0 = od * g.stride - g.pad;
    const int64_t h0 = oh * g.stride - g.pad;
    const int64_t w0 = ow * g.stride - g.pad;
    int64_t r = 0;
    for (int64_t c = 0; c < g.C; ++c) {
      double* sc = dst + c * g.src_spatial();
      for (int64_t kd = 0; kd < g.k; ++kd) {
        const int64_t d = d0 + kd;
        const bool dok = d >= 0 && d < g.D;
        for (int64_t kh = 0; kh < g.k; ++kh) {
          const int64_t h = h0 + kh;
          if (!dok || h < 0 || h >= g.H) {
            r += g.k;
            continue;
          }
          double* row = sc + d * HW + h * g.W;
          for (int64_t kw = 0; kw < g.k; ++kw) {
            const int64_t w = w0 + kw;
            if (w >= 0 && w < g.W) row[w] += in[r];
            ++r;
          }
        }
      }
    }
  }
}

// Chunk the grid so the patch matrix stays below ~64 MB.
int64_t chunk_cols(int64_t rows) {
  const int64_t budget = (64LL << 20) / 8;
  return std::max<int64_t>(1, budget / std::max<int64_t>(1, rows));
}

void expect_5d(const Var& x, const char* what) {
  if (x->value.ndim() != 5) throw std::invalid_argument(std::string(what) + ": expected 5-D [N,C,D,H,W] tensor, got " + shape_str(x->value.shape()));
}

}  // namespace

int64_t conv_out_size(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  int64_t v = in + 2 * pad - k;
  if (v < 0 || stride < 1) throw std::invalid_argument("conv3d: kernel larger than padded input");
  return v / stride + 1;
}

int64_t tconv_out_size(int64_t in, int64_t k, int64_t stride, int64_t pad) {
  int64_t v = (in - 1) * stride - 2 * pad + k;
  if (v < 1) throw std::invalid_argument("conv_transpose3d: degenerate output size");
  return v;
}

Var conv3d(const Var& x, const Var& w, const Var& b, int64_t stride, int64_t pad) {
  expect_5d(x, "conv3d input");
  if (w->value.ndim() != 5) throw std::invalid_argument("conv3d: weight must be [Cout,Cin,k,k,k]");
  const int64_t N = x->value.dim(0), Cin = x->value.dim(1);
  const int64_t D = x->value.dim(2), H = x->value.dim(3), W = x->value.dim(4);
  const int64_t Cout = w->value.dim(0), k = w->value.dim(2);
  if (w->value.dim(1) != Cin) throw std::invalid_argument("conv3d: channel mismatch");
  if (w->value.dim(3) != k || w->value.dim(4) != k) throw std::invalid_argument("conv3d: kernel must be cubic");
  if (b && b->value.numel() != Cout) throw std::invalid_argument("conv3d: bias size mismatch");

  Geom g{Cin, D, H, W, conv_out_size(D, k, stride, pad), conv_out_size(H, k, stride, pad), conv_out_size(W, k, stride, pad), k, stride, pad};
  const int64_t P = g.grid(), R = g.rows();

  Tensor out({N, Cout, g.OD, g.OH, g.OW});
  std::vector<double> col;
  const int64_t chunk = chunk_cols(R);
  col.resize(static_cast<size_t>(R * std::min(chunk, P)));
  MapRowC wm(w->value.data(), Cout, R);
  for (int64_t n = 0; n < N; ++n) {
    const double* xp = x->value.data() + n * Cin * g.src_spatial();
    double* op = out.data() + n * Cout * P;
    for (int64_t p0 = 0; p0 < P; p0 += chunk) {
      const int64_t p1 = std::min(P, p0 + chunk);
      im2col(xp, g, p0, p1, col.data());
      MapColC cm(col.data(), R, p1 - p0);
      StridedRow om(op + p0, Cout, p1 - p0, Eigen::OuterStride<>(P));
      om.noalias() = wm * cm;
    }
    if (b) {
      for (int64_t c = 0; c < Cout; ++c) {
        const double bias = b->value[c];
        double* oc = op + c * P;
        for (int64_t p = 0; p < P; ++p) oc[p] += bias;
      }
    }
  }

  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), std::move(parents), [x, w, b, g, stride, pad](Variable& self) {
    const int64_t N = x->value.dim(0);
    const int64_t Cout = w->value.dim(0);
    const int64_t P = g.grid(), R = g.rows();
    const int64_t chunk = chunk_cols(R);
    std::vector<double> col(static_cast<size_t>(R * std::min(chunk, P)));
    if (w->grad_needed) w->ensure_grad();
    if (x->grad_needed) x->ensure_grad();
    MapRowC wm(w->value.data(), Cout, R);
    for (int64_t n = 0; n < N; ++n) {
      const double* gyp = self.grad.data() + n * Cout * P;
      for (int64_t p0 = 0; p0 < P; p0 += chunk) {
        const int64_t p1 = std::min(P, p0 + chunk);
        StridedRowC gym(gyp + p0, Cout, p1 - p0, Eigen::OuterStride<>(P));
        if (w->grad_needed) {
          im2col(x->value.data() + n * g.C * g.src_spatial(), g, p0, p1, col.data());
          MapColC cm(col.data(), R, p1 - p0);
          MapRow gwm(w->grad.data(), Cout, R);
          gwm.noalias() += gym * cm.transpose();
        }
        if (x->grad_needed) {
          MapCol cm(col.data(), R, p1 - p0);
          cm.noalias() = wm.transpose() * gym;
          col2im_add(col.data(), g, p0, p1, x->grad.data() + n * g.C * g.src_spatial());
        }
      }
      if (b && b->grad_needed) {
        b->ensure_grad();
        for (int64_t c = 0; c < Cout; ++c) {
          double acc = 0.0;
          const double* gc = gyp + c * P;
          for (int64_t p = 0; p < P; ++p) acc += gc[p];
          b->grad[c] += acc;
        }
      }
    }
  });
}

Var conv_transpose3d(const Var& x, const Var& w, const Var& b, int64_t stride, int64_t pad) {
  expect_5d(x, "conv_transpose3d input");
  if (w->value.ndim() != 5) throw std::invalid_argument("conv_transpose3d: weight must be [Cin,Cout,k,k,k]");
  const int64_t N = x->value.dim(0), Cin = x->value.dim(1);
  const int64_t D = x->value.dim(2), H = x->value.dim(3), W = x->value.dim(4);
  const int64_t Cout = w->value.dim(1), k = w->value.dim(2);
  if (w->value.dim(0) != Cin) throw std::invalid_argument("conv_transpose3d: channel mismatch");
  if (b && b->value.numel() != Cout) throw std::invalid_argument("conv_transpose3d: bias size mismatch");
  const int64_t OD = tconv_out_size(D, k, stride, pad);
  const int64_t OH = tconv_out_size(H, k, stride, pad);
  const int64_t OW = tconv_out_size(W, k, stride, pad);

  // Source grid is the (bigger) output; the input voxels form the conv grid.
  Geom g{Cout, OD, OH, OW, D, H, W, k, stride, pad};
  const int64_t P = g.grid();         // input voxel count
  const int64_t R = g.rows();         // Cout * k^3
  const int64_t Pout = OD * OH * OW;  // output voxel count

  Tensor out({N, Cout, OD, OH, OW});
  const int64_t chunk = chunk_cols(R);
  std::vector<double> col(static_cast<size_t>(R * std::min(chunk, P)));
  MapRowC wm(w->value.data(), Cin, R);
  for (int64_t n = 0; n < N; ++n) {
    const double* xp = x->value.data() + n * Cin * P;
    double* op = out.data() + n * Cout * Pout;
    for (int64_t p0 = 0; p0 < P; p0 += chunk) {
      const int64_t p1 = std::min(P, p0 + chunk);
      StridedRowC xm(xp + p0, Cin, p1 - p0, Eigen::OuterStride<>(P));
      MapCol cm(col.data(), R, p1 - p0);
      cm.noalias() = wm.transpose() * xm;
      col2im_add(col.data(), g, p0, p1, op);
    }
    if (b) {
      for (int64_t c = 0; c < Cout; ++c) {
        const double bias = b->value[c];
        double* oc = op + c * Pout;
        for (int64_t p = 0; p < Pout; ++p) oc[p] += bias;
      }
    }
  }

  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), std::move(parents), [x, w, b, g](Variable& self) {
    const int64_t N = x->value.dim(0), Cin = x->value.dim(1);
    const int64_t P = g.grid(), R = g.rows();
    const int64_t Pout = g.src_spatial();
    const int64_t Cout = g.C;
    const int64_t chunk = chunk_cols(R);
    std::vector<double> col(static_cast<size_t>(R * std::min(chunk, P)));
    if (w->grad_needed) w->ensure_grad();
    if (x->grad_needed) x->ensure_grad();
    MapRowC wm(w->value.data(), Cin, R);
    for (int64_t n = 0; n < N; ++n) {
      const double* gyp = self.grad.data() + n * Cout * Pout;
      for (int64_t p0 = 0; p0 < P; p0 += chunk) {
        const int64_t p1 = std::min(P, p0 + chunk);
        im2col(gyp, g, p0, p1, col.data());
        MapColC cm(col.data(), R, p1 - p0);
        if (x->grad_needed) {
          StridedRow gxm(x->grad.data() + n * Cin * P + p0, Cin, p1 - p0, Eigen::OuterStride<>(P));
          gxm.noalias() += wm * cm;
        }
        if (w->grad_needed) {
          StridedRowC xm(x->value.data() + n * Cin * P + p0, Cin, p1 - p0, Eigen::OuterStride<>(P));
          MapRow gwm(w->grad.data(), Cin, R);
          gwm.noalias() += xm * cm.transpose();
        }
      }
      if (b && b->grad_needed) {
        b->ensure_grad();
        for (int64_t c = 0; c < Cout; ++c) {
          double acc = 0.0;
          const double* gc = gyp + c * Pout;
          for (int64_t p = 0; p < Pout; ++p) acc += gc[p];
          b->grad[c] += acc;
        }
      }
    }
  });
}

Var batch_norm3d(const Var& x, const Var& gamma, const Var& beta, Tensor& running_mean, Tensor& running_var,
                 bool training, double momentum, double eps) {
  expect_5d(x, "batch_norm3d");
  const int64_t N = x->value.dim(0), C = x->value.dim(1);
  const int64_t S = x->value.dim(2) * x->value.dim(3) * x->value.dim(4);
  if (gamma->value.numel() != C || beta->value.numel() != C) throw std::invalid_argument("batch_norm3d: affine size mismatch");
  if (running_mean.numel() != C || running_var.numel() != C) throw std::invalid_argument("batch_norm3d: running buffer size mismatch");
  const int64_t M = N * S;

  Tensor mean({C}), invstd({C});
  if (training) {
    for (int64_t c = 0; c < C; ++c) {
      double mu = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const double* p = x->value.data() + (n * C + c) * S;
        for (int64_t i = 0; i < S; ++i) mu += p[i];
      }
      mu /= static_cast<double>(M);
      double var = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const double* p = x->value.data() + (n * C + c) * S;
        for (int64_t i = 0; i < S; ++i) {
          const double d = p[i] - mu;
          var += d * d;
        }
      }
      var /= static_cast<double>(M);
      mean[c] = mu;
      invstd[c] = 1.0 / std::sqrt(var + eps);
      const double unbiased = M > 1 ? var * static_cast<double>(M) / static_cast<double>(M - 1) : var;
      running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mu;
      running_var[c] = (1.0 - momentum) * running_var[c] + momentum * unbiased;
    }
  } else {
    for (int64_t c = 0; c < C; ++c) {
      mean[c] = running_mean[c];
      invstd[c] = 1.0 / std::sqrt(running_var[c] + eps);
    }
  }

  Tensor out(x->value.shape());
  for (int64_t n = 0; n < N; ++n) {
    for (int64_t c = 0; c < C; ++c) {
      const double* p = x->value.data() + (n * C + c) * S;
      double* o = out.data() + (n * C + c) * S;
      const double g = gamma->value[c], bta = beta->value[c], mu = mean[c], is = invstd[c];
      for (int64_t i = 0; i < S; ++i) o[i] = g * (p[i] - mu) * is + bta;
    }
  }

  return make_node(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, mean, invstd, training, N, C, S, M](Variable& self) {
    for (int64_t c = 0; c < C; ++c) {
      const double mu = mean[c], is = invstd[c], g = gamma->value[c];
      double sum_gy = 0.0, sum_gy_xhat = 0.0;
      for (int64_t n = 0; n < N; ++n) {
        const double* gy = self.grad.data() + (n * C + c) * S;
        const double* xv = x->value.data() + (n * C + c) * S;
        for (int64_t i = 0; i < S; ++i) {
          sum_gy += gy[i];
          sum_gy_xhat += gy[i] * (xv[i] - mu) * is;
        }
      }
      if (gamma->grad_needed) {
        gamma->ensure_grad();
        gamma->grad[c] += sum_gy_xhat;
      }
      if (beta->grad_needed) {
        beta->ensure_grad();
        beta->grad[c] += sum_gy;
      }
      if (x->grad_needed) {
        x->ensure_grad();
        const double inv_m = 1.0 / static_cast<double>(M);
        for (int64_t n = 0; n < N; ++n) {
          const double* gy = self.grad.data() + (n * C + c) * S;
          const double* xv = x->value.data() + (n * C + c) * S;
          double* gx = x->grad.data() + (n * C + c) * S;
          for (int64_t i = 0; i < S; ++i) {
            if (training) {
              const double xhat = (xv[i] - mu) * is;
              gx[i] += g * is * (gy[i] - sum_gy * inv_m - xhat * sum_gy_xhat * inv_m);
            } else {
              gx[i] += g * is * gy[i];
            }
          }
        }
      }
    }
  });
}

Var leaky_relu(const Var& x, double slope) {
  Tensor out(x->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) {
    const double v = x->value[i];
    out[i] = v >= 0.0 ? v : slope * v;
  }
  return make_node(std::move(out), {x}, [x, slope](Variable& self) {
    if (!x->grad_needed) return;
    Tensor g(self.grad.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * (x->value[i] >= 0.0 ? 1.0 : slope);
    x->accumulate(g);
  });
}

Var tanh_op(const Var& x) {
  Tensor out(x->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(x->value[i]);
  return make_node(std::move(out), {x}, [x](Variable& self) {
    if (!x->grad_needed) return;
    Tensor g(self.grad.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * (1.0 - self.value[i] * self.value[i]);
    x->accumulate(g);
  });
}

Var sigmoid(const Var& x) {
  Tensor out(x->value.shape());
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = 1.0 / (1.0 + std::exp(-x->value[i]));
  return make_node(std::move(out), {x}, [x](Variable& self) {
    if (!x->grad_needed) return;
    Tensor g(self.grad.shape());
    for (int64_t i = 0; i < g.numel(); ++i) g[i] = self.grad[i] * self.value[i] * (1.0 - self.value[i]);
    x->accumulate(g);
  });
}

Var concat_channels(const Var& a, const Var& b) {
  expect_5d(a, "concat_channels");
  expect_5d(b, "concat_channels");
  const auto& sa = a->value.shape();
  const auto& sb = b->value.shape();
  if (sa[0] != sb[0] || sa[2] != sb[2] || sa[3] != sb[3] || sa[4] != sb[4])
    throw std::invalid_argument("concat_channels: spatial/batch shape mismatch " + shape_str(sa) + " vs " + shape_str(sb));
  if (sa[1] == 0 || sb[1] == 0) throw std::invalid_argument("concat_channels: zero-channel input");
  const int64_t N = sa[0], Ca = sa[1], Cb = sb[1], S = sa[2] * sa[3] * sa[4];
  Tensor out({N, Ca + Cb, sa[2], sa[3], sa[4]});
  for (int64_t n = 0; n < N; ++n) {
    std::copy_n(a->value.data() + n * Ca * S, Ca * S, out.data() + n * (Ca + Cb) * S);
    std::copy_n(b->value.data() + n * Cb * S, Cb * S, out.data() + (n * (Ca + Cb) + Ca) * S);
  }
  return make_node(std::move(out), {a, b}, [a, b, N, Ca, Cb, S](Variable& self) {
    if (a->grad_needed) {
      a->ensure_grad();
      for (int64_t n = 0; n < N; ++n) {
        const double* g = self.grad.data() + n * (Ca + Cb) * S;
        double* ga = a->grad.data() + n * Ca * S;
        for (int64_t i = 0; i < Ca * S; ++i) ga[i] += g[i];
      }
    }
    if (b->grad_needed) {
      b->ensure_grad();
      for (int64_t n = 0; n < N; ++n) {
        const double* g = self.grad.data() + (n * (Ca + Cb) + Ca) * S;
        double* gb = b->grad.data() + n * Cb * S;
        for (int64_t i = 0; i < Cb * S; ++i) gb[i] += g[i];
      }
    }
  });
}

Var stack_batch(const std::vector<Var>& items) {
  if (items.empty()) throw std::invalid_argument("stack_batch: no items");
  const auto& s0 = items[0]->value.shape();
  if (s0.empty()) throw std::invalid_argument("stack_batch: scalar items");
  int64_t total = 0;
  for (const auto& it : items) {
    if (it->value.shape() != s0) throw std::invalid_argument("stack_batch: item shape mismatch");
    total += s0[0];
  }
  std::vector<int64_t> out_shape = s0;
  out_shape[0] = total;
  const int64_t item_numel = items[0]->value.numel();
  Tensor out(out_shape);
  for (size_t i = 0; i < items.size(); ++i)
    std::copy_n(items[i]->value.data(), item_numel, out.data() + static_cast<int64_t>(i) * item_numel);
  std::vector<Var> parents(items.begin(), items.end());
  return make_node(std::move(out), parents, [items, item_numel](Variable& self) {
    for (size_t i = 0; i < items.size(); ++i) {
      if (!items[i]->grad_needed) continue;
      items[i]->ensure_grad();
      const double* g = self.grad.data() + static_cast<int64_t>(i) * item_numel;
      double* gi = items[i]->grad.data();
      for (int64_t j = 0; j < item_numel; ++j) gi[j] += g[j];
    }
  });
}

Var crop_spatial(const Var& x, std::array<int64_t, 3> start, std::array<int64_t, 3> size) {
  expect_5d(x, "crop_spatial");
  const auto& s = x->value.shape();
  for (int i = 0; i < 3; ++i) {
    if (start[i] < 0 || size[i] < 1 || start[i] + size[i] > s[2 + i])
      throw std::invalid_argument("crop_spatial: window out of bounds");
  }
  const int64_t N = s[0], C = s[1];
  Tensor out({N, C, size[0], size[1], size[2]});
  const int64_t HW = s[3] * s[4];
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const double* src = x->value.data() + (n * C + c) * s[2] * HW;
      double* dst = out.data() + (n * C + c) * size[0] * size[1] * size[2];
      for (int64_t d = 0; d < size[0]; ++d)
        for (int64_t h = 0; h < size[1]; ++h) {
          const double* row = src + (start[0] + d) * HW + (start[1] + h) * s[4] + start[2];
          std::copy_n(row, size[2], dst + (d * size[1] + h) * size[2]);
        }
    }
  return make_node(std::move(out), {x}, [x, start, size](Variable& self) {
    if (!x->grad_needed) return;
    x->ensure_grad();
    const auto& s = x->value.shape();
    const int64_t N = s[0], C = s[1], HW = s[3] * s[4];
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c) {
        double* gx = x->grad.data() + (n * C + c) * s[2] * HW;
        const double* g = self.grad.data() + (n * C + c) * size[0] * size[1] * size[2];
        for (int64_t d = 0; d < size[0]; ++d)
          for (int64_t h = 0; h < size[1]; ++h) {
            double* row = gx + (start[0] + d) * HW + (start[1] + h) * s[4] + start[2];
            const double* grow = g + (d * size[1] + h) * size[2];
            for (int64_t w = 0; w < size[2]; ++w) row[w] += grow[w];
          }
      }
  });
}

Var global_avg_pool(const Var& x) {
  expect_5d(x, "global_avg_pool");
  const auto& s = x->value.shape();
  const int64_t N = s[0], C = s[1], S = s[2] * s[3] * s[4];
  Tensor out({N, C});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t c = 0; c < C; ++c) {
      const double* p = x->value.data() + (n * C + c) * S;
      double acc = 0.0;
      for (int64_t i = 0; i < S; ++i) acc += p[i];
      out[n * C + c] = acc / static_cast<double>(S);
    }
  return make_node(std::move(out), {x}, [x, N, C, S](Variable& self) {
    if (!x->grad_needed) return;
    x->ensure_grad();
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < C; ++c) {
        const double gv = self.grad[n * C + c] / static_cast<double>(S);
        double* gx = x->grad.data() + (n * C + c) * S;
        for (int64_t i = 0; i < S; ++i) gx[i] += gv;
      }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  if (x->value.ndim() != 2 || w->value.ndim() != 2) throw std::invalid_argument("linear: expected 2-D input and weight");
  const int64_t N = x->value.dim(0), F = x->value.dim(1), K = w->value.dim(0);
  if (w->value.dim(1) != F) throw std::invalid_argument("linear: feature size mismatch");
  if (b && b->value.numel() != K) throw std::invalid_argument("linear: bias size mismatch");
  Tensor out({N, K});
  for (int64_t n = 0; n < N; ++n)
    for (int64_t k = 0; k < K; ++k) {
      double acc = b ? b->value[k] : 0.0;
      const double* xr = x->value.data() + n * F;
      const double* wr = w->value.data() + k * F;
      for (int64_t f = 0; f < F; ++f) acc += xr[f] * wr[f];
      out[n * K + k] = acc;
    }
  std::vector<Var> parents = b ? std::vector<Var>{x, w, b} : std::vector<Var>{x, w};
  return make_node(std::move(out), std::move(parents), [x, w, b, N, F, K](Variable& self) {
    for (int64_t n = 0; n < N; ++n) {
      const double* g = self.grad.data() + n * K;
      if (x->grad_needed) {
        x->ensure_grad();
        double* gx = x->grad.data() + n * F;
        for (int64_t k = 0; k < K; ++k) {
          const double* wr = w->value.data() + k * F;
          for (int64_t f = 0; f < F; ++f) gx[f] += g[k] * wr[f];
        }
      }
      if (w->grad_needed) {
        w->ensure_grad();
        const double* xr = x->value.data() + n * F;
        for (int64_t k = 0; k < K; ++k) {
          double* gw = w->grad.data() + k * F;
          for (int64_t f = 0; f < F; ++f) gw[f] += g[k] * xr[f];
        }
      }
      if (b && b->grad_needed) {
        b->ensure_grad();
        for (int64_t k = 0; k < K; ++k) b->grad[k] += g[k];
      }
    }
  });
}

Var softmax_rows(const Var& x) {
  if (x->value.ndim() != 2) throw std::invalid_argument("softmax_rows: expected [N,K]");
  const int64_t N = x->value.dim(0), K = x->value.dim(1);
  Tensor out({N, K});
  for (int64_t n = 0; n < N; ++n) {
    const double* xr = x->value.data() + n * K;
    double* o = out.data() + n * K;
    double mx = xr[0];
    for (int64_t k = 1; k < K; ++k) mx = std::max(mx, xr[k]);
    double z = 0.0;
    for (int64_t k = 0; k < K; ++k) {
      o[k] = std::exp(xr[k] - mx);
      z += o[k];
    }
    for (int64_t k = 0; k < K; ++k) o[k] /= z;
  }
  return make_node(std::move(out), {x}, [x, N, K](Variable& self) {
    if (!x->grad_needed) return;
    x->ensure_grad();
    for (int64_t n = 0; n < N; ++n) {
      const double* y = self.value.data() + n * K;
      const double* g = self.grad.data() + n * K;
      double dot = 0.0;
      for (int64_t k = 0; k < K; ++k) dot += g[k] * y[k];
      double* gx = x->grad.data() + n * K;
      for (int64_t k = 0; k < K; ++k) gx[k] += y[k] * (g[k] - dot);
    }
  });
}

Var cross_entropy_from_probs(const Var& probs, const std::vector<int>& labels) {
  if (probs->value.ndim() != 2) throw std::invalid_argument("cross_entropy_from_probs: expected [N,K]");
  const int64_t N = probs->value.dim(0), K = probs->value.dim(1);
  if (static_cast<int64_t>(labels.size()) != N) throw std::invalid_argument("cross_entropy_from_probs: label count mismatch");
  for (int c : labels)
    if (c < 0 || c >= K) throw std::invalid_argument("cross_entropy_from_probs: class index out of range: " + std::to_string(c));
  constexpr double kEps = 1e-12;
  Tensor out({1});
  double acc = 0.0;
  for (int64_t n = 0; n < N; ++n) acc -= std::log(std::max(probs->value[n * K + labels[n]], kEps));
  out[0] = acc / static_cast<double>(N);
  auto labels_copy = labels;
  return make_node(std::move(out), {probs}, [probs, labels_copy, N, K](Variable& self) {
    if (!probs->grad_needed) return;
    probs->ensure_grad();
    const double gv = self.grad[0] / static_cast<double>(N);
    for (int64_t n = 0; n < N; ++n) {
      const int64_t idx = n * K + labels_copy[n];
      probs->grad[idx] += -gv / std::max(probs->value[idx], 1e-12);
    }
  });
}

}  // namespace flairsyn::nn
