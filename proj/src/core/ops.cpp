// SPDX-License-Identifier: Apache-2.0
#include "core/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "core/errors.hpp"

namespace scriptgen {
namespace ops {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace {

bool any_needs_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.needs_grad()) return true;
    return false;
}

void accumulate(const Tensor& t, const double* g, int64_t n) {
    if (!t.needs_grad()) return;
    auto& dst = t.grad_mutable();
    for (int64_t i = 0; i < n; ++i) dst[static_cast<size_t>(i)] += g[static_cast<size_t>(i)];
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

} // namespace

Tensor make_op_node(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                    std::function<void(TensorImpl&)> backward) {
    Tensor out = Tensor::from_data(std::move(shape), std::move(data));
    if (grad_enabled() && any_needs_grad(parents)) {
        out.impl()->parents = std::move(parents);
        out.impl()->backward_fn = std::move(backward);
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] += b.at(i);
    return make_op_node(a.shape(), std::move(out), {a, b}, [a, b, n](TensorImpl& self) mutable {
        accumulate(a, self.grad.data(), n);
        accumulate(b, self.grad.data(), n);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] -= b.at(i);
    return make_op_node(a.shape(), std::move(out), {a, b}, [a, b, n](TensorImpl& self) mutable {
        accumulate(a, self.grad.data(), n);
        if (b.needs_grad()) {
            auto& dst = b.grad_mutable();
            for (int64_t i = 0; i < n; ++i) dst[static_cast<size_t>(i)] -= self.grad[static_cast<size_t>(i)];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] *= b.at(i);
    return make_op_node(a.shape(), std::move(out), {a, b}, [a, b, n](TensorImpl& self) mutable {
        if (a.needs_grad()) {
            auto& dst = a.grad_mutable();
            for (int64_t i = 0; i < n; ++i)
                dst[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i)] * b.at(i);
        }
        if (b.needs_grad()) {
            auto& dst = b.grad_mutable();
            for (int64_t i = 0; i < n; ++i)
                dst[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i)] * a.at(i);
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (double& v : out) v *= s;
    return make_op_node(a.shape(), std::move(out), {a}, [a, s, n](TensorImpl& self) mutable {
        if (!a.needs_grad()) return;
        auto& dst = a.grad_mutable();
        for (int64_t i = 0; i < n; ++i) dst[static_cast<size_t>(i)] += s * self.grad[static_cast<size_t>(i)];
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (double& v : out) v += s;
    return make_op_node(a.shape(), std::move(out), {a},
                        [a, n](TensorImpl& self) mutable { accumulate(a, self.grad.data(), n); });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    return make_op_node(a.shape(), std::move(out), {a}, [a, n](TensorImpl& self) mutable {
        if (!a.needs_grad()) return;
        auto& dst = a.grad_mutable();
        for (int64_t i = 0; i < n; ++i)
            if (a.at(i) > 0.0) dst[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i)];
    });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (double& v : out) v = v > 0.0 ? v : slope * v;
    return make_op_node(a.shape(), std::move(out), {a}, [a, slope, n](TensorImpl& self) mutable {
        if (!a.needs_grad()) return;
        auto& dst = a.grad_mutable();
        for (int64_t i = 0; i < n; ++i)
            dst[static_cast<size_t>(i)] += (a.at(i) > 0.0 ? 1.0 : slope) * self.grad[static_cast<size_t>(i)];
    });
}

Tensor tanh_op(const Tensor& a) {
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (double& v : out) v = std::tanh(v);
    // Backward reads the saved outputs (derivative 1 - tanh^2). Saved as a
    // copy, not as the output node, to avoid an ownership cycle.
    std::shared_ptr<std::vector<double>> saved;
    if (grad_enabled() && a.needs_grad()) saved = std::make_shared<std::vector<double>>(out);
    return make_op_node(a.shape(), std::move(out), {a}, [a, saved, n](TensorImpl& self) mutable {
        if (!a.needs_grad()) return;
        auto& dst = a.grad_mutable();
        for (int64_t i = 0; i < n; ++i) {
            const double y = (*saved)[static_cast<size_t>(i)];
            dst[static_cast<size_t>(i)] += (1.0 - y * y) * self.grad[static_cast<size_t>(i)];
        }
    });
}

Tensor gelu(const Tensor& a) {
    static constexpr double kInvSqrt2 = 0.7071067811865475244;
    static constexpr double kInvSqrt2Pi = 0.3989422804014326779;
    const int64_t n = a.numel();
    std::vector<double> out(a.data());
    for (double& v : out) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    return make_op_node(a.shape(), std::move(out), {a}, [a, n](TensorImpl& self) mutable {
        if (!a.needs_grad()) return;
        auto& dst = a.grad_mutable();
        for (int64_t i = 0; i < n; ++i) {
            const double x = a.at(i);
            const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
            dst[static_cast<size_t>(i)] += (cdf + x * pdf) * self.grad[static_cast<size_t>(i)];
        }
    });
}

Tensor scale_rows(const Tensor& x, const Tensor& s) {
    if (x.ndim() < 1 || static_cast<size_t>(s.ndim()) != x.shape().size() - 1)
        throw ShapeError("scale_rows: scaler must match x without the last axis");
    for (int i = 0; i + 1 < x.ndim(); ++i)
        if (x.dim(i) != s.dim(i)) throw ShapeError("scale_rows: prefix shape mismatch");
    const int64_t d = x.dim(-1);
    const int64_t rows = x.numel() / d;
    std::vector<double> out(x.data());
    for (int64_t r = 0; r < rows; ++r) {
        const double f = s.at(r);
        for (int64_t c = 0; c < d; ++c) out[static_cast<size_t>(r * d + c)] *= f;
    }
    return make_op_node(x.shape(), std::move(out), {x, s}, [x, s, rows, d](TensorImpl& self) mutable {
        if (x.needs_grad()) {
            auto& dst = x.grad_mutable();
            for (int64_t r = 0; r < rows; ++r) {
                const double f = s.at(r);
                for (int64_t c = 0; c < d; ++c)
                    dst[static_cast<size_t>(r * d + c)] += f * self.grad[static_cast<size_t>(r * d + c)];
            }
        }
        if (s.needs_grad()) {
            auto& dst = s.grad_mutable();
            for (int64_t r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (int64_t c = 0; c < d; ++c)
                    acc += x.at(r * d + c) * self.grad[static_cast<size_t>(r * d + c)];
                dst[static_cast<size_t>(r)] += acc;
            }
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<double> out(static_cast<size_t>(m * n));
    {
        CMapMat A(a.data().data(), m, k), B(b.data().data(), k, n);
        MapMat C(out.data(), m, n);
        C.noalias() = A * B;
    }
    return make_op_node({m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorImpl& self) mutable {
        CMapMat G(self.grad.data(), m, n);
        if (a.needs_grad()) {
            CMapMat B(b.data().data(), k, n);
            MapMat dA(a.grad_mutable().data(), m, k);
            dA.noalias() += G * B.transpose();
        }
        if (b.needs_grad()) {
            CMapMat A(a.data().data(), m, k);
            MapMat dB(b.grad_mutable().data(), k, n);
            dB.noalias() += A.transpose() * G;
        }
    });
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
    if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0))
        throw ShapeError("bmm: need 3-D tensors with equal batch");
    const int64_t nb = a.dim(0), p = a.dim(1), q = a.dim(2);
    const int64_t r = trans_b ? b.dim(1) : b.dim(2);
    const int64_t bq = trans_b ? b.dim(2) : b.dim(1);
    if (bq != q) throw ShapeError("bmm: inner dimension mismatch");
    std::vector<double> out(static_cast<size_t>(nb * p * r));
    for (int64_t i = 0; i < nb; ++i) {
        CMapMat A(a.data().data() + i * p * q, p, q);
        MapMat C(out.data() + i * p * r, p, r);
        if (trans_b) {
            CMapMat B(b.data().data() + i * r * q, r, q);
            C.noalias() = A * B.transpose();
        } else {
            CMapMat B(b.data().data() + i * q * r, q, r);
            C.noalias() = A * B;
        }
    }
    return make_op_node({nb, p, r}, std::move(out), {a, b},
                        [a, b, nb, p, q, r, trans_b](TensorImpl& self) mutable {
                            for (int64_t i = 0; i < nb; ++i) {
                                CMapMat G(self.grad.data() + i * p * r, p, r);
                                if (a.needs_grad()) {
                                    MapMat dA(a.grad_mutable().data() + i * p * q, p, q);
                                    if (trans_b) {
                                        CMapMat B(b.data().data() + i * r * q, r, q);
                                        dA.noalias() += G * B;
                                    } else {
                                        CMapMat B(b.data().data() + i * q * r, q, r);
                                        dA.noalias() += G * B.transpose();
                                    }
                                }
                                if (b.needs_grad()) {
                                    CMapMat A(a.data().data() + i * p * q, p, q);
                                    if (trans_b) {
                                        MapMat dB(b.grad_mutable().data() + i * r * q, r, q);
                                        dB.noalias() += G.transpose() * A;
                                    } else {
                                        MapMat dB(b.grad_mutable().data() + i * q * r, q, r);
                                        dB.noalias() += A.transpose() * G;
                                    }
                                }
                            }
                        });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.ndim() != 2) throw ShapeError("linear: weight must be 2-D (out, in)");
    const int64_t din = weight.dim(1), dout = weight.dim(0);
    if (x.dim(-1) != din)
        throw ShapeError("linear: input feature dim " + std::to_string(x.dim(-1)) +
                         " != " + std::to_string(din));
    if (bias.defined() && bias.numel() != dout) throw ShapeError("linear: bias size mismatch");
    const int64_t rows = x.numel() / din;
    Shape out_shape = x.shape();
    out_shape.back() = dout;
    std::vector<double> out(static_cast<size_t>(rows * dout));
    {
        CMapMat X(x.data().data(), rows, din), W(weight.data().data(), dout, din);
        MapMat Y(out.data(), rows, dout);
        Y.noalias() = X * W.transpose();
        if (bias.defined()) {
            Eigen::Map<const Eigen::RowVectorXd> b(bias.data().data(), dout);
            Y.rowwise() += b;
        }
    }
    std::vector<Tensor> parents = {x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_op_node(std::move(out_shape), std::move(out), std::move(parents),
                        [x, weight, bias, rows, din, dout](TensorImpl& self) mutable {
                            CMapMat G(self.grad.data(), rows, dout);
                            if (x.needs_grad()) {
                                CMapMat W(weight.data().data(), dout, din);
                                MapMat dX(x.grad_mutable().data(), rows, din);
                                dX.noalias() += G * W;
                            }
                            if (weight.needs_grad()) {
                                CMapMat X(x.data().data(), rows, din);
                                MapMat dW(weight.grad_mutable().data(), dout, din);
                                dW.noalias() += G.transpose() * X;
                            }
                            if (bias.defined() && bias.needs_grad()) {
                                Eigen::Map<Eigen::RowVectorXd> db(bias.grad_mutable().data(), dout);
                                db += G.colwise().sum();
                            }
                        });
}

Tensor reshape(const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel())
        throw ShapeError("reshape: element count mismatch " + shape_str(x.shape()) + " -> " +
                         shape_str(new_shape));
    const int64_t n = x.numel();
    std::vector<double> out(x.data());
    return make_op_node(std::move(new_shape), std::move(out), {x},
                        [x, n](TensorImpl& self) mutable { accumulate(x, self.grad.data(), n); });
}

Tensor concat_dim0(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ValueError("concat_dim0: empty input");
    Shape rest = parts[0].shape();
    int64_t total0 = 0;
    for (const auto& p : parts) {
        Shape s = p.shape();
        if (s.size() != rest.size()) throw ShapeError("concat_dim0: rank mismatch");
        for (size_t i = 1; i < s.size(); ++i)
            if (s[i] != rest[i]) throw ShapeError("concat_dim0: trailing shape mismatch");
        total0 += s[0];
    }
    Shape out_shape = rest;
    out_shape[0] = total0;
    std::vector<double> out;
    out.reserve(static_cast<size_t>(shape_numel(out_shape)));
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    std::vector<Tensor> parents = parts;
    return make_op_node(std::move(out_shape), std::move(out), parents,
                        [parents](TensorImpl& self) mutable {
                            size_t off = 0;
                            for (auto& p : parents) {
                                const size_t n = p.data().size();
                                if (p.needs_grad()) {
                                    auto& dst = p.grad_mutable();
                                    for (size_t i = 0; i < n; ++i) dst[i] += self.grad[off + i];
                                }
                                off += n;
                            }
                        });
}

Tensor concat_lastdim(const Tensor& a, const Tensor& b) {
    if (a.ndim() != b.ndim()) throw ShapeError("concat_lastdim: rank mismatch");
    for (int i = 0; i + 1 < a.ndim(); ++i)
        if (a.dim(i) != b.dim(i)) throw ShapeError("concat_lastdim: leading shape mismatch");
    const int64_t da = a.dim(-1), db = b.dim(-1);
    const int64_t rows = a.numel() / da;
    Shape out_shape = a.shape();
    out_shape.back() = da + db;
    std::vector<double> out(static_cast<size_t>(rows * (da + db)));
    for (int64_t r = 0; r < rows; ++r) {
        std::copy_n(a.data().data() + r * da, da, out.data() + r * (da + db));
        std::copy_n(b.data().data() + r * db, db, out.data() + r * (da + db) + da);
    }
    return make_op_node(std::move(out_shape), std::move(out), {a, b},
                        [a, b, rows, da, db](TensorImpl& self) mutable {
                            const int64_t d = da + db;
                            if (a.needs_grad()) {
                                auto& dst = a.grad_mutable();
                                for (int64_t r = 0; r < rows; ++r)
                                    for (int64_t c = 0; c < da; ++c)
                                        dst[static_cast<size_t>(r * da + c)] +=
                                            self.grad[static_cast<size_t>(r * d + c)];
                            }
                            if (b.needs_grad()) {
                                auto& dst = b.grad_mutable();
                                for (int64_t r = 0; r < rows; ++r)
                                    for (int64_t c = 0; c < db; ++c)
                                        dst[static_cast<size_t>(r * db + c)] +=
                                            self.grad[static_cast<size_t>(r * d + da + c)];
                            }
                        });
}

Tensor index_dim0(const Tensor& x, int64_t t) {
    if (x.ndim() < 1 || t < 0 || t >= x.dim(0)) throw ShapeError("index_dim0: index out of range");
    Shape out_shape(x.shape().begin() + 1, x.shape().end());
    if (out_shape.empty()) out_shape = {1};
    const int64_t block = shape_numel(out_shape);
    std::vector<double> out(x.data().begin() + t * block, x.data().begin() + (t + 1) * block);
    return make_op_node(std::move(out_shape), std::move(out), {x},
                        [x, t, block](TensorImpl& self) mutable {
                            if (!x.needs_grad()) return;
                            auto& dst = x.grad_mutable();
                            for (int64_t i = 0; i < block; ++i)
                                dst[static_cast<size_t>(t * block + i)] += self.grad[static_cast<size_t>(i)];
                        });
}

Tensor slice_dim0(const Tensor& x, int64_t start, int64_t len) {
    if (start < 0 || len < 0 || start + len > x.dim(0)) throw ShapeError("slice_dim0: out of range");
    Shape out_shape = x.shape();
    out_shape[0] = len;
    const int64_t block = x.numel() / x.dim(0);
    std::vector<double> out(x.data().begin() + start * block, x.data().begin() + (start + len) * block);
    return make_op_node(std::move(out_shape), std::move(out), {x},
                        [x, start, block, len](TensorImpl& self) mutable {
                            if (!x.needs_grad()) return;
                            auto& dst = x.grad_mutable();
                            const int64_t n = len * block;
                            for (int64_t i = 0; i < n; ++i)
                                dst[static_cast<size_t>(start * block + i)] += self.grad[static_cast<size_t>(i)];
                        });
}

namespace {

// (K, B, H*dh) index mapping for head split. dir=true: to (B*H, K, dh).
void map_heads(const double* src, double* dst, int64_t K, int64_t B, int64_t H, int64_t dh,
               bool to_heads, bool accumulate_dst) {
    for (int64_t k = 0; k < K; ++k)
        for (int64_t b = 0; b < B; ++b)
            for (int64_t h = 0; h < H; ++h)
                for (int64_t c = 0; c < dh; ++c) {
                    const int64_t flat_kbd = (k * B + b) * (H * dh) + h * dh + c;
                    const int64_t flat_bhk = ((b * H + h) * K + k) * dh + c;
                    const int64_t s = to_heads ? flat_kbd : flat_bhk;
                    const int64_t d = to_heads ? flat_bhk : flat_kbd;
                    if (accumulate_dst)
                        dst[d] += src[s];
                    else
                        dst[d] = src[s];
                }
}

} // namespace

Tensor split_heads(const Tensor& x, int64_t num_heads) {
    if (x.ndim() != 3 || x.dim(2) % num_heads != 0)
        throw ShapeError("split_heads: expected (K,B,D) with D divisible by heads");
    const int64_t K = x.dim(0), B = x.dim(1), H = num_heads, dh = x.dim(2) / num_heads;
    std::vector<double> out(static_cast<size_t>(x.numel()));
    map_heads(x.data().data(), out.data(), K, B, H, dh, true, false);
    return make_op_node({B * H, K, dh}, std::move(out), {x}, [x, K, B, H, dh](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        map_heads(self.grad.data(), x.grad_mutable().data(), K, B, H, dh, false, true);
    });
}

Tensor merge_heads(const Tensor& x, int64_t num_heads) {
    if (x.ndim() != 3 || x.dim(0) % num_heads != 0)
        throw ShapeError("merge_heads: expected (B*H,K,dh)");
    const int64_t B = x.dim(0) / num_heads, H = num_heads, K = x.dim(1), dh = x.dim(2);
    std::vector<double> out(static_cast<size_t>(x.numel()));
    map_heads(x.data().data(), out.data(), K, B, H, dh, false, false);
    return make_op_node({K, B, H * dh}, std::move(out), {x}, [x, K, B, H, dh](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        map_heads(self.grad.data(), x.grad_mutable().data(), K, B, H, dh, true, true);
    });
}

Tensor tile_row(const Tensor& x, int64_t n) {
    if (x.ndim() != 1) throw ShapeError("tile_row: expected 1-D input");
    const int64_t d = x.dim(0);
    std::vector<double> out(static_cast<size_t>(n * d));
    for (int64_t i = 0; i < n; ++i) std::copy_n(x.data().data(), d, out.data() + i * d);
    return make_op_node({1, n, d}, std::move(out), {x}, [x, n, d](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        auto& dst = x.grad_mutable();
        for (int64_t i = 0; i < n; ++i)
            for (int64_t c = 0; c < d; ++c) dst[static_cast<size_t>(c)] += self.grad[static_cast<size_t>(i * d + c)];
    });
}

Tensor add_pos_embed(const Tensor& x, const Tensor& pos) {
    if (x.ndim() != 3 || pos.ndim() != 2 || x.dim(0) != pos.dim(0) || x.dim(2) != pos.dim(1))
        throw ShapeError("add_pos_embed: expected (T,B,D) with pos (T,D)");
    const int64_t T = x.dim(0), B = x.dim(1), D = x.dim(2);
    std::vector<double> out(x.data());
    for (int64_t t = 0; t < T; ++t)
        for (int64_t b = 0; b < B; ++b)
            for (int64_t c = 0; c < D; ++c)
                out[static_cast<size_t>((t * B + b) * D + c)] += pos.at(t * D + c);
    return make_op_node(x.shape(), std::move(out), {x, pos}, [x, pos, T, B, D](TensorImpl& self) mutable {
        if (x.needs_grad()) accumulate(x, self.grad.data(), T * B * D);
        if (pos.needs_grad()) {
            auto& dst = pos.grad_mutable();
            for (int64_t t = 0; t < T; ++t)
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t c = 0; c < D; ++c)
                        dst[static_cast<size_t>(t * D + c)] += self.grad[static_cast<size_t>((t * B + b) * D + c)];
        }
    });
}

Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const int64_t n = x.numel();
    return make_op_node({1}, {acc}, {x}, [x, n](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        const double g = self.grad[0];
        auto& dst = x.grad_mutable();
        for (int64_t i = 0; i < n; ++i) dst[static_cast<size_t>(i)] += g;
    });
}

Tensor mean_all(const Tensor& x) {
    if (x.numel() == 0) throw ValueError("mean_all: empty tensor");
    double acc = 0.0;
    for (double v : x.data()) acc += v;
    const int64_t n = x.numel();
    return make_op_node({1}, {acc / static_cast<double>(n)}, {x}, [x, n](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        const double g = self.grad[0] / static_cast<double>(n);
        auto& dst = x.grad_mutable();
        for (int64_t i = 0; i < n; ++i) dst[static_cast<size_t>(i)] += g;
    });
}

Tensor global_mean_hw(const Tensor& x) {
    if (x.ndim() != 4) throw ShapeError("global_mean_hw: expected NCHW");
    const int64_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    std::vector<double> out(static_cast<size_t>(B * C));
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* in = x.data().data() + bc * HW;
        double acc = 0.0;
        for (int64_t i = 0; i < HW; ++i) acc += in[i];
        out[static_cast<size_t>(bc)] = acc / static_cast<double>(HW);
    }
    return make_op_node({B, C}, std::move(out), {x}, [x, B, C, HW](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        auto& dst = x.grad_mutable();
        for (int64_t bc = 0; bc < B * C; ++bc) {
            const double g = self.grad[static_cast<size_t>(bc)] / static_cast<double>(HW);
            for (int64_t i = 0; i < HW; ++i) dst[static_cast<size_t>(bc * HW + i)] += g;
        }
    });
}

Tensor softmax_lastdim(const Tensor& x) {
    const int64_t d = x.dim(-1);
    const int64_t rows = x.numel() / d;
    std::vector<double> out(static_cast<size_t>(x.numel()));
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * d;
        double* yr = out.data() + r * d;
        double mx = xr[0];
        for (int64_t c = 1; c < d; ++c) mx = std::max(mx, xr[c]);
        double z = 0.0;
        for (int64_t c = 0; c < d; ++c) {
            yr[c] = std::exp(xr[c] - mx);
            z += yr[c];
        }
        const double inv = 1.0 / z;
        for (int64_t c = 0; c < d; ++c) yr[c] *= inv;
    }
    std::shared_ptr<std::vector<double>> saved;
    if (grad_enabled() && x.needs_grad()) saved = std::make_shared<std::vector<double>>(out);
    return make_op_node(x.shape(), std::move(out), {x}, [x, saved, rows, d](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        auto& dst = x.grad_mutable();
        for (int64_t r = 0; r < rows; ++r) {
            const double* y = saved->data() + r * d;
            const double* g = self.grad.data() + r * d;
            double dot = 0.0;
            for (int64_t c = 0; c < d; ++c) dot += g[c] * y[c];
            for (int64_t c = 0; c < d; ++c) dst[static_cast<size_t>(r * d + c)] += y[c] * (g[c] - dot);
        }
    });
}

Tensor log_softmax_lastdim(const Tensor& x) {
    const int64_t d = x.dim(-1);
    const int64_t rows = x.numel() / d;
    std::vector<double> out(static_cast<size_t>(x.numel()));
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * d;
        double* yr = out.data() + r * d;
        double mx = xr[0];
        for (int64_t c = 1; c < d; ++c) mx = std::max(mx, xr[c]);
        double z = 0.0;
        for (int64_t c = 0; c < d; ++c) z += std::exp(xr[c] - mx);
        const double lse = mx + std::log(z);
        for (int64_t c = 0; c < d; ++c) yr[c] = xr[c] - lse;
    }
    std::shared_ptr<std::vector<double>> saved;
    if (grad_enabled() && x.needs_grad()) saved = std::make_shared<std::vector<double>>(out);
    return make_op_node(x.shape(), std::move(out), {x}, [x, saved, rows, d](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        auto& dst = x.grad_mutable();
        for (int64_t r = 0; r < rows; ++r) {
            const double* y = saved->data() + r * d;
            const double* g = self.grad.data() + r * d;
            double gsum = 0.0;
            for (int64_t c = 0; c < d; ++c) gsum += g[c];
            for (int64_t c = 0; c < d; ++c)
                dst[static_cast<size_t>(r * d + c)] += g[c] - std::exp(y[c]) * gsum;
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const int64_t d = x.dim(-1);
    if (gamma.numel() != d || beta.numel() != d) throw ShapeError("layer_norm: affine size mismatch");
    const int64_t rows = x.numel() / d;
    std::vector<double> out(static_cast<size_t>(x.numel()));
    std::vector<double> xhat(static_cast<size_t>(x.numel()));
    std::vector<double> inv_std(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x.data().data() + r * d;
        double mean = 0.0;
        for (int64_t c = 0; c < d; ++c) mean += xr[c];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t c = 0; c < d; ++c) {
            const double t = xr[c] - mean;
            var += t * t;
        }
        var /= static_cast<double>(d);
        const double istd = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(r)] = istd;
        for (int64_t c = 0; c < d; ++c) {
            const double h = (xr[c] - mean) * istd;
            xhat[static_cast<size_t>(r * d + c)] = h;
            out[static_cast<size_t>(r * d + c)] = gamma.at(c) * h + beta.at(c);
        }
    }
    auto xhat_p = std::make_shared<std::vector<double>>(std::move(xhat));
    auto istd_p = std::make_shared<std::vector<double>>(std::move(inv_std));
    return make_op_node(
        x.shape(), std::move(out), {x, gamma, beta},
        [x, gamma, beta, xhat_p, istd_p, rows, d](TensorImpl& self) mutable {
            for (int64_t r = 0; r < rows; ++r) {
                const double* h = xhat_p->data() + r * d;
                const double* g = self.grad.data() + r * d;
                if (gamma.needs_grad()) {
                    auto& dg = gamma.grad_mutable();
                    for (int64_t c = 0; c < d; ++c) dg[static_cast<size_t>(c)] += g[c] * h[c];
                }
                if (beta.needs_grad()) {
                    auto& db = beta.grad_mutable();
                    for (int64_t c = 0; c < d; ++c) db[static_cast<size_t>(c)] += g[c];
                }
                if (x.needs_grad()) {
                    const double istd = (*istd_p)[static_cast<size_t>(r)];
                    double mean_gy = 0.0, mean_gyh = 0.0;
                    for (int64_t c = 0; c < d; ++c) {
                        const double gy = g[c] * gamma.at(c);
                        mean_gy += gy;
                        mean_gyh += gy * h[c];
                    }
                    mean_gy /= static_cast<double>(d);
                    mean_gyh /= static_cast<double>(d);
                    auto& dst = x.grad_mutable();
                    for (int64_t c = 0; c < d; ++c) {
                        const double gy = g[c] * gamma.at(c);
                        dst[static_cast<size_t>(r * d + c)] += istd * (gy - mean_gy - h[c] * mean_gyh);
                    }
                }
            }
        });
}

Tensor embedding(const Tensor& table, const std::vector<int64_t>& ids, const Shape& id_shape) {
    if (table.ndim() != 2) throw ShapeError("embedding: table must be (V, D)");
    if (static_cast<int64_t>(ids.size()) != shape_numel(id_shape))
        throw ShapeError("embedding: ids/id_shape mismatch");
    const int64_t V = table.dim(0), D = table.dim(1);
    Shape out_shape = id_shape;
    out_shape.push_back(D);
    std::vector<double> out(static_cast<size_t>(ids.size()) * static_cast<size_t>(D));
    for (size_t i = 0; i < ids.size(); ++i) {
        const int64_t id = ids[i];
        if (id < 0 || id >= V) throw ValueError("embedding: id out of range");
        std::copy_n(table.data().data() + id * D, D, out.data() + static_cast<int64_t>(i) * D);
    }
    auto ids_copy = std::make_shared<std::vector<int64_t>>(ids);
    return make_op_node(std::move(out_shape), std::move(out), {table},
                        [table, ids_copy, D](TensorImpl& self) mutable {
                            if (!table.needs_grad()) return;
                            auto& dst = table.grad_mutable();
                            for (size_t i = 0; i < ids_copy->size(); ++i) {
                                const int64_t id = (*ids_copy)[i];
                                const double* g = self.grad.data() + static_cast<int64_t>(i) * D;
                                for (int64_t c = 0; c < D; ++c)
                                    dst[static_cast<size_t>(id * D + c)] += g[c];
                            }
                        });
}

namespace {

// Patch gather/scatter shared by conv2d and conv_transpose2d. The grid
// enumerates (gh x gw) anchor positions with the given stride/padding over
// an image of size (H x W); gather reads image -> columns, scatter is the
// exact adjoint (accumulating columns -> image).
void gather_patches(const double* img, int64_t C, int64_t H, int64_t W, int kh, int kw, int sh,
                    int sw, int ph, int pw, int64_t gh, int64_t gw, double* col) {
    const int64_t ncols = gh * gw;
    for (int64_t c = 0; c < C; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                double* row = col + ((c * kh + ki) * kw + kj) * ncols;
                for (int64_t gi = 0; gi < gh; ++gi) {
                    const int64_t ii = gi * sh - ph + ki;
                    const bool row_ok = ii >= 0 && ii < H;
                    for (int64_t gj = 0; gj < gw; ++gj) {
                        const int64_t jj = gj * sw - pw + kj;
                        row[gi * gw + gj] = (row_ok && jj >= 0 && jj < W)
                                                ? img[(c * H + ii) * W + jj]
                                                : 0.0;
                    }
                }
            }
}

void scatter_patches(const double* col, int64_t C, int64_t H, int64_t W, int kh, int kw, int sh,
                     int sw, int ph, int pw, int64_t gh, int64_t gw, double* img) {
    const int64_t ncols = gh * gw;
    for (int64_t c = 0; c < C; ++c)
        for (int ki = 0; ki < kh; ++ki)
            for (int kj = 0; kj < kw; ++kj) {
                const double* row = col + ((c * kh + ki) * kw + kj) * ncols;
                for (int64_t gi = 0; gi < gh; ++gi) {
                    const int64_t ii = gi * sh - ph + ki;
                    if (ii < 0 || ii >= H) continue;
                    for (int64_t gj = 0; gj < gw; ++gj) {
                        const int64_t jj = gj * sw - pw + kj;
                        if (jj < 0 || jj >= W) continue;
                        img[(c * H + ii) * W + jj] += row[gi * gw + gj];
                    }
                }
            }
}

} // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int64_t ci, int64_t co,
              int kh, int kw, int sh, int sw, int ph, int pw) {
    if (x.ndim() != 4 || x.dim(1) != ci) throw ShapeError("conv2d: expected NCHW input with C=ci");
    if (weight.dim(0) != co || weight.dim(1) != ci * kh * kw)
        throw ShapeError("conv2d: weight must be (co, ci*kh*kw)");
    const int64_t B = x.dim(0), H = x.dim(2), W = x.dim(3);
    const int64_t Ho = (H + 2 * ph - kh) / sh + 1;
    const int64_t Wo = (W + 2 * pw - kw) / sw + 1;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("conv2d: output collapses to zero size");
    const int64_t crows = ci * kh * kw, ncols = Ho * Wo;
    std::vector<double> out(static_cast<size_t>(B * co * ncols));
    std::vector<double> col(static_cast<size_t>(crows * ncols));
    CMapMat Wm(weight.data().data(), co, crows);
    for (int64_t b = 0; b < B; ++b) {
        gather_patches(x.data().data() + b * ci * H * W, ci, H, W, kh, kw, sh, sw, ph, pw, Ho, Wo,
                       col.data());
        CMapMat Col(col.data(), crows, ncols);
        MapMat Out(out.data() + b * co * ncols, co, ncols);
        Out.noalias() = Wm * Col;
        if (bias.defined())
            for (int64_t c = 0; c < co; ++c)
                Out.row(c).array() += bias.at(c);
    }
    std::vector<Tensor> parents = {x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_op_node(
        {B, co, Ho, Wo}, std::move(out), std::move(parents),
        [x, weight, bias, B, ci, co, H, W, Ho, Wo, kh, kw, sh, sw, ph, pw](TensorImpl& self) mutable {
            const int64_t crows = ci * kh * kw, ncols = Ho * Wo;
            std::vector<double> col(static_cast<size_t>(crows * ncols));
            std::vector<double> dcol(static_cast<size_t>(crows * ncols));
            CMapMat Wm(weight.data().data(), co, crows);
            for (int64_t b = 0; b < B; ++b) {
                CMapMat G(self.grad.data() + b * co * ncols, co, ncols);
                if (weight.needs_grad()) {
                    gather_patches(x.data().data() + b * ci * H * W, ci, H, W, kh, kw, sh, sw, ph,
                                   pw, Ho, Wo, col.data());
                    CMapMat Col(col.data(), crows, ncols);
                    MapMat dW(weight.grad_mutable().data(), co, crows);
                    dW.noalias() += G * Col.transpose();
                }
                if (bias.defined() && bias.needs_grad()) {
                    auto& db = bias.grad_mutable();
                    for (int64_t c = 0; c < co; ++c) db[static_cast<size_t>(c)] += G.row(c).sum();
                }
                if (x.needs_grad()) {
                    MapMat dCol(dcol.data(), crows, ncols);
                    dCol.noalias() = Wm.transpose() * G;
                    scatter_patches(dcol.data(), ci, H, W, kh, kw, sh, sw, ph, pw, Ho, Wo,
                                    x.grad_mutable().data() + b * ci * H * W);
                }
            }
        });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int64_t ci,
                        int64_t co, int kh, int kw, int sh, int sw, int ph, int pw) {
    if (x.ndim() != 4 || x.dim(1) != ci) throw ShapeError("conv_transpose2d: expected NCHW with C=ci");
    if (weight.dim(0) != ci || weight.dim(1) != co * kh * kw)
        throw ShapeError("conv_transpose2d: weight must be (ci, co*kh*kw)");
    const int64_t B = x.dim(0), Hi = x.dim(2), Wi = x.dim(3);
    const int64_t Ho = (Hi - 1) * sh - 2 * ph + kh;
    const int64_t Wo = (Wi - 1) * sw - 2 * pw + kw;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("conv_transpose2d: output collapses to zero size");
    const int64_t crows = co * kh * kw, ncols = Hi * Wi;
    std::vector<double> out(static_cast<size_t>(B * co * Ho * Wo), 0.0);
    std::vector<double> col(static_cast<size_t>(crows * ncols));
    CMapMat Wm(weight.data().data(), ci, crows);
    for (int64_t b = 0; b < B; ++b) {
        CMapMat X(x.data().data() + b * ci * ncols, ci, ncols);
        MapMat Col(col.data(), crows, ncols);
        Col.noalias() = Wm.transpose() * X;
        scatter_patches(col.data(), co, Ho, Wo, kh, kw, sh, sw, ph, pw, Hi, Wi,
                        out.data() + b * co * Ho * Wo);
        if (bias.defined()) {
            double* ob = out.data() + b * co * Ho * Wo;
            for (int64_t c = 0; c < co; ++c)
                for (int64_t i = 0; i < Ho * Wo; ++i) ob[c * Ho * Wo + i] += bias.at(c);
        }
    }
    std::vector<Tensor> parents = {x, weight};
    if (bias.defined()) parents.push_back(bias);
    return make_op_node(
        {B, co, Ho, Wo}, std::move(out), std::move(parents),
        [x, weight, bias, B, ci, co, Hi, Wi, Ho, Wo, kh, kw, sh, sw, ph, pw](TensorImpl& self) mutable {
            const int64_t crows = co * kh * kw, ncols = Hi * Wi;
            std::vector<double> gcol(static_cast<size_t>(crows * ncols));
            CMapMat Wm(weight.data().data(), ci, crows);
            for (int64_t b = 0; b < B; ++b) {
                // Gather of output-grad over the input grid is the adjoint of
                // the forward scatter.
                gather_patches(self.grad.data() + b * co * Ho * Wo, co, Ho, Wo, kh, kw, sh, sw, ph,
                               pw, Hi, Wi, gcol.data());
                CMapMat Gcol(gcol.data(), crows, ncols);
                if (x.needs_grad()) {
                    MapMat dX(x.grad_mutable().data() + b * ci * ncols, ci, ncols);
                    dX.noalias() += Wm * Gcol;
                }
                if (weight.needs_grad()) {
                    CMapMat X(x.data().data() + b * ci * ncols, ci, ncols);
                    MapMat dW(weight.grad_mutable().data(), ci, crows);
                    dW.noalias() += X * Gcol.transpose();
                }
                if (bias.defined() && bias.needs_grad()) {
                    auto& db = bias.grad_mutable();
                    const double* g = self.grad.data() + b * co * Ho * Wo;
                    for (int64_t c = 0; c < co; ++c) {
                        double acc = 0.0;
                        for (int64_t i = 0; i < Ho * Wo; ++i) acc += g[c * Ho * Wo + i];
                        db[static_cast<size_t>(c)] += acc;
                    }
                }
            }
        });
}

Tensor maxpool2d(const Tensor& x, int kh, int kw) {
    if (x.ndim() != 4) throw ShapeError("maxpool2d: expected NCHW");
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int64_t Ho = H / kh, Wo = W / kw;
    if (Ho <= 0 || Wo <= 0) throw ShapeError("maxpool2d: input smaller than kernel");
    std::vector<double> out(static_cast<size_t>(B * C * Ho * Wo));
    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(B * C * Ho * Wo));
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* in = x.data().data() + bc * H * W;
        double* o = out.data() + bc * Ho * Wo;
        int64_t* am = argmax->data() + bc * Ho * Wo;
        for (int64_t i = 0; i < Ho; ++i)
            for (int64_t j = 0; j < Wo; ++j) {
                double best = -std::numeric_limits<double>::infinity();
                int64_t best_idx = 0;
                for (int di = 0; di < kh; ++di)
                    for (int dj = 0; dj < kw; ++dj) {
                        const int64_t idx = (i * kh + di) * W + (j * kw + dj);
                        if (in[idx] > best) {
                            best = in[idx];
                            best_idx = idx;
                        }
                    }
                o[i * Wo + j] = best;
                am[i * Wo + j] = bc * H * W + best_idx;
            }
    }
    return make_op_node({B, C, Ho, Wo}, std::move(out), {x}, [x, argmax](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        auto& dst = x.grad_mutable();
        for (size_t i = 0; i < argmax->size(); ++i)
            dst[static_cast<size_t>((*argmax)[i])] += self.grad[i];
    });
}

Tensor upsample_nearest2x(const Tensor& x) {
    if (x.ndim() != 4) throw ShapeError("upsample_nearest2x: expected NCHW");
    const int64_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    std::vector<double> out(static_cast<size_t>(B * C * 4 * H * W));
    for (int64_t bc = 0; bc < B * C; ++bc) {
        const double* in = x.data().data() + bc * H * W;
        double* o = out.data() + bc * 4 * H * W;
        for (int64_t i = 0; i < H; ++i)
            for (int64_t j = 0; j < W; ++j) {
                const double v = in[i * W + j];
                const int64_t base = (2 * i) * (2 * W) + 2 * j;
                o[base] = v;
                o[base + 1] = v;
                o[base + 2 * W] = v;
                o[base + 2 * W + 1] = v;
            }
    }
    return make_op_node({B, C, 2 * H, 2 * W}, std::move(out), {x}, [x, B, C, H, W](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        auto& dst = x.grad_mutable();
        for (int64_t bc = 0; bc < B * C; ++bc) {
            const double* g = self.grad.data() + bc * 4 * H * W;
            for (int64_t i = 0; i < H; ++i)
                for (int64_t j = 0; j < W; ++j) {
                    const int64_t base = (2 * i) * (2 * W) + 2 * j;
                    dst[static_cast<size_t>(bc * H * W + i * W + j)] +=
                        g[base] + g[base + 1] + g[base + 2 * W] + g[base + 2 * W + 1];
                }
        }
    });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
    if (!training || p <= 0.0) return x;
    if (p >= 1.0) throw ValueError("dropout: p must be < 1");
    const int64_t n = x.numel();
    const double keep = 1.0 - p;
    auto mask = std::make_shared<std::vector<double>>(static_cast<size_t>(n));
    std::vector<double> out(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double m = rng.uniform(0.0, 1.0) < keep ? 1.0 / keep : 0.0;
        (*mask)[static_cast<size_t>(i)] = m;
        out[static_cast<size_t>(i)] = x.at(i) * m;
    }
    return make_op_node(x.shape(), std::move(out), {x}, [x, mask, n](TensorImpl& self) mutable {
        if (!x.needs_grad()) return;
        auto& dst = x.grad_mutable();
        for (int64_t i = 0; i < n; ++i)
            dst[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(i)] * (*mask)[static_cast<size_t>(i)];
    });
}

} // namespace ops
} // namespace scriptgen
