#include "skan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

namespace skan::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                            " vs " + shape_str(b.shape()));
    }
}

void require_ndim(const char* op, const Tensor& a, std::size_t n) {
    if (a.ndim() != n) {
        throw ContractError(std::string(op) + ": expected rank " + std::to_string(n) +
                            ", got shape " + shape_str(a.shape()));
    }
}

// Elementwise unary op from value and derivative-at-input functions.
template <class F, class DF>
Tensor unary(const Tensor& a, F f, DF df) {
    std::vector<double> out(a.numel());
    auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(x[i]);
    return make_result(a.shape(), std::move(out), {a}, [a, df](TensorImpl& self) {
        if (!a.requires_grad()) return;
        auto g = a.impl()->grad_buffer();
        auto x = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * df(x[i], self.data[i]);
    });
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
        if (a.requires_grad()) a.impl()->accumulate(self.grad);
        if (b.requires_grad()) b.impl()->accumulate(self.grad);
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
        if (a.requires_grad()) a.impl()->accumulate(self.grad);
        if (b.requires_grad()) {
            auto g = b.impl()->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& self) {
        if (a.requires_grad()) {
            auto g = a.impl()->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * b[i];
        }
        if (b.requires_grad()) {
            auto g = b.impl()->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * a[i];
        }
    });
}

Tensor scale(const Tensor& a, double c) {
    return unary(a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_n(std::span<const Tensor> xs) {
    if (xs.empty()) throw ContractError("add_n: no inputs");
    if (xs.size() == 1) return xs[0];
    for (const auto& x : xs) require_same_shape("add_n", xs[0], x);
    std::vector<double> out(xs[0].data().begin(), xs[0].data().end());
    for (std::size_t k = 1; k < xs.size(); ++k) {
        auto d = xs[k].data();
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += d[i];
    }
    std::vector<Tensor> parents(xs.begin(), xs.end());
    return make_result(xs[0].shape(), std::move(out), parents, [parents](TensorImpl& self) {
        for (const auto& p : parents) {
            if (p.requires_grad()) p.impl()->accumulate(self.grad);
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_ndim("matmul", a, 2);
    require_ndim("matmul", b, 2);
    const std::size_t n = a.dim(0), k = a.dim(1), m = b.dim(1);
    if (b.dim(0) != k) {
        throw ContractError("matmul: inner dims differ " + shape_str(a.shape()) + " * " +
                            shape_str(b.shape()));
    }
    std::vector<double> out(n * m);
    Map(out.data(), n, m).noalias() = MapC(a.data().data(), n, k) * MapC(b.data().data(), k, m);
    return make_result({n, m}, std::move(out), {a, b}, [a, b, n, k, m](TensorImpl& self) {
        MapC g(self.grad.data(), n, m);
        if (a.requires_grad()) {
            Map ga(a.impl()->grad_buffer().data(), n, k);
            ga.noalias() += g * MapC(b.data().data(), k, m).transpose();
        }
        if (b.requires_grad()) {
            Map gb(b.impl()->grad_buffer().data(), k, m);
            gb.noalias() += MapC(a.data().data(), n, k).transpose() * g;
        }
    });
}

Tensor add_rowwise(const Tensor& a, const Tensor& row) {
    require_ndim("add_rowwise", a, 2);
    const std::size_t n = a.dim(0), m = a.dim(1);
    if (row.numel() != m) {
        throw ContractError("add_rowwise: row of " + std::to_string(row.numel()) +
                            " values for matrix " + shape_str(a.shape()));
    }
    std::vector<double> out(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) out[i * m + j] = a[i * m + j] + row[j];
    return make_result(a.shape(), std::move(out), {a, row}, [a, row, n, m](TensorImpl& self) {
        if (a.requires_grad()) a.impl()->accumulate(self.grad);
        if (row.requires_grad()) {
            auto g = row.impl()->grad_buffer();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) g[j] += self.grad[i * m + j];
        }
    });
}

Tensor tanh(const Tensor& a) {
    return unary(a, [](double x) { return std::tanh(x); },
                 [](double, double y) { return 1.0 - y * y; });
}

Tensor silu(const Tensor& a) {
    return unary(a, [](double x) { return x * sigmoid(x); },
                 [](double x, double) {
                     double s = sigmoid(x);
                     return s * (1.0 + x * (1.0 - s));
                 });
}

Tensor relu(const Tensor& a) {
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
    return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sin(const Tensor& a) {
    return unary(a, [](double x) { return std::sin(x); },
                 [](double x, double) { return std::cos(x); });
}

Tensor pow(const Tensor& a, double p) {
    return unary(a, [p](double x) { return std::pow(x, p); },
                 [p](double x, double) { return p == 0.0 ? 0.0 : p * std::pow(x, p - 1.0); });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_result({}, {s}, {a}, [a](TensorImpl& self) {
        if (!a.requires_grad()) return;
        auto g = a.impl()->grad_buffer();
        for (auto& v : g) v += self.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    if (a.numel() == 0) throw ContractError("mean: empty tensor");
    return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_numel(shape) != a.numel()) {
        throw ContractError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    std::vector<double> out(a.data().begin(), a.data().end());
    return make_result(std::move(shape), std::move(out), {a}, [a](TensorImpl& self) {
        if (a.requires_grad()) a.impl()->accumulate(self.grad);
    });
}

Tensor flatten(const Tensor& x) {
    if (x.ndim() < 1) throw ContractError("flatten: scalar input");
    const std::size_t b = x.dim(0);
    return reshape(x, {b, b == 0 ? 0 : x.numel() / b});
}

Tensor maxpool2(const Tensor& x) {
    require_ndim("maxpool2", x, 4);
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = H / 2, Wo = W / 2;
    std::vector<double> out(B * C * Ho * Wo);
    std::vector<std::size_t> argmax(out.size());
    auto in = x.data();
    for (std::size_t bc = 0; bc < B * C; ++bc) {
        const double* plane = in.data() + bc * H * W;
        for (std::size_t i = 0; i < Ho; ++i) {
            for (std::size_t j = 0; j < Wo; ++j) {
                std::size_t best = (2 * i) * W + 2 * j;
                for (std::size_t di = 0; di < 2; ++di)
                    for (std::size_t dj = 0; dj < 2; ++dj) {
                        std::size_t idx = (2 * i + di) * W + 2 * j + dj;
                        if (plane[idx] > plane[best]) best = idx;
                    }
                const std::size_t o = (bc * Ho + i) * Wo + j;
                out[o] = plane[best];
                argmax[o] = bc * H * W + best;
            }
        }
    }
    return make_result({B, C, Ho, Wo}, std::move(out), {x},
                       [x, argmax = std::move(argmax)](TensorImpl& self) {
                           if (!x.requires_grad()) return;
                           auto g = x.impl()->grad_buffer();
                           for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
                       });
}

std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride, std::size_t padding) {
    if (stride == 0) throw ContractError("conv: stride must be positive");
    if (in + 2 * padding < k) {
        throw ContractError("conv: input extent " + std::to_string(in) + " with padding " +
                            std::to_string(padding) + " is smaller than kernel " + std::to_string(k));
    }
    return (in + 2 * padding - k) / stride + 1;
}

Tensor im2col(const Tensor& x, std::size_t kh, std::size_t kw, std::size_t stride,
              std::size_t padding) {
    require_ndim("im2col", x, 4);
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t Ho = conv_out_size(H, kh, stride, padding);
    const std::size_t Wo = conv_out_size(W, kw, stride, padding);
    const std::size_t cols = C * kh * kw;
    const std::size_t rows = B * Ho * Wo;
    // Source index per output cell; npos marks padding.
    constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> src(rows * cols, npos);
    for (std::size_t b = 0; b < B; ++b)
        for (std::size_t oy = 0; oy < Ho; ++oy)
            for (std::size_t ox = 0; ox < Wo; ++ox) {
                const std::size_t r = (b * Ho + oy) * Wo + ox;
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ky = 0; ky < kh; ++ky)
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
                            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(H) || ix >= static_cast<long>(W))
                                continue;
                            src[r * cols + (c * kh + ky) * kw + kx] =
                                ((b * C + c) * H + static_cast<std::size_t>(iy)) * W +
                                static_cast<std::size_t>(ix);
                        }
            }
    std::vector<double> out(rows * cols, 0.0);
    auto in = x.data();
    for (std::size_t i = 0; i < out.size(); ++i)
        if (src[i] != npos) out[i] = in[src[i]];
    return make_result({rows, cols}, std::move(out), {x}, [x, src = std::move(src)](TensorImpl& self) {
        if (!x.requires_grad()) return;
        auto g = x.impl()->grad_buffer();
        for (std::size_t i = 0; i < src.size(); ++i)
            if (src[i] != npos) g[src[i]] += self.grad[i];
    });
}

Tensor rows_to_nchw(const Tensor& rows, std::size_t batch, std::size_t ho, std::size_t wo) {
    require_ndim("rows_to_nchw", rows, 2);
    if (rows.dim(0) != batch * ho * wo) {
        throw ContractError("rows_to_nchw: " + std::to_string(rows.dim(0)) + " rows for " +
                            std::to_string(batch) + "x" + std::to_string(ho) + "x" + std::to_string(wo));
    }
    const std::size_t O = rows.dim(1), P = ho * wo;
    std::vector<double> out(rows.numel());
    auto in = rows.data();
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t o = 0; o < O; ++o) out[(b * O + o) * P + p] = in[(b * P + p) * O + o];
    return make_result({batch, O, ho, wo}, std::move(out), {rows},
                       [rows, batch, O, P](TensorImpl& self) {
                           if (!rows.requires_grad()) return;
                           auto g = rows.impl()->grad_buffer();
                           for (std::size_t b = 0; b < batch; ++b)
                               for (std::size_t p = 0; p < P; ++p)
                                   for (std::size_t o = 0; o < O; ++o)
                                       g[(b * P + p) * O + o] += self.grad[(b * O + o) * P + p];
                       });
}

}  // namespace skan::ops
