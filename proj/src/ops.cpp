#include "dcan/ops.hpp"

#include <algorithm>
#include <cmath>

#include "dcan/errors.hpp"
#include "dcan/kernels.hpp"

namespace dcan {

namespace {

using kernels::GemmShape;
using kernels::Trans;

Tape& same_tape(Var a, Var b) {
    if (!a.valid() || a.tape() != b.tape()) throw ContractError("operands live on different tapes");
    return *a.tape();
}

enum class Bcast { same, scalar, row, col };

Bcast broadcast_kind(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return Bcast::same;
    const std::size_t nb = shape_size(b);
    if (nb == 1) return Bcast::scalar;
    if (a.size() == 2) {
        if ((b.size() == 1 && b[0] == a[1]) || (b.size() == 2 && b[0] == 1 && b[1] == a[1])) return Bcast::row;
        if (b.size() == 2 && b[0] == a[0] && b[1] == 1) return Bcast::col;
    }
    throw DimensionError(std::string(op) + ": cannot broadcast " + shape_string(b) + " onto " + shape_string(a));
}

inline std::size_t bidx(Bcast k, std::size_t i, std::size_t cols) {
    switch (k) {
        case Bcast::same: return i;
        case Bcast::scalar: return 0;
        case Bcast::row: return i % cols;
        case Bcast::col: return i / cols;
    }
    return 0;
}

std::size_t last_dim(const Shape& s) { return s.back(); }

}  // namespace

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const Bcast k = broadcast_kind(av.shape(), bv.shape(), "add");
    const std::size_t cols = last_dim(av.shape());
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[bidx(k, i, cols)];
    return t.record("add", std::move(out), {a, b}, [k, cols](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        if (ctx.needs(0)) {
            Tensor& ga = ctx.grad(0);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (ctx.needs(1)) {
            Tensor& gb = ctx.grad(1);
            for (std::size_t i = 0; i < g.size(); ++i) gb[bidx(k, i, cols)] += g[i];
        }
    });
}

Var sub(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const Bcast k = broadcast_kind(av.shape(), bv.shape(), "sub");
    const std::size_t cols = last_dim(av.shape());
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[bidx(k, i, cols)];
    return t.record("sub", std::move(out), {a, b}, [k, cols](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        if (ctx.needs(0)) {
            Tensor& ga = ctx.grad(0);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (ctx.needs(1)) {
            Tensor& gb = ctx.grad(1);
            for (std::size_t i = 0; i < g.size(); ++i) gb[bidx(k, i, cols)] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const Bcast k = broadcast_kind(av.shape(), bv.shape(), "mul");
    const std::size_t cols = last_dim(av.shape());
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[bidx(k, i, cols)];
    return t.record("mul", std::move(out), {a, b}, [k, cols](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        const Tensor& av = ctx.input(0);
        const Tensor& bv = ctx.input(1);
        if (ctx.needs(0)) {
            Tensor& ga = ctx.grad(0);
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[bidx(k, i, cols)];
        }
        if (ctx.needs(1)) {
            Tensor& gb = ctx.grad(1);
            for (std::size_t i = 0; i < g.size(); ++i) gb[bidx(k, i, cols)] += g[i] * av[i];
        }
    });
}

Var scale(Var a, double factor) {
    Tensor out = a.value();
    for (double& x : out.data()) x *= factor;
    return a.tape()->record("scale", std::move(out), {a}, [factor](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const Tensor& g = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
}

Var matmul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) {
        throw DimensionError("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
    }
    const GemmShape s{av.rows(), bv.cols(), av.cols()};
    Tensor out({s.m, s.n});
    kernels::omp::gemm(Trans::no, Trans::no, s, av.data(), bv.data(), out.data(), false);
    return t.record("matmul", std::move(out), {a, b}, [s](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        if (ctx.needs(0)) {
            // dA = G * B^T
            kernels::omp::gemm(Trans::no, Trans::yes, {s.m, s.k, s.n}, g.data(), ctx.input(1).data(),
                               ctx.grad(0).data(), true);
        }
        if (ctx.needs(1)) {
            // dB = A^T * G
            kernels::omp::gemm(Trans::yes, Trans::no, {s.k, s.n, s.m}, ctx.input(0).data(), g.data(),
                               ctx.grad(1).data(), true);
        }
    });
}

Var bmm(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1)) {
        throw DimensionError("bmm: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
    }
    const std::size_t batch = av.dim(0);
    const GemmShape s{av.dim(1), bv.dim(2), av.dim(2)};
    Tensor out({batch, s.m, s.n});
    for (std::size_t i = 0; i < batch; ++i) {
        kernels::omp::gemm(Trans::no, Trans::no, s, av.data().subspan(i * s.m * s.k, s.m * s.k),
                           bv.data().subspan(i * s.k * s.n, s.k * s.n), out.data().subspan(i * s.m * s.n, s.m * s.n),
                           false);
    }
    return t.record("bmm", std::move(out), {a, b}, [s, batch](const BackwardContext& ctx) {
        const Tensor& g = ctx.out_grad();
        for (std::size_t i = 0; i < batch; ++i) {
            auto gi = g.data().subspan(i * s.m * s.n, s.m * s.n);
            if (ctx.needs(0)) {
                kernels::omp::gemm(Trans::no, Trans::yes, {s.m, s.k, s.n}, gi,
                                   ctx.input(1).data().subspan(i * s.k * s.n, s.k * s.n),
                                   ctx.grad(0).data().subspan(i * s.m * s.k, s.m * s.k), true);
            }
            if (ctx.needs(1)) {
                kernels::omp::gemm(Trans::yes, Trans::no, {s.k, s.n, s.m},
                                   ctx.input(0).data().subspan(i * s.m * s.k, s.m * s.k), gi,
                                   ctx.grad(1).data().subspan(i * s.k * s.n, s.k * s.n), true);
            }
        }
    });
}

Var transpose(Var a) {
    const Tensor& av = a.value();
    if (av.rank() < 2) throw DimensionError("transpose needs rank >= 2, got " + shape_string(av.shape()));
    const std::size_t batch = av.rank() == 3 ? av.dim(0) : 1;
    const std::size_t r = av.dim(av.rank() - 2);
    const std::size_t c = av.dim(av.rank() - 1);
    Shape shape = av.shape();
    std::swap(shape[shape.size() - 2], shape[shape.size() - 1]);
    Tensor out(shape);
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) out[b * r * c + j * r + i] = av[b * r * c + i * c + j];
        }
    }
    return a.tape()->record("transpose", std::move(out), {a}, [batch, r, c](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const Tensor& g = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < c; ++j) ga[b * r * c + i * c + j] += g[b * r * c + j * r + i];
            }
        }
    });
}

namespace {

void softmax_rows(std::span<const double> in, std::span<double> out, std::size_t width) {
    const std::size_t rows = in.size() / width;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* x = in.data() + r * width;
        double* y = out.data() + r * width;
        const double mx = *std::max_element(x, x + width);
        double z = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            y[j] = std::exp(x[j] - mx);
            z += y[j];
        }
        for (std::size_t j = 0; j < width; ++j) y[j] /= z;
    }
}

}  // namespace

Tensor softmax_values(const Tensor& x) {
    if (x.empty()) throw DimensionError("softmax of an empty tensor");
    Tensor out(x.shape());
    softmax_rows(x.data(), out.data(), x.shape().back());
    return out;
}

Var softmax(Var a) {
    const Tensor& av = a.value();
    const std::size_t width = av.shape().back();
    Tensor out = softmax_values(av);
    return a.tape()->record("softmax", std::move(out), {a}, [width](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const Tensor& y = ctx.out();
        const Tensor& g = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        const std::size_t rows = y.size() / width;
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < width; ++j) dot += g[r * width + j] * y[r * width + j];
            for (std::size_t j = 0; j < width; ++j) {
                ga[r * width + j] += y[r * width + j] * (g[r * width + j] - dot);
            }
        }
    });
}

Var sigmoid(Var a) {
    Tensor out = a.value();
    for (double& x : out.data()) x = 1.0 / (1.0 + std::exp(-x));
    return a.tape()->record("sigmoid", std::move(out), {a}, [](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const Tensor& y = ctx.out();
        const Tensor& g = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < y.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
    });
}

Var relu(Var a) {
    Tensor out = a.value();
    for (double& x : out.data()) x = x > 0.0 ? x : 0.0;
    return a.tape()->record("relu", std::move(out), {a}, [](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const Tensor& x = ctx.input(0);
        const Tensor& g = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > 0.0) ga[i] += g[i];
        }
    });
}

Var sum(Var a) {
    double s = 0.0;
    for (double x : a.value().data()) s += x;
    return a.tape()->record("sum", Tensor::scalar(s), {a}, [](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const double g = ctx.out_grad()[0];
        for (double& x : ctx.grad(0).data()) x += g;
    });
}

Var mean(Var a) {
    const Tensor& av = a.value();
    const double n = static_cast<double>(av.size());
    double s = 0.0;
    for (double x : av.data()) s += x;
    return a.tape()->record("mean", Tensor::scalar(s / n), {a}, [n](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const double g = ctx.out_grad()[0] / n;
        for (double& x : ctx.grad(0).data()) x += g;
    });
}

Var squared_norm(Var a) {
    double s = 0.0;
    for (double x : a.value().data()) s += x * x;
    return a.tape()->record("squared_norm", Tensor::scalar(s), {a}, [](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const double g = ctx.out_grad()[0];
        const Tensor& x = ctx.input(0);
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < x.size(); ++i) ga[i] += 2.0 * g * x[i];
    });
}

Var cosine_similarity(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.shape() != bv.shape() || av.rank() > 2) {
        throw DimensionError("cosine_similarity: " + shape_string(av.shape()) + " vs " + shape_string(bv.shape()));
    }
    const std::size_t width = av.shape().back();
    const std::size_t rows = av.size() / width;
    Tensor out = av.rank() == 2 ? Tensor({rows, 1}) : Tensor({1});
    for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            const double x = av[r * width + j], y = bv[r * width + j];
            dot += x * y;
            na += x * x;
            nb += y * y;
        }
        const double denom = std::sqrt(na) * std::sqrt(nb);
        out[r] = denom > 0.0 ? dot / denom : 0.0;
    }
    return t.record("cosine_similarity", std::move(out), {a, b}, [width, rows](const BackwardContext& ctx) {
        const Tensor& av = ctx.input(0);
        const Tensor& bv = ctx.input(1);
        const Tensor& cs = ctx.out();
        const Tensor& g = ctx.out_grad();
        for (std::size_t r = 0; r < rows; ++r) {
            double na = 0.0, nb = 0.0;
            for (std::size_t j = 0; j < width; ++j) {
                na += av[r * width + j] * av[r * width + j];
                nb += bv[r * width + j] * bv[r * width + j];
            }
            if (na == 0.0 || nb == 0.0) continue;
            const double inv = 1.0 / (std::sqrt(na) * std::sqrt(nb));
            for (std::size_t j = 0; j < width; ++j) {
                const double x = av[r * width + j], y = bv[r * width + j];
                if (ctx.needs(0)) ctx.grad(0)[r * width + j] += g[r] * (y * inv - cs[r] * x / na);
                if (ctx.needs(1)) ctx.grad(1)[r * width + j] += g[r] * (x * inv - cs[r] * y / nb);
            }
        }
    });
}

Var reshape(Var a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    return a.tape()->record("reshape", std::move(out), {a}, [](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const Tensor& g = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
    const Tensor& av = a.value();
    if (av.rank() != 2 || count == 0 || start + count > av.cols()) {
        throw DimensionError("slice_cols out of range on " + shape_string(av.shape()));
    }
    const std::size_t rows = av.rows(), cols = av.cols();
    Tensor out({rows, count});
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < count; ++j) out(r, j) = av(r, start + j);
    }
    return a.tape()->record("slice_cols", std::move(out), {a}, [rows, cols, start, count](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const Tensor& g = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < count; ++j) ga[r * cols + start + j] += g[r * count + j];
        }
    });
}

Var concat_cols(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("concat_cols of nothing");
    Tape& t = *parts.front().tape();
    const std::size_t rows = parts.front().value().rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (Var p : parts) {
        same_tape(parts.front(), p);
        if (p.value().rank() != 2 || p.value().rows() != rows) throw DimensionError("concat_cols: row mismatch");
        widths.push_back(p.value().cols());
        total += widths.back();
    }
    Tensor out({rows, total});
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& pv = parts[k].value();
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < widths[k]; ++j) out(r, off + j) = pv(r, j);
        }
        off += widths[k];
    }
    return t.record("concat_cols", std::move(out), {parts.begin(), parts.end()},
                    [rows, total, widths](const BackwardContext& ctx) {
                        const Tensor& g = ctx.out_grad();
                        std::size_t off = 0;
                        for (std::size_t k = 0; k < widths.size(); ++k) {
                            if (ctx.needs(k)) {
                                Tensor& gk = ctx.grad(k);
                                for (std::size_t r = 0; r < rows; ++r) {
                                    for (std::size_t j = 0; j < widths[k]; ++j) gk[r * widths[k] + j] += g[r * total + off + j];
                                }
                            }
                            off += widths[k];
                        }
                    });
}

Var interleave_rows(std::span<const Var> parts) {
    if (parts.empty()) throw DimensionError("interleave_rows of nothing");
    Tape& t = *parts.front().tape();
    const Shape& s0 = parts.front().value().shape();
    if (s0.size() != 2) throw DimensionError("interleave_rows needs rank-2 operands");
    for (Var p : parts) {
        same_tape(parts.front(), p);
        if (p.value().shape() != s0) throw DimensionError("interleave_rows: shape mismatch");
    }
    const std::size_t batch = s0[0], width = s0[1], n = parts.size();
    Tensor out({batch * n, width});
    for (std::size_t j = 0; j < n; ++j) {
        const Tensor& pv = parts[j].value();
        for (std::size_t b = 0; b < batch; ++b) {
            std::copy_n(pv.row(b).begin(), width, out.row(b * n + j).begin());
        }
    }
    return t.record("interleave_rows", std::move(out), {parts.begin(), parts.end()},
                    [batch, width, n](const BackwardContext& ctx) {
                        const Tensor& g = ctx.out_grad();
                        for (std::size_t j = 0; j < n; ++j) {
                            if (!ctx.needs(j)) continue;
                            Tensor& gj = ctx.grad(j);
                            for (std::size_t b = 0; b < batch; ++b) {
                                for (std::size_t c = 0; c < width; ++c) gj(b, c) += g((b * n + j), c);
                            }
                        }
                    });
}

Var group_mean_rows(Var a, std::size_t group) {
    const Tensor& av = a.value();
    if (av.rank() != 2 || group == 0 || av.rows() % group != 0) {
        throw DimensionError("group_mean_rows: " + shape_string(av.shape()) + " by " + std::to_string(group));
    }
    const std::size_t batch = av.rows() / group, width = av.cols();
    Tensor out({batch, width});
    for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t j = 0; j < group; ++j) {
            for (std::size_t c = 0; c < width; ++c) out(b, c) += av(b * group + j, c);
        }
        for (std::size_t c = 0; c < width; ++c) out(b, c) /= static_cast<double>(group);
    }
    return a.tape()->record("group_mean_rows", std::move(out), {a}, [batch, width, group](const BackwardContext& ctx) {
        if (!ctx.needs(0)) return;
        const Tensor& g = ctx.out_grad();
        Tensor& ga = ctx.grad(0);
        const double inv = 1.0 / static_cast<double>(group);
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t j = 0; j < group; ++j) {
                for (std::size_t c = 0; c < width; ++c) ga(b * group + j, c) += g(b, c) * inv;
            }
        }
    });
}

}  // namespace dcan
