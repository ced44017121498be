#include "situ/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "situ/common/error.hpp"
#include "situ/numerics/kernels.hpp"
#include "situ/numerics/tape.hpp"

namespace situ::num {
namespace {

using NodePtr = std::shared_ptr<Node>;
using Inputs = std::vector<NodePtr>;

bool any_requires_grad(const Inputs& inputs) {
    for (const auto& in : inputs) {
        if (in->requires_grad) return true;
    }
    return false;
}

Tensor emit(const char* op, Shape shape, std::vector<double> values, Inputs inputs, BackwardFn backward) {
    require_finite(values, op);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->id = next_node_id();
    Tape* tape = Tape::active();
    if (tape != nullptr && any_requires_grad(inputs)) {
        node->requires_grad = true;
        tape->record(op, std::move(inputs), node, std::move(backward));
    }
    return Tensor::wrap(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

void require_rank2(const Tensor& a, const char* op) {
    if (a.rank() != 2) throw ShapeError(std::string(op) + " expects a rank-2 tensor, got " + shape_str(a.shape()));
}

// Elementwise unary op given f(x) and df/dx expressed via (x, y).
template <class F, class D>
Tensor unary(const char* op, const Tensor& a, F f, D dfdx) {
    const auto x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return emit(op, a.shape(), std::move(y), {a.node()}, [dfdx](const Node& out, const Inputs& in) {
        Node& a_node = *in[0];
        if (!a_node.requires_grad) return;
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            a_node.grad[i] += out.grad[i] * dfdx(a_node.value[i], out.value[i]);
        }
    });
}

void accumulate(Node& node, const std::vector<double>& g) {
    kernels::active().axpy(g.size(), 1.0, g.data(), node.grad.data());
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> y(a.size());
    kernels::active().add(y.size(), a.values().data(), b.values().data(), y.data());
    return emit("add", a.shape(), std::move(y), {a.node(), b.node()}, [](const Node& out, const Inputs& in) {
        for (const auto& n : in) {
            if (n->requires_grad) accumulate(*n, out.grad);
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto x = a.values();
    const auto z = b.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
    return emit("sub", a.shape(), std::move(y), {a.node(), b.node()}, [](const Node& out, const Inputs& in) {
        if (in[0]->requires_grad) accumulate(*in[0], out.grad);
        if (in[1]->requires_grad) kernels::active().axpy(out.grad.size(), -1.0, out.grad.data(), in[1]->grad.data());
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> y(a.size());
    kernels::active().mul(y.size(), a.values().data(), b.values().data(), y.data());
    return emit("mul", a.shape(), std::move(y), {a.node(), b.node()}, [](const Node& out, const Inputs& in) {
        const auto& k = kernels::active();
        std::vector<double> tmp(out.grad.size());
        if (in[0]->requires_grad) {
            k.mul(tmp.size(), out.grad.data(), in[1]->value.data(), tmp.data());
            accumulate(*in[0], tmp);
        }
        if (in[1]->requires_grad) {
            k.mul(tmp.size(), out.grad.data(), in[0]->value.data(), tmp.data());
            accumulate(*in[1], tmp);
        }
    });
}

Tensor div(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "div");
    const auto x = a.values();
    const auto z = b.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (z[i] == 0.0) throw NumericError("div: division by zero");
        y[i] = x[i] / z[i];
    }
    return emit("div", a.shape(), std::move(y), {a.node(), b.node()}, [](const Node& out, const Inputs& in) {
        const Node& num = *in[0];
        const Node& den = *in[1];
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            if (num.requires_grad) in[0]->grad[i] += out.grad[i] / den.value[i];
            if (den.requires_grad) in[1]->grad[i] -= out.grad[i] * out.value[i] / den.value[i];
        }
    });
}

namespace {
template <bool TakeMin>
Tensor select_extreme(const char* op, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, op);
    const auto x = a.values();
    const auto z = b.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = TakeMin ? std::min(x[i], z[i]) : std::max(x[i], z[i]);
    return emit(op, a.shape(), std::move(y), {a.node(), b.node()}, [](const Node& out, const Inputs& in) {
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            const double av = in[0]->value[i];
            const double bv = in[1]->value[i];
            const bool from_a = TakeMin ? av <= bv : av >= bv;
            Node& target = from_a ? *in[0] : *in[1];
            if (target.requires_grad) target.grad[i] += out.grad[i];
        }
    });
}
}  // namespace

Tensor minimum(const Tensor& a, const Tensor& b) { return select_extreme<true>("minimum", a, b); }

Tensor maximum(const Tensor& a, const Tensor& b) { return select_extreme<false>("maximum", a, b); }

Tensor scale(const Tensor& a, double c) {
    return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
    return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    for (double v : a.values()) {
        if (v <= 0.0) throw NumericError("log of non-positive value");
    }
    return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
    for (double v : a.values()) {
        if (v < 0.0) throw NumericError("sqrt of negative value");
    }
    return unary("sqrt", a, [](double x) { return std::sqrt(x); },
                 [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor abs(const Tensor& a) {
    return unary("abs", a, [](double x) { return std::fabs(x); },
                 [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor square(const Tensor& a) {
    return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softplus(const Tensor& a) {
    return unary(
        "softplus", a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); },
        [](double x, double) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    require_rank2(a, "add_row");
    require_rank2(row, "add_row");
    const std::size_t m = a.rows(), n = a.cols();
    if (row.rows() != 1 || row.cols() != n) {
        throw ShapeError("add_row: " + shape_str(a.shape()) + " + " + shape_str(row.shape()));
    }
    std::vector<double> y(m * n);
    const auto& k = kernels::active();
    for (std::size_t i = 0; i < m; ++i) k.add(n, a.values().data() + i * n, row.values().data(), y.data() + i * n);
    return emit("add_row", a.shape(), std::move(y), {a.node(), row.node()}, [m, n](const Node& out, const Inputs& in) {
        const auto& k = kernels::active();
        if (in[0]->requires_grad) accumulate(*in[0], out.grad);
        if (in[1]->requires_grad) {
            for (std::size_t i = 0; i < m; ++i) k.axpy(n, 1.0, out.grad.data() + i * n, in[1]->grad.data());
        }
    });
}

Tensor broadcast_row(const Tensor& row, std::size_t m) {
    require_rank2(row, "broadcast_row");
    if (row.rows() != 1) throw ShapeError("broadcast_row expects [1 x n]");
    const std::size_t n = row.cols();
    std::vector<double> y(m * n);
    for (std::size_t i = 0; i < m; ++i) std::copy(row.values().begin(), row.values().end(), y.begin() + i * n);
    return emit("broadcast_row", {m, n}, std::move(y), {row.node()}, [m, n](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) kernels::active().axpy(n, 1.0, out.grad.data() + i * n, in[0]->grad.data());
    });
}

Tensor broadcast_col(const Tensor& col, std::size_t n) {
    require_rank2(col, "broadcast_col");
    if (col.cols() != 1) throw ShapeError("broadcast_col expects [m x 1]");
    const std::size_t m = col.rows();
    std::vector<double> y(m * n);
    for (std::size_t i = 0; i < m; ++i) std::fill(y.begin() + i * n, y.begin() + (i + 1) * n, col.values()[i]);
    return emit("broadcast_col", {m, n}, std::move(y), {col.node()}, [m, n](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += out.grad[i * n + j];
            in[0]->grad[i] += s;
        }
    });
}

Tensor scale_rows(const Tensor& a, const std::vector<double>& factors) {
    require_rank2(a, "scale_rows");
    const std::size_t m = a.rows(), n = a.cols();
    if (factors.size() != m) throw ShapeError("scale_rows: factor count mismatch");
    std::vector<double> y(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) y[i * n + j] = factors[i] * a.values()[i * n + j];
    }
    return emit("scale_rows", a.shape(), std::move(y), {a.node()}, [factors, n](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (std::size_t i = 0; i < factors.size(); ++i) {
            kernels::active().axpy(n, factors[i], out.grad.data() + i * n, in[0]->grad.data() + i * n);
        }
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return emit("sum", {1}, {s}, {a.node()}, [](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (auto& g : in[0]->grad) g += out.grad[0];
    });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum_rows(const Tensor& a) {
    require_rank2(a, "sum_rows");
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> y(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) y[i] += a.values()[i * n + j];
    }
    return emit("sum_rows", {m, 1}, std::move(y), {a.node()}, [m, n](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) in[0]->grad[i * n + j] += out.grad[i];
        }
    });
}

Tensor sum_cols(const Tensor& a) {
    require_rank2(a, "sum_cols");
    const std::size_t m = a.rows(), n = a.cols();
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) kernels::active().axpy(n, 1.0, a.values().data() + i * n, y.data());
    return emit("sum_cols", {1, n}, std::move(y), {a.node()}, [m, n](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) kernels::active().axpy(n, 1.0, out.grad.data(), in[0]->grad.data() + i * n);
    });
}

namespace {
std::vector<double> transposed(const std::vector<double>& v, std::size_t m, std::size_t n) {
    std::vector<double> t(v.size());
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) t[j * m + i] = v[i * n + j];
    }
    return t;
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> y(m * n);
    kernels::active().gemm(m, n, k, a.values().data(), b.values().data(), y.data());
    return emit("matmul", {m, n}, std::move(y), {a.node(), b.node()}, [m, k, n](const Node& out, const Inputs& in) {
        const auto& kt = kernels::active();
        if (in[0]->requires_grad) {
            // dA = dC * B^T
            const auto bt = transposed(in[1]->value, k, n);
            std::vector<double> da(m * k);
            kt.gemm(m, k, n, out.grad.data(), bt.data(), da.data());
            accumulate(*in[0], da);
        }
        if (in[1]->requires_grad) {
            // dB = A^T * dC
            const auto at = transposed(in[0]->value, m, k);
            std::vector<double> db(k * n);
            kt.gemm(k, n, m, at.data(), out.grad.data(), db.data());
            accumulate(*in[1], db);
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_rank2(a, "transpose");
    const std::size_t m = a.rows(), n = a.cols();
    return emit("transpose", {n, m}, transposed(a.to_vector(), m, n), {a.node()},
                [m, n](const Node& out, const Inputs& in) {
                    if (!in[0]->requires_grad) return;
                    accumulate(*in[0], transposed(out.grad, n, m));
                });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size()) {
        throw ShapeError("reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
    }
    return emit("reshape", std::move(shape), a.to_vector(), {a.node()}, [](const Node& out, const Inputs& in) {
        if (in[0]->requires_grad) accumulate(*in[0], out.grad);
    });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
    require_rank2(a, "slice_rows");
    const std::size_t n = a.cols();
    if (begin >= end || end > a.rows()) throw ShapeError("slice_rows: bad range");
    std::vector<double> y(a.values().begin() + begin * n, a.values().begin() + end * n);
    return emit("slice_rows", {end - begin, n}, std::move(y), {a.node()},
                [begin, n](const Node& out, const Inputs& in) {
                    if (!in[0]->requires_grad) return;
                    kernels::active().axpy(out.grad.size(), 1.0, out.grad.data(), in[0]->grad.data() + begin * n);
                });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    require_rank2(a, "slice_cols");
    const std::size_t m = a.rows(), n = a.cols(), w = end - begin;
    if (begin >= end || end > n) throw ShapeError("slice_cols: bad range");
    std::vector<double> y(m * w);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy_n(a.values().begin() + i * n + begin, w, y.begin() + i * w);
    }
    return emit("slice_cols", {m, w}, std::move(y), {a.node()}, [m, n, w, begin](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            kernels::active().axpy(w, 1.0, out.grad.data() + i * w, in[0]->grad.data() + i * n + begin);
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no inputs");
    const std::size_t n = parts[0].cols();
    std::size_t m = 0;
    Inputs inputs;
    std::vector<double> y;
    for (const auto& p : parts) {
        require_rank2(p, "concat_rows");
        if (p.cols() != n) throw ShapeError("concat_rows: column mismatch");
        m += p.rows();
        y.insert(y.end(), p.values().begin(), p.values().end());
        inputs.push_back(p.node());
    }
    return emit("concat_rows", {m, n}, std::move(y), std::move(inputs), [](const Node& out, const Inputs& in) {
        std::size_t offset = 0;
        for (const auto& p : in) {
            if (p->requires_grad) kernels::active().axpy(p->value.size(), 1.0, out.grad.data() + offset, p->grad.data());
            offset += p->value.size();
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    const std::size_t m = parts[0].rows();
    std::size_t n = 0;
    Inputs inputs;
    std::vector<std::size_t> widths;
    for (const auto& p : parts) {
        require_rank2(p, "concat_cols");
        if (p.rows() != m) throw ShapeError("concat_cols: row mismatch");
        widths.push_back(p.cols());
        n += p.cols();
        inputs.push_back(p.node());
    }
    std::vector<double> y(m * n);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const std::size_t w = widths[k];
        for (std::size_t i = 0; i < m; ++i) std::copy_n(parts[k].values().begin() + i * w, w, y.begin() + i * n + offset);
        offset += w;
    }
    return emit("concat_cols", {m, n}, std::move(y), std::move(inputs),
                [m, n, widths](const Node& out, const Inputs& in) {
                    std::size_t off = 0;
                    for (std::size_t k = 0; k < in.size(); ++k) {
                        const std::size_t w = widths[k];
                        if (in[k]->requires_grad) {
                            for (std::size_t i = 0; i < m; ++i) {
                                kernels::active().axpy(w, 1.0, out.grad.data() + i * n + off, in[k]->grad.data() + i * w);
                            }
                        }
                        off += w;
                    }
                });
}

Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices) {
    require_rank2(table, "gather_rows");
    const std::size_t n = table.cols();
    if (indices.empty()) throw ShapeError("gather_rows: no indices");
    std::vector<double> y(indices.size() * n);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= table.rows()) throw ShapeError("gather_rows: index out of range");
        std::copy_n(table.values().begin() + indices[i] * n, n, y.begin() + i * n);
    }
    return emit("gather_rows", {indices.size(), n}, std::move(y), {table.node()},
                [indices, n](const Node& out, const Inputs& in) {
                    if (!in[0]->requires_grad) return;
                    for (std::size_t i = 0; i < indices.size(); ++i) {
                        kernels::active().axpy(n, 1.0, out.grad.data() + i * n, in[0]->grad.data() + indices[i] * n);
                    }
                });
}

Tensor pick(const Tensor& a, const std::vector<std::size_t>& index) {
    require_rank2(a, "pick");
    const std::size_t m = a.rows(), n = a.cols();
    if (index.size() != m) throw ShapeError("pick: index count mismatch");
    std::vector<double> y(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (index[i] >= n) throw ShapeError("pick: index out of range");
        y[i] = a.values()[i * n + index[i]];
    }
    return emit("pick", {m, 1}, std::move(y), {a.node()}, [index, n](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (std::size_t i = 0; i < index.size(); ++i) in[0]->grad[i * n + index[i]] += out.grad[i];
    });
}

namespace {

struct AxisLayout {
    std::size_t outer, len, inner;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
    if (axis >= shape.size()) throw ShapeError("softmax: axis out of range");
    AxisLayout l{1, shape[axis], 1};
    for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
    return l;
}

template <bool Log>
Tensor softmax_impl(const Tensor& a, std::size_t axis) {
    const AxisLayout l = axis_layout(a.shape(), axis);
    const auto x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t o = 0; o < l.outer; ++o) {
        for (std::size_t in = 0; in < l.inner; ++in) {
            auto idx = [&](std::size_t i) { return (o * l.len + i) * l.inner + in; };
            double mx = x[idx(0)];
            for (std::size_t i = 1; i < l.len; ++i) mx = std::max(mx, x[idx(i)]);
            double z = 0.0;
            for (std::size_t i = 0; i < l.len; ++i) z += std::exp(x[idx(i)] - mx);
            const double logz = std::log(z);
            for (std::size_t i = 0; i < l.len; ++i) {
                y[idx(i)] = Log ? x[idx(i)] - mx - logz : std::exp(x[idx(i)] - mx) / z;
            }
        }
    }
    return emit(Log ? "log_softmax" : "softmax", a.shape(), std::move(y), {a.node()},
                [l](const Node& out, const Inputs& in) {
                    if (!in[0]->requires_grad) return;
                    for (std::size_t o = 0; o < l.outer; ++o) {
                        for (std::size_t inn = 0; inn < l.inner; ++inn) {
                            auto idx = [&](std::size_t i) { return (o * l.len + i) * l.inner + inn; };
                            if (Log) {
                                double gsum = 0.0;
                                for (std::size_t i = 0; i < l.len; ++i) gsum += out.grad[idx(i)];
                                for (std::size_t i = 0; i < l.len; ++i) {
                                    in[0]->grad[idx(i)] += out.grad[idx(i)] - std::exp(out.value[idx(i)]) * gsum;
                                }
                            } else {
                                double dot = 0.0;
                                for (std::size_t i = 0; i < l.len; ++i) dot += out.grad[idx(i)] * out.value[idx(i)];
                                for (std::size_t i = 0; i < l.len; ++i) {
                                    in[0]->grad[idx(i)] += out.value[idx(i)] * (out.grad[idx(i)] - dot);
                                }
                            }
                        }
                    }
                });
}

}  // namespace

Tensor softmax(const Tensor& a, std::size_t axis) { return softmax_impl<false>(a, axis); }

Tensor log_softmax(const Tensor& a, std::size_t axis) { return softmax_impl<true>(a, axis); }

Tensor masked_softmax(const Tensor& a, const std::vector<bool>& keep) {
    require_rank2(a, "masked_softmax");
    const std::size_t m = a.rows(), n = a.cols();
    if (keep.size() != n) throw ShapeError("masked_softmax: mask length mismatch");
    if (std::find(keep.begin(), keep.end(), true) == keep.end()) {
        throw PreconditionError("masked_softmax: every position is masked");
    }
    const auto x = a.values();
    std::vector<double> y(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        double mx = -INFINITY;
        for (std::size_t j = 0; j < n; ++j) {
            if (keep[j]) mx = std::max(mx, x[i * n + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (keep[j]) z += std::exp(x[i * n + j] - mx);
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (keep[j]) y[i * n + j] = std::exp(x[i * n + j] - mx) / z;
        }
    }
    return emit("masked_softmax", a.shape(), std::move(y), {a.node()}, [m, n](const Node& out, const Inputs& in) {
        if (!in[0]->requires_grad) return;
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += out.grad[i * n + j] * out.value[i * n + j];
            for (std::size_t j = 0; j < n; ++j) {
                in[0]->grad[i * n + j] += out.value[i * n + j] * (out.grad[i * n + j] - dot);
            }
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_rank2(x, "layer_norm");
    const std::size_t m = x.rows(), n = x.cols();
    if (gamma.size() != n || beta.size() != n) throw ShapeError("layer_norm: affine size mismatch");
    std::vector<double> xhat(m * n), inv_std(m), y(m * n);
    const auto xv = x.values();
    const auto g = gamma.values();
    const auto b = beta.values();
    for (std::size_t i = 0; i < m; ++i) {
        double mu = 0.0;
        for (std::size_t j = 0; j < n; ++j) mu += xv[i * n + j];
        mu /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = xv[i * n + j] - mu;
            var += d * d;
        }
        var /= static_cast<double>(n);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < n; ++j) {
            xhat[i * n + j] = (xv[i * n + j] - mu) * inv_std[i];
            y[i * n + j] = xhat[i * n + j] * g[j] + b[j];
        }
    }
    return emit("layer_norm", x.shape(), std::move(y), {x.node(), gamma.node(), beta.node()},
                [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Node& out, const Inputs& in) {
                    Node& xn = *in[0];
                    Node& gn = *in[1];
                    Node& bn = *in[2];
                    for (std::size_t i = 0; i < m; ++i) {
                        const double* dy = out.grad.data() + i * n;
                        const double* xh = xhat.data() + i * n;
                        if (gn.requires_grad || bn.requires_grad) {
                            for (std::size_t j = 0; j < n; ++j) {
                                if (gn.requires_grad) gn.grad[j] += dy[j] * xh[j];
                                if (bn.requires_grad) bn.grad[j] += dy[j];
                            }
                        }
                        if (!xn.requires_grad) continue;
                        double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                        for (std::size_t j = 0; j < n; ++j) {
                            const double dxh = dy[j] * gn.value[j];
                            sum_dxh += dxh;
                            sum_dxh_xh += dxh * xh[j];
                        }
                        const double inv_n = 1.0 / static_cast<double>(n);
                        for (std::size_t j = 0; j < n; ++j) {
                            const double dxh = dy[j] * gn.value[j];
                            xn.grad[i * n + j] += inv_std[i] * (dxh - inv_n * sum_dxh - xh[j] * inv_n * sum_dxh_xh);
                        }
                    }
                });
}

Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets) {
    return neg(pick(log_softmax(logits, 1), targets));
}

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets) {
    if (targets.size() != logits.size()) throw ShapeError("bce_with_logits: target count mismatch");
    // softplus(x) - t * x
    const Tensor t = Tensor::from(logits.shape(), targets);
    return sub(softplus(logits), mul(t, logits));
}

Tensor l2_normalize_rows(const Tensor& a) {
    require_rank2(a, "l2_normalize_rows");
    const std::size_t m = a.rows(), n = a.cols();
    const auto x = a.values();
    std::vector<double> norms(m), y(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        norms[i] = std::sqrt(kernels::active().dot(n, x.data() + i * n, x.data() + i * n));
        if (norms[i] == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) y[i * n + j] = x[i * n + j] / norms[i];
    }
    return emit("l2_normalize_rows", a.shape(), std::move(y), {a.node()},
                [m, n, norms = std::move(norms)](const Node& out, const Inputs& in) {
                    if (!in[0]->requires_grad) return;
                    for (std::size_t i = 0; i < m; ++i) {
                        if (norms[i] == 0.0) continue;
                        const double* yv = out.value.data() + i * n;
                        const double* dy = out.grad.data() + i * n;
                        double proj = 0.0;
                        for (std::size_t j = 0; j < n; ++j) proj += yv[j] * dy[j];
                        for (std::size_t j = 0; j < n; ++j) in[0]->grad[i * n + j] += (dy[j] - yv[j] * proj) / norms[i];
                    }
                });
}

Tensor cosine_rows(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "cosine_rows");
    return sum_rows(mul(l2_normalize_rows(a), l2_normalize_rows(b)));
}

}  // namespace situ::num
