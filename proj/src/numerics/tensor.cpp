#include "situ/numerics/tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "situ/common/error.hpp"

namespace situ::num {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << ']';
    return os.str();
}

std::uint64_t next_node_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

void require_finite(std::span<const double> values, const char* where) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + where);
    }
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    for (auto d : shape) {
        if (d == 0) throw ShapeError("zero-sized dimension in " + shape_str(shape));
    }
    if (numel(shape) != values.size()) {
        throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) + " values");
    }
    require_finite(values, "tensor construction");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->id = next_node_id();
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
    const std::size_t n = numel(shape);
    return from(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::row(std::vector<double> values) {
    const std::size_t n = values.size();
    return from({1, n}, std::move(values));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
    Tensor t = from(std::move(shape), std::move(values));
    t.node_->requires_grad = true;
    return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::size() const { return node_->value.size(); }

std::size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows() on rank-" + std::to_string(rank()) + " tensor");
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols() on rank-" + std::to_string(rank()) + " tensor");
    return node_->shape[1];
}

std::span<const double> Tensor::values() const { return node_->value; }

std::span<double> Tensor::mutable_values() { return node_->value; }

std::span<const double> Tensor::grad() const { return node_->grad; }

std::vector<double> Tensor::to_vector() const { return node_->value; }

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::uint64_t Tensor::id() const { return node_->id; }

Tensor Tensor::detach() const { return from(node_->shape, node_->value); }

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

}  // namespace situ::num
