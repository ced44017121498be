#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace situ::num {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Storage behind a Tensor handle. Row-major, no strides or views.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::uint64_t id = 0;
};

// Shared handle to an immutable array of doubles. Copies of a Tensor alias the
// same node; use detach() for an independent copy that is off the tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor scalar(double v);
    static Tensor row(std::vector<double> values);
    // Leaf that takes part in differentiation.
    static Tensor parameter(Shape shape, std::vector<double> values);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t size() const;
    std::size_t rows() const;
    std::size_t cols() const;

    std::span<const double> values() const;
    // Only optimizers and checkpoint loading write through this.
    std::span<double> mutable_values();
    std::span<const double> grad() const;
    std::vector<double> to_vector() const;

    double item() const;
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const;
    std::uint64_t id() const;

    Tensor detach() const;
    void zero_grad();

    const std::shared_ptr<Node>& node() const { return node_; }
    static Tensor wrap(std::shared_ptr<Node> node) { return Tensor(std::move(node)); }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    std::shared_ptr<Node> node_;
};

std::uint64_t next_node_id();

void require_finite(std::span<const double> values, const char* where);

}  // namespace situ::num
