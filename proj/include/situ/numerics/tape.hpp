#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string_view>
#include <vector>

#include "situ/numerics/tensor.hpp"

namespace situ::num {

// Accumulates gradients of `out` into the inputs that require them.
using BackwardFn = std::function<void(const Node& out, const std::vector<std::shared_ptr<Node>>& inputs)>;

struct TapeEntry {
    std::string_view op;
    std::vector<std::shared_ptr<Node>> inputs;
    std::shared_ptr<Node> output;
    BackwardFn backward;
};

// Leaf node id -> gradient.
using GradientMap = std::map<std::uint64_t, std::vector<double>>;

// Ordered record of differentiable operations. Operations are appended as they
// execute, so every entry's inputs were produced before it (topological order).
// A tape is bound to the current thread through a Scope; ops executed without an
// active tape produce constants.
class Tape {
public:
    class Scope {
    public:
        explicit Scope(Tape& tape);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* previous_;
    };

    static Tape* active();

    void record(std::string_view op, std::vector<std::shared_ptr<Node>> inputs, std::shared_ptr<Node> output,
                BackwardFn backward);

    // Reverse-mode sweep from a scalar loss. All gradients touched by this tape
    // are reset first, so repeated calls return identical results.
    GradientMap backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }
    const std::vector<TapeEntry>& entries() const { return entries_; }
    void clear() { entries_.clear(); }

private:
    std::vector<TapeEntry> entries_;
};

inline GradientMap backward(const Tensor& loss, Tape& tape) { return tape.backward(loss); }

}  // namespace situ::num
