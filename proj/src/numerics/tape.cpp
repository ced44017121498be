#include "situ/numerics/tape.hpp"

#include <unordered_set>

#include "situ/common/error.hpp"

namespace situ::num {
namespace {
thread_local Tape* g_active = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active) { g_active = &tape; }

Tape::Scope::~Scope() { g_active = previous_; }

Tape* Tape::active() { return g_active; }

void Tape::record(std::string_view op, std::vector<std::shared_ptr<Node>> inputs, std::shared_ptr<Node> output,
                  BackwardFn backward) {
    entries_.push_back(TapeEntry{op, std::move(inputs), std::move(output), std::move(backward)});
}

GradientMap Tape::backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) throw ShapeError("backward() needs a scalar loss");
    const Node* target = loss.node().get();

    std::unordered_set<const Node*> produced;
    bool found = false;
    for (const auto& e : entries_) {
        produced.insert(e.output.get());
        if (e.output.get() == target) found = true;
    }
    if (!found) throw PreconditionError("backward(): loss is detached from this tape");

    for (auto& e : entries_) {
        e.output->grad.assign(e.output->value.size(), 0.0);
        for (auto& in : e.inputs) {
            if (in->requires_grad) in->grad.assign(in->value.size(), 0.0);
        }
    }
    loss.node()->grad[0] = 1.0;

    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward(*it->output, it->inputs);

    GradientMap grads;
    for (const auto& e : entries_) {
        for (const auto& in : e.inputs) {
            if (in->requires_grad && !produced.count(in.get())) grads.emplace(in->id, in->grad);
        }
    }
    return grads;
}

}  // namespace situ::num
