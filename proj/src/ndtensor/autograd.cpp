#include "adamat/autograd.hpp"

#include <algorithm>

namespace adamat {

void DecisionLog::apply(std::span<std::uint8_t> choices) {
    if (mode_ == Mode::kRecord) {
        entries_.emplace_back(choices.begin(), choices.end());
        return;
    }
    if (cursor_ >= entries_.size() || entries_[cursor_].size() != choices.size()) {
        throw std::logic_error("decision replay diverged from the recorded forward pass");
    }
    std::copy(entries_[cursor_].begin(), entries_[cursor_].end(), choices.begin());
    ++cursor_;
}

template <typename T>
Var<T> Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
    if (!value.all_finite()) throw NumericalError("non-finite value in leaf tensor");
    Node node;
    node.value = std::move(value);
    node.requires_grad = requires_grad;
    nodes_.push_back(std::move(node));
    return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Var<T> Tape<T>::record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn fn, const char* op) {
    if (backward_done_) throw std::logic_error("cannot record onto a tape after backward(); reset() it first");
    if (!value.all_finite()) {
        throw NumericalError(std::string("non-finite output from ") + op + " (shape " + shape_str(value.shape()) + ")");
    }
    bool needs = false;
    for (const auto& v : inputs) {
        if (&v.tape() != this) throw std::logic_error(std::string(op) + ": operands live on different tapes");
        needs = needs || nodes_[v.id()].requires_grad;
    }
    Node node;
    node.value = std::move(value);
    node.requires_grad = needs;
    node.op = op;
    if (needs) node.fn = std::move(fn);
    nodes_.push_back(std::move(node));
    return Var<T>(this, nodes_.size() - 1);
}

template <typename T>
Tensor<T> Tape<T>::grad(Var<T> v) const {
    const Node& n = nodes_.at(v.id());
    if (n.grad.empty()) return Tensor<T>::zeros(n.value.shape());
    return n.grad;
}

template <typename T>
Tensor<T>& Tape<T>::grad_buffer(std::size_t id) {
    Node& n = nodes_.at(id);
    if (n.grad.empty()) n.grad = Tensor<T>::zeros(n.value.shape());
    return n.grad;
}

template <typename T>
void Tape<T>::accumulate(std::size_t id, const Tensor<T>& g) {
    Node& n = nodes_.at(id);
    if (!n.requires_grad) return;
    if (g.numel() != n.value.numel()) throw ShapeError("gradient extent mismatch during backward");
    Tensor<T>& buf = grad_buffer(id);
    T* dst = buf.ptr();
    const T* src = g.ptr();
    for (std::size_t i = 0, e = buf.numel(); i < e; ++i) dst[i] += src[i];
}

template <typename T>
void Tape<T>::backward(Var<T> loss) {
    if (backward_done_) throw std::logic_error("backward() called twice on the same tape without reset()");
    if (loss.value().numel() != 1) {
        throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
    }
    backward_done_ = true;
    if (!nodes_[loss.id()].requires_grad) return;
    grad_buffer(loss.id()).fill(T(1));
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.fn || n.grad.empty()) continue;
        n.fn(*this, n.grad, n.value);
    }
}

template <typename T>
void Tape<T>::reset() {
    nodes_.clear();
    backward_done_ = false;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace adamat
