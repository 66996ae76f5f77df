#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adamat/tensor.hpp"

namespace adamat {

/// Records the outcome of every discrete choice a forward pass makes (ReLU
/// on/off, argmax selections, |x| sign) so that later passes can be forced to
/// take the same branches. Finite-difference checks replay the pattern of the
/// analytic pass, which keeps every perturbed evaluation inside one smooth
/// piece of the function.
class DecisionLog {
   public:
    enum class Mode { kRecord, kReplay };

    Mode mode() const { return mode_; }
    void start_record() {
        mode_ = Mode::kRecord;
        entries_.clear();
        cursor_ = 0;
    }
    void start_replay() {
        mode_ = Mode::kReplay;
        cursor_ = 0;
    }

    /// Record mode stores `choices`; replay mode overwrites them with the stored pattern.
    void apply(std::span<std::uint8_t> choices);

   private:
    Mode mode_ = Mode::kRecord;
    std::vector<std::vector<std::uint8_t>> entries_;
    std::size_t cursor_ = 0;
};

template <typename T>
class Tape;

/// Handle to a node on a tape.
template <typename T>
class Var {
   public:
    Var() = default;
    Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape<T>& tape() const { return *tape_; }
    std::size_t id() const { return id_; }
    bool valid() const { return tape_ != nullptr; }

    const Tensor<T>& value() const;
    const Shape& shape() const { return value().shape(); }
    std::size_t dim(std::size_t i) const { return value().dim(i); }
    bool requires_grad() const;

   private:
    Tape<T>* tape_ = nullptr;
    std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in execution order, so the reverse
/// pass walks them by descending index. A tape supports exactly one backward
/// pass; call reset() to reuse it.
template <typename T>
class Tape {
   public:
    /// Accumulates gradient contributions for the inputs of one node, given the
    /// node's output gradient and output value.
    using BackwardFn = std::function<void(Tape&, const Tensor<T>& out_grad, const Tensor<T>& out_value)>;

    Tape() = default;
    explicit Tape(DecisionLog* log) : log_(log) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<T> leaf(Tensor<T> value, bool requires_grad = false);
    Var<T> constant(Tensor<T> value) { return leaf(std::move(value), false); }

    /// Appends the result of a primitive. `fn` is dropped when no input needs a gradient.
    Var<T> record(Tensor<T> value, std::span<const Var<T>> inputs, BackwardFn fn, const char* op);

    const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

    /// Gradient of the last backward() target with respect to `v`; zeros when `v` was unused.
    Tensor<T> grad(Var<T> v) const;

    /// Adds `g` into the gradient slot of node `id` (allocating it on first use).
    void accumulate(std::size_t id, const Tensor<T>& g);
    /// Mutable gradient buffer for node `id`, allocated as zeros on first use.
    Tensor<T>& grad_buffer(std::size_t id);

    void backward(Var<T> loss);
    void reset();

    std::size_t size() const { return nodes_.size(); }
    bool backward_done() const { return backward_done_; }

    void decide(std::span<std::uint8_t> choices) {
        if (log_) log_->apply(choices);
    }

   private:
    struct Node {
        Tensor<T> value;
        Tensor<T> grad;
        BackwardFn fn;
        bool requires_grad = false;
        const char* op = "leaf";
    };

    std::deque<Node> nodes_;
    DecisionLog* log_ = nullptr;
    bool backward_done_ = false;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
    return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
    return tape_->requires_grad(id_);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace adamat
