#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lulc/error.hpp"

namespace lulc::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Raised for misuse of the autodiff graph (non-scalar or detached loss,
// backward through an already consumed graph).
class GraphError : public Error {
public:
    explicit GraphError(const std::string& what) : Error(ErrorCategory::numerical, what) {}
};

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    // Empty until a gradient is first accumulated.
    std::vector<T> grad;
    bool requires_grad = false;
    // Set on interior nodes once backward() has consumed their graph.
    bool released = false;
    std::string op = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads `grad` of the node it belongs to and accumulates into inputs.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn && !released; }
    std::vector<T>& grad_buffer() {
        if (grad.empty()) grad.assign(value.size(), T(0));
        return grad;
    }
};

// Disables graph recording on the current thread while alive. Results of
// operations performed under the guard never require gradients.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

    static bool active();

private:
    bool previous_;
};

// Shared handle to a node in the autodiff graph. Copies alias the same node.
// Values are immutable once produced by an operation; only optimizer updates
// (through mutable_values) and gradient accumulation write into a node.
template <typename T>
class Tensor {
public:
    using value_type = T;
    using BackwardFn = std::function<void(Node<T>&)>;

    Tensor() = default;

    static Tensor from_values(Shape shape, std::vector<T> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor scalar(T value, bool requires_grad = false);

    // Builds the result of an operation. When recording is enabled and any
    // input requires a gradient, the node is attached to the graph with
    // `backward`; otherwise it is a constant.
    static Tensor make_result(Shape shape, std::vector<T> values, const std::vector<Tensor>& inputs,
                              std::string op, BackwardFn backward);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    // Negative indices count from the last dimension.
    std::size_t dim(int axis) const;
    std::size_t numel() const { return node_->value.size(); }

    std::span<const T> values() const { return node_->value; }
    std::span<T> mutable_values() { return node_->value; }
    T item() const;
    T at(std::size_t flat_index) const { return node_->value[flat_index]; }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool flag) { node_->requires_grad = flag; }
    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const T> grad() const { return node_->grad; }
    std::span<T> mutable_grad() { return node_->grad_buffer(); }
    void zero_grad() { node_->grad.clear(); }

    const std::string& op_name() const { return node_->op; }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

    // Fresh leaf holding a copy of the values.
    Tensor detach(bool requires_grad = false) const;

    template <typename U>
    Tensor<U> cast(bool requires_grad = false) const {
        std::vector<U> out(node_->value.begin(), node_->value.end());
        return Tensor<U>::from_values(node_->shape, std::move(out), requires_grad);
    }

private:
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    std::shared_ptr<Node<T>> node_;
};

// Reverse-mode sweep from a scalar loss. Gradients accumulate into every
// reachable leaf that requires them (call zero_grad to reset). The interior
// of the graph is released afterwards, so a second call on the same loss
// raises GraphError.
template <typename T>
void backward(const Tensor<T>& loss);

template <typename T>
void zero_grad(std::span<Tensor<T>> tensors) {
    for (auto& t : tensors) t.zero_grad();
}

// Test-only fault injection: corrupts the named backward rule so negative
// controls can confirm the gradient checker notices.
enum class Fault { none, gelu_backward, matmul_backward, layernorm_backward, softmax_backward };

void set_fault(Fault fault);
Fault active_fault();
Fault parse_fault(const std::string& name);

}  // namespace lulc::ad
