#include "lulc/ad/tensor.hpp"

#include <atomic>
#include <sstream>
#include <unordered_set>

namespace lulc::ad {

std::size_t numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace {
thread_local bool g_no_grad = false;
std::atomic<Fault> g_fault{Fault::none};
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }
bool NoGradGuard::active() { return g_no_grad; }

void set_fault(Fault fault) { g_fault.store(fault); }
Fault active_fault() { return g_fault.load(std::memory_order_relaxed); }

Fault parse_fault(const std::string& name) {
    if (name.empty() || name == "none") return Fault::none;
    if (name == "gelu") return Fault::gelu_backward;
    if (name == "matmul") return Fault::matmul_backward;
    if (name == "layernorm") return Fault::layernorm_backward;
    if (name == "softmax") return Fault::softmax_backward;
    throw ConfigError("unknown fault '" + name + "' (expected gelu, matmul, layernorm, softmax)");
}

template <typename T>
Tensor<T> Tensor<T>::from_values(Shape shape, std::vector<T> values, bool requires_grad) {
    for (auto d : shape) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
    }
    if (ad::numel(shape) != values.size()) {
        throw ShapeError("shape " + to_string(shape) + " needs " + std::to_string(ad::numel(shape)) +
                         " values, got " + std::to_string(values.size()));
    }
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
    const auto n = ad::numel(shape);
    return from_values(std::move(shape), std::vector<T>(n, T(0)), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
    const auto n = ad::numel(shape);
    return from_values(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::make_result(Shape shape, std::vector<T> values, const std::vector<Tensor>& inputs,
                                 std::string op, BackwardFn backward) {
    Tensor out = from_values(std::move(shape), std::move(values), false);
    out.node_->op = std::move(op);
    if (NoGradGuard::active()) return out;
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (!any) return out;
    out.node_->requires_grad = true;
    out.node_->inputs.reserve(inputs.size());
    for (const auto& in : inputs) out.node_->inputs.push_back(in.node_);
    out.node_->backward_fn = std::move(backward);
    return out;
}

template <typename T>
std::size_t Tensor<T>::dim(int axis) const {
    const int r = static_cast<int>(rank());
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(shape()));
    }
    return node_->shape[static_cast<std::size_t>(a)];
}

template <typename T>
T Tensor<T>::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor of shape " + to_string(shape()));
    return node_->value[0];
}

template <typename T>
Tensor<T> Tensor<T>::detach(bool requires_grad) const {
    return from_values(node_->shape, node_->value, requires_grad);
}

template <typename T>
void backward(const Tensor<T>& loss) {
    if (!loss.defined()) throw GraphError("backward() on an undefined tensor");
    if (loss.numel() != 1) {
        throw GraphError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
    }
    Node<T>* root = loss.node().get();
    if (root->released) throw GraphError("graph already consumed by a previous backward()");
    if (!root->requires_grad) throw GraphError("loss is detached: no input requires a gradient");

    // Iterative post-order DFS gives producers before consumers.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node<T>* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->grad_buffer()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>* node = *it;
        if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
    }
    for (Node<T>* node : order) {
        if (!node->backward_fn) continue;
        node->grad.clear();
        node->grad.shrink_to_fit();
        node->inputs.clear();
        node->backward_fn = nullptr;
        node->released = true;
    }
}

template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);

}  // namespace lulc::ad
