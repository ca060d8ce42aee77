#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "star/errors.hpp"

namespace star {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

} // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

template <typename Scalar>
struct Node {
    Mat<Scalar> value;
    Mat<Scalar> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads self.grad and accumulates into the parents.
    std::function<void(Node&)> backward;

    bool is_leaf() const { return !backward; }

    void accumulate(const Mat<Scalar>& g) {
        if (!requires_grad) return;
        if (grad.size() == 0)
            grad = g;
        else
            grad += g;
    }

    template <typename Expr>
    void accumulate_expr(const Expr& g) {
        if (!requires_grad) return;
        if (grad.size() == 0)
            grad = g;
        else
            grad += g;
    }
};

inline std::string shape_string(Index rows, Index cols) {
    std::ostringstream os;
    os << "[" << rows << "x" << cols << "]";
    return os.str();
}

template <typename Derived>
void check_finite(const Eigen::DenseBase<Derived>& m, const char* where) {
    if (!m.allFinite())
        throw NumericError(std::string("non-finite value produced by ") + where);
}

/// Handle to a dense 2-D array that participates in a dynamically recorded
/// reverse-mode graph. Copies share the underlying node.
template <typename Scalar>
class BasicTensor {
public:
    using scalar_type = Scalar;
    using matrix_type = Mat<Scalar>;
    using node_type = Node<Scalar>;

    BasicTensor() : node_(std::make_shared<node_type>()) {}

    explicit BasicTensor(matrix_type value, bool requires_grad = false)
        : node_(std::make_shared<node_type>()) {
        check_finite(value, "tensor construction");
        node_->value = std::move(value);
        node_->requires_grad = requires_grad;
    }

    static BasicTensor zeros(Index rows, Index cols, bool requires_grad = false) {
        return BasicTensor(matrix_type::Zero(rows, cols), requires_grad);
    }

    static BasicTensor scalar(Scalar s) {
        matrix_type m(1, 1);
        m(0, 0) = s;
        return BasicTensor(std::move(m));
    }

    // Result of an operation; records parents only when any of them needs grad.
    static BasicTensor from_op(matrix_type value, std::vector<BasicTensor> inputs,
                               std::function<void(node_type&)> backward, const char* name) {
        check_finite(value, name);
        BasicTensor out;
        out.node_->value = std::move(value);
        if (!grad_enabled()) return out;
        bool any = false;
        for (const auto& in : inputs) any = any || in.requires_grad();
        if (!any) return out;
        out.node_->requires_grad = true;
        out.node_->parents.reserve(inputs.size());
        for (auto& in : inputs) out.node_->parents.push_back(in.node_);
        out.node_->backward = std::move(backward);
        return out;
    }

    Index rows() const { return node_->value.rows(); }
    Index cols() const { return node_->value.cols(); }
    Index size() const { return node_->value.size(); }
    std::array<Index, 2> shape() const { return {rows(), cols()}; }
    std::string shape_str() const { return shape_string(rows(), cols()); }

    const matrix_type& value() const { return node_->value; }
    // Direct write access for optimizers and finite-difference probes.
    matrix_type& mutable_value() { return node_->value; }

    bool has_grad() const { return node_->grad.size() != 0; }
    // Zero-filled when no gradient has reached this tensor.
    matrix_type grad() const {
        if (has_grad()) return node_->grad;
        return matrix_type::Zero(rows(), cols());
    }
    void zero_grad() { node_->grad.resize(0, 0); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    Scalar item() const {
        if (size() != 1) throw DimensionError("item() on non-scalar tensor " + shape_str());
        return node_->value(0, 0);
    }

    // Fresh leaf holding a copy of the values, detached from any graph.
    BasicTensor detach() const { return BasicTensor(node_->value, false); }

    node_type* node() const { return node_.get(); }
    bool same_node(const BasicTensor& other) const { return node_ == other.node_; }

private:
    std::shared_ptr<node_type> node_;
};

/// Reverse pass from a scalar loss. Leaf tensors keep their gradients; the
/// interior of the recorded graph is released afterwards.
template <typename Scalar>
void backward(const BasicTensor<Scalar>& loss) {
    using NodeT = Node<Scalar>;
    if (loss.size() != 1)
        throw DimensionError("backward() requires a scalar loss, got " + loss.shape_str());
    if (!std::isfinite(loss.item())) throw NumericError("backward() on a non-finite loss");
    NodeT* root = loss.node();
    if (!root->requires_grad) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<NodeT*> order;
    std::unordered_set<NodeT*> visited;
    std::vector<std::pair<NodeT*, std::size_t>> stack{{root, 0}};
    visited.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            NodeT* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->accumulate(Mat<Scalar>::Constant(1, 1, Scalar(1)));
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        NodeT* node = *it;
        if (node->backward && node->grad.size() != 0) node->backward(*node);
    }
    for (NodeT* node : order) {
        if (node->is_leaf()) continue;
        node->backward = nullptr;
        node->parents.clear();
        node->grad.resize(0, 0);
    }
}

using Tensor = BasicTensor<double>;
using Matrix = Mat<double>;

} // namespace star
