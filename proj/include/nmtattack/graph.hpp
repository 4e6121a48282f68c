#pragma once

#include <functional>
#include <vector>

#include "nmtattack/tensor.hpp"

namespace nmtattack {

// Handle to a node on a Graph tape.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode automatic differentiation over dense tensors.
//
// Operations evaluate eagerly and append a node carrying the value plus a
// vector-Jacobian product; backward() replays the tape in reverse order,
// which is a valid reverse topological order because parents always precede
// their consumers. A Graph and its Vars are confined to one thread; distinct
// graphs may run concurrently over shared read-only tensors.
class Graph {
  public:
    // Binds an external tensor as a leaf. If t.requires_grad, backward()
    // accumulates into t.grad (repeated backward calls keep accumulating).
    Var leaf(const Tensor& t);

    Var constant(Shape shape, std::vector<double> data);
    Var scalar(double x);

    Var matmul(Var a, Var b);
    Var transpose(Var a);
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);
    Var scale(Var a, double s);
    Var add_rowvec(Var m, Var v);  // [r x c] + broadcast [c]
    Var mul_rowvec(Var m, Var v);  // [r x c] * broadcast [c]
    Var relu(Var a);
    Var log(Var a);
    Var exp(Var a);
    Var layer_norm(Var a, double eps = 1e-5);  // per-row normalization
    Var softmax_rows(Var a);
    // Mean of -log softmax(logits)[target] over positions whose target id is
    // not ignore_id. Pass ignore_id = -1 to include every position.
    Var cross_entropy(Var logits, const std::vector<int>& targets, int ignore_id = -1);
    Var cosine_rows(Var a, Var b);  // per-row cosine similarity -> [k]
    Var mean(Var a);
    Var sum(Var a);
    Var concat_rows(const std::vector<Var>& parts);
    Var concat_cols(const std::vector<Var>& parts);
    Var slice_cols(Var a, int start, int count);
    Var gather_rows(Var a, const std::vector<int>& ids);

    void backward(Var loss);

    const Shape& shape(Var v) const { return node(v).shape; }
    const std::vector<double>& value(Var v) const { return node(v).value; }
    double scalar_value(Var v) const;
    // Gradient of the last backward() w.r.t. this node (empty if the node
    // did not require grad).
    const std::vector<double>& grad(Var v) const { return node(v).grad; }

    std::size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

  private:
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        std::vector<int> parents;
        std::function<void(Graph&, int)> vjp;
        const Tensor* source = nullptr;
        bool requires_grad = false;
    };

    std::vector<Node> nodes_;

    Node& node(Var v) { return nodes_.at(static_cast<std::size_t>(v.id)); }
    const Node& node(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id)); }

    Var push(Shape shape, std::vector<double> value, std::vector<int> parents,
             std::function<void(Graph&, int)> vjp);
    bool any_requires(const std::vector<int>& parents) const;
    std::vector<double>& grad_buf(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }

    void check_rank2(Var v, const char* op) const;
    void check_same_shape(Var a, Var b, const char* op) const;
};

}  // namespace nmtattack
