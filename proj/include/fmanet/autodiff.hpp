#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fmanet/ops.hpp"
#include "fmanet/tensor.hpp"

namespace fmanet::ad {

class Tape;

// Handle to a node on a tape. Values are computed eagerly; the tape records
// the operator/input structure for the reverse pass.
struct Value {
    Tape* tape = nullptr;
    int id = -1;

    bool defined() const { return tape != nullptr; }
    const Tensor& val() const;
    int dim(int i) const { return val().dim(i); }
    int rank() const { return val().rank(); }
};

// Recorded tape over whole-tensor operations. Nodes are appended in
// topological order; the reverse pass walks them once back to front.
class Tape {
public:
    // backward: given the output gradient, return one contribution per input
    // (an undefined Tensor skips that input)
    using BackwardFn = std::function<std::vector<Tensor>(const Tensor&)>;

    Value leaf(Tensor t, bool requires_grad = false);
    Value constant(Tensor t) { return leaf(std::move(t), false); }
    Value apply(const char* op, std::vector<Value> inputs, Tensor out, BackwardFn backward);

    const Tensor& value(int id) const { return nodes_[static_cast<size_t>(id)].value; }
    bool requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }
    bool is_trainable_leaf(int id) const {
        const Node& n = nodes_[static_cast<size_t>(id)];
        return n.inputs.empty() && n.requires_grad;
    }
    size_t size() const { return nodes_.size(); }

    // Reverse pass from a scalar loss; gradients retrievable via grad().
    void backward(Value loss);
    // Zero tensor of the node's shape when the node did not receive a gradient.
    Tensor grad(Value v) const;
    bool has_grad(Value v) const;

private:
    struct Node {
        const char* op;
        std::vector<int> inputs;
        Tensor value;
        bool requires_grad;
        BackwardFn backward;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;
};

// map from leaf node id to gradient, for every trainable leaf
std::map<int, Tensor> grad(Tape& tape, Value loss);

// ---- differentiable operators ----
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value scale(Value a, double c);
Value add_scalar(Value a, double c);
Value sigmoid(Value x);
Value gelu(Value x);
Value absval(Value x);
Value sum(Value x);
Value mean(Value x);
Value reshape(Value x, std::vector<int> dims);
Value concat(std::vector<Value> xs, int axis);
Value slice(Value x, int axis, int start, int len);
Value fold_time(Value x);
Value unfold_time(Value x, int T);
Value repeat_time(Value x, int T);
Value matmul(Value a, Value b);
Value transpose2d(Value a);
Value add_rowvec(Value a, Value b);
Value softmax_rows(Value x);
Value pixel_shuffle(Value x, int s);
Value pixel_unshuffle(Value x, int s);
Value bilinear_upsample(Value x, int s);
Value conv2d(Value x, Value w, Value b);
Value conv3d(Value x, Value w, Value b);

Value l1(Value a, Value b);  // mean absolute difference

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }

}  // namespace fmanet::ad
