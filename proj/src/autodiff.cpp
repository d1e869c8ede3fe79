#include "fmanet/autodiff.hpp"

#include <algorithm>

#include "fmanet/common.hpp"

namespace fmanet::ad {

const Tensor& Value::val() const {
    fm_check(tape != nullptr && id >= 0, "use of undefined Value");
    return tape->value(id);
}

Value Tape::leaf(Tensor t, bool requires_grad) {
    fm_check(t.defined(), "leaf: undefined tensor");
    nodes_.push_back(Node{"leaf", {}, std::move(t), requires_grad, nullptr});
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::apply(const char* op, std::vector<Value> inputs, Tensor out, BackwardFn backward) {
    bool need = false;
    std::vector<int> ids;
    ids.reserve(inputs.size());
    for (const Value& v : inputs) {
        fm_check(v.tape == this, op, ": input from another tape");
        ids.push_back(v.id);
        need = need || nodes_[static_cast<size_t>(v.id)].requires_grad;
    }
    nodes_.push_back(Node{op, std::move(ids), std::move(out), need, need ? std::move(backward) : nullptr});
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::backward(Value loss) {
    fm_check(loss.tape == this, "backward: loss from another tape");
    fm_check(loss.val().numel() == 1, "backward: loss must be scalar, got ", loss.val().shape_str());
    grads_.assign(nodes_.size(), Tensor{});
    grads_[static_cast<size_t>(loss.id)] = Tensor::full(loss.val().dims(), 1.0);

    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        Tensor& g = grads_[static_cast<size_t>(i)];
        if (!g.defined() || !n.requires_grad || !n.backward) continue;
        std::vector<Tensor> contribs = n.backward(g);
        fm_check(contribs.size() == n.inputs.size(), n.op, ": backward returned ", contribs.size(),
                 " gradients for ", n.inputs.size(), " inputs");
        for (size_t j = 0; j < contribs.size(); ++j) {
            if (!contribs[j].defined()) continue;
            const int src = n.inputs[j];
            if (!nodes_[static_cast<size_t>(src)].requires_grad) continue;
            Tensor& acc = grads_[static_cast<size_t>(src)];
            if (!acc.defined()) {
                acc = std::move(contribs[j]);
            } else {
                fm_check(acc.same_shape(contribs[j]), n.op, ": gradient shape mismatch");
                const int64_t m = acc.numel();
                for (int64_t e = 0; e < m; ++e) acc[e] += contribs[j][e];
            }
        }
    }
}

Tensor Tape::grad(Value v) const {
    fm_check(v.tape == this, "grad: value from another tape");
    fm_check(!grads_.empty(), "grad: backward() has not run");
    const Tensor& g = grads_[static_cast<size_t>(v.id)];
    if (g.defined()) return g;
    return Tensor::zeros(value(v.id).dims());
}

bool Tape::has_grad(Value v) const {
    return !grads_.empty() && grads_[static_cast<size_t>(v.id)].defined();
}

std::map<int, Tensor> grad(Tape& tape, Value loss) {
    tape.backward(loss);
    std::map<int, Tensor> out;
    for (size_t i = 0; i < tape.size(); ++i) {
        const int id = static_cast<int>(i);
        if (tape.is_trainable_leaf(id)) out.emplace(id, tape.grad(Value{&tape, id}));
    }
    return out;
}

namespace {

Tape* tape_of(Value a) {
    fm_check(a.defined(), "op on undefined Value");
    return a.tape;
}

}  // namespace

Value add(Value a, Value b) {
    return tape_of(a)->apply("add", {a, b}, ops::add(a.val(), b.val()),
                             [](const Tensor& g) { return std::vector<Tensor>{g, g}; });
}

Value sub(Value a, Value b) {
    return tape_of(a)->apply("sub", {a, b}, ops::sub(a.val(), b.val()), [](const Tensor& g) {
        return std::vector<Tensor>{g, ops::scale(g, -1.0)};
    });
}

Value mul(Value a, Value b) {
    Tensor av = a.val(), bv = b.val();
    return tape_of(a)->apply("mul", {a, b}, ops::mul(av, bv), [av, bv](const Tensor& g) {
        return std::vector<Tensor>{ops::mul(g, bv), ops::mul(g, av)};
    });
}

Value scale(Value a, double c) {
    return tape_of(a)->apply("scale", {a}, ops::scale(a.val(), c), [c](const Tensor& g) {
        return std::vector<Tensor>{ops::scale(g, c)};
    });
}

Value add_scalar(Value a, double c) {
    return tape_of(a)->apply("add_scalar", {a}, ops::add_scalar(a.val(), c),
                             [](const Tensor& g) { return std::vector<Tensor>{g}; });
}

Value sigmoid(Value x) {
    Tensor y = ops::sigmoid(x.val());
    return tape_of(x)->apply("sigmoid", {x}, y, [y](const Tensor& g) {
        return std::vector<Tensor>{ops::sigmoid_vjp(y, g)};
    });
}

Value gelu(Value x) {
    Tensor xv = x.val();
    return tape_of(x)->apply("gelu", {x}, ops::gelu(xv), [xv](const Tensor& g) {
        return std::vector<Tensor>{ops::gelu_vjp(xv, g)};
    });
}

Value absval(Value x) {
    Tensor xv = x.val();
    return tape_of(x)->apply("abs", {x}, ops::absval(xv), [xv](const Tensor& g) {
        return std::vector<Tensor>{ops::absval_vjp(xv, g)};
    });
}

Value sum(Value x) {
    std::vector<int> dims = x.val().dims();
    return tape_of(x)->apply("sum", {x}, ops::sum(x.val()), [dims](const Tensor& g) {
        return std::vector<Tensor>{Tensor::full(dims, g.item())};
    });
}

Value mean(Value x) {
    std::vector<int> dims = x.val().dims();
    const double inv = 1.0 / static_cast<double>(x.val().numel());
    return tape_of(x)->apply("mean", {x}, ops::mean(x.val()), [dims, inv](const Tensor& g) {
        return std::vector<Tensor>{Tensor::full(dims, g.item() * inv)};
    });
}

Value reshape(Value x, std::vector<int> dims) {
    std::vector<int> orig = x.val().dims();
    return tape_of(x)->apply("reshape", {x}, x.val().reshaped(dims), [orig](const Tensor& g) {
        return std::vector<Tensor>{g.reshaped(orig)};
    });
}

Value concat(std::vector<Value> xs, int axis) {
    fm_check(!xs.empty(), "concat: no inputs");
    std::vector<Tensor> vals;
    vals.reserve(xs.size());
    for (const Value& v : xs) vals.push_back(v.val());
    Tensor out = ops::concat(vals, axis);
    return tape_of(xs[0])->apply("concat", xs, std::move(out), [vals, axis](const Tensor& g) {
        return ops::concat_vjp(vals, axis, g);
    });
}

Value slice(Value x, int axis, int start, int len) {
    Tensor xv = x.val();
    return tape_of(x)->apply("slice", {x}, ops::slice(xv, axis, start, len),
                             [xv, axis, start, len](const Tensor& g) {
                                 return std::vector<Tensor>{ops::slice_vjp(xv, axis, start, len, g)};
                             });
}

Value fold_time(Value x) {
    const int T = x.val().dim(0);
    return tape_of(x)->apply("fold_time", {x}, ops::fold_time(x.val()), [T](const Tensor& g) {
        return std::vector<Tensor>{ops::unfold_time(g, T)};
    });
}

Value unfold_time(Value x, int T) {
    return tape_of(x)->apply("unfold_time", {x}, ops::unfold_time(x.val(), T), [](const Tensor& g) {
        return std::vector<Tensor>{ops::fold_time(g)};
    });
}

Value repeat_time(Value x, int T) {
    return tape_of(x)->apply("repeat_time", {x}, ops::repeat_time(x.val(), T), [](const Tensor& g) {
        return std::vector<Tensor>{ops::repeat_time_vjp(g)};
    });
}

Value matmul(Value a, Value b) {
    Tensor av = a.val(), bv = b.val();
    return tape_of(a)->apply("matmul", {a, b}, ops::matmul(av, bv), [av, bv](const Tensor& g) {
        return std::vector<Tensor>{ops::matmul(g, ops::transpose2d(bv)),
                                   ops::matmul(ops::transpose2d(av), g)};
    });
}

Value transpose2d(Value a) {
    return tape_of(a)->apply("transpose2d", {a}, ops::transpose2d(a.val()), [](const Tensor& g) {
        return std::vector<Tensor>{ops::transpose2d(g)};
    });
}

Value add_rowvec(Value a, Value b) {
    return tape_of(a)->apply("add_rowvec", {a, b}, ops::add_rowvec(a.val(), b.val()),
                             [](const Tensor& g) {
                                 const int m = g.dim(0), n = g.dim(1);
                                 Tensor gb{{n}};
                                 for (int i = 0; i < m; ++i)
                                     for (int j = 0; j < n; ++j) gb[j] += g.at(i, j);
                                 return std::vector<Tensor>{g, gb};
                             });
}

Value softmax_rows(Value x) {
    Tensor y = ops::softmax_rows(x.val());
    return tape_of(x)->apply("softmax_rows", {x}, y, [y](const Tensor& g) {
        return std::vector<Tensor>{ops::softmax_rows_vjp(y, g)};
    });
}

Value pixel_shuffle(Value x, int s) {
    return tape_of(x)->apply("pixel_shuffle", {x}, ops::pixel_shuffle(x.val(), s), [s](const Tensor& g) {
        return std::vector<Tensor>{ops::pixel_unshuffle(g, s)};
    });
}

Value pixel_unshuffle(Value x, int s) {
    return tape_of(x)->apply("pixel_unshuffle", {x}, ops::pixel_unshuffle(x.val(), s),
                             [s](const Tensor& g) {
                                 return std::vector<Tensor>{ops::pixel_shuffle(g, s)};
                             });
}

Value bilinear_upsample(Value x, int s) {
    Tensor xv = x.val();
    return tape_of(x)->apply("bilinear_upsample", {x}, ops::bilinear_upsample(xv, s),
                             [xv, s](const Tensor& g) {
                                 return std::vector<Tensor>{ops::bilinear_upsample_vjp(xv, s, g)};
                             });
}

Value conv2d(Value x, Value w, Value b) {
    Tensor xv = x.val(), wv = w.val();
    return tape_of(x)->apply("conv2d", {x, w, b}, ops::conv2d(xv, wv, b.val()),
                             [xv, wv](const Tensor& g) {
                                 auto [gx, gw, gb] = ops::conv2d_vjp(xv, wv, g);
                                 return std::vector<Tensor>{gx, gw, gb};
                             });
}

Value conv3d(Value x, Value w, Value b) {
    Tensor xv = x.val(), wv = w.val();
    return tape_of(x)->apply("conv3d", {x, w, b}, ops::conv3d(xv, wv, b.val()),
                             [xv, wv](const Tensor& g) {
                                 auto [gx, gw, gb] = ops::conv3d_vjp(xv, wv, g);
                                 return std::vector<Tensor>{gx, gw, gb};
                             });
}

Value l1(Value a, Value b) {
    fm_check(a.val().same_shape(b.val()), "l1: shape mismatch ", a.val().shape_str(), " vs ",
             b.val().shape_str());
    return mean(absval(sub(a, b)));
}

}  // namespace fmanet::ad
