#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ltcs/errors.hpp"
#include "ltcs/nn_ops.hpp"
#include "ltcs/rng.hpp"
#include "ltcs/tensor.hpp"

namespace ltcs {

// Reverse-mode graph over Tensor2 values, covering exactly the layer set the
// model needs: matmul, bias add, SmeLU, row softmax, layer norm, transpose,
// gather, concat and the listwise cross-entropy head. Nodes are created per
// forward pass; parameters are long-lived leaves whose gradients accumulate
// until ParamStore::zero_grads.
template <typename T>
struct Node {
    Tensor2<T> value;
    Tensor2<T> grad;  // same shape as value, zero at creation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;
    std::string name;

    explicit Node(Tensor2<T> v) : value(std::move(v)) {
        grad = Tensor2<T>(value.rows, value.cols, T(0));
    }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> make_constant(Tensor2<T> v) {
    return std::make_shared<Node<T>>(std::move(v));
}

template <typename T>
NodePtr<T> make_parameter(Tensor2<T> v, std::string name) {
    auto n = std::make_shared<Node<T>>(std::move(v));
    n->requires_grad = true;
    n->name = std::move(name);
    return n;
}

namespace detail {

template <typename T>
NodePtr<T> make_op(Tensor2<T> value, std::vector<NodePtr<T>> parents,
                   std::function<void(Node<T>&)> backward_fn) {
    auto n = std::make_shared<Node<T>>(std::move(value));
    for (const auto& p : parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) {
        n->parents = std::move(parents);
        n->backward_fn = std::move(backward_fn);
    }
    return n;
}

}  // namespace detail

// C = A * B
template <typename T>
NodePtr<T> matmul(const NodePtr<T>& a, const NodePtr<T>& b) {
    if (a->value.cols != b->value.rows) {
        throw ConfigError("matmul: inner dimensions differ (" +
                          std::to_string(a->value.cols) + " vs " +
                          std::to_string(b->value.rows) + ")");
    }
    const std::size_t m = a->value.rows, k = a->value.cols, n = b->value.cols;
    Tensor2<T> out(m, n, T(0));
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = &a->value.data[i * k];
        T* orow = &out.data[i * n];
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = &b->value.data[p * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return detail::make_op<T>(
        std::move(out), {a, b}, [a, b, m, k, n](Node<T>& self) {
            if (a->requires_grad) {
                // dA += dC * B^T
                for (std::size_t i = 0; i < m; ++i) {
                    const T* grow = &self.grad.data[i * n];
                    T* arow = &a->grad.data[i * k];
                    for (std::size_t p = 0; p < k; ++p) {
                        const T* brow = &b->value.data[p * n];
                        T acc = T(0);
                        for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                        arow[p] += acc;
                    }
                }
            }
            if (b->requires_grad) {
                // dB += A^T * dC
                for (std::size_t p = 0; p < k; ++p) {
                    T* brow = &b->grad.data[p * n];
                    for (std::size_t i = 0; i < m; ++i) {
                        const T av = a->value.data[i * k + p];
                        const T* grow = &self.grad.data[i * n];
                        for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                    }
                }
            }
        });
}

// Elementwise sum of same-shape tensors.
template <typename T>
NodePtr<T> add(const NodePtr<T>& a, const NodePtr<T>& b) {
    if (!a->value.same_shape(b->value)) {
        throw ConfigError("add: shape mismatch");
    }
    Tensor2<T> out = a->value;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b->value.data[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
        if (a->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                a->grad.data[i] += self.grad.data[i];
        }
        if (b->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                b->grad.data[i] += self.grad.data[i];
        }
    });
}

// A (m x n) + bias (1 x n), broadcast over rows.
template <typename T>
NodePtr<T> add_row_bias(const NodePtr<T>& a, const NodePtr<T>& bias) {
    if (bias->value.rows != 1 || bias->value.cols != a->value.cols) {
        throw ConfigError("add_row_bias: bias must be 1 x cols");
    }
    Tensor2<T> out = a->value;
    for (std::size_t i = 0; i < out.rows; ++i)
        for (std::size_t j = 0; j < out.cols; ++j)
            out(i, j) += bias->value.data[j];
    return detail::make_op<T>(std::move(out), {a, bias}, [a, bias](Node<T>& self) {
        if (a->requires_grad) {
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                a->grad.data[i] += self.grad.data[i];
        }
        if (bias->requires_grad) {
            for (std::size_t i = 0; i < self.grad.rows; ++i)
                for (std::size_t j = 0; j < self.grad.cols; ++j)
                    bias->grad.data[j] += self.grad(i, j);
        }
    });
}

template <typename T>
NodePtr<T> smelu_node(const NodePtr<T>& a, T beta) {
    if (!(beta > T(0))) throw ConfigError("smelu: beta must be positive");
    Tensor2<T> out(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = smelu(a->value.data[i], beta);
    return detail::make_op<T>(std::move(out), {a}, [a, beta](Node<T>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            a->grad.data[i] += self.grad.data[i] * smelu_derivative(a->value.data[i], beta);
    });
}

// Row-wise stabilized softmax.
template <typename T>
NodePtr<T> softmax_rows(const NodePtr<T>& a) {
    if (a->value.cols == 0) throw ConfigError("softmax_rows: empty rows");
    Tensor2<T> out(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < a->value.rows; ++i) {
        const T* x = &a->value.data[i * a->value.cols];
        T* y = &out.data[i * out.cols];
        T hi = x[0];
        for (std::size_t j = 1; j < a->value.cols; ++j) hi = std::max(hi, x[j]);
        T sum = T(0);
        for (std::size_t j = 0; j < a->value.cols; ++j) {
            y[j] = std::exp(x[j] - hi);
            sum += y[j];
        }
        for (std::size_t j = 0; j < a->value.cols; ++j) y[j] /= sum;
    }
    return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& self) {
        const std::size_t cols = self.value.cols;
        for (std::size_t i = 0; i < self.value.rows; ++i) {
            const T* y = &self.value.data[i * cols];
            const T* dy = &self.grad.data[i * cols];
            T dot = T(0);
            for (std::size_t j = 0; j < cols; ++j) dot += dy[j] * y[j];
            T* dx = &a->grad.data[i * cols];
            for (std::size_t j = 0; j < cols; ++j) dx[j] += y[j] * (dy[j] - dot);
        }
    });
}

// Row-wise layer norm with learned gain/bias (1 x d each).
template <typename T>
NodePtr<T> layer_norm_rows(const NodePtr<T>& x, const NodePtr<T>& gain,
                           const NodePtr<T>& bias, T eps) {
    const std::size_t d = x->value.cols;
    if (gain->value.cols != d || bias->value.cols != d || gain->value.rows != 1 ||
        bias->value.rows != 1) {
        throw ConfigError("layer_norm_rows: gain/bias must be 1 x " + std::to_string(d));
    }
    Tensor2<T> out(x->value.rows, d);
    // Cache normalized rows and inverse stddevs for the backward pass.
    auto xhat = std::make_shared<Tensor2<T>>(x->value.rows, d);
    auto inv_std = std::make_shared<std::vector<T>>(x->value.rows);
    for (std::size_t i = 0; i < x->value.rows; ++i) {
        const T* row = &x->value.data[i * d];
        T mean = T(0);
        for (std::size_t j = 0; j < d; ++j) mean += row[j];
        mean /= static_cast<T>(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mean) * (row[j] - mean);
        var /= static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        (*inv_std)[i] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (row[j] - mean) * inv;
            (*xhat)(i, j) = h;
            out(i, j) = gain->value.data[j] * h + bias->value.data[j];
        }
    }
    return detail::make_op<T>(
        std::move(out), {x, gain, bias},
        [x, gain, bias, xhat, inv_std, d](Node<T>& self) {
            for (std::size_t i = 0; i < self.value.rows; ++i) {
                const T* dy = &self.grad.data[i * d];
                const T* h = &xhat->data[i * d];
                if (gain->requires_grad) {
                    for (std::size_t j = 0; j < d; ++j)
                        gain->grad.data[j] += dy[j] * h[j];
                }
                if (bias->requires_grad) {
                    for (std::size_t j = 0; j < d; ++j) bias->grad.data[j] += dy[j];
                }
                if (x->requires_grad) {
                    T mean_dh = T(0), mean_dh_h = T(0);
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dh = dy[j] * gain->value.data[j];
                        mean_dh += dh;
                        mean_dh_h += dh * h[j];
                    }
                    mean_dh /= static_cast<T>(d);
                    mean_dh_h /= static_cast<T>(d);
                    T* dx = &x->grad.data[i * d];
                    const T inv = (*inv_std)[i];
                    for (std::size_t j = 0; j < d; ++j) {
                        const T dh = dy[j] * gain->value.data[j];
                        dx[j] += inv * (dh - mean_dh - h[j] * mean_dh_h);
                    }
                }
            }
        });
}

template <typename T>
NodePtr<T> transpose(const NodePtr<T>& a) {
    Tensor2<T> out(a->value.cols, a->value.rows);
    for (std::size_t i = 0; i < a->value.rows; ++i)
        for (std::size_t j = 0; j < a->value.cols; ++j) out(j, i) = a->value(i, j);
    return detail::make_op<T>(std::move(out), {a}, [a](Node<T>& self) {
        for (std::size_t i = 0; i < self.grad.rows; ++i)
            for (std::size_t j = 0; j < self.grad.cols; ++j)
                a->grad(j, i) += self.grad(i, j);
    });
}

template <typename T>
NodePtr<T> scale(const NodePtr<T>& a, T c) {
    Tensor2<T> out = a->value;
    for (T& v : out.data) v *= c;
    return detail::make_op<T>(std::move(out), {a}, [a, c](Node<T>& self) {
        for (std::size_t i = 0; i < self.grad.size(); ++i)
            a->grad.data[i] += c * self.grad.data[i];
    });
}

// y = ca * a + cb * b (same shape; used for the weighted loss sum).
template <typename T>
NodePtr<T> add_scaled(const NodePtr<T>& a, T ca, const NodePtr<T>& b, T cb) {
    if (!a->value.same_shape(b->value)) throw ConfigError("add_scaled: shape mismatch");
    Tensor2<T> out(a->value.rows, a->value.cols);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = ca * a->value.data[i] + cb * b->value.data[i];
    return detail::make_op<T>(std::move(out), {a, b}, [a, ca, b, cb](Node<T>& self) {
        if (a->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                a->grad.data[i] += ca * self.grad.data[i];
        if (b->requires_grad)
            for (std::size_t i = 0; i < self.grad.size(); ++i)
                b->grad.data[i] += cb * self.grad.data[i];
    });
}

// Horizontal concat [A | B].
template <typename T>
NodePtr<T> concat_cols(const NodePtr<T>& a, const NodePtr<T>& b) {
    if (a->value.rows != b->value.rows) throw ConfigError("concat_cols: row mismatch");
    Tensor2<T> out(a->value.rows, a->value.cols + b->value.cols);
    for (std::size_t i = 0; i < out.rows; ++i) {
        for (std::size_t j = 0; j < a->value.cols; ++j) out(i, j) = a->value(i, j);
        for (std::size_t j = 0; j < b->value.cols; ++j)
            out(i, a->value.cols + j) = b->value(i, j);
    }
    return detail::make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& self) {
        for (std::size_t i = 0; i < self.grad.rows; ++i) {
            if (a->requires_grad)
                for (std::size_t j = 0; j < a->value.cols; ++j)
                    a->grad(i, j) += self.grad(i, j);
            if (b->requires_grad)
                for (std::size_t j = 0; j < b->value.cols; ++j)
                    b->grad(i, j) += self.grad(i, a->value.cols + j);
        }
    });
}

// Y row i = X row indices[i]. Selection itself carries no gradient; values
// flow through the picked rows unless stop_gradient is set (detached
// embeddings for the independently trained baseline).
template <typename T>
NodePtr<T> gather_rows(const NodePtr<T>& x, std::vector<std::size_t> indices,
                       bool stop_gradient = false) {
    Tensor2<T> out(indices.size(), x->value.cols);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= x->value.rows)
            throw ConfigError("gather_rows: index out of range");
        for (std::size_t j = 0; j < x->value.cols; ++j)
            out(i, j) = x->value(indices[i], j);
    }
    if (stop_gradient) {
        return make_constant<T>(std::move(out));
    }
    auto idx = std::make_shared<std::vector<std::size_t>>(std::move(indices));
    return detail::make_op<T>(std::move(out), {x}, [x, idx](Node<T>& self) {
        for (std::size_t i = 0; i < idx->size(); ++i)
            for (std::size_t j = 0; j < self.grad.cols; ++j)
                x->grad((*idx)[i], j) += self.grad(i, j);
    });
}

// Listwise softmax cross entropy over a column of logits:
//   L = -sum_j y_j * log softmax(z)_j
// Empty positive set gives exactly zero loss and zero gradient.
template <typename T>
NodePtr<T> listwise_softmax_ce(const NodePtr<T>& logits, const std::vector<T>& labels) {
    if (logits->value.cols != 1) throw ConfigError("listwise_softmax_ce: logits must be n x 1");
    if (labels.size() != logits->value.rows) {
        throw ConfigError("listwise_softmax_ce: labels length " + std::to_string(labels.size()) +
                          " != logits length " + std::to_string(logits->value.rows));
    }
    const std::size_t n = labels.size();
    if (n == 0) throw ConfigError("listwise_softmax_ce: empty list");
    T label_sum = T(0), label_dot = T(0);
    T hi = logits->value.data[0];
    for (std::size_t j = 1; j < n; ++j) hi = std::max(hi, logits->value.data[j]);
    T expsum = T(0);
    for (std::size_t j = 0; j < n; ++j) expsum += std::exp(logits->value.data[j] - hi);
    const T lse = hi + std::log(expsum);
    for (std::size_t j = 0; j < n; ++j) {
        label_sum += labels[j];
        label_dot += labels[j] * logits->value.data[j];
    }
    Tensor2<T> out(1, 1);
    out.data[0] = -label_dot + label_sum * lse;
    auto y = std::make_shared<std::vector<T>>(labels);
    return detail::make_op<T>(
        std::move(out), {logits}, [logits, y, hi, expsum, label_sum, n](Node<T>& self) {
            const T g = self.grad.data[0];
            for (std::size_t j = 0; j < n; ++j) {
                const T p = std::exp(logits->value.data[j] - hi) / expsum;
                logits->grad.data[j] += g * (label_sum * p - (*y)[j]);
            }
        });
}

// Reverse sweep from a scalar loss node.
template <typename T>
void backward(const NodePtr<T>& loss) {
    if (loss->value.rows != 1 || loss->value.cols != 1) {
        throw ConfigError("backward: loss must be a 1x1 scalar");
    }
    if (!std::isfinite(static_cast<double>(loss->value.data[0]))) {
        throw NumericalError("backward: non-finite loss value");
    }
    // Iterative DFS postorder; reverse postorder visits children before parents.
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    seen.insert(loss.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next].get();
            ++next;
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    loss->grad.data[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn(**it);
    }
}

// Named parameter tensors with matching gradient accumulators; iteration is
// deterministic (ordered by name).
template <typename T>
class ParamStore {
public:
    NodePtr<T> add(const std::string& name, Tensor2<T> init) {
        if (params_.count(name)) throw ConfigError("ParamStore: duplicate parameter " + name);
        auto node = make_parameter<T>(std::move(init), name);
        params_.emplace(name, node);
        return node;
    }

    const NodePtr<T>& get(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw ConfigError("ParamStore: unknown parameter " + name);
        return it->second;
    }

    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    void zero_grads() {
        for (auto& [name, node] : params_) node->grad.fill(T(0));
    }

    std::size_t parameter_count() const {
        std::size_t total = 0;
        for (const auto& [name, node] : params_) total += node->value.size();
        return total;
    }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }
    std::size_t size() const { return params_.size(); }

private:
    std::map<std::string, NodePtr<T>> params_;
};

// Uniform init scaled by 1/sqrt(fan_in); biases zero, norm gains one.
template <typename T>
Tensor2<T> init_linear(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    Tensor2<T> w(fan_in, fan_out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (T& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
    return w;
}

}  // namespace ltcs
