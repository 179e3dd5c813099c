#pragma once

#include <functional>
#include <vector>

#include "stylekit/tensor.hpp"

namespace stylekit {

class Tape;

// Handle to a node on the tape. Cheap to copy; only valid for the tape that
// created it.
struct Value {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Reverse-mode autodiff over Tensor. The graph is rebuilt on every forward
// pass; backward() walks nodes in reverse creation order, which is a valid
// topological order since operands always precede results.
class Tape {
public:
    Value leaf(const Tensor& t, bool requires_grad);
    Value constant(const Tensor& t) { return leaf(t, false); }

    const Tensor& val(Value v) const { return nodes_[v.id].value; }
    const Tensor& grad(Value v) const;

    // elementwise, same shape
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value scale(Value a, double s);
    Value add_scalar(Value a, double s);

    Value relu(Value a);
    Value silu(Value a);
    Value gelu(Value a);

    // 2-D linear algebra
    Value matmul(Value a, Value b);      // (n,k)x(k,m) -> (n,m)
    Value transpose(Value a);            // (n,m) -> (m,n)
    Value softmax_rows(Value a);         // rowwise softmax
    Value layer_norm_rows(Value x, Value gamma, Value beta, double eps = 1e-5);
    Value row_bias_add(Value x, Value b);        // (n,m) + (m)
    Value concat_rows(const std::vector<Value>& xs);
    Value slice_rows(Value x, int r0, int r1);   // rows [r0, r1)
    Value slice_cols(Value x, int c0, int c1);   // cols [c0, c1)
    Value concat_cols(const std::vector<Value>& xs);

    // 3-D (channels, height, width) image ops
    Value conv2d(Value x, Value w, Value b, int stride, int pad);
    Value upsample2x(Value x);                   // nearest neighbour
    Value concat_channels(Value a, Value b);
    Value channel_affine(Value x, Value g, Value b);  // y[c,h,w] = x*g[c]+b[c]
    Value channel_bias_add(Value x, Value b);         // y[c,h,w] = x + b[c]
    Value instance_norm(Value x, double eps = 1e-5);  // per-channel over spatial
    Value spatial_mean(Value x);                 // (C,H,W) -> (1,C)

    // reductions / shape
    Value sum_all(Value a);      // -> {1}
    Value mean_all(Value a);     // -> {1}
    Value reshape(Value a, Shape s);

    // Sum of squared differences, the denoising training objective.
    Value sse(Value a, Value b) { return sum_all(mul(sub(a, b), sub(a, b))); }

    void backward(Value root);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&)> back;  // empty for leaves/constants
    };

    std::vector<Node> nodes_;

    Value make(Tensor value, bool requires_grad, std::function<void(Tape&)> back);
    Tensor& grad_ref(Value v);
    bool needs(Value v) const { return nodes_[v.id].requires_grad; }
    static void check_same_shape(const Tensor& a, const Tensor& b, const char* op);
};

}  // namespace stylekit
