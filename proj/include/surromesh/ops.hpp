#pragma once

#include <memory>
#include <vector>

#include "surromesh/autodiff.hpp"

namespace surromesh {
namespace ops {

enum class Padding { Same, Valid };
enum class Activation { Relu, Gelu };

// Elementwise and linear algebra
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var matmul(Var a, Var b);
Var transpose2d(Var a);
Var reshape(Var a, std::vector<std::size_t> shape);
Var concat(Var a, Var b, std::size_t axis);
// x: [n, d], bias: [d]; adds bias to every row.
Var add_bias_rows(Var x, Var bias);

// Activations
Var relu(Var x);
Var gelu(Var x);
Var activation(Var x, Activation kind);

// Softmax along `axis` with max-subtraction for stability.
Var softmax(Var x, std::size_t axis);

// Per-last-axis standardization followed by affine (gain, shift of length d).
Var layer_norm(Var x, Var gain, Var shift, double eps = 1e-5);

// (1/n_examples) * sum((pred - target)^2). n_examples = 1 gives the
// squared-norm objective for a single sample.
Var mse_loss(Var pred, Var target, std::size_t n_examples = 1);

// Convolution (cross-correlation) of x: [C_in, H, W] with
// kernels: [C_out, C_in, kh, kw] and bias: [C_out].
Var conv2d(Var x, Var kernels, Var bias, Padding padding);

struct Pool2d {
    Var out;
    // Flat input index of the window maximum per output element, row-major
    // over [C, H_out, W_out]. Ties resolve to the first element scanned.
    std::shared_ptr<const std::vector<std::size_t>> argmax;
};

// 2x2 max pooling with stride 2; odd trailing extents give truncated windows.
Pool2d maxpool2d(Var x);

// Nearest-neighbor upsampling of [C, h, w] to [C, H, W], H >= h, W >= w.
Var upsample2d(Var x, std::size_t target_h, std::size_t target_w);

// Multi-head helpers: [n, d] <-> [heads, n, d/heads]
Var split_heads(Var x, std::size_t heads);
Var merge_heads(Var x);

// Batched matmul over the leading axis: a: [h, m, k], b: [h, n, k] when
// trans_b (result [h, m, n]) or [h, k, n] otherwise.
Var bmm(Var a, Var b, bool trans_b);

} // namespace ops
} // namespace surromesh
