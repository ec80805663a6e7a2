#include "surromesh/models/attention.hpp"

#include <cmath>

namespace surromesh {

std::vector<ParamSpec> attention_param_specs(const std::string& prefix, std::size_t d_q,
                                             std::size_t d_kv, bool cross) {
    std::vector<ParamSpec> specs;
    auto dense = [&](const std::string& w, const std::string& b, std::size_t in, std::size_t out) {
        specs.push_back({prefix + w, {in, out}, InitKind::GlorotDense});
        specs.push_back({prefix + b, {out}, InitKind::Zero});
    };
    specs.push_back({prefix + "ln_q.g", {d_q}, InitKind::One});
    specs.push_back({prefix + "ln_q.s", {d_q}, InitKind::Zero});
    if (cross) {
        specs.push_back({prefix + "ln_kv.g", {d_kv}, InitKind::One});
        specs.push_back({prefix + "ln_kv.s", {d_kv}, InitKind::Zero});
    }
    dense("wq", "bq", d_q, d_q);
    // no key bias: softmax is invariant to per-query constant score shifts,
    // so a key bias would be an inert parameter
    specs.push_back({prefix + "wk", {cross ? d_kv : d_q, d_q}, InitKind::GlorotDense});
    dense("wv", "bv", cross ? d_kv : d_q, d_q);
    dense("wo", "bo", d_q, d_q);
    specs.push_back({prefix + "mlp.ln.g", {d_q}, InitKind::One});
    specs.push_back({prefix + "mlp.ln.s", {d_q}, InitKind::Zero});
    dense("mlp.w1", "mlp.b1", d_q, d_q);
    dense("mlp.w2", "mlp.b2", d_q, d_q);
    return specs;
}

Var attention_block(TapeParams& p, const std::string& prefix, Var q_input, Var kv_input,
                    std::size_t heads, bool cross) {
    using namespace ops;
    const std::size_t d_q = q_input.shape()[1];
    if (heads == 0 || d_q % heads != 0)
        throw ConfigError("attention: head count " + std::to_string(heads) +
                          " must divide query dim " + std::to_string(d_q));

    Var qn = layer_norm(q_input, p[prefix + "ln_q.g"], p[prefix + "ln_q.s"]);
    Var kvn = cross ? layer_norm(kv_input, p[prefix + "ln_kv.g"], p[prefix + "ln_kv.s"]) : qn;

    Var q = add_bias_rows(matmul(qn, p[prefix + "wq"]), p[prefix + "bq"]);
    Var k = matmul(kvn, p[prefix + "wk"]);
    Var v = add_bias_rows(matmul(kvn, p[prefix + "wv"]), p[prefix + "bv"]);

    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(d_q / heads));
    Var scores = scale(bmm(split_heads(q, heads), split_heads(k, heads), /*trans_b=*/true),
                       inv_sqrt_dh);
    Var weights = softmax(scores, 2);
    Var context = merge_heads(bmm(weights, split_heads(v, heads), /*trans_b=*/false));
    Var attended = add(q_input, add_bias_rows(matmul(context, p[prefix + "wo"]), p[prefix + "bo"]));

    Var m = layer_norm(attended, p[prefix + "mlp.ln.g"], p[prefix + "mlp.ln.s"]);
    Var h = gelu(add_bias_rows(matmul(m, p[prefix + "mlp.w1"]), p[prefix + "mlp.b1"]));
    Var out = add_bias_rows(matmul(h, p[prefix + "mlp.w2"]), p[prefix + "mlp.b2"]);
    return add(attended, out);
}

} // namespace surromesh
