#pragma once

#include <string>
#include <vector>

#include "surromesh/models/common.hpp"

namespace surromesh {

// Pre-layer-norm multi-head attention block: scaled dot-product attention
// with residual, then a layer-normed 2-layer GELU MLP (hidden = d_q) with
// residual. Cross blocks carry a separate layer norm for the kv input; self
// blocks normalize q once and reuse it for k and v.
std::vector<ParamSpec> attention_param_specs(const std::string& prefix, std::size_t d_q,
                                             std::size_t d_kv, bool cross);

Var attention_block(TapeParams& params, const std::string& prefix, Var q_input, Var kv_input,
                    std::size_t heads, bool cross);

} // namespace surromesh
