#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mdiff/numerics/tape.hpp"

namespace mdiff::denoiser {

enum class AttentionAxis { spatial, temporal };

// Feature rows are ordered (b, s, d): row = (b * frames + s) * pose_dim + d.
struct TokenLayout {
  std::size_t batch = 1;
  std::size_t frames = 1;    // S = T + L
  std::size_t pose_dim = 1;  // D
  std::size_t rows() const noexcept { return batch * frames * pose_dim; }
};

struct LayerVars {
  num::Var ln1_g, ln1_b;
  num::Var wq, bq, wk, bk, wv, bv, wo, bo;
  num::Var ln2_g, ln2_b;
  num::Var ff1_w, ff1_b, ff2_w, ff2_b;
};

// Parameter suffixes of one layer, appended to a prefix such as "spatial.".
std::vector<std::string> layer_parameter_names();

// Looks up prefix + suffix for every layer parameter.
LayerVars bind_layer(const std::map<std::string, num::Var>& bound, const std::string& prefix);

// One pre-norm encoder layer on [rows, C] features:
//   h = x + MHA(LN1 x);  out = h + FF(LN2 h),  FF = W2 relu(W1 . + b1) + b2.
// Spatial attention mixes the D tokens within each (b, s); temporal attention
// mixes the S tokens within each (b, d). No mask. If `attention` is non-null it
// receives the softmax weights as [groups * heads, n, n], groups in layout order.
num::Var encoder_layer(num::Tape& tape, const LayerVars& p, num::Var x, AttentionAxis axis, const TokenLayout& layout,
                       std::size_t n_heads, num::DenseArray* attention = nullptr);

}  // namespace mdiff::denoiser
