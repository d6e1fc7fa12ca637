#include "mdiff/denoiser/encoder_layer.hpp"

#include <cmath>

#include "mdiff/errors.hpp"
#include "mdiff/numerics/ops.hpp"

namespace mdiff::denoiser {
namespace {

struct Grouping {
  std::size_t groups;
  std::size_t tokens;
  std::vector<std::size_t> row;  // row[g * tokens + t] = feature row of token t in group g
};

Grouping make_grouping(AttentionAxis axis, const TokenLayout& l) {
  Grouping g;
  if (axis == AttentionAxis::spatial) {
    g.groups = l.batch * l.frames;
    g.tokens = l.pose_dim;
    g.row.resize(g.groups * g.tokens);
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      for (std::size_t t = 0; t < g.tokens; ++t) g.row[grp * g.tokens + t] = grp * l.pose_dim + t;
    }
  } else {
    g.groups = l.batch * l.pose_dim;
    g.tokens = l.frames;
    g.row.resize(g.groups * g.tokens);
    for (std::size_t b = 0; b < l.batch; ++b) {
      for (std::size_t d = 0; d < l.pose_dim; ++d) {
        const std::size_t grp = b * l.pose_dim + d;
        for (std::size_t t = 0; t < g.tokens; ++t) g.row[grp * g.tokens + t] = (b * l.frames + t) * l.pose_dim + d;
      }
    }
  }
  return g;
}

num::Var linear(num::Tape& tape, num::Var x, num::Var w, num::Var b) {
  return num::add_row(tape, num::matmul(tape, x, w), b);
}

}  // namespace

std::vector<std::string> layer_parameter_names() {
  return {"ln1.g", "ln1.b", "attn.wq", "attn.bq", "attn.wk", "attn.bk", "attn.wv", "attn.bv",
          "attn.wo", "attn.bo", "ln2.g", "ln2.b", "ff1.w", "ff1.b", "ff2.w", "ff2.b"};
}

LayerVars bind_layer(const std::map<std::string, num::Var>& bound, const std::string& prefix) {
  auto get = [&](const char* suffix) {
    const auto it = bound.find(prefix + suffix);
    if (it == bound.end()) throw ContractError("missing layer parameter '" + prefix + suffix + "'");
    return it->second;
  };
  return LayerVars{get("ln1.g"),   get("ln1.b"),   get("attn.wq"), get("attn.bq"), get("attn.wk"), get("attn.bk"),
                   get("attn.wv"), get("attn.bv"), get("attn.wo"), get("attn.bo"), get("ln2.g"),   get("ln2.b"),
                   get("ff1.w"),   get("ff1.b"),   get("ff2.w"),   get("ff2.b")};
}

num::Var encoder_layer(num::Tape& tape, const LayerVars& p, num::Var x, AttentionAxis axis, const TokenLayout& layout,
                       std::size_t n_heads, num::DenseArray* attention) {
  const num::Shape& xs = tape.shape(x);
  if (xs.size() != 2 || xs[0] != layout.rows()) {
    throw DimensionError("encoder layer expects [" + std::to_string(layout.rows()) + ", C] features, got " +
                         num::shape_string(xs));
  }
  const std::size_t c = xs[1];
  if (n_heads == 0 || c % n_heads != 0) throw ConfigError("model width is not divisible by the head count");
  const std::size_t dh = c / n_heads;
  const Grouping g = make_grouping(axis, layout);
  const std::size_t n = g.tokens;

  // [rows, C] -> [groups * heads, n, dh]
  std::vector<std::size_t> split(layout.rows() * c);
  // [groups * heads, n, dh] -> [rows, C]
  std::vector<std::size_t> merge(layout.rows() * c);
  for (std::size_t grp = 0; grp < g.groups; ++grp) {
    for (std::size_t h = 0; h < n_heads; ++h) {
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t r = g.row[grp * n + t];
        for (std::size_t j = 0; j < dh; ++j) {
          const std::size_t head_pos = ((grp * n_heads + h) * n + t) * dh + j;
          const std::size_t feat_pos = r * c + h * dh + j;
          split[head_pos] = feat_pos;
          merge[feat_pos] = head_pos;
        }
      }
    }
  }
  const num::Shape head_shape{g.groups * n_heads, n, dh};

  const num::Var a = num::layer_norm(tape, x, p.ln1_g, p.ln1_b);
  const num::Var q = num::gather(tape, linear(tape, a, p.wq, p.bq), split, head_shape);
  const num::Var k = num::gather(tape, linear(tape, a, p.wk, p.bk), split, head_shape);
  const num::Var v = num::gather(tape, linear(tape, a, p.wv, p.bv), split, head_shape);
  const num::Var scores = num::scale(tape, num::batched_matmul(tape, q, k, true), 1.0 / std::sqrt(static_cast<double>(dh)));
  const num::Var weights = num::softmax_rows(tape, scores);
  if (attention) *attention = tape.value(weights);
  const num::Var ctx = num::gather(tape, num::batched_matmul(tape, weights, v), std::move(merge), num::Shape{layout.rows(), c});
  const num::Var h = num::add(tape, x, linear(tape, ctx, p.wo, p.bo));

  const num::Var f = num::layer_norm(tape, h, p.ln2_g, p.ln2_b);
  const num::Var hidden = num::relu(tape, linear(tape, f, p.ff1_w, p.ff1_b));
  return num::add(tape, h, linear(tape, hidden, p.ff2_w, p.ff2_b));
}

}  // namespace mdiff::denoiser
