#include "mdiff/denoiser/model.hpp"

#include <cmath>

#include "mdiff/denoiser/encodings.hpp"
#include "mdiff/errors.hpp"
#include "mdiff/numerics/ops.hpp"
#include "mdiff/numerics/random.hpp"

namespace mdiff::denoiser {
namespace {

const char* const kBranches[] = {"spatial.", "temporal."};

bool is_output_projection(const std::string& name) {
  return name.starts_with("output.") || name.starts_with("spatial_out.") || name.starts_with("temporal_out.");
}

num::Var project_out(num::Tape& tape, num::Var h, num::Var w, num::Var b) {
  return num::add_row(tape, num::matmul(tape, h, w), b);
}

}  // namespace

std::map<std::string, num::Shape> DenoiserModel::parameter_shapes(const DenoiserConfig& cfg) {
  cfg.validate();
  const std::size_t c = cfg.model_dim;
  const std::size_t f = cfg.ff_dim();
  std::map<std::string, num::Shape> s;
  s["input.w"] = {1, c};
  s["input.b"] = {c};
  s["step_embedding"] = {static_cast<std::size_t>(cfg.n_steps) + 1, c};
  for (const char* br : kBranches) {
    const std::string p = br;
    s[p + "ln1.g"] = {c};
    s[p + "ln1.b"] = {c};
    for (const char* m : {"q", "k", "v", "o"}) {
      s[p + "attn.w" + m] = {c, c};
      s[p + "attn.b" + m] = {c};
    }
    s[p + "ln2.g"] = {c};
    s[p + "ln2.b"] = {c};
    s[p + "ff1.w"] = {c, f};
    s[p + "ff1.b"] = {f};
    s[p + "ff2.w"] = {f, c};
    s[p + "ff2.b"] = {c};
  }
  if (cfg.variant == Variant::series) {
    s["output.w"] = {c, 1};
    s["output.b"] = {1};
  } else {
    s["spatial_out.w"] = {c, 1};
    s["spatial_out.b"] = {1};
    s["temporal_out.w"] = {c, 1};
    s["temporal_out.b"] = {1};
    s["fusion.w"] = {2};
    s["fusion.b"] = {1};
  }
  return s;
}

std::size_t DenoiserModel::parameter_count(const DenoiserConfig& config) {
  std::size_t n = 0;
  for (const auto& [name, shape] : parameter_shapes(config)) n += num::shape_size(shape);
  return n;
}

DenoiserModel::DenoiserModel(DenoiserConfig config, std::uint64_t seed, bool zero_output) : config_(config) {
  num::Rng rng(seed);
  // std::map iteration order makes the draw sequence a function of the config alone.
  for (const auto& [name, shape] : parameter_shapes(config_)) {
    num::DenseArray value(shape, 0.0);
    if (name == "fusion.w") {
      value.values()[0] = 0.5;
      value.values()[1] = 0.5;
    } else if (name.ends_with(".g")) {
      value = num::DenseArray(shape, 1.0);
    } else if (name == "step_embedding") {
      value = rng.normal_array(shape);
    } else if (shape.size() == 2 && !(zero_output && is_output_projection(name))) {
      value = (1.0 / std::sqrt(static_cast<double>(shape[0]))) * rng.normal_array(shape);
    }
    params_.emplace(name, std::move(value));
  }
}

DenoiserModel::DenoiserModel(DenoiserConfig config, ParameterMap params) : config_(config), params_(std::move(params)) {
  const auto shapes = parameter_shapes(config_);
  if (shapes.size() != params_.size()) {
    throw ConfigError("parameter set has " + std::to_string(params_.size()) + " tensors, config expects " +
                      std::to_string(shapes.size()));
  }
  for (const auto& [name, shape] : shapes) {
    const auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("parameter '" + name + "' is missing");
    if (it->second.shape() != shape) {
      throw ConfigError("parameter '" + name + "' has shape " + num::shape_string(it->second.shape()) + ", expected " +
                        num::shape_string(shape));
    }
    if (!it->second.all_finite()) throw NumericError("parameter '" + name + "' holds a non-finite value");
  }
}

num::DenseArray& DenoiserModel::parameter(const std::string& name) {
  const auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

const num::DenseArray& DenoiserModel::parameter(const std::string& name) const {
  const auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("no parameter named '" + name + "'");
  return it->second;
}

num::Var DenoiserModel::predict(num::Tape& tape, const diffusion::DenoiseBatch& batch) const {
  return predict_traced(tape, batch, nullptr);
}

num::Var DenoiserModel::predict_traced(num::Tape& tape, const diffusion::DenoiseBatch& batch,
                                       ForwardTrace* trace) const {
  const DenoiserConfig& cfg = config_;
  const std::size_t bsz = batch.size();
  if (bsz == 0) throw ContractError("denoiser called with an empty batch");
  if (batch.p_obs.size() != bsz || batch.p_k.size() != bsz) throw ContractError("ragged denoiser batch");
  const std::size_t t_obs = cfg.obs_frames, l = cfg.future_frames, d = cfg.pose_dim, s = cfg.frames();
  const std::size_t c = cfg.model_dim;
  const TokenLayout layout{bsz, s, d};
  const std::size_t rows = layout.rows();

  std::vector<double> raw;
  raw.reserve(rows);
  std::vector<std::size_t> step_rows;
  step_rows.reserve(rows);
  for (std::size_t i = 0; i < bsz; ++i) {
    if (batch.p_obs[i].shape() != num::Shape{t_obs, d}) {
      throw DimensionError("observation " + std::to_string(i) + " has shape " + num::shape_string(batch.p_obs[i].shape()) +
                           ", model expects " + num::shape_string({t_obs, d}));
    }
    if (batch.p_k[i].shape() != num::Shape{l, d}) {
      throw DimensionError("noisy future " + std::to_string(i) + " has shape " + num::shape_string(batch.p_k[i].shape()) +
                           ", model expects " + num::shape_string({l, d}));
    }
    const int k = batch.steps[i];
    if (k < 0 || k > cfg.n_steps) {
      throw ContractError("diffusion step " + std::to_string(k) + " outside 0.." + std::to_string(cfg.n_steps));
    }
    const num::DenseArray stacked = assemble_input(batch.p_obs[i], batch.p_k[i]);
    raw.insert(raw.end(), stacked.values().begin(), stacked.values().end());
    step_rows.insert(step_rows.end(), s * d, static_cast<std::size_t>(k));
  }

  std::map<std::string, num::Var> bound;
  for (const auto& [name, value] : params_) bound.emplace(name, tape.parameter(name, value));

  // Sum of temporal and spatial encodings for each (s, d) token, tiled over the batch.
  const num::DenseArray pe_t = positional_encoding(s, c);
  const num::DenseArray pe_d = positional_encoding(d, c);
  num::DenseArray enc({rows, c});
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t di = r % d;
    const std::size_t si = (r / d) % s;
    for (std::size_t j = 0; j < c; ++j) enc.at(r, j) = pe_t.at(si, j) + pe_d.at(di, j);
  }

  const num::Var x = tape.constant(num::DenseArray({rows, 1}, std::move(raw)));
  num::Var h = num::add_row(tape, num::matmul(tape, x, bound.at("input.w")), bound.at("input.b"));
  h = num::add(tape, h, tape.constant(std::move(enc)));
  h = num::add(tape, h, num::gather_rows(tape, bound.at("step_embedding"), std::move(step_rows)));

  const LayerVars sp = bind_layer(bound, "spatial.");
  const LayerVars tp = bind_layer(bound, "temporal.");
  num::DenseArray* sp_att = trace ? &trace->spatial_attention : nullptr;
  num::DenseArray* tp_att = trace ? &trace->temporal_attention : nullptr;

  // Rows of the last L frames, in [B, L, D] order.
  std::vector<std::size_t> future_rows;
  future_rows.reserve(bsz * l * d);
  for (std::size_t b = 0; b < bsz; ++b) {
    for (std::size_t r = (b * s + t_obs) * d; r < (b + 1) * s * d; ++r) future_rows.push_back(r);
  }
  const num::Shape out_shape{bsz, l, d};

  if (cfg.variant == Variant::series) {
    h = encoder_layer(tape, sp, h, AttentionAxis::spatial, layout, cfg.n_heads, sp_att);
    h = encoder_layer(tape, tp, h, AttentionAxis::temporal, layout, cfg.n_heads, tp_att);
    const num::Var y = project_out(tape, h, bound.at("output.w"), bound.at("output.b"));
    return num::gather(tape, y, std::move(future_rows), out_shape);
  }

  const num::Var hs = encoder_layer(tape, sp, h, AttentionAxis::spatial, layout, cfg.n_heads, sp_att);
  const num::Var ht = encoder_layer(tape, tp, h, AttentionAxis::temporal, layout, cfg.n_heads, tp_att);
  const num::Var ys = project_out(tape, hs, bound.at("spatial_out.w"), bound.at("spatial_out.b"));
  const num::Var yt = project_out(tape, ht, bound.at("temporal_out.w"), bound.at("temporal_out.b"));
  if (trace) {
    num::Tape scratch(false);
    trace->spatial_branch =
        scratch.value(num::gather(scratch, scratch.constant(tape.value(ys)), future_rows, out_shape));
    trace->temporal_branch =
        scratch.value(num::gather(scratch, scratch.constant(tape.value(yt)), future_rows, out_shape));
  }
  // 1x1 convolution over the two stacked channels.
  const num::Var stacked = num::concat_last(tape, ys, yt);
  const num::Var w = num::reshape(tape, bound.at("fusion.w"), {2, 1});
  const num::Var fused = num::add_row(tape, num::matmul(tape, stacked, w), bound.at("fusion.b"));
  return num::gather(tape, fused, std::move(future_rows), out_shape);
}

num::DenseArray DenoiserModel::denoise(const num::DenseArray& p_obs, const num::DenseArray& p_k, int k) const {
  num::Tape tape(false);
  const diffusion::DenoiseBatch batch{{p_obs}, {p_k}, {k}};
  return tape.value(predict(tape, batch)).reshaped({config_.future_frames, config_.pose_dim});
}

}  // namespace mdiff::denoiser
