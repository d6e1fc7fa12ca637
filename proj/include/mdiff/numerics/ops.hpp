#pragma once

#include <cstddef>
#include <vector>

#include "mdiff/numerics/tape.hpp"

namespace mdiff::num {

inline constexpr double kLayerNormEps = 1e-5;

// Matrix product. `a` may carry leading axes, which are flattened into rows:
// [..., k] x [k, n] -> [..., n].
Var matmul(Tape& tape, Var a, Var b);

// Per-group product of 3-D arrays: [G, m, k] x [G, k, n] -> [G, m, n].
// With transpose_b the second operand is read as [G, n, k].
Var batched_matmul(Tape& tape, Var a, Var b, bool transpose_b = false);

Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);

// Adds a length-C vector to every last-axis row of `a`.
Var add_row(Tape& tape, Var a, Var row);

Var relu(Tape& tape, Var a);

// Softmax along the last axis, max-subtracted.
Var softmax_rows(Tape& tape, Var a);

// Normalizes each last-axis row to zero mean and unit variance, then applies
// gain and bias. A row whose entries are all equal normalizes to zeros.
Var layer_norm(Tape& tape, Var a, Var gain, Var bias);

Var sum(Tape& tape, Var a);
Var mean(Tape& tape, Var a);

// out.flat[i] = a.flat[indices[i]]; the pullback scatter-adds.
Var gather(Tape& tape, Var a, std::vector<std::size_t> indices, Shape out_shape);

// Selects last-axis rows of `a` (viewed as [R, C]): -> [indices.size(), C].
Var gather_rows(Tape& tape, Var a, std::vector<std::size_t> indices);

// Concatenates along the last axis; leading shapes must agree.
Var concat_last(Tape& tape, Var a, Var b);

Var reshape(Tape& tape, Var a, Shape shape);

}  // namespace mdiff::num
