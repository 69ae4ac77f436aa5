#pragma once

// Differentiable primitives. Reductions accumulate in double regardless of T.
// Every op throws Errc::numeric if its forward result is not finite and
// Errc::shape on incompatible operands.

#include <span>
#include <vector>

#include "autodiff/tensor.hpp"

namespace cellclip::ad {

template <class T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> transpose(const Var<T>& a);
// Same row-major data viewed with a new shape of equal size.
template <class T> Var<T> reshape(const Var<T>& a, Shape shape);

template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
// x[m×n] + bias[1×n] broadcast over rows.
template <class T> Var<T> add_row(const Var<T>& x, const Var<T>& bias);
// x[m×n] * c[m×1] broadcast over columns.
template <class T> Var<T> mul_col(const Var<T>& x, const Var<T>& c);
template <class T> Var<T> scale(const Var<T>& x, double c);
// x * s for a 1×1 tensor s.
template <class T> Var<T> mul_scalar(const Var<T>& x, const Var<T>& s);
template <class T> Var<T> add_scalar(const Var<T>& x, const Var<T>& s);

template <class T> Var<T> exp(const Var<T>& x);
template <class T> Var<T> tanh(const Var<T>& x);
template <class T> Var<T> sigmoid(const Var<T>& x);
// log(sigmoid(x)) without overflow.
template <class T> Var<T> log_sigmoid(const Var<T>& x);
// Tanh approximation.
template <class T> Var<T> gelu(const Var<T>& x);
template <class T> Var<T> clamp_max(const Var<T>& x, double hi);

// Per-row max subtraction keeps both stable for large logits.
template <class T> Var<T> softmax_rows(const Var<T>& x);
template <class T> Var<T> log_softmax_rows(const Var<T>& x);

// Normalizes each row of x[m×d]; gain and bias are 1×d.
template <class T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, double eps = 1e-5);

// Throws Errc::invalid_argument on a zero-norm row.
template <class T> Var<T> l2_normalize_rows(const Var<T>& x);
// S[i][j] = <p_i, q_j> / (|p_i| |q_j|).
template <class T> Var<T> cosine_sim_matrix(const Var<T>& p, const Var<T>& q);

template <class T> Var<T> sum(const Var<T>& x);
template <class T> Var<T> mean(const Var<T>& x);
// m×n -> m×1
template <class T> Var<T> sum_rows(const Var<T>& x);

template <class T> Var<T> slice_rows(const Var<T>& x, std::size_t begin, std::size_t count);
template <class T> Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count);
template <class T> Var<T> concat_rows(std::span<const Var<T>> parts);
template <class T> Var<T> concat_cols(std::span<const Var<T>> parts);
// Row lookup: out[r] = table[ids[r]].
template <class T> Var<T> gather_rows(const Var<T>& table, std::span<const std::size_t> ids);

}  // namespace cellclip::ad
