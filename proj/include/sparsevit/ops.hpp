#pragma once

#include <span>
#include <vector>

#include "sparsevit/tensor.hpp"

namespace sparsevit {

// a (M,K) x b (K,N) -> (M,N)
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);

// a (M,K) x b^T with b (N,K) -> (M,N). Avoids materializing b^T.
Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b);

Tensor2D transpose(const Tensor2D& m);

// Row softmax with optional mask (same shape; entry != 0 means allowed).
// Masked entries are excluded from the normalization set and come out as
// exact zeros; each row is stabilized by its max over unmasked entries.
// A fully masked row raises DegenerateRowError.
Tensor2D softmax_rows(const Tensor2D& m, const Tensor2D* mask = nullptr);

std::vector<float> layernorm(std::span<const float> x, std::span<const float> gamma,
                             std::span<const float> beta, float eps = 1e-6f);

// Applies layernorm independently to each row.
Tensor2D layernorm_rows(const Tensor2D& x, std::span<const float> gamma,
                        std::span<const float> beta, float eps);

float gelu(float x);
void gelu_inplace(Tensor2D& m);

void add_inplace(Tensor2D& dst, const Tensor2D& src);
void add_bias_rows(Tensor2D& m, std::span<const float> bias);
void scale_inplace(Tensor2D& m, float s);

Tensor2D gather_rows(const Tensor2D& m, std::span<const int> indices);
Tensor2D copy_columns(const Tensor2D& m, int col0, int ncols);

// Raw kernels shared with the model internals, which multiply tensors
// against checkpoint weights that are not Tensor2D values. out must hold
// m*n floats and is overwritten.
void matmul_raw(const float* a, int m, int k, const float* b, int n, float* out);
float dot(const float* a, const float* b, int n);

}  // namespace sparsevit
