#include "sparsevit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sparsevit/errors.hpp"
#include "sparsevit/threading.hpp"

namespace sparsevit {

float dot(const float* a, const float* b, int n) {
    // Four accumulators in a fixed order: fast and bitwise reproducible.
    float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += a[i] * b[i];
        s1 += a[i + 1] * b[i + 1];
        s2 += a[i + 2] * b[i + 2];
        s3 += a[i + 3] * b[i + 3];
    }
    float tail = 0.0f;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((s0 + s1) + (s2 + s3)) + tail;
}

void matmul_raw(const float* a, int m, int k, const float* b, int n, float* out) {
    parallel_for(m, [&](int begin, int end, int) {
        for (int i = begin; i < end; ++i) {
            float* dst = out + std::size_t(i) * n;
            std::fill(dst, dst + n, 0.0f);
            const float* arow = a + std::size_t(i) * k;
            for (int kk = 0; kk < k; ++kk) {
                const float av = arow[kk];
                const float* brow = b + std::size_t(kk) * n;
                for (int j = 0; j < n; ++j) dst[j] += av * brow[j];
            }
        }
    });
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols() != b.rows())
        throw ShapeError("matmul: " + std::to_string(a.cols()) + " cols vs " +
                         std::to_string(b.rows()) + " rows");
    Tensor2D out(a.rows(), b.cols());
    matmul_raw(a.data(), a.rows(), a.cols(), b.data(), b.cols(), out.data());
    return out;
}

Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b) {
    if (a.cols() != b.cols())
        throw ShapeError("matmul_nt: inner dims differ");
    Tensor2D out(a.rows(), b.rows());
    const int k = a.cols();
    parallel_for(a.rows(), [&](int begin, int end, int) {
        for (int i = begin; i < end; ++i) {
            float* dst = out.row_ptr(i);
            const float* arow = a.row_ptr(i);
            for (int j = 0; j < b.rows(); ++j) dst[j] = dot(arow, b.row_ptr(j), k);
        }
    });
    return out;
}

Tensor2D transpose(const Tensor2D& m) {
    Tensor2D out(m.cols(), m.rows());
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) out.at(c, r) = m.at(r, c);
    return out;
}

Tensor2D softmax_rows(const Tensor2D& m, const Tensor2D* mask) {
    if (mask && (mask->rows() != m.rows() || mask->cols() != m.cols()))
        throw ShapeError("softmax_rows: mask shape differs");
    Tensor2D out(m.rows(), m.cols());
    const int cols = m.cols();
    std::vector<double> exps(cols);  // scratch, reused across rows
    for (int r = 0; r < m.rows(); ++r) {
        const float* src = m.row_ptr(r);
        const float* allow = mask ? mask->row_ptr(r) : nullptr;
        float mx = -std::numeric_limits<float>::infinity();
        int unmasked = 0;
        for (int c = 0; c < cols; ++c) {
            if (allow && allow[c] == 0.0f) continue;
            mx = std::max(mx, src[c]);
            ++unmasked;
        }
        if (unmasked == 0)
            throw DegenerateRowError("softmax_rows: row " + std::to_string(r) +
                                     " fully masked");
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            if (allow && allow[c] == 0.0f) {
                exps[c] = 0.0;
                continue;
            }
            exps[c] = std::exp(double(src[c]) - double(mx));
            sum += exps[c];
        }
        float* dst = out.row_ptr(r);
        for (int c = 0; c < cols; ++c)
            dst[c] = (allow && allow[c] == 0.0f) ? 0.0f : float(exps[c] / sum);
    }
    return out;
}

namespace {

void layernorm_into(const float* x, const float* gamma, const float* beta, int n,
                    float eps, float* out) {
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += x[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = double(x[i]) - mean;
        var += d * d;
    }
    var /= n;
    const double inv = 1.0 / std::sqrt(var + double(eps));
    for (int i = 0; i < n; ++i)
        out[i] = float((double(x[i]) - mean) * inv * double(gamma[i]) + double(beta[i]));
}

}  // namespace

std::vector<float> layernorm(std::span<const float> x, std::span<const float> gamma,
                             std::span<const float> beta, float eps) {
    if (x.size() != gamma.size() || x.size() != beta.size())
        throw ShapeError("layernorm: length mismatch");
    if (!(eps > 0.0f)) throw ValidationError("layernorm: eps must be > 0");
    std::vector<float> out(x.size());
    layernorm_into(x.data(), gamma.data(), beta.data(), int(x.size()), eps, out.data());
    return out;
}

Tensor2D layernorm_rows(const Tensor2D& x, std::span<const float> gamma,
                        std::span<const float> beta, float eps) {
    if (std::size_t(x.cols()) != gamma.size() || std::size_t(x.cols()) != beta.size())
        throw ShapeError("layernorm_rows: length mismatch");
    if (!(eps > 0.0f)) throw ValidationError("layernorm_rows: eps must be > 0");
    Tensor2D out(x.rows(), x.cols());
    for (int r = 0; r < x.rows(); ++r)
        layernorm_into(x.row_ptr(r), gamma.data(), beta.data(), x.cols(), eps,
                       out.row_ptr(r));
    return out;
}

float gelu(float x) {
    return float(0.5 * double(x) * (1.0 + std::erf(double(x) / std::sqrt(2.0))));
}

void gelu_inplace(Tensor2D& m) {
    float* p = m.data();
    const std::size_t n = std::size_t(m.rows()) * m.cols();
    for (std::size_t i = 0; i < n; ++i) p[i] = gelu(p[i]);
}

void add_inplace(Tensor2D& dst, const Tensor2D& src) {
    if (dst.rows() != src.rows() || dst.cols() != src.cols())
        throw ShapeError("add_inplace: shape mismatch");
    float* d = dst.data();
    const float* s = src.data();
    const std::size_t n = std::size_t(dst.rows()) * dst.cols();
    for (std::size_t i = 0; i < n; ++i) d[i] += s[i];
}

void add_bias_rows(Tensor2D& m, std::span<const float> bias) {
    if (std::size_t(m.cols()) != bias.size())
        throw ShapeError("add_bias_rows: length mismatch");
    for (int r = 0; r < m.rows(); ++r) {
        float* row = m.row_ptr(r);
        for (int c = 0; c < m.cols(); ++c) row[c] += bias[c];
    }
}

void scale_inplace(Tensor2D& m, float s) {
    float* p = m.data();
    const std::size_t n = std::size_t(m.rows()) * m.cols();
    for (std::size_t i = 0; i < n; ++i) p[i] *= s;
}

Tensor2D gather_rows(const Tensor2D& m, std::span<const int> indices) {
    Tensor2D out(int(indices.size()), m.cols());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const int r = indices[i];
        if (r < 0 || r >= m.rows())
            throw std::out_of_range("gather_rows: index " + std::to_string(r));
        std::copy(m.row_ptr(r), m.row_ptr(r) + m.cols(), out.row_ptr(int(i)));
    }
    return out;
}

Tensor2D copy_columns(const Tensor2D& m, int col0, int ncols) {
    if (col0 < 0 || ncols < 0 || col0 + ncols > m.cols())
        throw ShapeError("copy_columns: column range out of bounds");
    Tensor2D out(m.rows(), ncols);
    for (int r = 0; r < m.rows(); ++r)
        std::copy(m.row_ptr(r) + col0, m.row_ptr(r) + col0 + ncols, out.row_ptr(r));
    return out;
}

}  // namespace sparsevit
