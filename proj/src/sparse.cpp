#include "sparsevit/sparse.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "sparsevit/errors.hpp"
#include "sparsevit/ops.hpp"
#include "sparsevit/threading.hpp"

namespace sparsevit {

SparsityPattern build_sparsity_pattern(const TokenLayout& layout, int window_radius) {
    return SparsityPattern(layout, window_radius);
}

namespace detail {

void attend_row(const float* qrow, const Tensor2D& k, const Tensor2D& v,
                std::span<const int> keys, float inv_sqrt_d, float* ws, float* out_row) {
    if (keys.empty())
        throw std::logic_error("attend_row: empty key set (self-attention violated)");
    const int d = k.cols();
    const int m = int(keys.size());
    float mx = -std::numeric_limits<float>::infinity();
    for (int t = 0; t < m; ++t) {
        ws[t] = dot(qrow, k.row_ptr(keys[t]), d) * inv_sqrt_d;
        mx = std::max(mx, ws[t]);
    }
    double sum = 0.0;
    for (int t = 0; t < m; ++t) sum += std::exp(double(ws[t]) - double(mx));
    for (int t = 0; t < m; ++t)
        ws[t] = float(std::exp(double(ws[t]) - double(mx)) / sum);
    std::fill(out_row, out_row + d, 0.0f);
    for (int t = 0; t < m; ++t) {
        const float wgt = ws[t];
        const float* vrow = v.row_ptr(keys[t]);
        for (int c = 0; c < d; ++c) out_row[c] += wgt * vrow[c];
    }
}

}  // namespace detail

Tensor2D sparse_attention(std::span<const Tensor2D> q, std::span<const Tensor2D> k,
                          std::span<const Tensor2D> v, const SparsityPattern& pattern) {
    if (q.empty() || q.size() != k.size() || q.size() != v.size())
        throw ShapeError("sparse_attention: head count mismatch");
    const int n = pattern.layout().total();
    const int d = q[0].cols();
    const int heads = int(q.size());
    for (int h = 0; h < heads; ++h) {
        if (q[h].rows() != n || k[h].rows() != n || v[h].rows() != n)
            throw ShapeError("sparse_attention: row count differs from layout total");
        if (q[h].cols() != d || k[h].cols() != d || v[h].cols() != d)
            throw ShapeError("sparse_attention: head dim mismatch");
    }
    const float inv_sqrt_d = 1.0f / std::sqrt(float(d));
    const int workers = thread_count();
    Tensor2D out(n, heads * d);
    Tensor2D ws(workers, n);
    for (int h = 0; h < heads; ++h) {
        const Tensor2D& qh = q[h];
        const Tensor2D& kh = k[h];
        const Tensor2D& vh = v[h];
        parallel_for(n, [&](int begin, int end, int tid) {
            std::vector<int> keys;
            keys.reserve(pattern.max_allowed_count());
            for (int i = begin; i < end; ++i) {
                keys.clear();
                pattern.for_each_allowed(i, [&](int j) { keys.push_back(j); });
                detail::attend_row(qh.row_ptr(i), kh, vh, keys, inv_sqrt_d,
                                   ws.row_ptr(tid), out.row_ptr(i) + h * d);
            }
        });
    }
    return out;
}

std::uint64_t MaskExport::popcount() const {
    std::uint64_t total = 0;
    for (std::uint8_t b : allowed) total += b;
    return total;
}

MaskExport export_mask(const SparsityPattern& pattern, int cap) {
    const int n = pattern.layout().total();
    if (n > cap)
        throw ExportTooLargeError("export_mask: " + std::to_string(n) +
                                  " tokens exceeds cap " + std::to_string(cap));
    MaskExport mask;
    mask.n = n;
    mask.allowed.assign(std::size_t(n) * n, 0);
    for (int i = 0; i < n; ++i)
        pattern.for_each_allowed(
            i, [&](int j) { mask.allowed[std::size_t(i) * n + j] = 1; });
    return mask;
}

}  // namespace sparsevit
