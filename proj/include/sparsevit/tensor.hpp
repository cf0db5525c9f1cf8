#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sparsevit {

// Tracks live tensor payload bytes and the running peak. Only tensor
// payloads count; index lists and other bookkeeping do not. Single
// writer: one meter per forward pass, mutated from one thread.
class AllocationMeter {
public:
    void on_alloc(std::uint64_t bytes);
    void on_free(std::uint64_t bytes);

    std::uint64_t current_bytes() const { return current_; }
    std::uint64_t peak_bytes() const { return peak_; }

    void reset();

    // Phase scoping isolates one stretch of work (the attention core).
    // phase_end() returns the peak number of bytes held above the level
    // live at phase_begin().
    void phase_begin();
    std::uint64_t phase_end();

private:
    std::uint64_t current_ = 0;
    std::uint64_t peak_ = 0;
    bool in_phase_ = false;
    std::uint64_t phase_base_ = 0;
    std::uint64_t phase_peak_ = 0;
};

// Returns the meter bound to this thread, or nullptr.
AllocationMeter* active_meter();

// Binds a meter to the current thread for the scope's lifetime. Tensors
// created in scope register their payload with it; the meter must
// outlive every tensor it has registered.
class MeterScope {
public:
    explicit MeterScope(AllocationMeter& meter);
    ~MeterScope();
    MeterScope(const MeterScope&) = delete;
    MeterScope& operator=(const MeterScope&) = delete;

private:
    AllocationMeter* previous_;
};

// Row-major dense matrix of 32-bit floats. Registers its payload bytes
// with the active meter on construction and releases them on
// destruction; moves carry the registration, copies register anew.
class Tensor2D {
public:
    Tensor2D() = default;
    Tensor2D(int rows, int cols);
    Tensor2D(int rows, int cols, std::vector<float> values);
    Tensor2D(const Tensor2D& other);
    Tensor2D(Tensor2D&& other) noexcept;
    Tensor2D& operator=(const Tensor2D& other);
    Tensor2D& operator=(Tensor2D&& other) noexcept;
    ~Tensor2D();

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return data_.empty(); }
    std::uint64_t bytes() const {
        return std::uint64_t(rows_) * std::uint64_t(cols_) * sizeof(float);
    }

    float& at(int r, int c) { return data_[std::size_t(r) * cols_ + c]; }
    float at(int r, int c) const { return data_[std::size_t(r) * cols_ + c]; }

    float* row_ptr(int r) { return data_.data() + std::size_t(r) * cols_; }
    const float* row_ptr(int r) const { return data_.data() + std::size_t(r) * cols_; }
    std::span<float> row(int r) { return {row_ptr(r), std::size_t(cols_)}; }
    std::span<const float> row(int r) const { return {row_ptr(r), std::size_t(cols_)}; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

private:
    void register_bytes();
    void release_bytes();

    int rows_ = 0;
    int cols_ = 0;
    std::vector<float> data_;
    AllocationMeter* meter_ = nullptr;
};

bool all_finite(const Tensor2D& m);

}  // namespace sparsevit
