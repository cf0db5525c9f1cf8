#include "sparsevit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "sparsevit/errors.hpp"

namespace sparsevit {

void AllocationMeter::on_alloc(std::uint64_t bytes) {
    current_ += bytes;
    peak_ = std::max(peak_, current_);
    if (in_phase_) phase_peak_ = std::max(phase_peak_, current_);
}

void AllocationMeter::on_free(std::uint64_t bytes) {
    current_ -= std::min(bytes, current_);
}

void AllocationMeter::reset() {
    current_ = 0;
    peak_ = 0;
    in_phase_ = false;
    phase_base_ = 0;
    phase_peak_ = 0;
}

void AllocationMeter::phase_begin() {
    in_phase_ = true;
    phase_base_ = current_;
    phase_peak_ = current_;
}

std::uint64_t AllocationMeter::phase_end() {
    in_phase_ = false;
    return phase_peak_ - phase_base_;
}

namespace {
thread_local AllocationMeter* t_meter = nullptr;
}

AllocationMeter* active_meter() { return t_meter; }

MeterScope::MeterScope(AllocationMeter& meter) : previous_(t_meter) {
    t_meter = &meter;
}

MeterScope::~MeterScope() { t_meter = previous_; }

Tensor2D::Tensor2D(int rows, int cols) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw ShapeError("Tensor2D: negative dimension");
    data_.assign(std::size_t(rows) * cols, 0.0f);
    register_bytes();
}

Tensor2D::Tensor2D(int rows, int cols, std::vector<float> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows < 0 || cols < 0) throw ShapeError("Tensor2D: negative dimension");
    if (data_.size() != std::size_t(rows) * cols)
        throw ShapeError("Tensor2D: data length does not match rows*cols");
    register_bytes();
}

Tensor2D::Tensor2D(const Tensor2D& other)
    : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
    register_bytes();
}

Tensor2D::Tensor2D(Tensor2D&& other) noexcept
    : rows_(other.rows_), cols_(other.cols_), data_(std::move(other.data_)),
      meter_(other.meter_) {
    other.rows_ = 0;
    other.cols_ = 0;
    other.meter_ = nullptr;
}

Tensor2D& Tensor2D::operator=(const Tensor2D& other) {
    if (this == &other) return *this;
    release_bytes();
    rows_ = other.rows_;
    cols_ = other.cols_;
    data_ = other.data_;
    register_bytes();
    return *this;
}

Tensor2D& Tensor2D::operator=(Tensor2D&& other) noexcept {
    if (this == &other) return *this;
    release_bytes();
    rows_ = other.rows_;
    cols_ = other.cols_;
    data_ = std::move(other.data_);
    meter_ = other.meter_;
    other.rows_ = 0;
    other.cols_ = 0;
    other.meter_ = nullptr;
    return *this;
}

Tensor2D::~Tensor2D() { release_bytes(); }

void Tensor2D::register_bytes() {
    meter_ = active_meter();
    if (meter_ && bytes() > 0) meter_->on_alloc(bytes());
}

void Tensor2D::release_bytes() {
    if (meter_ && bytes() > 0) meter_->on_free(bytes());
    meter_ = nullptr;
}

bool all_finite(const Tensor2D& m) {
    const float* p = m.data();
    const std::size_t n = std::size_t(m.rows()) * m.cols();
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(p[i])) return false;
    return true;
}

}  // namespace sparsevit
