#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace phaseloom {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Wrap an angle to the principal interval (-pi, pi].
///
/// Uses IEEE remainder, which is exact, so wrapping an already-wrapped
/// value returns it bit-for-bit (idempotence).
inline double wrap_phase(double theta) {
    double r = std::remainder(theta, kTwoPi);
    if (r <= -kPi) r += kTwoPi;
    return r;
}

/// Shortest signed angular distance from a to b, in (-pi, pi].
inline double phase_distance(double a, double b) { return wrap_phase(b - a); }

/// Dense column-major matrix. A column is contiguous, so per-frame views of
/// a (bins x frames) layout are cheap.
template <typename T>
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

    T* col(std::size_t c) { return data_.data() + c * rows_; }
    const T* col(std::size_t c) const { return data_.data() + c * rows_; }

    std::vector<T>& data() { return data_; }
    const std::vector<T>& data() const { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// A mono signal with its sample rate.
struct Signal {
    std::vector<double> samples;
    int sample_rate = 11025;
};

/// FNV-1a 64-bit hash, used to fingerprint analysis configurations in reports.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace phaseloom
