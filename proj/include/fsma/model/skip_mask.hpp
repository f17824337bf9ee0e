#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace fsma::model {

/// Per-scale switch for skip layers, most-downsampled scale first.
///
/// Digit i corresponds to the decoder scale with stride 32 / 2^i for a
/// five-scale backbone, so "11000" enables the stride-32 and stride-16 skips.
/// Landmark heads stop at half resolution and therefore take four digits.
class SkipMask {
public:
    SkipMask() = default;
    explicit SkipMask(std::vector<bool> digits) : digits_(std::move(digits)) {}

    /// Parses a binary digit string. Throws ValidationError on a non-binary
    /// character or when the length differs from expected_len.
    static SkipMask parse(std::string_view text, std::size_t expected_len);
    static SkipMask none(std::size_t len) { return SkipMask(std::vector<bool>(len, false)); }
    static SkipMask all(std::size_t len) { return SkipMask(std::vector<bool>(len, true)); }

    std::size_t size() const { return digits_.size(); }
    bool enabled(std::size_t level) const { return digits_.at(level); }
    std::size_t popcount() const;
    bool any() const { return popcount() > 0; }

    /// Stride of the scale addressed by `level`, for a backbone with num_scales scales.
    static std::int64_t stride_of(std::size_t level, std::int64_t num_scales);

    /// Strides of enabled scales, most-downsampled first.
    std::vector<std::int64_t> enabled_strides(std::int64_t num_scales) const;

    std::string to_string() const;
    const std::vector<bool>& digits() const { return digits_; }

    friend bool operator==(const SkipMask&, const SkipMask&) = default;

private:
    std::vector<bool> digits_;
};

/// Ordering used by ablation tables: popcount first, then lexicographic on the digit string.
bool ablation_order(const SkipMask& a, const SkipMask& b);

} // namespace fsma::model
