#include "fsma/model/skip_mask.hpp"

#include "fsma/common/errors.hpp"

#include <algorithm>

namespace fsma::model {

SkipMask SkipMask::parse(std::string_view text, std::size_t expected_len) {
    if (text.empty()) throw ValidationError("skip mask: empty digit string");
    std::vector<bool> digits;
    digits.reserve(text.size());
    for (char c : text) {
        if (c != '0' && c != '1') {
            throw ValidationError("skip mask '" + std::string(text) + "': non-binary digit '" + std::string(1, c) + "'");
        }
        digits.push_back(c == '1');
    }
    if (digits.size() != expected_len) {
        throw ValidationError("skip mask '" + std::string(text) + "': expected " + std::to_string(expected_len) +
                              " digits, got " + std::to_string(digits.size()));
    }
    return SkipMask(std::move(digits));
}

std::size_t SkipMask::popcount() const {
    return static_cast<std::size_t>(std::count(digits_.begin(), digits_.end(), true));
}

std::int64_t SkipMask::stride_of(std::size_t level, std::int64_t num_scales) {
    return std::int64_t{1} << (num_scales - static_cast<std::int64_t>(level));
}

std::vector<std::int64_t> SkipMask::enabled_strides(std::int64_t num_scales) const {
    std::vector<std::int64_t> out;
    for (std::size_t i = 0; i < digits_.size(); ++i) {
        if (digits_[i]) out.push_back(stride_of(i, num_scales));
    }
    return out;
}

std::string SkipMask::to_string() const {
    std::string s;
    s.reserve(digits_.size());
    for (bool d : digits_) s.push_back(d ? '1' : '0');
    return s;
}

bool ablation_order(const SkipMask& a, const SkipMask& b) {
    if (a.popcount() != b.popcount()) return a.popcount() < b.popcount();
    return a.to_string() < b.to_string();
}

} // namespace fsma::model
