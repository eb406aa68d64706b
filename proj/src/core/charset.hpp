// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace scriptgen {

// Bijective character <-> id map over an ordered symbol list, with one
// reserved id (== symbol count) for the CTC blank. The default symbol set
// is the 95 printable ASCII characters.
class CharsetTokenizer {
public:
    CharsetTokenizer();
    explicit CharsetTokenizer(std::string symbols);

    static CharsetTokenizer printable_ascii() { return CharsetTokenizer(); }

    int64_t size() const { return static_cast<int64_t>(symbols_.size()); }
    int64_t blank_index() const { return static_cast<int64_t>(symbols_.size()); }
    // Logit width for CTC heads: symbols plus the blank.
    int64_t num_classes() const { return size() + 1; }

    bool contains(char c) const;
    int64_t encode_char(char c) const; // throws CharsetError naming the character
    char decode_id(int64_t id) const;

    std::vector<int64_t> encode(const std::string& text) const;
    std::string decode(const std::vector<int64_t>& ids) const;

    const std::string& symbols() const { return symbols_; }

private:
    std::string symbols_;
    std::vector<int16_t> index_; // 256-entry lookup, -1 = absent
};

} // namespace scriptgen
