// SPDX-License-Identifier: Apache-2.0
#include "core/charset.hpp"

#include "core/errors.hpp"

namespace scriptgen {

namespace {
std::string printable() {
    std::string s;
    for (char c = 0x20; c <= 0x7e; ++c) s.push_back(c);
    return s;
}
} // namespace

CharsetTokenizer::CharsetTokenizer() : CharsetTokenizer(printable()) {}

CharsetTokenizer::CharsetTokenizer(std::string symbols) : symbols_(std::move(symbols)) {
    index_.assign(256, -1);
    for (size_t i = 0; i < symbols_.size(); ++i) {
        const auto b = static_cast<uint8_t>(symbols_[i]);
        if (index_[b] != -1) throw ValueError("duplicate symbol in charset");
        index_[b] = static_cast<int16_t>(i);
    }
}

bool CharsetTokenizer::contains(char c) const { return index_[static_cast<uint8_t>(c)] != -1; }

int64_t CharsetTokenizer::encode_char(char c) const {
    const int16_t idx = index_[static_cast<uint8_t>(c)];
    if (idx < 0)
        throw CharsetError(std::string("character not in charset: '") + c + "' (code " +
                           std::to_string(static_cast<int>(static_cast<uint8_t>(c))) + ")");
    return idx;
}

char CharsetTokenizer::decode_id(int64_t id) const {
    if (id < 0 || id >= size()) throw CharsetError("token id out of range: " + std::to_string(id));
    return symbols_[static_cast<size_t>(id)];
}

std::vector<int64_t> CharsetTokenizer::encode(const std::string& text) const {
    std::vector<int64_t> ids;
    ids.reserve(text.size());
    for (char c : text) ids.push_back(encode_char(c));
    return ids;
}

std::string CharsetTokenizer::decode(const std::vector<int64_t>& ids) const {
    std::string s;
    s.reserve(ids.size());
    for (int64_t id : ids) s.push_back(decode_id(id));
    return s;
}

} // namespace scriptgen
