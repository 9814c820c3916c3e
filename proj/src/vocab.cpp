#include "mgrpo/vocab.hpp"

namespace mgrpo {

char Vocab::glyph(int32_t id) const {
    if (id >= 0 && id <= 9) {
        return static_cast<char>('0' + id);
    }
    if (id == plus_id) {
        return '+';
    }
    if (id == eq_id) {
        return '=';
    }
    if (id == ans_open) {
        return '<';
    }
    if (id == ans_close) {
        return '>';
    }
    if (id == pad_id) {
        return '_';
    }
    if (id == mask_id) {
        return '#';
    }
    if (id >= letter0 && id < size) {
        return static_cast<char>('a' + (id - letter0));
    }
    return '?';
}

std::string Vocab::decode(const std::vector<int32_t>& ids) const {
    std::string out;
    out.reserve(ids.size());
    for (int32_t id : ids) {
        out.push_back(glyph(id));
    }
    return out;
}

void TokenSeq::validate(const Vocab& vocab) const {
    if (prompt_len < 0 || prompt_len > length()) {
        throw std::invalid_argument("token seq: prompt_len out of range");
    }
    for (int i = 0; i < length(); ++i) {
        if (ids[i] < 0 || ids[i] >= vocab.size) {
            throw std::invalid_argument("token seq: id out of range at position " + std::to_string(i));
        }
        if (ids[i] == vocab.mask_id) {
            throw std::invalid_argument("token seq: mask id in clean data at position " + std::to_string(i));
        }
    }
}

void MaskedView::validate(const Vocab& vocab, int prompt_len) const {
    if (ids.size() != mask.size()) {
        throw std::invalid_argument("masked view: ids/mask length mismatch");
    }
    for (size_t i = 0; i < ids.size(); ++i) {
        const bool is_mask_token = ids[i] == vocab.mask_id;
        if (is_mask_token != (mask[i] != 0)) {
            throw std::invalid_argument("masked view: indicator inconsistent at position " + std::to_string(i));
        }
        if (mask[i] != 0 && static_cast<int>(i) < prompt_len) {
            throw std::invalid_argument("masked view: prompt position masked at " + std::to_string(i));
        }
    }
}

}  // namespace mgrpo
