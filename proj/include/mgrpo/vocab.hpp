#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mgrpo {

/// Token id layout for the toy alphabet. The absorbing mask id is reserved
/// and never appears in clean data; pad is an ordinary token that may fill
/// unused prompt and completion positions.
struct Vocab {
    int size = 24;  // total ids, including mask and pad

    int32_t mask_id = 15;
    int32_t pad_id = 14;
    int32_t ans_open = 12;   // '<'
    int32_t ans_close = 13;  // '>'
    int32_t plus_id = 10;    // '+'
    int32_t eq_id = 11;      // '='
    int32_t letter0 = 16;    // letters a..h occupy ids 16..23

    Vocab() { validate(); }

    /// Reduced alphabet for enumeration-scale tests; delimiter ids are
    /// folded into the low range and unused.
    static Vocab tiny(int size, int32_t mask, int32_t pad) {
        Vocab v;
        v.size = size;
        v.mask_id = mask;
        v.pad_id = pad;
        v.ans_open = 0;
        v.ans_close = size > 1 ? 1 : 0;
        v.plus_id = 0;
        v.eq_id = 0;
        v.letter0 = 0;
        v.validate();
        return v;
    }

    void validate() const {
        for (int32_t id : {mask_id, pad_id, ans_open, ans_close, plus_id, eq_id}) {
            if (id < 0 || id >= size) {
                throw std::invalid_argument("vocab: special id out of range");
            }
        }
    }

    int32_t digit(int d) const { return static_cast<int32_t>(d); }
    int32_t letter(int k) const { return letter0 + static_cast<int32_t>(k); }

    char glyph(int32_t id) const;
    std::string decode(const std::vector<int32_t>& ids) const;
};

/// Prompt + completion token sequence. The first prompt_len positions are
/// the condition (padding included) and are never masked.
struct TokenSeq {
    std::vector<int32_t> ids;
    int prompt_len = 0;

    int length() const { return static_cast<int>(ids.size()); }
    int completion_len() const { return length() - prompt_len; }

    void validate(const Vocab& vocab) const;
};

/// A corrupted (re-masked) sequence with its mask indicator and timestep.
struct MaskedView {
    std::vector<int32_t> ids;
    std::vector<uint8_t> mask;  // mask[i] true iff ids[i] == mask_id
    double t = 0.0;

    int masked_count() const {
        int n = 0;
        for (uint8_t m : mask) {
            n += m != 0;
        }
        return n;
    }

    void validate(const Vocab& vocab, int prompt_len) const;
};

}  // namespace mgrpo
