#include "mgrpo/corrupt.hpp"

#include <stdexcept>

#include "mgrpo/rng.hpp"

namespace mgrpo {

MaskedView corrupt(const TokenSeq& x0, double t, const NoiseSchedule& schedule, const Vocab& vocab, uint64_t seed) {
    if (!(t > 0.0 && t <= 1.0)) {
        throw std::domain_error("corrupt: t outside (0,1]");
    }
    const double keep = schedule.alpha(t);
    Rng rng(seed);
    MaskedView view;
    view.t = t;
    view.ids = x0.ids;
    view.mask.assign(x0.ids.size(), 0);
    for (int i = x0.prompt_len; i < x0.length(); ++i) {
        if (rng.uniform01() >= keep) {
            view.ids[static_cast<size_t>(i)] = vocab.mask_id;
            view.mask[static_cast<size_t>(i)] = 1;
        }
    }
    return view;
}

}  // namespace mgrpo
