#include "mgrpo/estimator.hpp"

#include <cmath>
#include <stdexcept>

#include "mgrpo/corrupt.hpp"
#include "mgrpo/rng.hpp"

namespace mgrpo {

namespace {

double clamp_exponent(double x, int64_t* clamp_events) {
    if (x < kExpClampLo || x > kExpClampHi) {
        if (clamp_events != nullptr) {
            ++*clamp_events;
        }
        return x < kExpClampLo ? kExpClampLo : kExpClampHi;
    }
    return x;
}

}  // namespace

double importance(double l_theta, double l_old, int64_t* clamp_events) {
    if (!std::isfinite(l_theta) || !std::isfinite(l_old)) {
        throw std::domain_error("importance: non-finite loss term");
    }
    return std::exp(clamp_exponent(l_theta - l_old, clamp_events));
}

double kl_estimate(double l_ref, double l_theta, int64_t* clamp_events) {
    if (!std::isfinite(l_ref) || !std::isfinite(l_theta)) {
        throw std::domain_error("kl_estimate: non-finite loss term");
    }
    const double delta = l_ref - l_theta;
    // expm1 keeps exp(delta) - delta - 1 exact through delta = 0.
    return std::expm1(clamp_exponent(delta, clamp_events)) - delta;
}

double clipped_term(double rho, double advantage, double eps) {
    if (eps <= 0.0) {
        throw std::domain_error("clipped_term: eps must be positive");
    }
    const double clipped = std::min(std::max(rho, 1.0 - eps), 1.0 + eps);
    return std::min(rho * advantage, clipped * advantage);
}

ElboEstimate elbo_estimate(const ViewLossFn& loss, const TokenSeq& o, const Vocab& vocab, int nu, uint64_t seed) {
    if (nu < 1) {
        throw std::domain_error("elbo_estimate: nu must be >= 1");
    }
    if (o.completion_len() < 1) {
        throw std::invalid_argument("elbo_estimate: empty completion");
    }
    const NoiseSchedule linear{ScheduleKind::linear};
    const double len_o = static_cast<double>(o.completion_len());
    ElboEstimate est;
    est.nu = nu;
    for (int j = 1; j <= nu; ++j) {
        const double t_j = static_cast<double>(j) / static_cast<double>(nu);
        MaskedView view = corrupt(o, t_j, linear, vocab, mix64(seed, static_cast<uint64_t>(j), 1));
        if (view.masked_count() == 0) {
            view = corrupt(o, t_j, linear, vocab, mix64(seed, static_cast<uint64_t>(j), 2));
        }
        if (view.masked_count() == 0) {
            ++est.skipped;
            continue;
        }
        // Completion-length scaling restores the bound's total units from
        // the per-masked-token average.
        est.terms.push_back(len_o * loss(view));
    }
    if (est.terms.empty()) {
        throw std::runtime_error("elbo_estimate: every draw masked nothing");
    }
    double acc = 0.0;
    for (double v : est.terms) {
        acc += v;
    }
    est.value = acc / static_cast<double>(est.terms.size());
    return est;
}

}  // namespace mgrpo
