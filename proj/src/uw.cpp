#include "xwm/uw.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xwm/hashing.hpp"

namespace xwm {

void UwConfig::validate() const {
    if (hash_window < 1) throw std::invalid_argument("UW hash window must be >= 1");
    if (!(tv_bound >= 0.0 && tv_bound < 1.0)) throw std::invalid_argument("UW tv bound must lie in [0, 1)");
    if (!std::isfinite(zero_probability_floor)) throw std::invalid_argument("UW floor must be finite");
}

double uw_uniform(std::span<const TokenId> prefix, const UwConfig& config) {
    std::uint64_t h = mix64(config.hash_key);
    for (std::size_t j = 0; j < config.hash_window; ++j) {
        const std::size_t back = config.hash_window - j;
        const TokenId id = prefix.size() >= back ? prefix[prefix.size() - back] : kBosId;
        h = hash_combine(h, id);
    }
    return to_unit_interval(mix64(h));
}

TokenId its_select(std::span<const double> probs, double p) {
    if (probs.empty()) throw std::invalid_argument("its_select: empty distribution");
    double cumulative = 0.0;
    std::size_t last_positive = probs.size();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = i;
        cumulative += probs[i];
        if (p < cumulative) return static_cast<TokenId>(i);
    }
    if (last_positive == probs.size()) throw std::invalid_argument("its_select: distribution has no mass");
    // Rounding left the cumulative sum a hair below one.
    return static_cast<TokenId>(last_positive);
}

std::vector<double> uw_point_mass(std::span<const double> probs, double p) {
    std::vector<double> q(probs.size(), 0.0);
    q[its_select(probs, p)] = 1.0;
    return q;
}

TokenId uw_sample(std::span<const double> logits, std::span<const TokenId> prefix, const UwConfig& config) {
    const auto probs = softmax(logits);
    return its_select(probs, uw_uniform(prefix, config));
}

namespace {

double total_variation(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return 0.5 * sum;
}

// Root of a monotone function on [0, inf) by bracketing then bisection.
template <typename F>
double bisect_increasing(F f, double target) {
    double lo = 0.0;
    double hi = 1.0;
    for (int i = 0; i < 200 && f(hi) < target; ++i) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (f(mid) < target) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= 1e-15 * hi) break;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::vector<double> robust_watermark_distribution(std::span<const double> model, std::span<const double> watermarked,
                                                  double tv_bound) {
    if (model.size() != watermarked.size()) {
        throw std::invalid_argument("robust_watermark_distribution: size mismatch");
    }
    if (tv_bound <= 0.0) return {watermarked.begin(), watermarked.end()};
    if (total_variation(model, watermarked) <= tv_bound) return {model.begin(), model.end()};

    double off_support = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        if (model[i] <= 0.0) off_support += watermarked[i];
    }
    if (off_support > tv_bound) {
        throw std::invalid_argument("robust_watermark_distribution: watermarked mass outside model support exceeds tv bound");
    }

    // Mass added below the lower multiplier, increasing in c.
    auto added = [&](double c) {
        double s = 0.0;
        for (std::size_t i = 0; i < model.size(); ++i) s += std::max(c * model[i] - watermarked[i], 0.0);
        return s;
    };
    // Mass removed above the upper multiplier on the model's support,
    // decreasing in c; negated so the same bisection applies. Mass off the
    // support is always removed in full.
    auto removed_neg = [&](double c) {
        double s = 0.0;
        for (std::size_t i = 0; i < model.size(); ++i) {
            if (model[i] > 0.0) s += std::max(watermarked[i] - c * model[i], 0.0);
        }
        return -s;
    };
    const double c_low = bisect_increasing(added, tv_bound);
    const double c_high = bisect_increasing(removed_neg, off_support - tv_bound);

    std::vector<double> out(model.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        out[i] = std::clamp(watermarked[i], c_low * model[i], std::max(c_low, c_high) * model[i]);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double maximin_llr(std::span<const double> model, std::span<const double> watermarked, TokenId observed,
                   double tv_bound, double floor) {
    if (observed >= model.size()) throw std::out_of_range("maximin_llr: observed token outside distribution");
    const auto robust = robust_watermark_distribution(model, watermarked, tv_bound);
    const double q = robust[observed];
    const double p = model[observed];
    if (q <= 0.0 || p <= 0.0) return floor;
    return std::log(q / p);
}

StrengthScore uw_score(const TokenSequence& text, const LanguageModel& model, const UwConfig& config,
                       std::span<const TokenId> context) {
    config.validate();
    if (text.empty()) throw std::invalid_argument("uw_score: empty text");

    TokenSequence prefix{{context.begin(), context.end()}, text.language};
    prefix.ids.reserve(context.size() + text.size());
    double total = 0.0;
    for (TokenId observed : text.ids) {
        const auto probs = softmax(model.next_logits(prefix));
        if (observed >= probs.size()) throw std::out_of_range("uw_score: token id outside vocabulary");
        const double p = uw_uniform(prefix.ids, config);
        if (config.tv_bound == 0.0) {
            // Point-mass Q: log(1 / P(x)) on the ITS choice, the floor elsewhere.
            total += its_select(probs, p) == observed ? -std::log(probs[observed]) : config.zero_probability_floor;
        } else {
            total += maximin_llr(probs, uw_point_mass(probs, p), observed, config.tv_bound,
                                 config.zero_probability_floor);
        }
        prefix.ids.push_back(observed);
    }
    return {total, Scheme::UwLlr, text.size()};
}

UwEngine::UwEngine(UwConfig config, std::shared_ptr<const LanguageModel> model)
    : config_(config), model_(std::move(model)) {
    config_.validate();
    if (!model_) throw std::invalid_argument("UwEngine needs a language model for detection");
}

std::optional<TokenId> UwEngine::select(const TokenSequence& prefix, std::span<const double> probs) const {
    return its_select(probs, uw_uniform(prefix.ids, config_));
}

StrengthScore UwEngine::score(const TokenSequence& text, std::span<const TokenId> context) const {
    return uw_score(text, *model_, config_, context);
}

}  // namespace xwm
