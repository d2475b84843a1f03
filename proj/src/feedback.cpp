#include "csctm/feedback.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <stdexcept>

namespace csctm {

FeedbackParams::FeedbackParams(double specificity, std::size_t budget, bool boost_true_positive)
    : s_(specificity), budget_(budget), boost_(boost_true_positive) {
    if (!(specificity > 1.0)) throw std::invalid_argument("specificity s must be > 1");
    if (budget == 0) throw std::invalid_argument("literal budget must be >= 1");
    high_ = probability_threshold((s_ - 1.0) / s_);
    strong_ = boost_ ? probability_threshold(1.0) : high_;
    weak_ = probability_threshold(1.0 / s_);
}

FeedbackParams FeedbackParams::from(const Model& model) {
    const Hyperparams& p = model.params();
    return {p.specificity, p.budget, p.boost_true_positive};
}

bool type_i_gate(const Clause& clause, const BooleanSample& sample, std::size_t budget) {
    return clause.size() <= budget && clause.evaluate(sample, EvalMode::Training);
}

void type_i_feedback(Clause& clause, const BooleanSample& sample, const FeedbackParams& params, Rng& rng) {
    const bool gate = type_i_gate(clause, sample, params.budget());
    const auto literals = sample.literal_words();
    const std::size_t count = clause.literal_count();

    for (std::size_t k = 0; k < count; ++k) {
        const std::uint64_t draw = rng();
        const bool include = clause.includes(k);
        if (gate) {
            const bool value = (literals[k / kWordBits] >> (k % kWordBits)) & 1U;
            if (value) {
                if (include) {
                    if (draw < params.strong_threshold()) clause.reward(k);
                } else if (draw < params.exclude_penalty_threshold()) {
                    clause.penalize(k);
                }
            } else {
                assert(!include);
                if (!include && draw < params.weak_threshold()) clause.reward(k);
            }
        } else if (draw < params.weak_threshold()) {
            if (include) {
                clause.penalize(k);
            } else {
                clause.reward(k);
            }
        }
    }
}

void type_ii_feedback(Clause& clause, const BooleanSample& sample) {
    if (!clause.evaluate(sample, EvalMode::Training)) return;
    const auto literals = sample.literal_words();
    const auto include = clause.include_words();
    const std::size_t count = clause.literal_count();

    std::vector<std::size_t> targets;
    for (std::size_t w = 0; w < include.size(); ++w) {
        std::uint64_t bits = ~include[w] & ~literals[w];
        if ((w + 1) * kWordBits > count) {
            const std::size_t valid = count - w * kWordBits;
            bits &= valid == kWordBits ? ~std::uint64_t{0} : (std::uint64_t{1} << valid) - 1;
        }
        for (; bits != 0; bits &= bits - 1) {
            targets.push_back(w * kWordBits + static_cast<std::size_t>(std::countr_zero(bits)));
        }
    }
    for (std::size_t k : targets) clause.penalize(k);
}

double update_probability(int v, bool target, int threshold) {
    if (threshold < 1) throw std::invalid_argument("voting margin T must be >= 1");
    const int clipped = std::clamp(v, -threshold, threshold);
    const int error = target ? threshold - clipped : threshold + clipped;
    return static_cast<double>(error) / (2.0 * threshold);
}

}  // namespace csctm
