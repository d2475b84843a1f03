#pragma once

// Stochastic Type I (vanilla and clause-size-constrained) and deterministic
// Type II feedback, plus the resource-allocation update probability.

#include <cstdint>
#include <random>

#include "csctm/core.hpp"

namespace csctm {

/// Pseudo-random stream owned by a single worker. One 32-bit draw is consumed
/// per TA per Type I call, in literal-index order.
using Rng = std::mt19937;

/// Probability p as a threshold on a 32-bit draw: event iff draw < threshold.
constexpr std::uint64_t probability_threshold(double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return std::uint64_t{1} << 32;
    return static_cast<std::uint64_t>(p * 4294967296.0);
}

class FeedbackParams {
public:
    /// budget is the literal budget b; pass 2o (or more) for vanilla Type I.
    FeedbackParams(double specificity, std::size_t budget, bool boost_true_positive = false);
    static FeedbackParams from(const Model& model);

    double specificity() const { return s_; }
    std::size_t budget() const { return budget_; }
    bool boost_true_positive() const { return boost_; }

    /// (s-1)/s, or 1 when boosting true positives.
    std::uint64_t strong_threshold() const { return strong_; }
    /// (s-1)/s irrespective of boosting.
    std::uint64_t exclude_penalty_threshold() const { return high_; }
    /// 1/s
    std::uint64_t weak_threshold() const { return weak_; }

private:
    double s_;
    std::size_t budget_;
    bool boost_;
    std::uint64_t strong_;
    std::uint64_t high_;
    std::uint64_t weak_;
};

/// The Type I column gate: clause output (training convention) AND size <= b.
/// Non-decreasing in b.
bool type_i_gate(const Clause& clause, const BooleanSample& sample, std::size_t budget);

/// Applies Type I feedback to every TA of the clause. The gate is snapshotted
/// before any TA moves.
///
///   gate, literal 1:  Include rewarded w.p. (s-1)/s; Exclude penalized w.p. (s-1)/s
///   gate, literal 0:  Exclude rewarded w.p. 1/s (Include cannot occur)
///   no gate:          Include penalized w.p. 1/s; Exclude rewarded w.p. 1/s
void type_i_feedback(Clause& clause, const BooleanSample& sample, const FeedbackParams& params, Rng& rng);

/// If the clause outputs 1 (training convention), every excluded literal with
/// value 0 is penalized toward Include. Not budget-gated. Consumes no randomness.
void type_ii_feedback(Clause& clause, const BooleanSample& sample);

/// e / 2T with e = T - clip(v) for y = 1 and T + clip(v) for y = 0.
double update_probability(int v, bool target, int threshold);

}  // namespace csctm
