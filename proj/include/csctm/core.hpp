#pragma once

// Domain types and pure evaluation for Tsetlin machines: literals, automaton
// state transitions, clauses, clause banks and classification.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace csctm {

enum class Polarity : std::uint8_t { Positive, Negative };

/// Empty clauses output 1 while training and 0 at inference.
enum class EvalMode : std::uint8_t { Training, Inference };

enum class Action : std::uint8_t { Exclude, Include };

using TaState = std::uint16_t;

/// Default number of states per action; 2N states fit in one byte.
inline constexpr TaState kDefaultStateDepth = 128;

inline constexpr std::size_t kWordBits = 64;

constexpr std::size_t words_for(std::size_t bits) { return (bits + kWordBits - 1) / kWordBits; }

// Tsetlin automaton with states [1, 2N]: [1, N] Exclude, [N+1, 2N] Include.
constexpr Action ta_action(TaState state, TaState depth) {
    return state > depth ? Action::Include : Action::Exclude;
}

constexpr TaState ta_reward(TaState state, TaState depth) {
    if (state > depth) return state < 2 * depth ? static_cast<TaState>(state + 1) : state;
    return state > 1 ? static_cast<TaState>(state - 1) : state;
}

constexpr TaState ta_penalty(TaState state, TaState depth) {
    return state > depth ? static_cast<TaState>(state - 1) : static_cast<TaState>(state + 1);
}

/// A booleanized feature vector X = [x_1..x_o] with its class label.
///
/// Literals are indexed k in [0, 2o): k < o is x_{k+1}, k >= o is NOT x_{k-o+1}.
/// The literal vector is kept bit-packed for word-parallel clause evaluation.
class BooleanSample {
public:
    BooleanSample() = default;
    BooleanSample(std::vector<std::uint8_t> features, std::uint32_t label);

    std::size_t feature_count() const { return features_.size(); }
    std::size_t literal_count() const { return 2 * features_.size(); }
    std::uint32_t label() const { return label_; }
    bool feature(std::size_t i) const { return features_[i] != 0; }
    std::span<const std::uint8_t> features() const { return features_; }

    /// Packed literal bits; bits past 2o are zero.
    std::span<const std::uint64_t> literal_words() const { return literals_; }

    bool operator==(const BooleanSample& other) const {
        return label_ == other.label_ && features_ == other.features_;
    }

private:
    std::vector<std::uint8_t> features_;
    std::vector<std::uint64_t> literals_;
    std::uint32_t label_ = 0;
};

/// Value of literal k on X. Throws std::out_of_range when k >= 2o.
bool literal_value(const BooleanSample& sample, std::size_t k);

/// One conjunctive clause backed by a team of 2o Tsetlin automata.
///
/// The include bitmap and included-literal count are maintained incrementally
/// on every state change, so they always agree with the TA states.
class Clause {
public:
    Clause(std::size_t feature_count, Polarity polarity, TaState depth = kDefaultStateDepth);

    Polarity polarity() const { return polarity_; }
    int sign() const { return polarity_ == Polarity::Positive ? 1 : -1; }
    std::size_t feature_count() const { return feature_count_; }
    std::size_t literal_count() const { return states_.size(); }
    TaState depth() const { return depth_; }

    TaState state(std::size_t k) const { return states_[k]; }
    std::span<const TaState> states() const { return states_; }
    bool includes(std::size_t k) const { return (include_[k / kWordBits] >> (k % kWordBits)) & 1U; }
    Action action(std::size_t k) const { return includes(k) ? Action::Include : Action::Exclude; }
    std::span<const std::uint64_t> include_words() const { return include_; }

    /// Cached number of included literals.
    std::size_t size() const { return size_; }

    void reward(std::size_t k) { set_state(k, ta_reward(states_[k], depth_)); }
    void penalize(std::size_t k) { set_state(k, ta_penalty(states_[k], depth_)); }

    /// Throws std::out_of_range for states outside [1, 2N].
    void set_state(std::size_t k, TaState state);

    bool evaluate(const BooleanSample& sample, EvalMode mode) const;

    std::vector<std::size_t> included_literals() const;

    /// Include count recomputed from the raw TA states.
    std::size_t recount() const;

    bool operator==(const Clause& other) const = default;

private:
    std::vector<TaState> states_;
    std::vector<std::uint64_t> include_;
    std::size_t feature_count_;
    std::size_t size_ = 0;
    TaState depth_;
    Polarity polarity_;
};

bool evaluate_clause(const Clause& clause, const BooleanSample& sample, EvalMode mode);
inline std::size_t clause_size(const Clause& clause) { return clause.size(); }

/// n clauses: the first n/2 vote for the class, the rest against it.
class ClauseBank {
public:
    ClauseBank(std::size_t clause_count, std::size_t feature_count, TaState depth = kDefaultStateDepth);

    std::size_t size() const { return clauses_.size(); }
    Clause& operator[](std::size_t j) { return clauses_[j]; }
    const Clause& operator[](std::size_t j) const { return clauses_[j]; }
    std::span<Clause> clauses() { return clauses_; }
    std::span<const Clause> clauses() const { return clauses_; }

    bool operator==(const ClauseBank& other) const = default;

private:
    std::vector<Clause> clauses_;
};

/// Positive-clause outputs minus negative-clause outputs.
int vote_sum(const ClauseBank& bank, const BooleanSample& sample, EvalMode mode = EvalMode::Inference);

struct Hyperparams {
    std::size_t clauses = 10;  // n, per bank
    int threshold = 1;         // T, voting margin
    double specificity = 3.9;  // s
    std::size_t budget = 0;    // b; 0 or >= 2o means unconstrained
    TaState state_depth = kDefaultStateDepth;
    bool boost_true_positive = false;

    bool operator==(const Hyperparams&) const = default;
};

/// Throws std::invalid_argument on T < 1, s <= 1, odd or zero n, zero depth.
void validate(const Hyperparams& params);

/// A Tsetlin machine: one clause bank per class, or a single bank for
/// two-class problems (classify_binary).
class Model {
public:
    /// budget 0 is normalized to 2o.
    Model(std::size_t feature_count, std::size_t bank_count, Hyperparams params);

    std::size_t feature_count() const { return feature_count_; }
    std::size_t literal_count() const { return 2 * feature_count_; }
    std::size_t bank_count() const { return banks_.size(); }
    /// Number of predictable classes; a single bank predicts {0, 1}.
    std::size_t class_count() const { return banks_.size() == 1 ? 2 : banks_.size(); }
    const Hyperparams& params() const { return params_; }
    std::size_t budget() const { return params_.budget; }
    bool unconstrained() const { return params_.budget >= literal_count(); }

    ClauseBank& bank(std::size_t c) { return banks_[c]; }
    const ClauseBank& bank(std::size_t c) const { return banks_[c]; }
    std::span<ClauseBank> banks() { return banks_; }
    std::span<const ClauseBank> banks() const { return banks_; }

    std::size_t total_clauses() const { return banks_.size() * params_.clauses; }

    bool operator==(const Model& other) const = default;

private:
    std::vector<ClauseBank> banks_;
    Hyperparams params_;
    std::size_t feature_count_;
};

/// Unit step u(v) = 1 iff v >= 0.
constexpr int unit_step(int v) { return v >= 0 ? 1 : 0; }

/// Requires a single-bank model.
int classify_binary(const Model& model, const BooleanSample& sample);

/// Index of the largest sum; ties go to the lowest index.
std::size_t argmax_lowest(std::span<const int> sums);

/// Requires at least two banks.
std::size_t classify_multiclass(const Model& model, const BooleanSample& sample);

/// Dispatches on bank count.
std::size_t predict(const Model& model, const BooleanSample& sample);

}  // namespace csctm
