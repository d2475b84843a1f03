#include "csctm/core.hpp"

#include <bit>
#include <string>

namespace csctm {

BooleanSample::BooleanSample(std::vector<std::uint8_t> features, std::uint32_t label)
    : features_(std::move(features)), label_(label) {
    const std::size_t o = features_.size();
    literals_.assign(words_for(2 * o), 0);
    for (std::size_t i = 0; i < o; ++i) {
        features_[i] = features_[i] != 0;
        const std::size_t k = features_[i] ? i : i + o;
        literals_[k / kWordBits] |= std::uint64_t{1} << (k % kWordBits);
    }
}

bool literal_value(const BooleanSample& sample, std::size_t k) {
    const std::size_t o = sample.feature_count();
    if (k >= 2 * o) {
        throw std::out_of_range("literal index " + std::to_string(k) + " outside [0, " +
                                std::to_string(2 * o) + ")");
    }
    return k < o ? sample.feature(k) : !sample.feature(k - o);
}

Clause::Clause(std::size_t feature_count, Polarity polarity, TaState depth)
    : states_(2 * feature_count, depth),
      include_(words_for(2 * feature_count), 0),
      feature_count_(feature_count),
      depth_(depth),
      polarity_(polarity) {
    if (depth == 0 || depth > 0x7fff) throw std::invalid_argument("state depth must be in [1, 32767]");
}

void Clause::set_state(std::size_t k, TaState state) {
    if (state < 1 || state > 2 * depth_) {
        throw std::out_of_range("TA state " + std::to_string(state) + " outside [1, 2N]");
    }
    const bool was = states_[k] > depth_;
    const bool now = state > depth_;
    states_[k] = state;
    if (was == now) return;
    const std::uint64_t bit = std::uint64_t{1} << (k % kWordBits);
    if (now) {
        include_[k / kWordBits] |= bit;
        ++size_;
    } else {
        include_[k / kWordBits] &= ~bit;
        --size_;
    }
}

bool Clause::evaluate(const BooleanSample& sample, EvalMode mode) const {
    if (size_ == 0) return mode == EvalMode::Training;
    const auto literals = sample.literal_words();
    for (std::size_t w = 0; w < include_.size(); ++w) {
        if ((include_[w] & ~literals[w]) != 0) return false;
    }
    return true;
}

std::vector<std::size_t> Clause::included_literals() const {
    std::vector<std::size_t> out;
    out.reserve(size_);
    for (std::size_t w = 0; w < include_.size(); ++w) {
        for (std::uint64_t bits = include_[w]; bits != 0; bits &= bits - 1) {
            out.push_back(w * kWordBits + static_cast<std::size_t>(std::countr_zero(bits)));
        }
    }
    return out;
}

std::size_t Clause::recount() const {
    std::size_t count = 0;
    for (TaState s : states_) count += s > depth_;
    return count;
}

bool evaluate_clause(const Clause& clause, const BooleanSample& sample, EvalMode mode) {
    return clause.evaluate(sample, mode);
}

ClauseBank::ClauseBank(std::size_t clause_count, std::size_t feature_count, TaState depth) {
    if (clause_count == 0 || clause_count % 2 != 0) {
        throw std::invalid_argument("clause count must be even and positive");
    }
    clauses_.reserve(clause_count);
    for (std::size_t j = 0; j < clause_count; ++j) {
        clauses_.emplace_back(feature_count, j < clause_count / 2 ? Polarity::Positive : Polarity::Negative,
                              depth);
    }
}

int vote_sum(const ClauseBank& bank, const BooleanSample& sample, EvalMode mode) {
    int v = 0;
    for (const Clause& c : bank.clauses()) {
        if (c.evaluate(sample, mode)) v += c.sign();
    }
    return v;
}

void validate(const Hyperparams& params) {
    if (params.clauses == 0 || params.clauses % 2 != 0) {
        throw std::invalid_argument("number of clauses must be even and positive");
    }
    if (params.threshold < 1) throw std::invalid_argument("voting margin T must be >= 1");
    if (!(params.specificity > 1.0)) throw std::invalid_argument("specificity s must be > 1");
    if (params.state_depth == 0 || params.state_depth > 0x7fff) {
        throw std::invalid_argument("state depth must be in [1, 32767]");
    }
}

Model::Model(std::size_t feature_count, std::size_t bank_count, Hyperparams params)
    : params_(params), feature_count_(feature_count) {
    validate(params_);
    if (feature_count == 0) throw std::invalid_argument("feature count must be positive");
    if (bank_count == 0) throw std::invalid_argument("bank count must be positive");
    if (params_.budget == 0 || params_.budget > 2 * feature_count) params_.budget = 2 * feature_count;
    banks_.reserve(bank_count);
    for (std::size_t c = 0; c < bank_count; ++c) {
        banks_.emplace_back(params_.clauses, feature_count, params_.state_depth);
    }
}

int classify_binary(const Model& model, const BooleanSample& sample) {
    if (model.bank_count() != 1) throw std::logic_error("classify_binary requires a single-bank model");
    return unit_step(vote_sum(model.bank(0), sample));
}

std::size_t argmax_lowest(std::span<const int> sums) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < sums.size(); ++c) {
        if (sums[c] > sums[best]) best = c;
    }
    return best;
}

std::size_t classify_multiclass(const Model& model, const BooleanSample& sample) {
    if (model.bank_count() < 2) throw std::logic_error("classify_multiclass requires two or more banks");
    std::vector<int> sums(model.bank_count());
    for (std::size_t c = 0; c < sums.size(); ++c) sums[c] = vote_sum(model.bank(c), sample);
    return argmax_lowest(sums);
}

std::size_t predict(const Model& model, const BooleanSample& sample) {
    return model.bank_count() == 1 ? static_cast<std::size_t>(classify_binary(model, sample))
                                   : classify_multiclass(model, sample);
}

}  // namespace csctm
