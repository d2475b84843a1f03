#include "csctm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace csctm {

namespace {

Rng seeded_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(stream),
                      std::uint32_t(stream >> 32)};
    return Rng(seq);
}

double elapsed_ms_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

double over_budget_fraction(const Model& model) {
    return static_cast<double>(over_budget_count(model)) / static_cast<double>(model.total_clauses());
}

EpochMetrics measure(const Model& model, const BooleanDataset& data, std::size_t epoch, std::string split) {
    EpochMetrics m;
    m.epoch = epoch;
    m.split = std::move(split);
    m.accuracy = evaluate(model, data).accuracy;
    m.avg_literals_per_clause = average_literals(model);
    m.over_budget_fraction = over_budget_fraction(model);
    return m;
}

}  // namespace

EvalResult evaluate(const Model& model, const BooleanDataset& data) {
    if (data.empty()) throw DataError(DataError::Kind::Empty, "cannot evaluate on an empty dataset");
    check_compatible(model, data);
    EvalResult r;
    const std::size_t q = model.class_count();
    r.confusion.assign(q, std::vector<std::size_t>(q, 0));
    for (const BooleanSample& x : data.samples) {
        const std::size_t y_hat = predict(model, x);
        ++r.confusion[x.label()][y_hat];
        r.correct += y_hat == x.label();
    }
    r.total = data.size();
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
    return r;
}

double average_literals(const Model& model) {
    std::size_t total = 0;
    for (const ClauseBank& bank : model.banks()) {
        for (const Clause& c : bank.clauses()) total += c.size();
    }
    return static_cast<double>(total) / static_cast<double>(model.total_clauses());
}

std::size_t over_budget_count(const Model& model) {
    std::size_t count = 0;
    for (const ClauseBank& bank : model.banks()) {
        for (const Clause& c : bank.clauses()) count += c.size() > model.budget();
    }
    return count;
}

void check_compatible(const Model& model, const BooleanDataset& data) {
    if (data.empty()) throw DataError(DataError::Kind::Empty, "dataset is empty");
    if (data.feature_count != model.feature_count()) {
        throw DataError(DataError::Kind::WidthMismatch, "dataset has " + std::to_string(data.feature_count) +
                                                            " features, model expects " +
                                                            std::to_string(model.feature_count()));
    }
    for (const BooleanSample& x : data.samples) {
        if (x.feature_count() != model.feature_count()) {
            throw DataError(DataError::Kind::WidthMismatch, "sample width differs from model feature count");
        }
        if (x.label() >= model.class_count()) {
            throw DataError(DataError::Kind::CountMismatch,
                            "label " + std::to_string(x.label()) + " outside the model's classes");
        }
    }
}

std::size_t banks_for(std::size_t class_count) { return class_count <= 2 ? 1 : class_count; }

// ---------------------------------------------------------------------------
// Sequential

std::size_t update_bank(ClauseBank& bank, const BooleanSample& sample, bool target, int threshold,
                        const FeedbackParams& feedback, Rng& rng) {
    const int v = vote_sum(bank, sample, EvalMode::Training);
    const std::uint64_t fire = probability_threshold(update_probability(v, target, threshold));
    std::size_t fired = 0;
    for (Clause& clause : bank.clauses()) {
        if (rng() >= fire) continue;
        ++fired;
        if ((clause.polarity() == Polarity::Positive) == target) {
            type_i_feedback(clause, sample, feedback, rng);
        } else {
            type_ii_feedback(clause, sample);
        }
    }
    return fired;
}

void train_sample(Model& model, const BooleanSample& sample, const FeedbackParams& feedback, Rng& rng) {
    const int T = model.params().threshold;
    if (model.bank_count() == 1) {
        update_bank(model.bank(0), sample, sample.label() == 1, T, feedback, rng);
        return;
    }
    const std::size_t q = model.bank_count();
    const std::size_t y = sample.label();
    update_bank(model.bank(y), sample, true, T, feedback, rng);
    std::size_t other = rng() % (q - 1);
    if (other >= y) ++other;
    update_bank(model.bank(other), sample, false, T, feedback, rng);
}

EpochMetrics train_epoch_sequential(Model& model, const BooleanDataset& data, Rng& rng, std::size_t epoch) {
    check_compatible(model, data);
    const FeedbackParams feedback = FeedbackParams::from(model);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    // Fisher-Yates with the trainer's own stream.
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (std::size_t i : order) train_sample(model, data.samples[i], feedback, rng);
    return measure(model, data, epoch, "train");
}

// ---------------------------------------------------------------------------
// Voting tally

VotingTally::VotingTally(std::size_t examples, std::size_t clauses, bool track_deltas)
    : examples_(examples),
      votes_(std::make_unique<std::atomic<int>[]>(examples)),
      previous_(clauses, std::vector<std::uint64_t>(words_for(examples), 0)) {
    for (std::size_t i = 0; i < examples; ++i) votes_[i].store(0, std::memory_order_relaxed);
    if (track_deltas) {
        ledger_ = std::make_unique<std::atomic<std::int64_t>[]>(examples);
        for (std::size_t i = 0; i < examples; ++i) ledger_[i].store(0, std::memory_order_relaxed);
    }
}

void VotingTally::add(std::size_t i, int delta) {
    votes_[i].fetch_add(delta, std::memory_order_relaxed);
    if (ledger_) ledger_[i].fetch_add(delta, std::memory_order_relaxed);
}

void VotingTally::set_previous(std::size_t i, std::size_t j, bool output) {
    const std::uint64_t bit = std::uint64_t{1} << (i % kWordBits);
    auto& word = previous_[j][i / kWordBits];
    word = output ? (word | bit) : (word & ~bit);
}

std::int64_t VotingTally::applied_delta(std::size_t i) const {
    return ledger_ ? ledger_[i].load(std::memory_order_relaxed) : 0;
}

void refresh_tally(const ClauseBank& bank, const BooleanDataset& pool, VotingTally& tally) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
        int v = 0;
        for (std::size_t j = 0; j < bank.size(); ++j) {
            const bool o = bank[j].evaluate(pool.samples[i], EvalMode::Inference);
            tally.set_previous(i, j, o);
            if (o) v += bank[j].sign();
        }
        tally.store(i, v);
    }
}

void sweep_tally(const ClauseBank& bank, const BooleanDataset& pool, VotingTally& tally) {
    for (std::size_t j = 0; j < bank.size(); ++j) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
            const bool o = bank[j].evaluate(pool.samples[i], EvalMode::Inference);
            const bool prev = tally.previous(i, j);
            if (o != prev) {
                tally.add(i, bank[j].sign() * (int(o) - int(prev)));
                tally.set_previous(i, j, o);
            }
        }
    }
}

int tally_drift(const ClauseBank& bank, const BooleanDataset& pool, const VotingTally& tally) {
    int drift = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        drift = std::max(drift, std::abs(tally.vote(i) - vote_sum(bank, pool.samples[i])));
    }
    return drift;
}

ClauseUpdateStats update_clause_decentralized(Clause& clause, std::size_t j, BankTarget target,
                                              std::span<const std::size_t> examples, const BooleanDataset& pool,
                                              VotingTally& tally, int threshold, const FeedbackParams& feedback,
                                              Rng& rng) {
    ClauseUpdateStats stats;
    const bool positive = clause.polarity() == Polarity::Positive;
    for (std::size_t i : examples) {
        const BooleanSample& x = pool.samples[i];
        bool y = false;
        if (target.bank_count == 1) {
            y = x.label() == 1;
        } else if (x.label() == target.bank) {
            y = true;
        } else if (rng() % (target.bank_count - 1) != 0) {
            continue;
        }

        const double p = update_probability(tally.vote(i), y, threshold);
        if (rng() >= probability_threshold(p)) continue;
        ++stats.fired;
        if (y != positive) {
            type_ii_feedback(clause, x);
        } else {
            type_i_feedback(clause, x, feedback, rng);
        }

        const bool o = clause.evaluate(x, EvalMode::Inference);
        const bool prev = tally.previous(i, j);
        if (o != prev) {
            tally.add(i, clause.sign() * (int(o) - int(prev)));
            tally.set_previous(i, j, o);
            ++stats.tally_writes;
        }
    }
    return stats;
}

DecentralizedTrainer::DecentralizedTrainer(Model& model, const BooleanDataset& pool, TrainConfig config,
                                           bool track_deltas)
    : model_(model),
      pool_(pool),
      config_(config),
      feedback_(FeedbackParams::from(model)),
      workers_(std::clamp<std::size_t>(config.workers, 1, model.total_clauses())) {
    check_compatible(model, pool);
    if (config_.batch == 0) throw std::invalid_argument("batch size must be >= 1");
    tallies_.reserve(model.bank_count());
    for (std::size_t c = 0; c < model.bank_count(); ++c) {
        tallies_.emplace_back(pool.size(), model.params().clauses, track_deltas);
    }
    clause_rngs_.reserve(model.total_clauses());
    for (std::size_t g = 0; g < model.total_clauses(); ++g) clause_rngs_.push_back(seeded_rng(config.seed, g + 1));
}

void DecentralizedTrainer::refresh() {
    for (std::size_t c = 0; c < model_.bank_count(); ++c) refresh_tally(model_.bank(c), pool_, tallies_[c]);
}

void DecentralizedTrainer::sweep() {
    for (std::size_t c = 0; c < model_.bank_count(); ++c) sweep_tally(model_.bank(c), pool_, tallies_[c]);
}

int DecentralizedTrainer::drift() const {
    int worst = 0;
    for (std::size_t c = 0; c < model_.bank_count(); ++c) {
        worst = std::max(worst, tally_drift(model_.bank(c), pool_, tallies_[c]));
    }
    return worst;
}

void DecentralizedTrainer::work(std::size_t worker, std::span<const std::size_t> order) {
    const std::size_t total = model_.total_clauses();
    const std::size_t n = model_.params().clauses;
    const std::size_t first = worker * total / workers_;
    const std::size_t last = (worker + 1) * total / workers_;
    const std::size_t examples = order.size();
    const std::size_t offset = worker * examples / workers_;
    const int T = model_.params().threshold;

    std::vector<std::size_t> batch;
    for (std::size_t start = 0; start < examples; start += config_.batch) {
        batch.clear();
        for (std::size_t t = start; t < std::min(examples, start + config_.batch); ++t) {
            batch.push_back(order[(offset + t) % examples]);
        }
        for (std::size_t g = first; g < last; ++g) {
            const std::size_t bank = g / n;
            const std::size_t j = g % n;
            update_clause_decentralized(model_.bank(bank)[j], j, {bank, model_.bank_count()}, batch, pool_,
                                        tallies_[bank], T, feedback_, clause_rngs_[g]);
        }
    }
}

void DecentralizedTrainer::run_epoch(std::size_t epoch) {
    std::vector<std::size_t> order(pool_.size());
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = seeded_rng(config_.seed ^ 0x9e3779b97f4a7c15ULL, epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng() % i]);

    if (workers_ == 1) {
        work(0, order);
        return;
    }
    std::vector<std::jthread> threads;
    threads.reserve(workers_);
    for (std::size_t w = 0; w < workers_; ++w) threads.emplace_back([this, w, &order] { work(w, order); });
}

// ---------------------------------------------------------------------------
// Drivers

TrainResult train(Model& model, const BooleanDataset& train_data, const BooleanDataset* test_data,
                  const TrainConfig& config, const MetricsSink& sink, bool timing) {
    if (config.mode == TrainMode::Decentralized) return train_parallel(model, train_data, test_data, config, sink);

    check_compatible(model, train_data);
    if (test_data) check_compatible(model, *test_data);
    TrainResult result;
    const auto start = std::chrono::steady_clock::now();
    Rng rng = seeded_rng(config.seed);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        EpochMetrics m = train_epoch_sequential(model, train_data, rng, epoch);
        if (timing) m.elapsed_ms = elapsed_ms_since(start);
        std::vector<EpochMetrics> records{m};
        if (test_data) {
            EpochMetrics t = measure(model, *test_data, epoch, "test");
            t.elapsed_ms = m.elapsed_ms;
            records.push_back(t);
        }
        for (const auto& r : records) {
            if (sink) sink(r);
            result.history.push_back(r);
        }
    }
    result.wall_ms = elapsed_ms_since(start);
    return result;
}

TrainResult train_parallel(Model& model, const BooleanDataset& train_data, const BooleanDataset* test_data,
                           const TrainConfig& config, const MetricsSink& sink) {
    if (test_data) check_compatible(model, *test_data);
    TrainResult result;
    const auto start = std::chrono::steady_clock::now();
    DecentralizedTrainer trainer(model, train_data, config);
    trainer.refresh();
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        trainer.run_epoch(epoch);
        std::vector<EpochMetrics> records{measure(model, train_data, epoch, "train")};
        if (test_data) records.push_back(measure(model, *test_data, epoch, "test"));
        const double ms = elapsed_ms_since(start);
        for (auto& r : records) {
            r.elapsed_ms = ms;
            if (sink) sink(r);
            result.history.push_back(r);
        }
    }
    result.wall_ms = elapsed_ms_since(start);
    return result;
}

}  // namespace csctm
