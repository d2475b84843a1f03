#pragma once

// Training orchestration: the sequential per-sample loop with resource
// allocation, and decentralized clause-parallel training over a shared
// voting tally with eventual consistency.

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "csctm/core.hpp"
#include "csctm/datasets.hpp"
#include "csctm/feedback.hpp"

namespace csctm {

enum class TrainMode : std::uint8_t { Sequential, Decentralized };

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch = 1;    // examples per clause visit (decentralized)
    std::size_t workers = 1;  // decentralized only
    std::uint64_t seed = 1;
    TrainMode mode = TrainMode::Sequential;
};

/// One line-delimited metrics record.
struct EpochMetrics {
    std::size_t epoch = 0;
    std::string split;
    double accuracy = 0.0;
    double avg_literals_per_clause = 0.0;
    double over_budget_fraction = 0.0;
    std::optional<double> elapsed_ms;
};

struct EvalResult {
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    /// confusion[truth][predicted]
    std::vector<std::vector<std::size_t>> confusion;
};

/// Inference-mode classification of every sample. Throws on an empty dataset.
EvalResult evaluate(const Model& model, const BooleanDataset& data);

/// Mean included literals per clause over all banks.
double average_literals(const Model& model);
/// Clauses whose size exceeds the literal budget.
std::size_t over_budget_count(const Model& model);

/// Throws DataError on empty data, width mismatch, or labels the model cannot predict.
void check_compatible(const Model& model, const BooleanDataset& data);

/// Bank count a dataset implies: one bank for two classes, otherwise q.
std::size_t banks_for(std::size_t class_count);

// ---------------------------------------------------------------------------
// Sequential training

/// Resource-allocated update of one bank for one sample: v is computed with
/// training-mode clause outputs, then each clause fires with probability
/// update_probability(v, y, T). Fired clauses with polarity matching y get
/// Type I, the others Type II. Returns the number of fired clauses.
std::size_t update_bank(ClauseBank& bank, const BooleanSample& sample, bool target, int threshold,
                        const FeedbackParams& feedback, Rng& rng);

/// Updates the label's bank with y = 1 and, for multiclass models, one
/// uniformly drawn other bank with y = 0.
void train_sample(Model& model, const BooleanSample& sample, const FeedbackParams& feedback, Rng& rng);

/// One seeded-shuffled pass over the data. Returns training-split metrics
/// measured after the pass.
EpochMetrics train_epoch_sequential(Model& model, const BooleanDataset& data, Rng& rng, std::size_t epoch = 1);

// ---------------------------------------------------------------------------
// Decentralized training

/// Cached vote sums v_i for one bank plus the previous output bit o*_ij of
/// every (example, clause) pair. v_i supports atomic read and fetch-add only;
/// the o* bits of clause j are written solely by the worker owning clause j.
class VotingTally {
public:
    VotingTally(std::size_t examples, std::size_t clauses, bool track_deltas = false);

    std::size_t examples() const { return examples_; }
    std::size_t clauses() const { return previous_.size(); }

    int vote(std::size_t i) const { return votes_[i].load(std::memory_order_relaxed); }
    void add(std::size_t i, int delta);
    void store(std::size_t i, int value) { votes_[i].store(value, std::memory_order_relaxed); }

    bool previous(std::size_t i, std::size_t j) const {
        return (previous_[j][i / kWordBits] >> (i % kWordBits)) & 1U;
    }
    void set_previous(std::size_t i, std::size_t j, bool output);

    /// Sum of all deltas applied through add() to example i; zero unless
    /// constructed with track_deltas.
    std::int64_t applied_delta(std::size_t i) const;

private:
    std::size_t examples_;
    std::unique_ptr<std::atomic<int>[]> votes_;
    std::unique_ptr<std::atomic<std::int64_t>[]> ledger_;
    std::vector<std::vector<std::uint64_t>> previous_;
};

/// Recomputes every v_i and o*_ij from scratch with inference-mode outputs.
void refresh_tally(const ClauseBank& bank, const BooleanDataset& pool, VotingTally& tally);

/// Re-evaluates every (example, clause) pair and applies the pending deltas
/// without any feedback; with frozen clauses this makes the tally exact.
void sweep_tally(const ClauseBank& bank, const BooleanDataset& pool, VotingTally& tally);

/// max_i |v_i - vote_sum(bank, X_i)|.
int tally_drift(const ClauseBank& bank, const BooleanDataset& pool, const VotingTally& tally);

/// Which examples count as y = 1 / y = 0 for a bank.
struct BankTarget {
    std::size_t bank = 0;
    std::size_t bank_count = 1;
};

struct ClauseUpdateStats {
    std::size_t fired = 0;
    std::size_t tally_writes = 0;
};

/// Processes the given pool examples for clause j of a bank: reads the cached
/// v_i, fires with probability e / 2T, applies Type I or II, and if the
/// clause's output on X_i changed, adds the signed delta to v_i.
/// Multiclass banks treat other-class examples as y = 0 with probability
/// 1/(q-1), skipping them otherwise.
ClauseUpdateStats update_clause_decentralized(Clause& clause, std::size_t j, BankTarget target,
                                              std::span<const std::size_t> examples, const BooleanDataset& pool,
                                              VotingTally& tally, int threshold, const FeedbackParams& feedback,
                                              Rng& rng);

/// Owns the tallies and per-clause random streams for a model trained on a
/// fixed example pool. Clauses are statically block-partitioned among workers.
class DecentralizedTrainer {
public:
    DecentralizedTrainer(Model& model, const BooleanDataset& pool, TrainConfig config, bool track_deltas = false);

    /// Rebuilds every tally from scratch.
    void refresh();
    /// One pass in which every clause visits every pool example once.
    void run_epoch(std::size_t epoch);
    /// Frozen-clause consistency sweep over all banks.
    void sweep();
    /// Largest tally error across banks.
    int drift() const;

    const VotingTally& tally(std::size_t bank) const { return tallies_[bank]; }
    std::size_t worker_count() const { return workers_; }

private:
    void work(std::size_t worker, std::span<const std::size_t> order);

    Model& model_;
    const BooleanDataset& pool_;
    TrainConfig config_;
    FeedbackParams feedback_;
    std::vector<VotingTally> tallies_;
    std::vector<Rng> clause_rngs_;
    std::size_t workers_;
};

// ---------------------------------------------------------------------------
// Drivers

struct TrainResult {
    /// Per epoch: a "train" record, then a "test" record when a test set is given.
    std::vector<EpochMetrics> history;
    double wall_ms = 0.0;
};

using MetricsSink = std::function<void(const EpochMetrics&)>;

/// Runs cfg.epochs epochs in the configured mode. Sequential runs are bitwise
/// reproducible for a fixed seed; elapsed_ms is filled only when `timing`.
TrainResult train(Model& model, const BooleanDataset& train_data, const BooleanDataset* test_data,
                  const TrainConfig& config, const MetricsSink& sink = {}, bool timing = false);

/// Decentralized training: one tally refresh, then cfg.epochs epochs across
/// cfg.workers threads. Results may differ run to run when workers > 1.
TrainResult train_parallel(Model& model, const BooleanDataset& train_data, const BooleanDataset* test_data,
                           const TrainConfig& config, const MetricsSink& sink = {});

}  // namespace csctm
