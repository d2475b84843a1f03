#pragma once

// Model persistence with run-length-encoded include bitmaps, clause
// statistics, human-readable clause dumps and the clause-logic energy estimate.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "csctm/core.hpp"

namespace csctm {

class ModelFormatError : public std::runtime_error {
public:
    enum class Kind { BadMagic, VersionMismatch, Corrupt, Io };

    ModelFormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct Run {
    bool value = false;
    std::uint64_t length = 0;

    bool operator==(const Run&) const = default;
};

/// Maximal runs of equal bits; runs alternate, starting with the value of bit 0.
std::vector<Run> rle_encode(const std::vector<bool>& bits);

/// Inverse of rle_encode. Throws ModelFormatError(Corrupt) when the run lengths
/// do not sum to `declared_length`, a run is empty, or runs fail to alternate.
std::vector<bool> rle_decode(std::span<const Run> runs, std::uint64_t declared_length);

/// Unsigned LEB128 (little-endian base-128).
void put_varint(std::vector<std::uint8_t>& out, std::uint64_t value);
/// Throws ModelFormatError(Corrupt) on truncation or overlong encodings.
std::uint64_t get_varint(std::span<const std::uint8_t> bytes, std::size_t& offset);

// Model file layout (all integers little-endian):
//   magic "CSCTM\0" | u32 version | u32 o | u32 q | u32 n | i32 T | f64 s |
//   u32 b | u32 N | u8 flags (bit0 boost, bit1 TA states present)
//   per clause, bank-major: varint run count, u8 value of the first run
//   (omitted when there are no runs), varint run lengths
//   if TA states present: u16 per TA, clause-major
// Without TA states, included literals load at state N+1 and excluded at N.

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> encode_model(const Model& model, bool include_ta_states);
Model decode_model(std::span<const std::uint8_t> bytes);

void save_model(const Model& model, const std::filesystem::path& path, bool include_ta_states);
Model load_model(const std::filesystem::path& path);

struct ClauseStats {
    std::vector<std::size_t> literal_counts;  // bank-major
    double average_literals = 0.0;            // l_ave
    std::size_t over_budget_count = 0;
    std::size_t model_size_bytes = 0;         // encoded, without TA states
};

ClauseStats clause_stats(const Model& model, std::size_t budget);
inline ClauseStats clause_stats(const Model& model) { return clause_stats(model, model.budget()); }

/// Estimated fraction of clause-logic switching energy, b / l_ave; empty when
/// l_ave is zero.
std::optional<double> energy_ratio(double budget, double average_literals);

/// Literal k rendered with feature names (default x1..xo), negation as "¬".
std::string literal_name(std::size_t k, std::size_t feature_count, std::span<const std::string> feature_names = {});

/// One line per clause, "Class c + : l_a ∧ l_b" or "Class c − : (empty)",
/// literals in feature order (x_i before ¬x_i), clauses sorted by size
/// ascending within each class; at most top_k per class when
/// top_k > 0. Throws std::invalid_argument if feature_names has the wrong length.
std::vector<std::string> dump_clauses(const Model& model, std::span<const std::string> feature_names = {},
                                      std::size_t top_k = 0);

}  // namespace csctm
