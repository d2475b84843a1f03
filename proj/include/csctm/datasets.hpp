#pragma once

// Dataset ingestion and booleanization: synthetic logic datasets, IDX image
// files, CSV tables, threshold and thermometer encoders.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "csctm/core.hpp"

namespace csctm {

/// Booleanized samples sharing one feature width.
struct BooleanDataset {
    std::size_t feature_count = 0;
    std::size_t class_count = 0;
    std::vector<BooleanSample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Builds a dataset, checking that every row has the same width. The class
/// count is max label + 1 unless given.
BooleanDataset make_dataset(std::vector<BooleanSample> samples, std::optional<std::size_t> class_count = {});

/// Real-valued rows with contiguous labels.
struct RawDataset {
    std::vector<std::vector<double>> rows;
    std::vector<std::uint32_t> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    std::size_t size() const { return rows.size(); }
    std::size_t width() const { return rows.empty() ? 0 : rows.front().size(); }
    std::size_t class_count() const;
};

class DataError : public std::runtime_error {
public:
    enum class Kind {
        Io,
        BadMagic,
        Truncated,
        CountMismatch,
        NonNumeric,
        MissingLabelColumn,
        RaggedRow,
        WidthMismatch,
        Empty,
    };

    DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

const char* to_string(DataError::Kind kind);

// Synthetic logic datasets over two features (x1, x2).

/// The four (x1, x2) rows in order 00, 01, 10, 11 with y = x1 XOR x2.
std::vector<BooleanSample> xor_truth_table();
/// The four (x1, x2) rows in order 00, 01, 10, 11 with y = x1 OR x2.
std::vector<BooleanSample> or_truth_table();

/// Uniform (x1, x2), y = x1 XOR x2 flipped with probability noise_rate in [0, 0.5).
std::vector<BooleanSample> generate_xor(std::size_t count, double noise_rate, std::uint64_t seed);
/// Uniform (x1, x2), y = x1 OR x2.
std::vector<BooleanSample> generate_or(std::size_t count, std::uint64_t seed);

// IDX (MNIST) files: big-endian, magic 0x00000803 for images, 0x00000801 for labels.

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::vector<std::vector<std::uint8_t>> images;
};

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

/// Pixels in [0, 255] as rows; throws DataError on bad magic, truncation or
/// image/label count mismatch.
RawDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Header row required. Non-label columns must be numeric; labels are
/// factorized to 0..q-1 in order of first appearance.
RawDataset parse_csv(const std::string& text, const std::string& label_column);
RawDataset load_csv(const std::filesystem::path& path, const std::string& label_column);

// Booleanizers.

struct ThresholdEncoder {
    double threshold = 75.0;
};

struct ThermometerEncoder {
    std::size_t bins = 5;
};

using BooleanizerSpec = std::variant<ThresholdEncoder, ThermometerEncoder>;

/// Parses "threshold:75" or "thermometer:5". Throws std::invalid_argument.
BooleanizerSpec parse_booleanizer(const std::string& text);

/// A booleanizer fitted on a training split; the output width is fixed by the fit.
///
/// Threshold: bit = value > theta. Thermometer: per feature, strictly increasing
/// edges from equal-frequency quantiles, bit_i = value > edge_i.
class Booleanizer {
public:
    static Booleanizer threshold(std::size_t width, double theta);
    static Booleanizer thermometer(std::vector<std::vector<double>> edges);
    static Booleanizer fit(const BooleanizerSpec& spec, const RawDataset& train);

    std::size_t input_width() const { return edges_.size(); }
    std::size_t output_width() const { return output_width_; }
    std::span<const double> edges(std::size_t feature) const { return edges_[feature]; }

    std::vector<std::uint8_t> encode(std::span<const double> row) const;
    BooleanDataset apply(const RawDataset& raw) const;

private:
    explicit Booleanizer(std::vector<std::vector<double>> edges);

    std::vector<std::vector<double>> edges_;
    std::size_t output_width_ = 0;
};

/// Up to k equal-frequency cut points of the values, strictly increasing.
std::vector<double> quantile_edges(std::vector<double> values, std::size_t k);

/// Seeded permutation split; the first `train_count` shuffled rows train.
struct Split {
    BooleanDataset train;
    BooleanDataset test;
};
Split split_dataset(const BooleanDataset& data, double train_fraction, std::uint64_t seed);

/// Seeded disjoint subsample of a raw dataset into (train, test) row sets.
std::pair<RawDataset, RawDataset> subsample(const RawDataset& raw, std::size_t train_count,
                                            std::size_t test_count, std::uint64_t seed);

}  // namespace csctm
