#include "csctm/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace csctm {

BooleanDataset make_dataset(std::vector<BooleanSample> samples, std::optional<std::size_t> class_count) {
    BooleanDataset data;
    if (!samples.empty()) data.feature_count = samples.front().feature_count();
    std::size_t max_label = 0;
    for (const BooleanSample& s : samples) {
        if (s.feature_count() != data.feature_count) {
            throw DataError(DataError::Kind::WidthMismatch, "samples have differing feature widths");
        }
        max_label = std::max<std::size_t>(max_label, s.label());
    }
    data.class_count = samples.empty() ? 0 : max_label + 1;
    if (class_count) {
        if (!samples.empty() && *class_count <= max_label) {
            throw std::invalid_argument("label exceeds declared class count");
        }
        data.class_count = *class_count;
    }
    data.samples = std::move(samples);
    return data;
}

std::size_t RawDataset::class_count() const {
    if (!class_names.empty()) return class_names.size();
    std::size_t q = 0;
    for (auto y : labels) q = std::max<std::size_t>(q, y + 1);
    return q;
}

const char* to_string(DataError::Kind kind) {
    switch (kind) {
        case DataError::Kind::Io: return "Io";
        case DataError::Kind::BadMagic: return "BadMagic";
        case DataError::Kind::Truncated: return "Truncated";
        case DataError::Kind::CountMismatch: return "CountMismatch";
        case DataError::Kind::NonNumeric: return "NonNumeric";
        case DataError::Kind::MissingLabelColumn: return "MissingLabelColumn";
        case DataError::Kind::RaggedRow: return "RaggedRow";
        case DataError::Kind::WidthMismatch: return "WidthMismatch";
        case DataError::Kind::Empty: return "Empty";
    }
    return "Unknown";
}

namespace {

std::vector<BooleanSample> truth_table(bool (*op)(bool, bool)) {
    std::vector<BooleanSample> rows;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            rows.emplace_back(std::vector<std::uint8_t>{std::uint8_t(a), std::uint8_t(b)},
                              op(a != 0, b != 0) ? 1U : 0U);
        }
    }
    return rows;
}

}  // namespace

std::vector<BooleanSample> xor_truth_table() {
    return truth_table([](bool a, bool b) { return a != b; });
}

std::vector<BooleanSample> or_truth_table() {
    return truth_table([](bool a, bool b) { return a || b; });
}

std::vector<BooleanSample> generate_xor(std::size_t count, double noise_rate, std::uint64_t seed) {
    if (!(noise_rate >= 0.0 && noise_rate < 0.5)) throw std::invalid_argument("noise rate must be in [0, 0.5)");
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution bit(0.5);
    std::bernoulli_distribution flip(noise_rate);
    std::vector<BooleanSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const bool a = bit(rng);
        const bool b = bit(rng);
        bool y = a != b;
        if (flip(rng)) y = !y;
        out.emplace_back(std::vector<std::uint8_t>{a, b}, y ? 1U : 0U);
    }
    return out;
}

std::vector<BooleanSample> generate_or(std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution bit(0.5);
    std::vector<BooleanSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const bool a = bit(rng);
        const bool b = bit(rng);
        out.emplace_back(std::vector<std::uint8_t>{a, b}, (a || b) ? 1U : 0U);
    }
    return out;
}

// ---------------------------------------------------------------------------
// IDX

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    return (std::uint32_t(bytes[offset]) << 24) | (std::uint32_t(bytes[offset + 1]) << 16) |
           (std::uint32_t(bytes[offset + 2]) << 8) | std::uint32_t(bytes[offset + 3]);
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

std::uint32_t idx_header(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic, std::size_t header_size,
                         const char* what) {
    if (bytes.size() < 4) throw DataError(DataError::Kind::Truncated, std::string(what) + ": missing magic number");
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != expected_magic) {
        std::ostringstream msg;
        msg << what << ": bad magic 0x" << std::hex << magic;
        throw DataError(DataError::Kind::BadMagic, msg.str());
    }
    if (bytes.size() < header_size) throw DataError(DataError::Kind::Truncated, std::string(what) + ": truncated header");
    return read_be32(bytes, 4);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
    const std::uint32_t count = idx_header(bytes, kIdxImagesMagic, 16, "idx images");
    IdxImages out;
    out.rows = read_be32(bytes, 8);
    out.cols = read_be32(bytes, 12);
    const std::size_t pixels = std::size_t(out.rows) * out.cols;
    if (bytes.size() - 16 < std::size_t(count) * pixels) {
        throw DataError(DataError::Kind::Truncated, "idx images: payload shorter than header declares");
    }
    out.images.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        auto first = bytes.begin() + 16 + std::ptrdiff_t(i * pixels);
        out.images.emplace_back(first, first + std::ptrdiff_t(pixels));
    }
    return out;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
    const std::uint32_t count = idx_header(bytes, kIdxLabelsMagic, 8, "idx labels");
    if (bytes.size() - 8 < count) throw DataError(DataError::Kind::Truncated, "idx labels: payload shorter than header declares");
    return {bytes.begin() + 8, bytes.begin() + 8 + count};
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
    std::vector<std::uint8_t> out;
    write_be32(out, kIdxImagesMagic);
    write_be32(out, static_cast<std::uint32_t>(images.images.size()));
    write_be32(out, images.rows);
    write_be32(out, images.cols);
    for (const auto& img : images.images) out.insert(out.end(), img.begin(), img.end());
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
    std::vector<std::uint8_t> out;
    write_be32(out, kIdxLabelsMagic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.insert(out.end(), labels.begin(), labels.end());
    return out;
}

RawDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const IdxImages images = parse_idx_images(read_file(images_path));
    const std::vector<std::uint8_t> labels = parse_idx_labels(read_file(labels_path));
    if (images.images.size() != labels.size()) {
        throw DataError(DataError::Kind::CountMismatch, "idx: " + std::to_string(images.images.size()) +
                                                            " images but " + std::to_string(labels.size()) + " labels");
    }
    RawDataset raw;
    raw.rows.reserve(labels.size());
    for (const auto& img : images.images) raw.rows.emplace_back(img.begin(), img.end());
    raw.labels.assign(labels.begin(), labels.end());
    for (std::size_t r = 0; r < images.rows; ++r) {
        for (std::size_t c = 0; c < images.cols; ++c) {
            raw.feature_names.push_back("p" + std::to_string(r) + "_" + std::to_string(c));
        }
    }
    return raw;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else {
            field.push_back(ch);
        }
    }
    fields.push_back(std::move(field));
    return fields;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t");
    return s.substr(first, last - first + 1);
}

std::optional<double> parse_number(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) return std::nullopt;
    double value = 0.0;
    const char* begin = t.data();
    const char* end = begin + t.size();
    if (*begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

}  // namespace

RawDataset parse_csv(const std::string& text, const std::string& label_column) {
    std::istringstream in(text);
    std::string line;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };

    if (!next_line()) throw DataError(DataError::Kind::Empty, "csv: missing header row");
    const std::vector<std::string> header = split_csv_line(line);
    std::size_t label_index = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == label_column) label_index = i;
    }
    if (label_index == header.size()) {
        throw DataError(DataError::Kind::MissingLabelColumn, "csv: no column named '" + label_column + "'");
    }

    RawDataset raw;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i != label_index) raw.feature_names.push_back(trim(header[i]));
    }
    std::unordered_map<std::string, std::uint32_t> label_ids;
    std::size_t line_no = 1;
    while (next_line()) {
        ++line_no;
        const std::vector<std::string> fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            throw DataError(DataError::Kind::RaggedRow, "csv line " + std::to_string(line_no) + ": expected " +
                                                            std::to_string(header.size()) + " fields, got " +
                                                            std::to_string(fields.size()));
        }
        std::vector<double> row;
        row.reserve(header.size() - 1);
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i == label_index) continue;
            const auto value = parse_number(fields[i]);
            if (!value) {
                throw DataError(DataError::Kind::NonNumeric, "csv line " + std::to_string(line_no) + ": '" +
                                                                 fields[i] + "' is not numeric");
            }
            row.push_back(*value);
        }
        const std::string label = trim(fields[label_index]);
        auto [it, inserted] = label_ids.try_emplace(label, static_cast<std::uint32_t>(raw.class_names.size()));
        if (inserted) raw.class_names.push_back(label);
        raw.rows.push_back(std::move(row));
        raw.labels.push_back(it->second);
    }
    return raw;
}

RawDataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
    std::ifstream in(path);
    if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_csv(text.str(), label_column);
}

// ---------------------------------------------------------------------------
// Booleanizers

BooleanizerSpec parse_booleanizer(const std::string& text) {
    const auto colon = text.find(':');
    const std::string kind = text.substr(0, colon);
    const std::string arg = colon == std::string::npos ? std::string{} : text.substr(colon + 1);
    if (kind == "threshold") {
        if (arg.empty()) return ThresholdEncoder{};
        const auto value = parse_number(arg);
        if (!value) throw std::invalid_argument("bad threshold '" + arg + "'");
        return ThresholdEncoder{*value};
    }
    if (kind == "thermometer") {
        if (arg.empty()) return ThermometerEncoder{};
        const auto value = parse_number(arg);
        if (!value || *value < 1 || *value != static_cast<double>(static_cast<std::size_t>(*value))) {
            throw std::invalid_argument("bad thermometer bin count '" + arg + "'");
        }
        return ThermometerEncoder{static_cast<std::size_t>(*value)};
    }
    throw std::invalid_argument("unknown booleanizer '" + text + "' (expected threshold:θ or thermometer:k)");
}

std::vector<double> quantile_edges(std::vector<double> values, std::size_t k) {
    std::vector<double> edges;
    if (values.empty() || k == 0) return edges;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    for (std::size_t i = 1; i <= k; ++i) {
        const std::size_t pos = std::min(n - 1, (i * n) / (k + 1));
        const double edge = values[pos];
        if (edge >= values.back()) break;
        if (edges.empty() || edge > edges.back()) edges.push_back(edge);
    }
    return edges;
}

Booleanizer::Booleanizer(std::vector<std::vector<double>> edges) : edges_(std::move(edges)) {
    for (const auto& e : edges_) {
        for (std::size_t i = 1; i < e.size(); ++i) {
            if (!(e[i] > e[i - 1])) throw std::invalid_argument("thermometer edges must be strictly increasing");
        }
        output_width_ += e.size();
    }
}

Booleanizer Booleanizer::threshold(std::size_t width, double theta) {
    return Booleanizer(std::vector<std::vector<double>>(width, std::vector<double>{theta}));
}

Booleanizer Booleanizer::thermometer(std::vector<std::vector<double>> edges) { return Booleanizer(std::move(edges)); }

Booleanizer Booleanizer::fit(const BooleanizerSpec& spec, const RawDataset& train) {
    if (train.rows.empty()) throw DataError(DataError::Kind::Empty, "cannot fit a booleanizer on an empty dataset");
    const std::size_t width = train.width();
    if (const auto* t = std::get_if<ThresholdEncoder>(&spec)) return threshold(width, t->threshold);
    const std::size_t bins = std::get<ThermometerEncoder>(spec).bins;
    std::vector<std::vector<double>> edges(width);
    std::vector<double> column(train.rows.size());
    for (std::size_t f = 0; f < width; ++f) {
        for (std::size_t r = 0; r < train.rows.size(); ++r) column[r] = train.rows[r][f];
        edges[f] = quantile_edges(column, bins);
    }
    return Booleanizer(std::move(edges));
}

std::vector<std::uint8_t> Booleanizer::encode(std::span<const double> row) const {
    if (row.size() != edges_.size()) {
        throw DataError(DataError::Kind::WidthMismatch, "row has " + std::to_string(row.size()) +
                                                            " values, booleanizer expects " +
                                                            std::to_string(edges_.size()));
    }
    std::vector<std::uint8_t> bits;
    bits.reserve(output_width_);
    for (std::size_t f = 0; f < row.size(); ++f) {
        for (double edge : edges_[f]) bits.push_back(row[f] > edge ? 1 : 0);
    }
    return bits;
}

BooleanDataset Booleanizer::apply(const RawDataset& raw) const {
    std::vector<BooleanSample> samples;
    samples.reserve(raw.size());
    for (std::size_t r = 0; r < raw.size(); ++r) samples.emplace_back(encode(raw.rows[r]), raw.labels[r]);
    BooleanDataset data = make_dataset(std::move(samples), raw.class_count());
    data.feature_count = output_width_;
    return data;
}

Split split_dataset(const BooleanDataset& data, double train_fraction, std::uint64_t seed) {
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto cut = static_cast<std::size_t>(train_fraction * static_cast<double>(data.size()));
    Split split;
    split.train.feature_count = split.test.feature_count = data.feature_count;
    split.train.class_count = split.test.class_count = data.class_count;
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < cut ? split.train : split.test).samples.push_back(data.samples[order[i]]);
    }
    return split;
}

std::pair<RawDataset, RawDataset> subsample(const RawDataset& raw, std::size_t train_count, std::size_t test_count,
                                            std::uint64_t seed) {
    if (train_count + test_count > raw.size()) {
        throw DataError(DataError::Kind::CountMismatch, "subsample of " + std::to_string(train_count + test_count) +
                                                            " rows requested from " + std::to_string(raw.size()));
    }
    std::vector<std::size_t> order(raw.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    RawDataset train, test;
    for (RawDataset* part : {&train, &test}) {
        part->feature_names = raw.feature_names;
        part->class_names = raw.class_names;
    }
    for (std::size_t i = 0; i < train_count + test_count; ++i) {
        RawDataset& part = i < train_count ? train : test;
        part.rows.push_back(raw.rows[order[i]]);
        part.labels.push_back(raw.labels[order[i]]);
    }
    // Both parts name every class of the source.
    if (raw.class_names.empty()) {
        const std::size_t q = raw.class_count();
        for (std::size_t c = 0; c < q; ++c) {
            train.class_names.push_back(std::to_string(c));
            test.class_names.push_back(std::to_string(c));
        }
    }
    return {std::move(train), std::move(test)};
}

}  // namespace csctm
