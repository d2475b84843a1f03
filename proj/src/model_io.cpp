#include "csctm/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace csctm {

namespace {

constexpr char kMagic[6] = {'C', 'S', 'C', 'T', 'M', '\0'};
constexpr std::uint8_t kFlagBoost = 1;
constexpr std::uint8_t kFlagStates = 2;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
    T le() {
        need(sizeof(T));
        std::make_unsigned_t<T> u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u |= static_cast<std::make_unsigned_t<T>>(std::make_unsigned_t<T>(bytes_[offset_ + i]) << (8 * i));
        }
        offset_ += sizeof(T);
        return static_cast<T>(u);
    }

    std::uint64_t varint() { return get_varint(bytes_, offset_); }

    void need(std::size_t count) const {
        if (bytes_.size() - offset_ < count) {
            throw ModelFormatError(ModelFormatError::Kind::Corrupt, "model file truncated");
        }
    }

    std::span<const std::uint8_t> take(std::size_t count) {
        need(count);
        auto out = bytes_.subspan(offset_, count);
        offset_ += count;
        return out;
    }

    bool done() const { return offset_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t offset_ = 0;
};

std::vector<bool> include_bits(const Clause& c) {
    std::vector<bool> bits(c.literal_count());
    for (std::size_t k = 0; k < bits.size(); ++k) bits[k] = c.includes(k);
    return bits;
}

}  // namespace

std::vector<Run> rle_encode(const std::vector<bool>& bits) {
    std::vector<Run> runs;
    for (bool b : bits) {
        if (runs.empty() || runs.back().value != b) {
            runs.push_back({b, 1});
        } else {
            ++runs.back().length;
        }
    }
    return runs;
}

std::vector<bool> rle_decode(std::span<const Run> runs, std::uint64_t declared_length) {
    std::uint64_t total = 0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        if (runs[r].length == 0) throw ModelFormatError(ModelFormatError::Kind::Corrupt, "empty RLE run");
        if (r > 0 && runs[r].value == runs[r - 1].value) {
            throw ModelFormatError(ModelFormatError::Kind::Corrupt, "RLE runs do not alternate");
        }
        if (runs[r].length > declared_length - total) {
            throw ModelFormatError(ModelFormatError::Kind::Corrupt, "RLE runs exceed declared length");
        }
        total += runs[r].length;
    }
    if (total != declared_length) {
        throw ModelFormatError(ModelFormatError::Kind::Corrupt, "RLE runs cover " + std::to_string(total) +
                                                                    " bits, expected " +
                                                                    std::to_string(declared_length));
    }
    std::vector<bool> bits;
    bits.reserve(total);
    for (const Run& r : runs) bits.insert(bits.end(), r.length, r.value);
    return bits;
}

void put_varint(std::vector<std::uint8_t>& out, std::uint64_t value) {
    while (value >= 0x80) {
        out.push_back(static_cast<std::uint8_t>(value | 0x80));
        value >>= 7;
    }
    out.push_back(static_cast<std::uint8_t>(value));
}

std::uint64_t get_varint(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    std::uint64_t value = 0;
    for (unsigned shift = 0; shift < 64; shift += 7) {
        if (offset >= bytes.size()) throw ModelFormatError(ModelFormatError::Kind::Corrupt, "truncated varint");
        const std::uint8_t byte = bytes[offset++];
        value |= std::uint64_t(byte & 0x7f) << shift;
        if ((byte & 0x80) == 0) return value;
    }
    throw ModelFormatError(ModelFormatError::Kind::Corrupt, "varint longer than 64 bits");
}

std::vector<std::uint8_t> encode_model(const Model& model, bool include_ta_states) {
    const Hyperparams& p = model.params();
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le<std::uint32_t>(out, kModelFormatVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.feature_count()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(model.bank_count()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.clauses));
    put_le<std::int32_t>(out, p.threshold);
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(p.specificity));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.budget));
    put_le<std::uint32_t>(out, p.state_depth);
    out.push_back(static_cast<std::uint8_t>((p.boost_true_positive ? kFlagBoost : 0) |
                                            (include_ta_states ? kFlagStates : 0)));

    for (const ClauseBank& bank : model.banks()) {
        for (const Clause& c : bank.clauses()) {
            const auto runs = rle_encode(include_bits(c));
            put_varint(out, runs.size());
            if (!runs.empty()) out.push_back(runs.front().value ? 1 : 0);
            for (const Run& r : runs) put_varint(out, r.length);
        }
    }
    if (include_ta_states) {
        for (const ClauseBank& bank : model.banks()) {
            for (const Clause& c : bank.clauses()) {
                for (TaState s : c.states()) put_le<std::uint16_t>(out, s);
            }
        }
    }
    return out;
}

Model decode_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw ModelFormatError(ModelFormatError::Kind::BadMagic, "not a CSCTM model file");
    }
    Reader in(bytes.subspan(sizeof(kMagic)));
    const auto version = in.le<std::uint32_t>();
    if (version != kModelFormatVersion) {
        throw ModelFormatError(ModelFormatError::Kind::VersionMismatch,
                               "model format version " + std::to_string(version) + " is not supported");
    }
    const auto o = in.le<std::uint32_t>();
    const auto q = in.le<std::uint32_t>();
    Hyperparams p;
    p.clauses = in.le<std::uint32_t>();
    p.threshold = in.le<std::int32_t>();
    p.specificity = std::bit_cast<double>(in.le<std::uint64_t>());
    p.budget = in.le<std::uint32_t>();
    const auto depth = in.le<std::uint32_t>();
    const auto flags = in.le<std::uint8_t>();
    if (depth == 0 || depth > 0x7fff || (flags & ~(kFlagBoost | kFlagStates)) != 0 || o == 0 || q == 0 ||
        p.budget == 0 || p.budget > 2ULL * o) {
        throw ModelFormatError(ModelFormatError::Kind::Corrupt, "invalid model header");
    }
    p.state_depth = static_cast<TaState>(depth);
    p.boost_true_positive = (flags & kFlagBoost) != 0;

    std::optional<Model> decoded;
    try {
        decoded.emplace(o, q, p);
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(ModelFormatError::Kind::Corrupt, std::string("invalid model header: ") + e.what());
    }
    Model& model = *decoded;

    const std::size_t literals = 2ULL * o;
    for (ClauseBank& bank : model.banks()) {
        for (Clause& c : bank.clauses()) {
            const std::uint64_t count = in.varint();
            if (count > literals) throw ModelFormatError(ModelFormatError::Kind::Corrupt, "too many RLE runs");
            std::vector<Run> runs(count);
            if (count > 0) {
                const auto first = in.le<std::uint8_t>();
                if (first > 1) throw ModelFormatError(ModelFormatError::Kind::Corrupt, "bad run value");
                bool value = first != 0;
                for (Run& r : runs) {
                    r = {value, in.varint()};
                    value = !value;
                }
            }
            const auto bits = rle_decode(runs, literals);
            for (std::size_t k = 0; k < literals; ++k) {
                c.set_state(k, bits[k] ? p.state_depth + 1 : p.state_depth);
            }
        }
    }

    if (flags & kFlagStates) {
        for (ClauseBank& bank : model.banks()) {
            for (Clause& c : bank.clauses()) {
                for (std::size_t k = 0; k < literals; ++k) {
                    const auto s = in.le<std::uint16_t>();
                    if (s < 1 || s > 2 * p.state_depth || (s > p.state_depth) != c.includes(k)) {
                        throw ModelFormatError(ModelFormatError::Kind::Corrupt,
                                               "TA state disagrees with include bitmap");
                    }
                    c.set_state(k, s);
                }
            }
        }
    }
    if (!in.done()) throw ModelFormatError(ModelFormatError::Kind::Corrupt, "trailing bytes after model payload");
    return std::move(*decoded);
}

void save_model(const Model& model, const std::filesystem::path& path, bool include_ta_states) {
    const auto bytes = encode_model(model, include_ta_states);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelFormatError(ModelFormatError::Kind::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ModelFormatError(ModelFormatError::Kind::Io, "short write to " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError(ModelFormatError::Kind::Io, "cannot open " + path.string());
    const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return decode_model(bytes);
}

ClauseStats clause_stats(const Model& model, std::size_t budget) {
    ClauseStats stats;
    stats.literal_counts.reserve(model.total_clauses());
    for (const ClauseBank& bank : model.banks()) {
        for (const Clause& c : bank.clauses()) {
            stats.literal_counts.push_back(c.size());
            stats.over_budget_count += c.size() > budget;
        }
    }
    const std::size_t total = std::accumulate(stats.literal_counts.begin(), stats.literal_counts.end(), std::size_t{0});
    stats.average_literals = static_cast<double>(total) / static_cast<double>(stats.literal_counts.size());
    stats.model_size_bytes = encode_model(model, false).size();
    return stats;
}

std::optional<double> energy_ratio(double budget, double average_literals) {
    if (!(average_literals > 0.0)) return std::nullopt;
    return budget / average_literals;
}

std::string literal_name(std::size_t k, std::size_t feature_count, std::span<const std::string> feature_names) {
    const bool negated = k >= feature_count;
    const std::size_t f = negated ? k - feature_count : k;
    std::string name = feature_names.empty() ? "x" + std::to_string(f + 1) : feature_names[f];
    return negated ? "¬" + name : name;
}

std::vector<std::string> dump_clauses(const Model& model, std::span<const std::string> feature_names,
                                      std::size_t top_k) {
    const std::size_t o = model.feature_count();
    if (!feature_names.empty() && feature_names.size() != o) {
        throw std::invalid_argument("expected " + std::to_string(o) + " feature names, got " +
                                    std::to_string(feature_names.size()));
    }
    std::vector<std::string> lines;
    for (std::size_t c = 0; c < model.bank_count(); ++c) {
        const ClauseBank& bank = model.bank(c);
        std::vector<std::size_t> order(bank.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return bank[a].size() < bank[b].size(); });
        if (top_k > 0 && order.size() > top_k) order.resize(top_k);
        for (std::size_t j : order) {
            const Clause& clause = bank[j];
            std::string line = "Class " + std::to_string(c) +
                               (clause.polarity() == Polarity::Positive ? " + : " : " − : ");
            auto included = clause.included_literals();
            std::stable_sort(included.begin(), included.end(),
                             [o](std::size_t a, std::size_t b) { return a % o < b % o; });
            if (included.empty()) {
                line += "(empty)";
            } else {
                for (std::size_t i = 0; i < included.size(); ++i) {
                    if (i > 0) line += " ∧ ";
                    line += literal_name(included[i], o, feature_names);
                }
            }
            lines.push_back(std::move(line));
        }
    }
    return lines;
}

}  // namespace csctm
