#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "csctm/datasets.hpp"

using namespace csctm;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("csctm_test_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path write(const std::string& name, const std::vector<std::uint8_t>& bytes) const {
        std::ofstream(path / name, std::ios::binary)
            .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        return path / name;
    }
    fs::path write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name, std::ios::binary) << text;
        return path / name;
    }
};

/// Four 28x28 images: image i has pixel (r, c) = (i * 64 + r + c) mod 256.
std::vector<std::uint8_t> image_fixture() {
    std::vector<std::uint8_t> bytes = {0x00, 0x00, 0x08, 0x03, 0x00, 0x00, 0x00, 0x04,
                                       0x00, 0x00, 0x00, 0x1c, 0x00, 0x00, 0x00, 0x1c};
    for (int i = 0; i < 4; ++i) {
        for (int r = 0; r < 28; ++r) {
            for (int c = 0; c < 28; ++c) bytes.push_back(static_cast<std::uint8_t>((i * 64 + r + c) % 256));
        }
    }
    return bytes;
}

std::vector<std::uint8_t> label_fixture() { return {0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x04, 7, 2, 1, 0}; }

DataError::Kind error_kind(auto&& fn) {
    try {
        fn();
    } catch (const DataError& e) {
        return e.kind();
    }
    FAIL("expected a DataError");
    return DataError::Kind::Io;
}

}  // namespace

TEST_CASE("truth tables") {
    const auto x = xor_truth_table();
    REQUIRE(x.size() == 4);
    CHECK(x[1] == BooleanSample({0, 1}, 1));
    CHECK(x[3] == BooleanSample({1, 1}, 0));
    CHECK(x[0] == BooleanSample({0, 0}, 0));
    CHECK(x[2] == BooleanSample({1, 0}, 1));
    const auto o = or_truth_table();
    CHECK(o[2] == BooleanSample({1, 0}, 1));
    CHECK(o[0] == BooleanSample({0, 0}, 0));
    CHECK(o[3].label() == 1);
}

TEST_CASE("generated xor") {
    const auto clean = generate_xor(2000, 0.0, 4);
    for (const auto& s : clean) CHECK(s.label() == (s.feature(0) != s.feature(1) ? 1U : 0U));

    const auto noisy = generate_xor(20'000, 0.1, 4);
    std::size_t flipped = 0;
    for (const auto& s : noisy) flipped += s.label() != (s.feature(0) != s.feature(1) ? 1U : 0U);
    const double rate = static_cast<double>(flipped) / 20'000.0;
    CHECK(std::abs(rate - 0.1) < 3 * std::sqrt(0.1 * 0.9 / 20'000.0));

    CHECK(generate_xor(50, 0.05, 9) == generate_xor(50, 0.05, 9));
    CHECK_FALSE(generate_xor(50, 0.05, 9) == generate_xor(50, 0.05, 10));
    CHECK_THROWS_AS(generate_xor(10, 0.5, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_xor(10, -0.1, 1), std::invalid_argument);
}

TEST_CASE("generated or is three to one positive") {
    const auto rows = generate_or(10'000, 2);
    std::size_t positive = 0;
    for (const auto& s : rows) {
        CHECK(s.label() == (s.feature(0) || s.feature(1) ? 1U : 0U));
        positive += s.label();
    }
    CHECK(std::abs(positive / 10'000.0 - 0.75) < 3 * std::sqrt(0.75 * 0.25 / 10'000.0));
}

TEST_CASE("make_dataset") {
    const auto d = make_dataset(xor_truth_table());
    CHECK(d.feature_count == 2);
    CHECK(d.class_count == 2);
    CHECK(make_dataset({BooleanSample({1}, 0)}, 4).class_count == 4);
    CHECK(error_kind([] { make_dataset({BooleanSample({1, 0}, 0), BooleanSample({1}, 0)}); }) ==
          DataError::Kind::WidthMismatch);
}

TEST_CASE("idx fixture loads") {
    TempDir dir;
    const auto raw = load_idx(dir.write("img", image_fixture()), dir.write("lbl", label_fixture()));
    REQUIRE(raw.size() == 4);
    CHECK(raw.width() == 784);
    CHECK(raw.labels == std::vector<std::uint32_t>{7, 2, 1, 0});
    CHECK(raw.rows[0][0] == 0);
    CHECK(raw.rows[1][0] == 64);
    CHECK(raw.rows[3][28 * 27 + 27] == (192 + 54) % 256);
    CHECK(raw.feature_names[29] == "p1_1");
    CHECK(raw.class_count() == 8);
}

TEST_CASE("idx round trip") {
    std::mt19937 rng(3);
    IdxImages imgs;
    imgs.rows = 5;
    imgs.cols = 3;
    for (int i = 0; i < 9; ++i) {
        std::vector<std::uint8_t> px(15);
        for (auto& p : px) p = static_cast<std::uint8_t>(rng());
        imgs.images.push_back(px);
    }
    const auto bytes = encode_idx_images(imgs);
    const auto back = parse_idx_images(bytes);
    CHECK(back.rows == 5);
    CHECK(back.cols == 3);
    CHECK(back.images == imgs.images);
    CHECK(encode_idx_images(back) == bytes);
    const std::vector<std::uint8_t> labels{3, 1, 4, 1, 5, 9, 2, 6, 5};
    CHECK(parse_idx_labels(encode_idx_labels(labels)) == labels);
    CHECK(encode_idx_images(parse_idx_images(image_fixture())) == image_fixture());
}

TEST_CASE("idx errors") {
    auto labels_as_images = label_fixture();
    labels_as_images[3] = 0x03;
    CHECK(error_kind([&] { parse_idx_labels(labels_as_images); }) == DataError::Kind::BadMagic);
    CHECK(error_kind([&] { parse_idx_images(label_fixture()); }) == DataError::Kind::BadMagic);
    CHECK(error_kind([] { parse_idx_images({}); }) == DataError::Kind::Truncated);
    CHECK(error_kind([] { parse_idx_labels({}); }) == DataError::Kind::Truncated);
    auto short_images = image_fixture();
    short_images.pop_back();
    CHECK(error_kind([&] { parse_idx_images(short_images); }) == DataError::Kind::Truncated);

    TempDir dir;
    auto three_labels = label_fixture();
    three_labels[7] = 3;
    three_labels.pop_back();
    CHECK(error_kind([&] { load_idx(dir.write("i", image_fixture()), dir.write("l", three_labels)); }) ==
          DataError::Kind::CountMismatch);
    CHECK(error_kind([&] { load_idx(dir.path / "missing", dir.path / "missing"); }) == DataError::Kind::Io);
    CHECK(error_kind([&] { load_idx(dir.write("e", std::string{}), dir.write("l2", label_fixture())); }) ==
          DataError::Kind::Truncated);
}

TEST_CASE("csv parsing") {
    SUBCASE("two rows") {
        const auto raw = parse_csv("a,b,label\n1,2.5,x\n3,-4e1,y\n", "label");
        CHECK(raw.size() == 2);
        CHECK(raw.rows[1] == std::vector<double>{3, -40});
        CHECK(raw.feature_names == std::vector<std::string>{"a", "b"});
    }
    SUBCASE("labels factorize in order of appearance") {
        const auto raw = parse_csv("label,v\ncat,1\ndog,2\ncat,3\n", "label");
        CHECK(raw.labels == std::vector<std::uint32_t>{0, 1, 0});
        CHECK(raw.class_names == std::vector<std::string>{"cat", "dog"});
    }
    SUBCASE("quoting, whitespace and line endings") {
        const auto raw = parse_csv("\"x, y\",label\r\n \"1\" ,\"a \"\"b\"\"\"\r\n\n2,c\r\n", "label");
        CHECK(raw.feature_names == std::vector<std::string>{"x, y"});
        CHECK(raw.rows == std::vector<std::vector<double>>{{1}, {2}});
        CHECK(raw.class_names == std::vector<std::string>{"a \"b\"", "c"});
    }
    SUBCASE("errors") {
        CHECK(error_kind([] { parse_csv("a,label\n1,x\n2\n", "label"); }) == DataError::Kind::RaggedRow);
        CHECK(error_kind([] { parse_csv("a,label\nfoo,x\n", "label"); }) == DataError::Kind::NonNumeric);
        CHECK(error_kind([] { parse_csv("a,b\n1,2\n", "label"); }) == DataError::Kind::MissingLabelColumn);
        CHECK(error_kind([] { parse_csv("", "label"); }) == DataError::Kind::Empty);
        CHECK(error_kind([] { load_csv("/nonexistent/file.csv", "label"); }) == DataError::Kind::Io);
    }
    SUBCASE("file") {
        TempDir dir;
        CHECK(load_csv(dir.write("t.csv", std::string("v,label\n1,a\n2,b\n")), "label").size() == 2);
    }
}

TEST_CASE("booleanizer specs") {
    CHECK(std::get<ThresholdEncoder>(parse_booleanizer("threshold:75")).threshold == 75.0);
    CHECK(std::get<ThresholdEncoder>(parse_booleanizer("threshold")).threshold == 75.0);
    CHECK(std::get<ThermometerEncoder>(parse_booleanizer("thermometer:5")).bins == 5);
    CHECK_THROWS_AS(parse_booleanizer("thermometer:0"), std::invalid_argument);
    CHECK_THROWS_AS(parse_booleanizer("thermometer:2.5"), std::invalid_argument);
    CHECK_THROWS_AS(parse_booleanizer("threshold:abc"), std::invalid_argument);
    CHECK_THROWS_AS(parse_booleanizer("binary"), std::invalid_argument);
}

TEST_CASE("threshold encoding") {
    const auto enc = Booleanizer::threshold(3, 75);
    CHECK(enc.encode(std::vector<double>{200, 10, 75}) == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(enc.output_width() == 3);
    CHECK(error_kind([&] { enc.encode(std::vector<double>{1, 2}); }) == DataError::Kind::WidthMismatch);
}

TEST_CASE("thermometer encoding") {
    const auto enc = Booleanizer::thermometer({{1, 2, 3}});
    CHECK(enc.encode(std::vector<double>{2.5}) == std::vector<std::uint8_t>{1, 1, 0});
    CHECK(enc.encode(std::vector<double>{0}) == std::vector<std::uint8_t>{0, 0, 0});
    CHECK(enc.encode(std::vector<double>{9}) == std::vector<std::uint8_t>{1, 1, 1});
    CHECK(enc.encode(std::vector<double>{2}) == std::vector<std::uint8_t>{1, 0, 0});
    CHECK_THROWS_AS(Booleanizer::thermometer({{1, 1}}), std::invalid_argument);
}

TEST_CASE("property: thermometer codes are a run of ones then zeros") {
    std::mt19937 rng(7);
    std::normal_distribution<double> value(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        RawDataset train;
        for (int r = 0; r < 50; ++r) train.rows.push_back({value(rng), std::round(value(rng))});
        train.labels.assign(50, 0);
        const auto enc = Booleanizer::fit(ThermometerEncoder{1 + rng() % 8}, train);
        for (int probe = 0; probe < 20; ++probe) {
            const auto bits = enc.encode(std::vector<double>{value(rng), value(rng)});
            REQUIRE(bits.size() == enc.output_width());
            std::size_t offset = 0;
            for (std::size_t f = 0; f < 2; ++f) {
                const std::size_t k = enc.edges(f).size();
                CHECK(std::is_sorted(bits.begin() + offset, bits.begin() + offset + k, std::greater<>()));
                offset += k;
            }
        }
    }
}

TEST_CASE("quantile edges") {
    CHECK(quantile_edges({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 4) == std::vector<double>{3, 5, 7, 9});
    CHECK(quantile_edges({5, 5, 5}, 3).empty());
    CHECK(quantile_edges({1, 1, 1, 2}, 3) == std::vector<double>{1});
    CHECK(quantile_edges({}, 3).empty());
    std::mt19937 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v(1 + rng() % 40);
        for (auto& x : v) x = static_cast<double>(rng() % 10);
        const auto e = quantile_edges(v, 1 + rng() % 9);
        CHECK(std::adjacent_find(e.begin(), e.end(), std::greater_equal<>()) == e.end());
        if (!e.empty()) CHECK(e.back() < *std::max_element(v.begin(), v.end()));
    }
}

TEST_CASE("fit depends only on the training split") {
    RawDataset train;
    train.rows = {{1, 10}, {2, 20}, {3, 30}, {4, 40}};
    train.labels = {0, 1, 0, 1};
    const auto a = Booleanizer::fit(ThermometerEncoder{3}, train);
    RawDataset test;
    test.rows = {{100, -5}, {-7, 900}};
    test.labels = {0, 1};
    CHECK(std::ranges::equal(a.edges(0), std::vector<double>{2, 3}));
    CHECK(std::ranges::equal(a.edges(1), std::vector<double>{20, 30}));
    const auto encoded = a.apply(test);
    CHECK(encoded.feature_count == a.output_width());
    for (const auto& s : encoded.samples) CHECK(s.feature_count() == a.output_width());
    CHECK(error_kind([] { Booleanizer::fit(ThresholdEncoder{}, RawDataset{}); }) == DataError::Kind::Empty);
}

TEST_CASE("splits") {
    const auto data = make_dataset(generate_xor(100, 0.0, 1));
    const auto split = split_dataset(data, 0.8, 5);
    CHECK(split.train.size() == 80);
    CHECK(split.test.size() == 20);
    CHECK(split.train.feature_count == 2);

    RawDataset raw;
    for (int i = 0; i < 30; ++i) {
        raw.rows.push_back({static_cast<double>(i)});
        raw.labels.push_back(static_cast<std::uint32_t>(i % 3));
    }
    const auto [tr, te] = subsample(raw, 10, 15, 2);
    CHECK(tr.size() == 10);
    CHECK(te.size() == 15);
    std::set<double> seen;
    for (const auto* part : {&tr, &te}) {
        for (const auto& r : part->rows) seen.insert(r[0]);
    }
    CHECK(seen.size() == 25);
    CHECK(tr.class_count() == 3);
    CHECK(te.class_count() == 3);
    const auto again = subsample(raw, 10, 15, 2);
    CHECK(again.first.rows == tr.rows);
    CHECK(error_kind([&] { subsample(raw, 20, 11, 1); }) == DataError::Kind::CountMismatch);
}
