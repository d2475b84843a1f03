#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "csctm/cli.hpp"
#include "csctm/model_io.hpp"

using namespace csctm;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

/// Value printed after "<key> " on its own line.
std::string field(const std::string& out, const std::string& key) {
    for (const std::string& line : lines_of(out)) {
        if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
    }
    FAIL("missing field " << key);
    return {};
}

struct TempDir {
    fs::path path = fs::temp_directory_path() / ("csctm_cli_" + std::to_string(std::random_device{}()));
    TempDir() { fs::create_directories(path); }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("train on the xor truth table") {
    const Result r = run({"train", "--dataset", "xor", "--clauses", "10", "--t", "1", "--s", "3.9", "--budget", "all",
                          "--epochs", "200", "--seed", "7"});
    CHECK(r.code == kExitOk);
    CHECK(field(r.out, "train accuracy") == "1.0000");
}

TEST_CASE("usage errors exit with two") {
    for (const auto& args : std::vector<std::vector<std::string>>{
             {"train", "--budget", "0"},
             {"train", "--budget", "5"},
             {"train", "--budget", "two"},
             {"train", "--t", "0"},
             {"train", "--s", "1"},
             {"train", "--clauses", "3"},
             {"train", "--mode", "fast"},
             {"train", "--dataset", "mnist"},
             {"train", "--dataset", "idx"},
             {"train", "--dataset", "csv"},
             {"train", "--booleanize", "magic", "--dataset", "csv", "--csv", "/dev/null"},
             {"train", "--unknown"},
             {"sweep", "--budgets", "1,0"},
             {"inspect"},
             {},
         }) {
        CAPTURE(args.empty() ? std::string("(none)") : args.front() + " " + (args.size() > 1 ? args[1] : ""));
        const Result r = run(args);
        CHECK(r.code == kExitUsage);
        CHECK_FALSE(r.err.empty());
    }
    CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("data errors exit with one") {
    TempDir dir;
    CHECK(run({"train", "--dataset", "idx", "--images", dir / "none", "--labels", dir / "none"}).code ==
          kExitDataError);
    CHECK(run({"train", "--dataset", "csv", "--csv", dir / "none.csv"}).code == kExitDataError);
    CHECK(run({"inspect", "--model", dir / "none"}).code == kExitDataError);
    std::ofstream(dir / "junk") << "not a model";
    CHECK(run({"eval", "--model", dir / "junk", "--dataset", "xor"}).code == kExitDataError);
}

TEST_CASE("budget all is an alias for 2o") {
    TempDir dir;
    const std::vector<std::string> common{"train", "--dataset", "noisy-xor", "--samples", "300", "--epochs", "5",
                                          "--clauses", "8", "--t", "4"};
    auto with = [&](const std::string& budget, const std::string& out) {
        auto args = common;
        args.insert(args.end(), {"--budget", budget, "--out-metrics", out});
        return run(args).code;
    };
    REQUIRE(with("all", dir / "a.jsonl") == 0);
    REQUIRE(with("4", dir / "b.jsonl") == 0);
    CHECK(slurp(dir / "a.jsonl") == slurp(dir / "b.jsonl"));
}

TEST_CASE("sequential metrics are byte reproducible with a stable field order") {
    TempDir dir;
    auto go = [&](const std::string& out) {
        return run({"train", "--dataset", "noisy-xor", "--samples", "500", "--epochs", "8", "--clauses", "10", "--t",
                    "5", "--budget", "1", "--seed", "3", "--out-metrics", out, "--out-summary", out + ".json"})
            .code;
    };
    REQUIRE(go(dir / "1.jsonl") == 0);
    REQUIRE(go(dir / "2.jsonl") == 0);
    const std::string a = slurp(dir / "1.jsonl");
    CHECK(a == slurp(dir / "2.jsonl"));
    CHECK(slurp(dir / "1.jsonl.json") == slurp(dir / "2.jsonl.json"));
    const auto lines = lines_of(a);
    REQUIRE(lines.size() == 16);
    const auto first = nlohmann::ordered_json::parse(lines[0]);
    std::vector<std::string> keys;
    for (const auto& [k, v] : first.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"epoch", "split", "accuracy", "avg_literals_per_clause",
                                           "over_budget_fraction"});
    CHECK(nlohmann::json::parse(lines[1])["split"] == "test");

    REQUIRE(run({"train", "--dataset", "xor", "--epochs", "3", "--timing", "--out-metrics", dir / "t.jsonl"}).code ==
            0);
    CHECK(nlohmann::json::parse(lines_of(slurp(dir / "t.jsonl"))[0]).contains("elapsed_ms"));
}

TEST_CASE("eval reproduces the training accuracy") {
    TempDir dir;
    const std::vector<std::string> data{"--dataset", "noisy-xor", "--samples", "1000", "--test-size", "400"};
    std::vector<std::string> train{"train", "--clauses", "10", "--t", "5", "--epochs", "10", "--out-model",
                                   dir / "m.csctm"};
    train.insert(train.end(), data.begin(), data.end());
    const Result t = run(train);
    REQUIRE(t.code == 0);
    std::vector<std::string> eval{"eval", "--model", dir / "m.csctm"};
    eval.insert(eval.end(), data.begin(), data.end());
    const Result e = run(eval);
    REQUIRE(e.code == 0);
    CHECK(field(e.out, "accuracy").rfind(field(t.out, "test accuracy"), 0) == 0);
    CHECK(e.out.find("confusion") != std::string::npos);

    std::ofstream(dir / "wide.csv") << "a,b,c,label\n1,2,3,x\n4,5,6,y\n7,8,9,x\n";
    const Result mismatch = run({"eval", "--model", dir / "m.csctm", "--dataset", "csv", "--csv", dir / "wide.csv"});
    CHECK(mismatch.code == kExitDataError);
}

TEST_CASE("inspect") {
    TempDir dir;
    Hyperparams p;
    p.clauses = 6;
    save_model(Model(3, 1, p), dir / "fresh.csctm", false);
    const Result r = run({"inspect", "--model", dir / "fresh.csctm"});
    REQUIRE(r.code == 0);
    CHECK(field(r.out, "average literals per clause") == "0.0000");
    CHECK(field(r.out, "estimated_clause_energy_fraction") == "n/a");
    CHECK(field(r.out, "budget") == "all");
    CHECK(field(r.out, "features") == "3");

    REQUIRE(run({"train", "--dataset", "xor", "--epochs", "50", "--out-model", dir / "x.csctm"}).code == 0);
    const Result a = run({"inspect", "--model", dir / "x.csctm"});
    const Result b = run({"inspect", "--model", dir / "x.csctm"});
    CHECK(a.out == b.out);
    const auto lines = lines_of(a.out);
    const auto at = std::find(lines.begin(), lines.end(), "clauses");
    REQUIRE(at != lines.end());
    CHECK(lines.end() - at - 1 == 10);
    for (auto it = at + 1; it != lines.end(); ++it) CHECK(it->rfind("Class 0 ", 0) == 0);
    CHECK(run({"inspect", "--model", dir / "x.csctm", "--top-k", "3"}).out.size() < a.out.size());
}

TEST_CASE("budget ladder") {
    CHECK(budget_ladder(11.5) == std::vector<std::size_t>{16, 8, 4, 2, 1});
    CHECK(budget_ladder(16) == std::vector<std::size_t>{16, 8, 4, 2, 1});
    CHECK(budget_ladder(2.0) == std::vector<std::size_t>{2, 1});
    CHECK(budget_ladder(0.7) == std::vector<std::size_t>{1});
    CHECK(budget_ladder(0.0) == std::vector<std::size_t>{1});
}

TEST_CASE("budget lists") {
    const auto b = parse_budget_list("1,2,all");
    REQUIRE(b.size() == 3);
    CHECK(b[0] == 1);
    CHECK_FALSE(b[2].has_value());
    CHECK_THROWS_AS(parse_budget_list(""), std::invalid_argument);
    CHECK_THROWS_AS(parse_budget_list("1,,2"), std::invalid_argument);
    CHECK_THROWS_AS(parse_budget_list("-1"), std::invalid_argument);
}

TEST_CASE("sweep emits one row per budget") {
    TempDir dir;
    const Result r = run({"sweep", "--dataset", "noisy-xor", "--samples", "300", "--epochs", "3", "--runs", "2",
                          "--clauses", "6", "--t", "3", "--budgets", "1,2,4", "--out-metrics", dir / "s.jsonl"});
    REQUIRE(r.code == 0);
    const auto rows = lines_of(slurp(dir / "s.jsonl"));
    REQUIRE(rows.size() == 3);
    CHECK(nlohmann::json::parse(rows[0])["budget"] == 1);
    CHECK(nlohmann::json::parse(rows[2])["budget"] == 4);
    CHECK(nlohmann::json::parse(rows[1])["runs"] == 2);
}

TEST_CASE("auto sweep follows the halving ladder") {
    TempDir dir;
    const Result r = run({"sweep", "--dataset", "noisy-xor", "--samples", "300", "--epochs", "5", "--runs", "2",
                          "--clauses", "10", "--t", "5", "--out-metrics", dir / "s.jsonl"});
    REQUIRE(r.code == 0);
    const auto rows = lines_of(slurp(dir / "s.jsonl"));
    REQUIRE(rows.size() >= 2);
    const auto vanilla = nlohmann::json::parse(rows[0]);
    CHECK(vanilla["budget"] == "all");
    const auto ladder = budget_ladder(vanilla["avg_literals_per_clause"].get<double>());
    REQUIRE(rows.size() == ladder.size() + 1);
    for (std::size_t i = 0; i < ladder.size(); ++i) {
        CHECK(nlohmann::json::parse(rows[i + 1])["budget"] == std::min<std::size_t>(ladder[i], 4));
    }
}

TEST_CASE("noisy-xor sweep: literals shrink with the budget") {
    TempDir dir;
    const Result r =
        run({"sweep", "--dataset", "noisy-xor", "--clauses", "20", "--t", "5", "--epochs", "50", "--runs", "5",
             "--budgets", "all,2,1", "--out-metrics", dir / "s.jsonl"});
    REQUIRE(r.code == 0);
    const auto rows = lines_of(slurp(dir / "s.jsonl"));
    REQUIRE(rows.size() == 3);
    std::vector<double> acc, lave;
    for (const auto& row : rows) {
        const auto j = nlohmann::json::parse(row);
        acc.push_back(j["worst_max_accuracy"]);
        lave.push_back(j["avg_literals_per_clause"]);
    }
    CHECK(lave[1] <= lave[0]);
    CHECK(lave[2] <= lave[1]);
    MESSAGE("worst-max accuracy all/2/1: " << acc[0] << " / " << acc[1] << " / " << acc[2]);
}
