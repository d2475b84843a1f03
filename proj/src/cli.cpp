#include "csctm/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "csctm/datasets.hpp"
#include "csctm/model_io.hpp"
#include "csctm/trainer.hpp"

namespace csctm {

namespace {

using Json = nlohmann::ordered_json;

class UsageError : public std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct RunSpec {
    std::string dataset = "xor";
    std::string images;
    std::string labels;
    std::string csv;
    std::string label_col = "label";
    std::string booleanize = "threshold:75";
    std::size_t samples = 5000;
    double noise = 0.05;
    std::size_t train_size = 2000;
    std::size_t test_size = 1000;
    double train_fraction = 0.8;
    std::uint64_t data_seed = 1;

    std::size_t clauses = 10;
    int threshold = 1;
    double specificity = 3.9;
    std::string budget = "all";
    int states = kDefaultStateDepth;
    bool boost = false;

    std::size_t epochs = 100;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    std::string mode = "seq";
    std::size_t batch = 1;
    std::size_t runs = 5;
    std::string budgets = "auto";
    bool timing = false;

    std::string out_model;
    std::string out_metrics;
    std::string out_summary;
    bool include_states = false;

    std::string model_path;
    std::size_t top_k = 0;
};

struct Data {
    BooleanDataset train;
    BooleanDataset test;
};

std::shared_ptr<spdlog::logger> logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto log = spdlog::stderr_logger_mt("csctm");
        const char* level = std::getenv("CSCTM_LOG");
        log->set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
        log->set_pattern("[%l] %v");
        return log;
    }();
    return instance;
}

void add_data_options(CLI::App& cmd, RunSpec& spec) {
    cmd.add_option("--dataset", spec.dataset, "Data source")
        ->check(CLI::IsMember({"xor", "or", "noisy-xor", "idx", "csv"}));
    cmd.add_option("--images", spec.images, "IDX image file");
    cmd.add_option("--labels", spec.labels, "IDX label file");
    cmd.add_option("--csv", spec.csv, "CSV file with a header row");
    cmd.add_option("--label-col", spec.label_col, "CSV label column");
    cmd.add_option("--booleanize", spec.booleanize, "threshold:THETA or thermometer:K");
    cmd.add_option("--samples", spec.samples, "noisy-xor training samples");
    cmd.add_option("--noise", spec.noise, "noisy-xor label noise rate");
    cmd.add_option("--train-size", spec.train_size, "idx training subsample");
    cmd.add_option("--test-size", spec.test_size, "idx and noisy-xor test samples");
    cmd.add_option("--train-fraction", spec.train_fraction, "csv training fraction");
    cmd.add_option("--data-seed", spec.data_seed, "Seed for data generation and splits");
}

void add_train_options(CLI::App& cmd, RunSpec& spec) {
    cmd.add_option("--clauses", spec.clauses, "Clauses per class (n)");
    cmd.add_option("--t", spec.threshold, "Voting margin T");
    cmd.add_option("--s", spec.specificity, "Specificity s");
    cmd.add_option("--budget", spec.budget, "Literal budget b, or 'all'");
    cmd.add_option("--states", spec.states, "States per action N");
    cmd.add_flag("--boost", spec.boost, "Boost true positive feedback");
    cmd.add_option("--epochs", spec.epochs, "Training epochs");
    cmd.add_option("--seed", spec.seed, "Training seed");
    cmd.add_option("--workers", spec.workers, "Worker threads (par mode)");
    cmd.add_option("--mode", spec.mode, "seq or par")->check(CLI::IsMember({"seq", "par"}));
    cmd.add_option("--b-batch", spec.batch, "Examples per clause visit (par mode)");
    cmd.add_flag("--timing", spec.timing, "Record elapsed_ms in sequential metrics");
    cmd.add_option("--out-metrics", spec.out_metrics, "Line-delimited JSON metrics");
    cmd.add_option("--out-summary", spec.out_summary, "JSON summary file");
}

void validate_spec(const RunSpec& spec) {
    if (spec.threshold < 1) throw UsageError("--t must be at least 1");
    if (!(spec.specificity > 1.0)) throw UsageError("--s must exceed 1");
    if (spec.clauses == 0 || spec.clauses % 2 != 0) throw UsageError("--clauses must be even and positive");
    if (spec.states < 1 || spec.states > 32767) throw UsageError("--states must be in [1, 32767]");
    if (spec.epochs == 0) throw UsageError("--epochs must be positive");
    if (spec.workers == 0) throw UsageError("--workers must be positive");
    if (spec.batch == 0) throw UsageError("--b-batch must be positive");
    if (spec.runs == 0) throw UsageError("--runs must be positive");
    if (!(spec.noise >= 0.0 && spec.noise < 0.5)) throw UsageError("--noise must be in [0, 0.5)");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw UsageError("--train-fraction must be in (0, 1)");
    }
    if (spec.dataset == "idx" && (spec.images.empty() || spec.labels.empty())) {
        throw UsageError("--dataset idx requires --images and --labels");
    }
    if (spec.dataset == "csv" && spec.csv.empty()) throw UsageError("--dataset csv requires --csv");
    if (spec.dataset == "idx" || spec.dataset == "csv") {
        try {
            parse_booleanizer(spec.booleanize);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
}

std::size_t parse_count(const std::string& text, const char* what) {
    std::size_t value = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || value == 0) {
        throw UsageError(std::string(what) + " must be a positive integer or 'all', got '" + text + "'");
    }
    return value;
}

/// The budget as a count of literals; nullopt for "all".
std::optional<std::size_t> parse_budget(const std::string& text) {
    if (text == "all") return std::nullopt;
    return parse_count(text, "--budget");
}

std::size_t resolve_budget(std::optional<std::size_t> budget, std::size_t feature_count) {
    const std::size_t all = 2 * feature_count;
    if (!budget) return all;
    if (*budget > all) {
        throw UsageError("--budget " + std::to_string(*budget) + " exceeds 2o = " + std::to_string(all));
    }
    return *budget;
}

Data encode_raw(const RawDataset& train, const RawDataset& test, const std::string& booleanize) {
    const Booleanizer enc = Booleanizer::fit(parse_booleanizer(booleanize), train);
    Data data;
    data.train = enc.apply(train);
    data.test = enc.apply(test);
    logger()->info("booleanized {} raw features into {}", enc.input_width(), enc.output_width());
    return data;
}

Data load_data(const RunSpec& spec) {
    Data data;
    if (spec.dataset == "xor" || spec.dataset == "or") {
        data.train = make_dataset(spec.dataset == "xor" ? xor_truth_table() : or_truth_table(), 2);
        data.test = data.train;
    } else if (spec.dataset == "noisy-xor") {
        data.train = make_dataset(generate_xor(spec.samples, spec.noise, spec.data_seed), 2);
        data.test = make_dataset(generate_xor(spec.test_size, 0.0, spec.data_seed + 1), 2);
    } else if (spec.dataset == "idx") {
        const RawDataset raw = load_idx(spec.images, spec.labels);
        auto [train, test] = subsample(raw, spec.train_size, spec.test_size, spec.data_seed);
        data = encode_raw(train, test, spec.booleanize);
    } else {
        const RawDataset raw = load_csv(spec.csv, spec.label_col);
        if (raw.size() < 2) throw DataError(DataError::Kind::Empty, "csv needs at least two rows to split");
        const auto train_count = std::clamp<std::size_t>(
            static_cast<std::size_t>(spec.train_fraction * static_cast<double>(raw.size())), 1, raw.size() - 1);
        auto [train, test] = subsample(raw, train_count, raw.size() - train_count, spec.data_seed);
        data = encode_raw(train, test, spec.booleanize);
    }
    if (data.train.empty() || data.test.empty()) throw DataError(DataError::Kind::Empty, "dataset is empty");
    logger()->info("{} train / {} test samples, {} features, {} classes", data.train.size(), data.test.size(),
                   data.train.feature_count, data.train.class_count);
    return data;
}

Hyperparams hyperparams(const RunSpec& spec, std::size_t budget) {
    Hyperparams p;
    p.clauses = spec.clauses;
    p.threshold = spec.threshold;
    p.specificity = spec.specificity;
    p.budget = budget;
    p.state_depth = static_cast<TaState>(spec.states);
    p.boost_true_positive = spec.boost;
    return p;
}

TrainConfig train_config(const RunSpec& spec, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = spec.epochs;
    cfg.seed = seed;
    cfg.workers = spec.workers;
    cfg.batch = spec.batch;
    cfg.mode = spec.mode == "par" ? TrainMode::Decentralized : TrainMode::Sequential;
    return cfg;
}

Json metrics_json(const EpochMetrics& m) {
    Json j;
    j["epoch"] = m.epoch;
    j["split"] = m.split;
    j["accuracy"] = m.accuracy;
    j["avg_literals_per_clause"] = m.avg_literals_per_clause;
    j["over_budget_fraction"] = m.over_budget_fraction;
    if (m.elapsed_ms) j["elapsed_ms"] = *m.elapsed_ms;
    return j;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw DataError(DataError::Kind::Io, "cannot write " + path);
    return file;
}

void write_json(const std::string& path, const Json& j) {
    std::ofstream file = open_output(path);
    file << j.dump(2) << '\n';
}

std::string budget_label(std::size_t budget, const Model& model) {
    return model.unconstrained() ? "all" : std::to_string(budget);
}

int cmd_train(const RunSpec& spec, std::ostream& out) {
    const std::optional<std::size_t> requested = parse_budget(spec.budget);
    const Data data = load_data(spec);
    const std::size_t budget = resolve_budget(requested, data.train.feature_count);
    Model model(data.train.feature_count, banks_for(data.train.class_count), hyperparams(spec, budget));

    std::ofstream metrics;
    if (!spec.out_metrics.empty()) metrics = open_output(spec.out_metrics);
    const MetricsSink sink = [&](const EpochMetrics& m) {
        logger()->debug("epoch {} {} accuracy {:.4f} l_ave {:.3f}", m.epoch, m.split, m.accuracy,
                        m.avg_literals_per_clause);
        if (metrics.is_open()) metrics << metrics_json(m).dump() << '\n';
    };
    logger()->info("training {} banks x {} clauses, b = {}", model.bank_count(), spec.clauses,
                   budget_label(budget, model));
    const TrainResult result = train(model, data.train, &data.test, train_config(spec, spec.seed), sink, spec.timing);

    const EvalResult train_eval = evaluate(model, data.train);
    const EvalResult test_eval = evaluate(model, data.test);
    const ClauseStats stats = clause_stats(model);
    out << std::fixed << std::setprecision(4) << "train accuracy " << train_eval.accuracy << '\n'
        << "test accuracy " << test_eval.accuracy << '\n'
        << "average literals per clause " << stats.average_literals << '\n';

    if (!spec.out_model.empty()) {
        save_model(model, spec.out_model, spec.include_states);
        logger()->info("saved model to {}", spec.out_model);
    }
    if (!spec.out_summary.empty()) {
        Json s;
        s["command"] = "train";
        s["dataset"] = spec.dataset;
        s["budget"] = budget_label(budget, model);
        s["clauses"] = spec.clauses;
        s["threshold"] = spec.threshold;
        s["specificity"] = spec.specificity;
        s["epochs"] = spec.epochs;
        s["seed"] = spec.seed;
        s["train_accuracy"] = train_eval.accuracy;
        s["test_accuracy"] = test_eval.accuracy;
        s["avg_literals_per_clause"] = stats.average_literals;
        s["over_budget_fraction"] =
            static_cast<double>(stats.over_budget_count) / static_cast<double>(model.total_clauses());
        s["model_size_bytes"] = stats.model_size_bytes;
        if (spec.timing || spec.mode == "par") s["wall_ms"] = result.wall_ms;
        write_json(spec.out_summary, s);
    }
    return kExitOk;
}

int cmd_eval(const RunSpec& spec, std::ostream& out) {
    const Model model = load_model(spec.model_path);
    const Data data = load_data(spec);
    const EvalResult r = evaluate(model, data.test);
    out << std::fixed << std::setprecision(4) << "accuracy " << r.accuracy << " (" << r.correct << "/" << r.total
        << ")\n";
    out << "confusion (rows truth, columns predicted)\n";
    for (std::size_t t = 0; t < r.confusion.size(); ++t) {
        out << t << ':';
        for (std::size_t count : r.confusion[t]) out << ' ' << count;
        out << '\n';
    }
    return kExitOk;
}

int cmd_inspect(const RunSpec& spec, std::ostream& out) {
    const Model model = load_model(spec.model_path);
    const Hyperparams& p = model.params();
    const ClauseStats stats = clause_stats(model);
    out << "format version " << kModelFormatVersion << '\n'
        << "features " << model.feature_count() << '\n'
        << "banks " << model.bank_count() << '\n'
        << "clauses per bank " << p.clauses << '\n'
        << "threshold " << p.threshold << '\n'
        << "specificity " << p.specificity << '\n'
        << "budget " << budget_label(p.budget, model) << '\n'
        << "state depth " << p.state_depth << '\n'
        << "boost true positive " << (p.boost_true_positive ? "yes" : "no") << '\n';
    out << std::fixed << std::setprecision(4) << "average literals per clause " << stats.average_literals << '\n'
        << "over budget clauses " << stats.over_budget_count << '\n'
        << "model size bytes " << stats.model_size_bytes << '\n';
    const std::optional<double> ratio = energy_ratio(static_cast<double>(p.budget), stats.average_literals);
    out << "estimated_clause_energy_fraction ";
    if (ratio) out << *ratio << '\n';
    else out << "n/a\n";
    out << "clauses\n";
    for (const std::string& line : dump_clauses(model, {}, spec.top_k)) out << line << '\n';
    return kExitOk;
}

struct SweepRow {
    std::optional<std::size_t> budget;
    double worst_max_accuracy = 1.0;
    double average_literals = 0.0;
};

SweepRow sweep_budget(const RunSpec& spec, const Data& data, std::optional<std::size_t> requested) {
    SweepRow row{requested};
    const std::size_t budget = resolve_budget(requested, data.train.feature_count);
    for (std::size_t r = 0; r < spec.runs; ++r) {
        Model model(data.train.feature_count, banks_for(data.train.class_count), hyperparams(spec, budget));
        const TrainResult result = train(model, data.train, &data.test, train_config(spec, spec.seed + r));
        double best = 0.0;
        for (const EpochMetrics& m : result.history) {
            if (m.split == "test") best = std::max(best, m.accuracy);
        }
        row.worst_max_accuracy = std::min(row.worst_max_accuracy, best);
        row.average_literals += average_literals(model) / static_cast<double>(spec.runs);
        logger()->info("budget {} run {}: max test accuracy {:.4f}", budget_label(budget, model), r + 1, best);
    }
    return row;
}

int cmd_sweep(const RunSpec& spec, std::ostream& out) {
    std::vector<std::optional<std::size_t>> budgets;
    const bool automatic = spec.budgets == "auto";
    if (!automatic) {
        try {
            budgets = parse_budget_list(spec.budgets);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
    }
    const Data data = load_data(spec);
    for (const auto& b : budgets) resolve_budget(b, data.train.feature_count);

    std::ofstream metrics;
    if (!spec.out_metrics.empty()) metrics = open_output(spec.out_metrics);
    Json summary = Json::array();
    out << "budget\tworst_max_accuracy\tavg_literals_per_clause\n";
    const auto emit = [&](const SweepRow& row) {
        Json j;
        if (row.budget) j["budget"] = *row.budget;
        else j["budget"] = "all";
        j["worst_max_accuracy"] = row.worst_max_accuracy;
        j["avg_literals_per_clause"] = row.average_literals;
        j["runs"] = spec.runs;
        if (metrics.is_open()) metrics << j.dump() << '\n';
        summary.push_back(j);
        out << (row.budget ? std::to_string(*row.budget) : "all") << '\t' << std::fixed << std::setprecision(4)
            << row.worst_max_accuracy << '\t' << row.average_literals << '\n';
    };

    if (automatic) {
        const SweepRow vanilla = sweep_budget(spec, data, std::nullopt);
        emit(vanilla);
        for (std::size_t b : budget_ladder(vanilla.average_literals)) {
            emit(sweep_budget(spec, data, std::min(b, 2 * data.train.feature_count)));
        }
    } else {
        for (const auto& b : budgets) emit(sweep_budget(spec, data, b));
    }
    if (!spec.out_summary.empty()) write_json(spec.out_summary, summary);
    return kExitOk;
}

}  // namespace

std::vector<std::size_t> budget_ladder(double vanilla_average_literals) {
    std::size_t top = 1;
    while (static_cast<double>(top) < vanilla_average_literals) top *= 2;
    std::vector<std::size_t> ladder;
    for (std::size_t b = top; b >= 1; b /= 2) ladder.push_back(b);
    return ladder;
}

std::vector<std::optional<std::size_t>> parse_budget_list(const std::string& text) {
    std::vector<std::optional<std::size_t>> budgets;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        if (item == "all") {
            budgets.emplace_back();
            continue;
        }
        std::size_t value = 0;
        const char* end = item.data() + item.size();
        auto [ptr, ec] = std::from_chars(item.data(), end, value);
        if (ec != std::errc{} || ptr != end || value == 0) {
            throw std::invalid_argument("bad budget '" + item + "' in list '" + text + "'");
        }
        budgets.emplace_back(value);
    }
    if (budgets.empty()) throw std::invalid_argument("empty budget list");
    return budgets;
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Clause-size-constrained Tsetlin machine toolkit", "csctm"};
    app.require_subcommand(1);
    RunSpec spec;

    CLI::App* train_cmd = app.add_subcommand("train", "Train a model");
    add_data_options(*train_cmd, spec);
    add_train_options(*train_cmd, spec);
    train_cmd->add_option("--out-model", spec.out_model, "Model file to write");
    train_cmd->add_flag("--include-states", spec.include_states, "Store TA states in the model file");

    CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model on a dataset's test split");
    eval_cmd->add_option("--model", spec.model_path, "Model file")->required();
    add_data_options(*eval_cmd, spec);

    CLI::App* inspect_cmd = app.add_subcommand("inspect", "Print model header, statistics and clauses");
    inspect_cmd->add_option("--model", spec.model_path, "Model file")->required();
    inspect_cmd->add_option("--top-k", spec.top_k, "Clauses listed per class (0 lists all)");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Worst-of-k maximum test accuracy per literal budget");
    add_data_options(*sweep_cmd, spec);
    add_train_options(*sweep_cmd, spec);
    sweep_cmd->add_option("--budgets", spec.budgets, "Comma-separated budgets, or 'auto'");
    sweep_cmd->add_option("--runs", spec.runs, "Independent runs per budget (k)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        validate_spec(spec);
        if (train_cmd->parsed()) return cmd_train(spec, out);
        if (eval_cmd->parsed()) return cmd_eval(spec, out);
        if (inspect_cmd->parsed()) return cmd_inspect(spec, out);
        return cmd_sweep(spec, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DataError& e) {
        err << "data error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return kExitDataError;
    } catch (const ModelFormatError& e) {
        err << "model error: " << e.what() << '\n';
        return kExitDataError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitDataError;
    }
}

}  // namespace csctm
