// Batch-runner tests: deterministic byte-identical reports across worker
// counts, aggregate/row consistency, config echo round trips, the partial
// failure policy for a dead oracle, and shard merging.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "drc/benchmark.hpp"
#include "drc/engine.hpp"
#include "drc/runner.hpp"

using namespace drc;
namespace fs = std::filesystem;

namespace {

RunConfig base_config() {
    RunConfig cfg;
    cfg.agent = AgentKind::SplitTester;
    cfg.n = 10;
    cfg.selection.b0 = 8;
    cfg.selection.b = 8;
    cfg.selection.k = 3;
    cfg.selection.patience = 1;
    cfg.oracle = OracleKind::Mock;
    cfg.mock.correct_fraction = 0.3;
    cfg.mock.label_error = 0.15;
    cfg.seed = 20260825;
    cfg.tasks_path = "tasks";
    cfg.include_traces = true;
    return cfg;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("drc-runner-" + std::to_string(::getpid()) + "-" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("reports are byte-identical across worker counts and repeat runs") {
    const std::vector<Task> tasks = gen_synthetic_tasks({10, 2401, {}});
    RunConfig cfg = base_config();

    cfg.workers = 1;
    const std::string serial = run_eval(cfg, tasks).dump(2);
    cfg.workers = 8;
    const std::string parallel = run_eval(cfg, tasks).dump(2);
    const std::string again = run_eval(cfg, tasks).dump(2);

    CHECK(serial == parallel);
    CHECK(parallel == again);
}

TEST_CASE("aggregates are recomputable from rows and rows are self-consistent") {
    const std::vector<Task> tasks = gen_synthetic_tasks({8, 77, {}});
    RunConfig cfg = base_config();
    cfg.selection.revise_rounds = 2;  // exercise the pre/post-revision split
    const nlohmann::json report = run_eval(cfg, tasks);

    CHECK(aggregates_from_rows(report.at("rows")) == report.at("aggregates"));
    CHECK_NOTHROW(assert_report_invariants(report));
    CHECK(report.at("rows").size() == tasks.size());

    int64_t tests_sum = 0;
    std::string prev_id;
    for (const nlohmann::json& row : report.at("rows")) {
        const TaskRow parsed = row_from_json(row);  // full round trip
        CHECK(row_to_json(parsed) == row);
        CHECK(parsed.task_id > prev_id);  // canonical ordering, strictly ascending
        prev_id = parsed.task_id;

        CHECK(parsed.sample_success.size() == static_cast<size_t>(cfg.n));
        CHECK(parsed.sample_error.size() == static_cast<size_t>(cfg.n));
        CHECK(parsed.has_ledger);
        CHECK(parsed.ledger.drc_evals > 0);
        CHECK(parsed.tests_generated <=
              static_cast<int64_t>(cfg.selection.b0 + cfg.selection.b));
        CHECK(parsed.label_errors <= parsed.tests_generated);

        // trace present and in the audit schema
        REQUIRE_FALSE(parsed.trace.is_null());
        CHECK(parsed.trace.contains("budget_used"));
        CHECK(parsed.trace.contains("clusters_per_step"));

        // confusion cells + eval errors cover every hidden layout
        const Task* task = nullptr;
        for (const Task& t : tasks)
            if (t.id == parsed.task_id) task = &t;
        REQUIRE(task != nullptr);
        CHECK(parsed.tp + parsed.fp + parsed.tn + parsed.fn + parsed.eval_errors ==
              static_cast<int64_t>(task->layouts.size()));

        // outcome string matches the indicator pair
        if (parsed.error) CHECK(parsed.outcome == "error");
        else if (parsed.success) CHECK(parsed.outcome == "success");
        else CHECK(parsed.outcome == "wrong");

        tests_sum += parsed.tests_generated;
    }
    CHECK(report.at("aggregates").at("tests_generated").get<int64_t>() == tests_sum);
}

TEST_CASE("config echo, validation, and JSON round trip") {
    RunConfig cfg = base_config();
    cfg.selection.scoring = ClusterScoring::SizeOnly;
    cfg.selection.no_judge = true;
    cfg.mock.mutation_seed = 9;
    cfg.doc_path = "doc.md";

    const nlohmann::json echo = cfg.to_json();
    CHECK(echo.at("agent") == "splittester");
    CHECK(echo.at("cluster_scoring") == "size");
    CHECK_FALSE(echo.contains("workers"));  // execution detail, not config

    const RunConfig back = run_config_from_json(echo);
    CHECK(back.to_json() == echo);

    nlohmann::json broken = echo;
    broken.erase("seed");
    CHECK_THROWS_AS(run_config_from_json(broken), IngestError);

    RunConfig bad = base_config();
    bad.n = 0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = base_config();
    bad.mock.correct_fraction = 1.5;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = base_config();
    bad.selection.b0 = 0;
    CHECK_THROWS_AS(bad.validate(), DomainError);

    // enum spellings round-trip
    for (const char* name : {"sample1", "judge", "gentests", "sstar", "codemonkey",
                             "splittester"}) {
        CHECK(agent_kind_name(agent_kind_from_name(name)) == name);
    }
    CHECK_THROWS_AS(agent_kind_from_name("best"), DomainError);
    CHECK_THROWS_AS(oracle_kind_from_name("local"), DomainError);
    CHECK_THROWS_AS(cluster_scoring_from_name("hybrid"), DomainError);
}

TEST_CASE("every agent completes a small batch and satisfies the invariants") {
    const std::vector<Task> tasks = gen_synthetic_tasks({5, 11, {}});
    for (const AgentKind agent :
         {AgentKind::Sample1, AgentKind::Judge, AgentKind::GenTests, AgentKind::SStar,
          AgentKind::CodeMonkey, AgentKind::SplitTester}) {
        CAPTURE(agent_kind_name(agent));
        RunConfig cfg = base_config();
        cfg.agent = agent;
        cfg.selection.b0 = 4;
        cfg.selection.b = 4;
        const nlohmann::json report = run_eval(cfg, tasks);
        CHECK_NOTHROW(assert_report_invariants(report));
        CHECK(aggregates_from_rows(report.at("rows")) == report.at("aggregates"));
        CHECK(report.at("config").at("agent") == agent_kind_name(agent));
    }
}

TEST_CASE("sample1 success equals the mean first-sample indicator") {
    const std::vector<Task> tasks = gen_synthetic_tasks({12, 5005, {}});
    RunConfig cfg = base_config();
    cfg.agent = AgentKind::Sample1;
    const nlohmann::json report = run_eval(cfg, tasks);

    double mean_first = 0;
    for (const nlohmann::json& row : report.at("rows")) {
        CHECK(row.at("winner") == 0);
        CHECK(row.at("success") == row.at("sample_success")[0]);
        mean_first += row.at("sample_success")[0].get<int>();
    }
    mean_first /= static_cast<double>(report.at("rows").size());
    CHECK(report.at("aggregates").at("success_rate").get<double>() ==
          doctest::Approx(mean_first));
}

TEST_CASE("all-correct pools give perfect rates; noiseless tests give zero label error") {
    const std::vector<Task> tasks = gen_synthetic_tasks({6, 321, {}});
    RunConfig cfg = base_config();
    cfg.mock.correct_fraction = 1.0;
    cfg.mock.label_error = 0.0;
    const nlohmann::json report = run_eval(cfg, tasks);
    const nlohmann::json& agg = report.at("aggregates");
    CHECK(agg.at("success_rate") == 1.0);
    CHECK(agg.at("error_rate") == 0.0);
    CHECK(agg.at("mean_f1") == 1.0);
    CHECK(agg.at("oracle_at_n_success") == 1.0);
    CHECK(agg.at("oracle_at_n_error") == 0.0);
    CHECK(agg.at("label_error_rate") == 0.0);
    CHECK(agg.at("outcome_counts").at("success") == 6);

    // heavy label noise shows up in the audit aggregate
    cfg.mock.correct_fraction = 0.3;
    cfg.mock.label_error = 1.0;
    const nlohmann::json noisy = run_eval(cfg, tasks);
    CHECK(noisy.at("aggregates").at("label_error_rate") == 1.0);
}

TEST_CASE("a dead HTTP oracle becomes per-task agent failures, not a crash") {
    ::setenv("ORACLE_ENDPOINT", "http://127.0.0.1:9/v1/chat/completions", 1);
    ::setenv("ORACLE_MAX_INFLIGHT", "2", 1);
    const std::vector<Task> tasks = gen_synthetic_tasks({2, 99, {}});
    RunConfig cfg = base_config();
    cfg.oracle = OracleKind::Http;
    cfg.n = 2;
    const nlohmann::json report = run_eval(cfg, tasks);
    ::unsetenv("ORACLE_ENDPOINT");
    ::unsetenv("ORACLE_MAX_INFLIGHT");

    const nlohmann::json& agg = report.at("aggregates");
    CHECK(agg.at("outcome_counts").at("agent_failure") == 2);
    CHECK(agg.at("success_rate") == 0.0);
    CHECK(agg.at("error_rate") == 0.0);  // not an error metric
    CHECK(agg.at("ledger_totals").at("drc_evals") == 0);
    for (const nlohmann::json& row : report.at("rows")) {
        CHECK(row.at("outcome") == "agent-failure");
        CHECK(row.contains("failure_reason"));
        CHECK(row.at("sample_success").empty());
    }
    CHECK_NOTHROW(assert_report_invariants(report));
}

TEST_CASE("shard merging reproduces the full run") {
    const std::vector<Task> tasks = gen_synthetic_tasks({9, 640, {}});
    RunConfig cfg = base_config();
    cfg.selection.b0 = 4;
    cfg.selection.b = 4;

    const nlohmann::json full = run_eval(cfg, tasks);

    const std::vector<Task> shard_a(tasks.begin(), tasks.begin() + 4);
    const std::vector<Task> shard_b(tasks.begin() + 4, tasks.end());
    RunConfig cfg_a = cfg, cfg_b = cfg;
    cfg_a.tasks_path = "tasks/shard-a";
    cfg_b.tasks_path = "tasks/shard-b";
    const nlohmann::json report_a = run_eval(cfg_a, shard_a);
    const nlohmann::json report_b = run_eval(cfg_b, shard_b);

    const nlohmann::json merged = merge_reports({report_a, report_b});
    CHECK(merged.at("rows") == full.at("rows"));
    CHECK(merged.at("aggregates") == full.at("aggregates"));
    CHECK(merged.at("config").at("tasks") ==
          nlohmann::json({"tasks/shard-a", "tasks/shard-b"}));

    // duplicate task ids are rejected
    CHECK_THROWS_AS(merge_reports({report_a, report_a}), IngestError);

    // config mismatches are rejected
    RunConfig other = cfg;
    other.n = 5;
    other.tasks_path = "tasks/shard-b";
    const nlohmann::json mismatched = run_eval(other, shard_b);
    CHECK_THROWS_AS(merge_reports({report_a, mismatched}), IngestError);

    CHECK_THROWS_AS(merge_reports({}), DomainError);
}

TEST_CASE("task loading from files and directories") {
    const std::vector<Task> tasks = gen_synthetic_tasks({4, 12, {}});
    TempDir dir;

    // one file per task, deliberately written in reverse id order
    for (size_t i = 0; i < tasks.size(); ++i) {
        std::ofstream out(dir.path / ("zz-" + std::to_string(tasks.size() - i) + ".json"));
        out << task_to_json(tasks[i]).dump(2) << "\n";
    }
    const std::vector<Task> loaded = load_tasks(dir.path.string());
    REQUIRE(loaded.size() == tasks.size());
    for (size_t i = 1; i < loaded.size(); ++i) CHECK(loaded[i - 1].id < loaded[i].id);
    for (size_t i = 0; i < loaded.size(); ++i) {
        CHECK(loaded[i].id == tasks[i].id);  // generator emits ascending ids
        CHECK(loaded[i].gt_script == tasks[i].gt_script);
        CHECK(loaded[i].layouts.size() == tasks[i].layouts.size());
    }

    // an array bundle in a single file works too
    nlohmann::json bundle = nlohmann::json::array();
    for (const Task& t : tasks) bundle.push_back(task_to_json(t));
    const fs::path bundle_path = dir.path / "bundle-all.json";
    std::ofstream(bundle_path) << bundle.dump();
    const std::vector<Task> from_bundle = load_tasks(bundle_path.string());
    CHECK(from_bundle.size() == tasks.size());

    // duplicates across files are rejected (directory now holds both copies)
    CHECK_THROWS_AS(load_tasks(dir.path.string()), DomainError);

    CHECK_THROWS_AS(load_tasks((dir.path / "missing").string()), IngestError);

    std::ofstream(dir.path / "bad.json") << "{ not json";
    CHECK_THROWS_AS(load_tasks(dir.path.string()), IngestError);
}

TEST_CASE("the report builder rejects fabricated bound violations") {
    const std::vector<Task> tasks = gen_synthetic_tasks({3, 55, {}});
    RunConfig cfg = base_config();
    nlohmann::json report = run_eval(cfg, tasks);

    // claim a selected success although every sample failed
    nlohmann::json forged = report;
    forged["rows"][0]["pre_revision_success"] = 1;
    forged["rows"][0]["sample_success"] = nlohmann::json::array();
    for (int i = 0; i < cfg.n; ++i) forged["rows"][0]["sample_success"].push_back(0);
    CHECK_THROWS_AS(assert_report_invariants(forged), DomainError);

    // claim success and error simultaneously
    forged = report;
    forged["rows"][0]["success"] = 1;
    forged["rows"][0]["error"] = 1;
    CHECK_THROWS_AS(assert_report_invariants(forged), DomainError);

    // break the partition
    forged = report;
    forged["aggregates"]["outcome_counts"]["wrong"] =
        forged["aggregates"]["outcome_counts"]["wrong"].get<int64_t>() + 1;
    CHECK_THROWS_AS(assert_report_invariants(forged), DomainError);

    // aggregate-level bound violation
    forged = report;
    forged["aggregates"]["oracle_at_n_success"] = 0.0;
    forged["aggregates"]["mean_pre_revision_success"] = 1.0;
    // per-row bounds still hold in the forged report, so only the aggregate
    // check can catch this
    CHECK_THROWS_AS(assert_report_invariants(forged), DomainError);
}

TEST_CASE("runner keeps the eval meter in step with the summed ledgers") {
    const std::vector<Task> tasks = gen_synthetic_tasks({5, 8181, {}});
    RunConfig cfg = base_config();
    cfg.workers = 4;

    const uint64_t meter_before = EvalMeter::count();
    const nlohmann::json report = run_eval(cfg, tasks);
    const uint64_t meter_delta = EvalMeter::count() - meter_before;

    CHECK(report.at("aggregates").at("ledger_totals").at("drc_evals").get<uint64_t>() ==
          meter_delta);
    CHECK(meter_delta > 0);
}
