#include "drc/runner.hpp"

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <omp.h>
#include <sstream>

#include "drc/engine.hpp"
#include "drc/errors.hpp"
#include "drc/layout_io.hpp"
#include "drc/oracle_http.hpp"
#include "drc/prompt.hpp"

namespace drc {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Enum spellings
// ---------------------------------------------------------------------------

std::string agent_kind_name(AgentKind a) {
    switch (a) {
        case AgentKind::Sample1: return "sample1";
        case AgentKind::Judge: return "judge";
        case AgentKind::GenTests: return "gentests";
        case AgentKind::SStar: return "sstar";
        case AgentKind::CodeMonkey: return "codemonkey";
        case AgentKind::SplitTester: return "splittester";
    }
    throw DomainError("unknown agent kind");
}

AgentKind agent_kind_from_name(const std::string& name) {
    if (name == "sample1") return AgentKind::Sample1;
    if (name == "judge") return AgentKind::Judge;
    if (name == "gentests") return AgentKind::GenTests;
    if (name == "sstar") return AgentKind::SStar;
    if (name == "codemonkey") return AgentKind::CodeMonkey;
    if (name == "splittester") return AgentKind::SplitTester;
    throw DomainError("unknown agent '" + name +
                      "' (expected sample1|judge|gentests|sstar|codemonkey|splittester)");
}

std::string oracle_kind_name(OracleKind o) {
    return o == OracleKind::Mock ? "mock" : "http";
}

OracleKind oracle_kind_from_name(const std::string& name) {
    if (name == "mock") return OracleKind::Mock;
    if (name == "http") return OracleKind::Http;
    throw DomainError("unknown oracle '" + name + "' (expected mock|http)");
}

std::string cluster_scoring_name(ClusterScoring s) {
    switch (s) {
        case ClusterScoring::Product: return "product";
        case ClusterScoring::SizeOnly: return "size";
        case ClusterScoring::ScoreOnly: return "score";
    }
    throw DomainError("unknown cluster scoring");
}

ClusterScoring cluster_scoring_from_name(const std::string& name) {
    if (name == "product") return ClusterScoring::Product;
    if (name == "size") return ClusterScoring::SizeOnly;
    if (name == "score") return ClusterScoring::ScoreOnly;
    throw DomainError("unknown cluster scoring '" + name + "' (expected product|size|score)");
}

// ---------------------------------------------------------------------------
// RunConfig
// ---------------------------------------------------------------------------

void RunConfig::validate() const {
    if (n < 1) throw DomainError("run config: n must be >= 1");
    if (workers < 0) throw DomainError("run config: workers must be >= 0");
    selection.validate();
    const auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!unit(mock.correct_fraction))
        throw DomainError("run config: correct-fraction must be in [0,1]");
    if (!unit(mock.label_error)) throw DomainError("run config: label-error must be in [0,1]");
    if (!unit(mock.testgen_fail_prob))
        throw DomainError("run config: testgen-fail-prob must be in [0,1]");
}

// The echo deliberately omits `workers` and `out_path`: neither affects any
// result byte (determinism is guaranteed at every worker count), and leaving
// them out keeps reports from otherwise-identical runs byte-identical.
nlohmann::json RunConfig::to_json() const {
    return nlohmann::json{
        {"agent", agent_kind_name(agent)},
        {"n", n},
        {"b0", selection.b0},
        {"budget", selection.b},
        {"k", selection.k},
        {"patience", selection.patience},
        {"cluster_scoring", cluster_scoring_name(selection.scoring)},
        {"no_judge", selection.no_judge},
        {"no_expected_labels", selection.no_expected_labels},
        {"top3_only", selection.top3_only},
        {"revise_rounds", selection.revise_rounds},
        {"oracle", oracle_kind_name(oracle)},
        {"mock",
         {{"correct_fraction", mock.correct_fraction},
          {"label_error", mock.label_error},
          {"testgen_fail_prob", mock.testgen_fail_prob},
          {"mutation_seed", mock.mutation_seed}}},
        {"seed", seed},
        {"tasks", tasks_path},
        {"doc", doc_path},
        {"include_traces", include_traces},
    };
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    try {
        RunConfig cfg;
        cfg.agent = agent_kind_from_name(j.at("agent").get<std::string>());
        cfg.n = j.at("n").get<int>();
        cfg.selection.b0 = j.at("b0").get<int>();
        cfg.selection.b = j.at("budget").get<int>();
        cfg.selection.k = j.at("k").get<int>();
        cfg.selection.patience = j.at("patience").get<int>();
        cfg.selection.scoring =
            cluster_scoring_from_name(j.at("cluster_scoring").get<std::string>());
        cfg.selection.no_judge = j.at("no_judge").get<bool>();
        cfg.selection.no_expected_labels = j.at("no_expected_labels").get<bool>();
        cfg.selection.top3_only = j.at("top3_only").get<bool>();
        cfg.selection.revise_rounds = j.at("revise_rounds").get<int>();
        cfg.oracle = oracle_kind_from_name(j.at("oracle").get<std::string>());
        const nlohmann::json& m = j.at("mock");
        cfg.mock.correct_fraction = m.at("correct_fraction").get<double>();
        cfg.mock.label_error = m.at("label_error").get<double>();
        cfg.mock.testgen_fail_prob = m.at("testgen_fail_prob").get<double>();
        cfg.mock.mutation_seed = m.at("mutation_seed").get<uint64_t>();
        cfg.seed = j.at("seed").get<uint64_t>();
        cfg.tasks_path = j.at("tasks").get<std::string>();
        cfg.doc_path = j.at("doc").get<std::string>();
        cfg.include_traces = j.at("include_traces").get<bool>();
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(std::string("run config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Task rows
// ---------------------------------------------------------------------------

namespace {

nlohmann::json snapshot_to_json(const BudgetSnapshot& s) {
    return nlohmann::json{{"llm_calls", s.llm_calls},
                          {"gen_tokens", s.gen_tokens},
                          {"drc_evals", s.drc_evals},
                          {"test_retries", s.test_retries}};
}

BudgetSnapshot snapshot_from_json(const nlohmann::json& j) {
    BudgetSnapshot s;
    s.llm_calls = j.at("llm_calls").get<uint64_t>();
    s.gen_tokens = j.at("gen_tokens").get<uint64_t>();
    s.drc_evals = j.at("drc_evals").get<uint64_t>();
    s.test_retries = j.at("test_retries").get<uint64_t>();
    return s;
}

}  // namespace

nlohmann::json row_to_json(const TaskRow& row) {
    nlohmann::json j{
        {"task_id", row.task_id},
        {"category", row.category},
        {"outcome", row.outcome},
        {"winner", row.winner},
        {"selected_script", row.selected_script},
        {"success", row.success},
        {"error", row.error},
        {"pre_revision_success", row.pre_revision_success},
        {"pre_revision_error", row.pre_revision_error},
        {"f1", row.f1},
        {"confusion",
         {{"tp", row.tp},
          {"fp", row.fp},
          {"tn", row.tn},
          {"fn", row.fn},
          {"eval_errors", row.eval_errors}}},
        {"sample_success", row.sample_success},
        {"sample_error", row.sample_error},
        {"tests_generated", row.tests_generated},
        {"label_errors", row.label_errors},
    };
    if (row.has_ledger) j["ledger"] = snapshot_to_json(row.ledger);
    if (!row.failure_reason.empty()) j["failure_reason"] = row.failure_reason;
    if (!row.trace.is_null()) j["trace"] = row.trace;
    return j;
}

TaskRow row_from_json(const nlohmann::json& j) {
    try {
        TaskRow row;
        row.task_id = j.at("task_id").get<std::string>();
        row.category = j.at("category").get<std::string>();
        row.outcome = j.at("outcome").get<std::string>();
        row.winner = j.at("winner").get<size_t>();
        row.selected_script = j.at("selected_script").get<std::string>();
        row.success = j.at("success").get<int>();
        row.error = j.at("error").get<int>();
        row.pre_revision_success = j.at("pre_revision_success").get<int>();
        row.pre_revision_error = j.at("pre_revision_error").get<int>();
        row.f1 = j.at("f1").get<double>();
        const nlohmann::json& c = j.at("confusion");
        row.tp = c.at("tp").get<int64_t>();
        row.fp = c.at("fp").get<int64_t>();
        row.tn = c.at("tn").get<int64_t>();
        row.fn = c.at("fn").get<int64_t>();
        row.eval_errors = c.at("eval_errors").get<int64_t>();
        row.sample_success = j.at("sample_success").get<std::vector<int>>();
        row.sample_error = j.at("sample_error").get<std::vector<int>>();
        row.tests_generated = j.at("tests_generated").get<int64_t>();
        row.label_errors = j.at("label_errors").get<int64_t>();
        if (j.contains("ledger")) {
            row.has_ledger = true;
            row.ledger = snapshot_from_json(j.at("ledger"));
        }
        if (j.contains("failure_reason"))
            row.failure_reason = j.at("failure_reason").get<std::string>();
        if (j.contains("trace")) row.trace = j.at("trace");
        return row;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(std::string("task row: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Task loading
// ---------------------------------------------------------------------------

namespace {

nlohmann::json parse_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(path.string() + ": " + e.what());
    }
}

void append_tasks_from(const fs::path& path, std::vector<Task>& out) {
    const nlohmann::json doc = parse_json_file(path);
    if (doc.is_array()) {
        for (const nlohmann::json& item : doc) out.push_back(task_from_json(item));
    } else {
        out.push_back(task_from_json(doc));
    }
}

}  // namespace

std::vector<Task> load_tasks(const std::string& path) {
    const fs::path p(path);
    std::vector<Task> tasks;
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(p)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json")
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) append_tasks_from(f, tasks);
    } else if (fs::is_regular_file(p)) {
        append_tasks_from(p, tasks);
    } else {
        throw IngestError("task path does not exist: " + path);
    }
    std::sort(tasks.begin(), tasks.end(),
              [](const Task& a, const Task& b) { return a.id < b.id; });
    for (size_t i = 1; i < tasks.size(); ++i) {
        if (tasks[i].id == tasks[i - 1].id)
            throw DomainError("duplicate task id '" + tasks[i].id + "'");
    }
    return tasks;
}

// ---------------------------------------------------------------------------
// Per-task evaluation
// ---------------------------------------------------------------------------

TaskRow eval_task(const Task& task, const RunConfig& cfg, Oracle& oracle) {
    TaskRow row;
    row.task_id = task.id;
    row.category = task.category;

    const CandidatePool pool = make_pool(task.rule, oracle.gen_candidates(task.rule, cfg.n));

    SelectionConfig sel = cfg.selection;
    sel.seed = cfg.seed;
    sel.task_id = task.id;

    SelectionResult res;
    switch (cfg.agent) {
        case AgentKind::Sample1: res = sample1_select(pool); break;
        case AgentKind::Judge: res = judge_tournament(pool, oracle); break;
        case AgentKind::GenTests:
            res = generated_tests_select(pool, sel.b0 + sel.b, oracle);
            break;
        case AgentKind::SStar: res = sstar_select(pool, sel, oracle); break;
        case AgentKind::CodeMonkey: res = codemonkey_select(pool, sel, oracle); break;
        case AgentKind::SplitTester: res = split_tester(pool, sel, oracle); break;
    }

    // Everything below is harness-side scoring: hidden-layout metrics and
    // label auditing never touch the eval meter or the oracle ledger.
    const EvalMeter::Suspend harness_guard;

    row.winner = res.winner;
    row.selected_script = res.script;
    row.success = success_indicator(task, res.script);
    row.error = error_indicator(task, res.script);
    const std::string& unrevised = pool.candidates[res.winner];
    if (unrevised == res.script) {
        row.pre_revision_success = row.success;
        row.pre_revision_error = row.error;
    } else {
        row.pre_revision_success = success_indicator(task, unrevised);
        row.pre_revision_error = error_indicator(task, unrevised);
    }
    row.f1 = f1_per_task(task, res.script);

    for (const LabeledLayout& ll : task.layouts) {
        const Outcome out = phi(ll.layout, res.script);
        if (out.verdict == Verdict::Error) {
            ++row.eval_errors;
            continue;
        }
        const bool predicted = out.verdict == Verdict::Violation;
        const bool actual = ll.label == Verdict::Violation;
        if (predicted && actual) ++row.tp;
        if (predicted && !actual) ++row.fp;
        if (!predicted && actual) ++row.fn;
        if (!predicted && !actual) ++row.tn;
    }

    row.sample_success.reserve(pool.candidates.size());
    row.sample_error.reserve(pool.candidates.size());
    for (const std::string& candidate : pool.candidates) {
        row.sample_success.push_back(success_indicator(task, candidate));
        row.sample_error.push_back(error_indicator(task, candidate));
    }

    row.tests_generated = static_cast<int64_t>(res.tests.size());
    for (const TestCase& t : res.tests) {
        row.label_errors += phi(t.layout, task.gt_script).verdict != t.expected;
    }

    row.outcome = row.error != 0 ? "error" : row.success != 0 ? "success" : "wrong";
    if (cfg.include_traces) row.trace = res.trace;
    return row;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

nlohmann::json aggregates_from_rows(const nlohmann::json& rows) {
    if (!rows.is_array() || rows.empty())
        throw DomainError("report aggregation needs at least one row");

    const double count = static_cast<double>(rows.size());
    int64_t n_success = 0, n_wrong = 0, n_error = 0, n_failure = 0;
    double sum_success = 0, sum_error = 0, sum_f1 = 0;
    double sum_oracle_success = 0, sum_oracle_error = 0;
    double sum_pre_success = 0, sum_pre_error = 0;
    int64_t sampled_rows = 0;
    int64_t tests_generated = 0, label_errors = 0;
    BudgetSnapshot totals;
    bool all_ledgers = true;

    for (const nlohmann::json& row : rows) {
        const std::string outcome = row.at("outcome").get<std::string>();
        if (outcome == "success") ++n_success;
        else if (outcome == "wrong") ++n_wrong;
        else if (outcome == "error") ++n_error;
        else if (outcome == "agent-failure") ++n_failure;
        else throw IngestError("unknown row outcome '" + outcome + "'");

        sum_success += row.at("success").get<int>();
        sum_error += row.at("error").get<int>();
        sum_f1 += row.at("f1").get<double>();
        tests_generated += row.at("tests_generated").get<int64_t>();
        label_errors += row.at("label_errors").get<int64_t>();

        const auto samples_s = row.at("sample_success").get<std::vector<int>>();
        const auto samples_e = row.at("sample_error").get<std::vector<int>>();
        if (!samples_s.empty()) {
            ++sampled_rows;
            sum_oracle_success += oracle_at_n_success(samples_s);
            sum_oracle_error += oracle_at_n_error(samples_e);
            sum_pre_success += row.at("pre_revision_success").get<int>();
            sum_pre_error += row.at("pre_revision_error").get<int>();
        }

        if (row.contains("ledger")) {
            const BudgetSnapshot s = snapshot_from_json(row.at("ledger"));
            totals.llm_calls += s.llm_calls;
            totals.gen_tokens += s.gen_tokens;
            totals.drc_evals += s.drc_evals;
            totals.test_retries += s.test_retries;
        } else {
            all_ledgers = false;
        }
    }

    nlohmann::json agg{
        {"tasks", rows.size()},
        {"outcome_counts",
         {{"success", n_success},
          {"wrong", n_wrong},
          {"error", n_error},
          {"agent_failure", n_failure}}},
        {"success_rate", sum_success / count},
        {"error_rate", sum_error / count},
        {"mean_f1", sum_f1 / count},
        {"oracle_at_n_success", sampled_rows ? sum_oracle_success / sampled_rows : 0.0},
        {"oracle_at_n_error", sampled_rows ? sum_oracle_error / sampled_rows : 0.0},
        {"mean_pre_revision_success", sampled_rows ? sum_pre_success / sampled_rows : 0.0},
        {"mean_pre_revision_error", sampled_rows ? sum_pre_error / sampled_rows : 0.0},
        {"tests_generated", tests_generated},
        {"label_errors", label_errors},
        {"label_error_rate",
         tests_generated ? static_cast<double>(label_errors) / tests_generated : 0.0},
    };
    if (all_ledgers) agg["ledger_totals"] = snapshot_to_json(totals);
    return agg;
}

void assert_report_invariants(const nlohmann::json& report) {
    const nlohmann::json& rows = report.at("rows");
    const nlohmann::json& agg = report.at("aggregates");

    const nlohmann::json& oc = agg.at("outcome_counts");
    const int64_t partition = oc.at("success").get<int64_t>() + oc.at("wrong").get<int64_t>() +
                              oc.at("error").get<int64_t>() +
                              oc.at("agent_failure").get<int64_t>();
    if (partition != static_cast<int64_t>(rows.size()))
        throw DomainError("report invariant: outcome counts must partition the task set");

    for (const nlohmann::json& row : rows) {
        const int success = row.at("success").get<int>();
        const int error = row.at("error").get<int>();
        if (error == 1 && success == 1)
            throw DomainError("report invariant: an erroring script cannot succeed");
        const auto samples_s = row.at("sample_success").get<std::vector<int>>();
        const auto samples_e = row.at("sample_error").get<std::vector<int>>();
        if (samples_s.empty()) continue;
        // Oracle bounds, stated over the pre-revision selection.
        if (oracle_at_n_success(samples_s) < row.at("pre_revision_success").get<int>())
            throw DomainError("report invariant: Oracle@N success bound violated for task " +
                              row.at("task_id").get<std::string>());
        if (oracle_at_n_error(samples_e) > row.at("pre_revision_error").get<int>())
            throw DomainError("report invariant: Oracle@N error bound violated for task " +
                              row.at("task_id").get<std::string>());
    }

    const double tol = 1e-12;
    if (agg.at("oracle_at_n_success").get<double>() + tol <
        agg.at("mean_pre_revision_success").get<double>())
        throw DomainError("report invariant: aggregate Oracle@N success bound violated");
    if (agg.at("oracle_at_n_error").get<double>() - tol >
        agg.at("mean_pre_revision_error").get<double>())
        throw DomainError("report invariant: aggregate Oracle@N error bound violated");
}

// ---------------------------------------------------------------------------
// Batch driver
// ---------------------------------------------------------------------------

nlohmann::json run_eval(const RunConfig& cfg, const std::vector<Task>& tasks) {
    cfg.validate();
    if (tasks.empty()) throw DomainError("run_eval: no tasks to evaluate");

    std::unique_ptr<HttpOracle> shared_http;
    if (cfg.oracle == OracleKind::Http) {
        std::string doc_text;
        if (!cfg.doc_path.empty()) {
            std::ifstream in(cfg.doc_path);
            if (!in) throw IngestError("cannot open doc file: " + cfg.doc_path);
            std::ostringstream buf;
            buf << in.rdbuf();
            doc_text = buf.str();
        }
        shared_http = std::make_unique<HttpOracle>(HttpOracleConfig::from_env(),
                                                   TemplateSet::builtin(), std::move(doc_text));
    }

    const int workers = cfg.workers > 0 ? cfg.workers : omp_get_max_threads();
    std::vector<TaskRow> rows(tasks.size());
    std::exception_ptr first_error = nullptr;

#pragma omp parallel for num_threads(workers) schedule(dynamic)
    for (int64_t i = 0; i < static_cast<int64_t>(tasks.size()); ++i) {
        const Task& task = tasks[i];
        try {
            if (cfg.oracle == OracleKind::Mock) {
                MockOracle oracle(cfg.mock, task.gt_script, task.id, cfg.seed);
                rows[i] = eval_task(task, cfg, oracle);
                rows[i].has_ledger = true;
                rows[i].ledger = oracle.ledger().snapshot();
            } else {
                rows[i] = eval_task(task, cfg, *shared_http);
            }
        } catch (const OracleUnavailable& e) {
            // Partial-failure policy: the task is recorded as an agent
            // failure (neither a success nor an error metric) and the run
            // continues.
            TaskRow row;
            row.task_id = task.id;
            row.category = task.category;
            row.outcome = "agent-failure";
            row.failure_reason = e.what();
            rows[i] = std::move(row);
        } catch (...) {
#pragma omp critical(runner_first_error)
            if (!first_error) first_error = std::current_exception();
        }
    }
    if (first_error) std::rethrow_exception(first_error);

    std::sort(rows.begin(), rows.end(),
              [](const TaskRow& a, const TaskRow& b) { return a.task_id < b.task_id; });

    nlohmann::json row_array = nlohmann::json::array();
    for (const TaskRow& row : rows) row_array.push_back(row_to_json(row));

    nlohmann::json aggregates = aggregates_from_rows(row_array);
    if (cfg.oracle == OracleKind::Http) {
        // Per-task attribution is meaningless for a shared oracle; report the
        // run-wide totals instead.
        aggregates["ledger_totals"] = snapshot_to_json(shared_http->ledger().snapshot());
    }

    nlohmann::json report{
        {"config", cfg.to_json()},
        {"rows", std::move(row_array)},
        {"aggregates", std::move(aggregates)},
    };
    assert_report_invariants(report);
    return report;
}

// ---------------------------------------------------------------------------
// Report merging
// ---------------------------------------------------------------------------

nlohmann::json merge_reports(const std::vector<nlohmann::json>& reports) {
    if (reports.empty()) throw DomainError("merge_reports: no reports given");

    const auto config_core = [](const nlohmann::json& report) {
        nlohmann::json c = report.at("config");
        c.erase("tasks");  // shards legitimately differ in their task paths
        return c;
    };

    nlohmann::json merged_config = reports.front().at("config");
    nlohmann::json task_paths = nlohmann::json::array();
    nlohmann::json rows = nlohmann::json::array();
    bool sum_ledgers = true;
    BudgetSnapshot totals;

    for (const nlohmann::json& report : reports) {
        if (config_core(report) != config_core(reports.front()))
            throw IngestError("merge_reports: shard configs differ");
        task_paths.push_back(report.at("config").at("tasks"));
        for (const nlohmann::json& row : report.at("rows")) rows.push_back(row);
        const nlohmann::json& agg = report.at("aggregates");
        if (agg.contains("ledger_totals")) {
            const BudgetSnapshot s = snapshot_from_json(agg.at("ledger_totals"));
            totals.llm_calls += s.llm_calls;
            totals.gen_tokens += s.gen_tokens;
            totals.drc_evals += s.drc_evals;
            totals.test_retries += s.test_retries;
        } else {
            sum_ledgers = false;
        }
    }

    std::sort(rows.begin(), rows.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
        return a.at("task_id").get<std::string>() < b.at("task_id").get<std::string>();
    });
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].at("task_id") == rows[i - 1].at("task_id"))
            throw IngestError("merge_reports: duplicate task id '" +
                              rows[i].at("task_id").get<std::string>() + "'");
    }

    merged_config["tasks"] = std::move(task_paths);
    nlohmann::json aggregates = aggregates_from_rows(rows);
    if (!aggregates.contains("ledger_totals") && sum_ledgers)
        aggregates["ledger_totals"] = snapshot_to_json(totals);

    nlohmann::json report{
        {"config", std::move(merged_config)},
        {"rows", std::move(rows)},
        {"aggregates", std::move(aggregates)},
    };
    assert_report_invariants(report);
    return report;
}

}  // namespace drc
