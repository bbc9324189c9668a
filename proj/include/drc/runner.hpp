#pragma once

// Batch evaluation pipeline: load tasks, run one selection agent per task
// against an oracle, score the selected scripts on the hidden layouts, and
// assemble a deterministic JSON report. Tasks are evaluated in parallel; the
// report row order is canonical by task id regardless of scheduling.

#include <string>
#include <vector>

#include "json.hpp"

#include "drc/benchmark.hpp"
#include "drc/oracle.hpp"
#include "drc/oracle_mock.hpp"
#include "drc/selection.hpp"

namespace drc {

enum class AgentKind { Sample1, Judge, GenTests, SStar, CodeMonkey, SplitTester };
enum class OracleKind { Mock, Http };

// Canonical flag spellings <-> enum values. DomainError on unknown names.
std::string agent_kind_name(AgentKind a);
AgentKind agent_kind_from_name(const std::string& name);
std::string oracle_kind_name(OracleKind o);
OracleKind oracle_kind_from_name(const std::string& name);
std::string cluster_scoring_name(ClusterScoring s);
ClusterScoring cluster_scoring_from_name(const std::string& name);

struct RunConfig {
    AgentKind agent = AgentKind::SplitTester;
    int n = 10;                // candidate scripts sampled per task
    SelectionConfig selection;  // seed/task_id are overwritten per task
    OracleKind oracle = OracleKind::Mock;
    MockConfig mock;           // ignored for the HTTP oracle
    uint64_t seed = 0;         // master seed (oracle runs and selection)
    int workers = 0;           // OpenMP threads; 0 = hardware default
    std::string tasks_path;    // task JSON file or directory of *.json
    std::string out_path;      // report destination ("" = stdout only)
    std::string doc_path;      // DSL doc for the prompt doc slot (HTTP)
    bool include_traces = false;

    void validate() const;           // DomainError on out-of-range values
    nlohmann::json to_json() const;  // verbatim echo embedded in the report
};
RunConfig run_config_from_json(const nlohmann::json& j);  // IngestError

// One evaluated task. `outcome` partitions the task set:
//   success | wrong | error | agent-failure (oracle died; not an error metric).
struct TaskRow {
    std::string task_id;
    std::string category;
    std::string outcome;
    size_t winner = 0;
    std::string selected_script;
    int success = 0;
    int error = 0;
    // Indicators of the winning candidate before sequential revision; these
    // are the quantities the Oracle@N bounds are stated over.
    int pre_revision_success = 0;
    int pre_revision_error = 0;
    double f1 = 0.0;
    // Confusion counts of the selected script over the hidden layouts with
    // VIOLATION as the positive class; eval_errors counts ERROR outcomes
    // (excluded from the confusion cells).
    int64_t tp = 0, fp = 0, tn = 0, fn = 0, eval_errors = 0;
    std::vector<int> sample_success;  // per-candidate indicators (Oracle@N basis)
    std::vector<int> sample_error;
    int64_t tests_generated = 0;
    int64_t label_errors = 0;  // generated tests whose label disagrees with gt
    bool has_ledger = false;   // per-task ledgers exist only for per-task oracles
    BudgetSnapshot ledger;
    std::string failure_reason;  // agent-failure rows only
    nlohmann::json trace;        // null unless RunConfig::include_traces
};

nlohmann::json row_to_json(const TaskRow& row);
TaskRow row_from_json(const nlohmann::json& j);  // IngestError

// Loads one task file or every *.json in a directory, sorted by task id.
// IngestError on unreadable/invalid bundles, DomainError on duplicate ids.
std::vector<Task> load_tasks(const std::string& path);

// Evaluates one task: N candidates from the oracle, the configured agent,
// then metrics of the selected script over the hidden layouts. Metric
// evaluations are harness-side and do not touch the eval meter or ledger.
// Propagates OracleUnavailable (the batch driver maps it to agent-failure).
TaskRow eval_task(const Task& task, const RunConfig& cfg, Oracle& oracle);

// Recomputes the aggregate block from report rows (the same function backs
// the report builder, report merging, and the consistency tests). Aggregate
// ledger totals sum the per-row ledgers when every row carries one.
nlohmann::json aggregates_from_rows(const nlohmann::json& rows);

// Full batch run. Mock oracles are constructed per task from (seed, task id);
// an HTTP oracle is shared across workers. Rows are ordered by task id and
// the Oracle@N bound assertions run before the report is returned.
// DomainError on an empty task list.
nlohmann::json run_eval(const RunConfig& cfg, const std::vector<Task>& tasks);

// Merges shard reports produced with identical configs (tasks_path/out_path
// may differ) over disjoint task sets; aggregates are recomputed from the
// merged rows. IngestError on config mismatch or duplicate task ids.
nlohmann::json merge_reports(const std::vector<nlohmann::json>& reports);

// Consistency gates run by the report builder and merger: outcome counts
// partition the task set, per-row metric sanity, and the oracle bounds
// (Oracle@N success >= any agent's pre-revision success; Oracle@N error <=
// the agent's pre-revision error). DomainError on violation.
void assert_report_invariants(const nlohmann::json& report);

}  // namespace drc
