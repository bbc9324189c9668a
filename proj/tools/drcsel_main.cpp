// drcsel: batch front-end for the DRC best-of-N benchmark.
//
// Subcommands:
//   gen-tasks     generate synthetic benchmark tasks (one JSON file per task)
//   eval          run a selection agent over a task set and write a report
//   run-script    execute one DRC script against one layout file
//   trace         print the stored audit trace of one task from a report
//   report-merge  merge shard reports produced with identical configs
//
// Flags may also come from an INI/TOML config file (--config); command-line
// values win over file values. Exit codes: 0 success; 1 usage/config/data
// error; 2 script ERROR (run-script) or missing trace/task id (trace);
// 3 eval completed but at least one task hit an unavailable oracle.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "drc/benchmark.hpp"
#include "drc/engine.hpp"
#include "drc/errors.hpp"
#include "drc/layout_io.hpp"
#include "drc/runner.hpp"

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw drc::IngestError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw drc::IngestError(path + ": " + e.what());
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw drc::IngestError("cannot write " + path);
    out << text;
}

int cmd_gen_tasks(int count, uint64_t seed, const std::vector<std::string>& categories,
                  const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    drc::TaskGenSpec spec;
    spec.count = count;
    spec.seed = seed;
    spec.categories = categories;
    const std::vector<drc::Task> tasks = drc::gen_synthetic_tasks(spec);
    for (const drc::Task& task : tasks) {
        const std::string path = out_dir + "/" + task.id + ".json";
        write_text_file(path, drc::task_to_json(task).dump(2) + "\n");
    }
    std::cerr << "wrote " << tasks.size() << " tasks to " << out_dir << "\n";
    return 0;
}

int cmd_eval(const drc::RunConfig& cfg) {
    const std::vector<drc::Task> tasks = drc::load_tasks(cfg.tasks_path);
    const nlohmann::json report = drc::run_eval(cfg, tasks);

    const std::string text = report.dump(2) + "\n";
    if (cfg.out_path.empty()) {
        std::cout << text;
    } else {
        write_text_file(cfg.out_path, text);
    }

    const nlohmann::json& agg = report.at("aggregates");
    std::cerr << "tasks: " << agg.at("tasks") << "  success_rate: " << agg.at("success_rate")
              << "  error_rate: " << agg.at("error_rate") << "  mean_f1: " << agg.at("mean_f1")
              << "  oracle@N: " << agg.at("oracle_at_n_success") << "\n";
    if (!cfg.out_path.empty()) std::cerr << "report written to " << cfg.out_path << "\n";

    return agg.at("outcome_counts").at("agent_failure").get<int64_t>() > 0 ? 3 : 0;
}

int cmd_run_script(const std::string& script_path, const std::string& layout_path) {
    std::ifstream in(script_path);
    if (!in) throw drc::IngestError("cannot open " + script_path);
    std::string script((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const drc::Layout layout = drc::load_layout(layout_path);

    const drc::RunResult result = drc::run_script_text(script, layout);
    std::cout << drc::to_string(result.outcome) << "\n";
    for (const drc::OutputResult& out : result.outputs) {
        std::cout << "  " << out.rule_name << " (" << out.description << "): "
                  << out.markers.size() << " marker" << (out.markers.size() == 1 ? "" : "s")
                  << "\n";
        for (const drc::Rect& r : out.markers) {
            std::cout << "    [" << r.x0 << ", " << r.y0 << ", " << r.x1 << ", " << r.y1
                      << "] (0.5 nm units)\n";
        }
    }
    if (result.outcome.verdict == drc::Verdict::Error) {
        std::cerr << result.error_message << "\n";
        return 2;
    }
    return 0;
}

int cmd_trace(const std::string& report_path, const std::string& task_id) {
    const nlohmann::json report = read_json_file(report_path);
    for (const nlohmann::json& row : report.at("rows")) {
        if (row.at("task_id").get<std::string>() != task_id) continue;
        if (!row.contains("trace")) {
            std::cerr << "task " << task_id
                      << " has no stored trace (run eval with --traces)\n";
            return 2;
        }
        std::cout << row.at("trace").dump(2) << "\n";
        return 0;
    }
    std::cerr << "no task with id '" << task_id << "' in " << report_path << "\n";
    return 2;
}

int cmd_report_merge(const std::vector<std::string>& inputs, const std::string& out_path) {
    std::vector<nlohmann::json> reports;
    reports.reserve(inputs.size());
    for (const std::string& path : inputs) reports.push_back(read_json_file(path));
    const nlohmann::json merged = drc::merge_reports(reports);
    const std::string text = merged.dump(2) + "\n";
    if (out_path.empty()) {
        std::cout << text;
    } else {
        write_text_file(out_path, text);
        std::cerr << "merged " << inputs.size() << " reports into " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DRC script best-of-N selection benchmark"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read flag defaults from an INI/TOML file");

    // --- gen-tasks ---------------------------------------------------------
    auto* gen = app.add_subcommand("gen-tasks", "generate synthetic benchmark tasks");
    int gen_count = 1;
    uint64_t gen_seed = 0;
    std::vector<std::string> gen_categories;
    std::string gen_out = "tasks";
    gen->add_option("--count", gen_count, "number of tasks")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--categories", gen_categories,
                    "restrict to these categories "
                    "(pdk-derived, multi-constraint, syntax-coverage)")
        ->delimiter(',');
    gen->add_option("--out", gen_out, "output directory");

    // --- eval --------------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "run a selection agent over a task set");
    drc::RunConfig cfg;
    std::string agent_name = "splittester";
    std::string oracle_name = "mock";
    std::string scoring_name = "product";
    std::vector<std::string> ablations;
    eval->add_option("--agent", agent_name,
                     "sample1|judge|gentests|sstar|codemonkey|splittester")
        ->capture_default_str();
    eval->add_option("--n", cfg.n, "candidate scripts per task")->capture_default_str();
    eval->add_option("--b0", cfg.selection.b0, "initial generated tests (B0)")
        ->capture_default_str();
    eval->add_option("--budget", cfg.selection.b, "additional split-test budget (B)")
        ->capture_default_str();
    eval->add_option("--k", cfg.selection.k, "representatives per split request (K)")
        ->capture_default_str();
    eval->add_option("--patience", cfg.selection.patience, "failed-split patience (P)")
        ->capture_default_str();
    eval->add_option("--cluster-scoring", scoring_name, "product|size|score")
        ->capture_default_str();
    eval->add_option("--ablation", ablations,
                     "no-judge, no-expected-labels, top3-only (repeatable)")
        ->delimiter(',');
    eval->add_option("--revise-rounds", cfg.selection.revise_rounds,
                     "sequential revision rounds for the winner (splittester)")
        ->capture_default_str();
    eval->add_option("--oracle", oracle_name, "mock|http")->capture_default_str();
    eval->add_option("--seed", cfg.seed, "master run seed")->capture_default_str();
    eval->add_option("--workers", cfg.workers, "worker threads (0 = hardware)")
        ->capture_default_str();
    eval->add_option("--tasks", cfg.tasks_path, "task JSON file or directory")->required();
    eval->add_option("--out", cfg.out_path, "report output path (default stdout)");
    eval->add_option("--doc", cfg.doc_path, "DSL doc file for the prompt doc slot (http)");
    eval->add_flag("--traces", cfg.include_traces, "store per-task audit traces");
    eval->add_option("--correct-fraction", cfg.mock.correct_fraction,
                     "mock: fraction of correct candidates")
        ->capture_default_str();
    eval->add_option("--label-error", cfg.mock.label_error,
                     "mock: probability of a flipped test label")
        ->capture_default_str();
    eval->add_option("--mutation-seed", cfg.mock.mutation_seed,
                     "mock: extra seed for candidate mutations")
        ->capture_default_str();
    eval->add_option("--testgen-fail-prob", cfg.mock.testgen_fail_prob,
                     "mock: probability a test-generation slot fails outright")
        ->capture_default_str();

    // --- run-script --------------------------------------------------------
    auto* runs = app.add_subcommand("run-script", "execute one script against one layout");
    std::string script_path, layout_path;
    runs->add_option("--script", script_path, "DRC script file")->required();
    runs->add_option("--layout", layout_path, "layout JSON file")->required();

    // --- trace -------------------------------------------------------------
    auto* trace = app.add_subcommand("trace", "print one task's stored audit trace");
    std::string trace_report, trace_task;
    trace->add_option("--report", trace_report, "report JSON file")->required();
    trace->add_option("--task-id", trace_task, "task id to look up")->required();

    // --- report-merge ------------------------------------------------------
    auto* merge = app.add_subcommand("report-merge", "merge shard reports");
    std::vector<std::string> merge_inputs;
    std::string merge_out;
    merge->add_option("inputs", merge_inputs, "report files")->required()->expected(-1);
    merge->add_option("--out", merge_out, "merged report path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_tasks(gen_count, gen_seed, gen_categories, gen_out);
        if (eval->parsed()) {
            cfg.agent = drc::agent_kind_from_name(agent_name);
            cfg.oracle = drc::oracle_kind_from_name(oracle_name);
            cfg.selection.scoring = drc::cluster_scoring_from_name(scoring_name);
            for (const std::string& a : ablations) {
                if (a == "no-judge") cfg.selection.no_judge = true;
                else if (a == "no-expected-labels") cfg.selection.no_expected_labels = true;
                else if (a == "top3-only") cfg.selection.top3_only = true;
                else throw drc::DomainError(
                        "unknown ablation '" + a +
                        "' (expected no-judge|no-expected-labels|top3-only)");
            }
            cfg.validate();
            return cmd_eval(cfg);
        }
        if (runs->parsed()) return cmd_run_script(script_path, layout_path);
        if (trace->parsed()) return cmd_trace(trace_report, trace_task);
        if (merge->parsed()) return cmd_report_merge(merge_inputs, merge_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
