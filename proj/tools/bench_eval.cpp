// bench_eval: times the batch verdict evaluator in serial and OpenMP mode on
// a synthetic script x layout workload and verifies the results are
// bit-identical. Exits non-zero on any mismatch.

#include <chrono>
#include <iostream>

#include <omp.h>

#include "CLI11.hpp"

#include "drc/benchmark.hpp"
#include "drc/engine.hpp"
#include "drc/oracle_mock.hpp"

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs OpenMP benchmark of the batch verdict evaluator"};
    int task_count = 20;
    int candidates_per_task = 6;
    uint64_t seed = 1;
    int workers = omp_get_max_threads();
    int repeat = 3;
    app.add_option("--tasks", task_count, "synthetic tasks in the workload")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--candidates", candidates_per_task,
                   "mock candidate scripts generated per task")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--seed", seed, "workload seed")->capture_default_str();
    app.add_option("--workers", workers, "OpenMP worker count for the parallel run")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--repeat", repeat, "timed repetitions (best time wins)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        drc::TaskGenSpec spec;
        spec.count = task_count;
        spec.seed = seed;
        const std::vector<drc::Task> tasks = drc::gen_synthetic_tasks(spec);

        std::vector<std::string> scripts;
        std::vector<drc::Layout> layouts;
        for (const drc::Task& task : tasks) {
            drc::MockOracle oracle({}, task.gt_script, task.id, seed);
            for (std::string& c : oracle.gen_candidates(task.rule, candidates_per_task))
                scripts.push_back(std::move(c));
            for (const drc::LabeledLayout& ll : task.layouts) layouts.push_back(ll.layout);
        }
        const size_t cells = scripts.size() * layouts.size();
        std::cout << "workload: " << scripts.size() << " scripts x " << layouts.size()
                  << " layouts = " << cells << " evaluations\n";

        const auto timed = [&](int w) {
            double best = 1e300;
            std::vector<drc::Outcome> out;
            for (int r = 0; r < repeat; ++r) {
                const auto start = std::chrono::steady_clock::now();
                out = drc::phi_matrix(scripts, layouts, w);
                best = std::min(best, seconds_since(start));
            }
            return std::make_pair(best, std::move(out));
        };

        const auto [serial_s, serial] = timed(1);
        const auto [parallel_s, parallel] = timed(workers);

        size_t mismatches = 0;
        for (size_t i = 0; i < serial.size(); ++i) {
            if (serial[i].verdict != parallel[i].verdict ||
                serial[i].error != parallel[i].error)
                ++mismatches;
        }

        std::cout << "serial   (1 worker):  " << serial_s << " s  ("
                  << static_cast<double>(cells) / serial_s << " evals/s)\n";
        std::cout << "parallel (" << workers << " workers): " << parallel_s << " s  ("
                  << static_cast<double>(cells) / parallel_s << " evals/s)\n";
        std::cout << "speedup: " << serial_s / parallel_s << "x\n";
        std::cout << "bit-identical: " << (mismatches == 0 ? "yes" : "NO") << "\n";
        return mismatches == 0 ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
