#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "drc/errors.hpp"
#include "drc/geometry.hpp"
#include "drc/lang.hpp"

namespace drc {

// Verdict of one script run over one layout. Outcome equality compares the
// verdict only: all ERROR kinds are interchangeable for scoring/clustering.
enum class Verdict : uint8_t { Pass = 0, Violation = 1, Error = 2 };
enum class ErrorKind : uint8_t { None = 0, Parse, Semantic, Runtime };

struct Outcome {
    Verdict verdict = Verdict::Pass;
    ErrorKind error = ErrorKind::None;

    static Outcome pass() { return Outcome{Verdict::Pass, ErrorKind::None}; }
    static Outcome violation() { return Outcome{Verdict::Violation, ErrorKind::None}; }
    static Outcome make_error(ErrorKind k) { return Outcome{Verdict::Error, k}; }

    friend bool operator==(const Outcome& a, const Outcome& b) { return a.verdict == b.verdict; }
    friend bool operator!=(const Outcome& a, const Outcome& b) { return !(a == b); }
};

// PASS < VIOLATION < ERROR; used only for deterministic sorting in reports.
inline int outcome_rank(const Outcome& o) { return static_cast<int>(o.verdict); }
char outcome_code(const Outcome& o);        // 'P' / 'V' / 'E'
std::string to_string(const Outcome& o);    // "PASS", "VIOLATION", "ERROR(parse)", ...
Outcome outcome_from_code(char c);          // inverse of outcome_code ('E' -> runtime)

struct OutputResult {
    std::string rule_name;
    std::string description;
    std::vector<Rect> markers;  // canonical rects; each has positive area
};

struct RunStats {
    uint64_t eval_steps = 0;  // geometry-primitive charge consumed by the run
};

struct RunResult {
    Outcome outcome;
    std::vector<OutputResult> outputs;  // empty when outcome is ERROR
    RunStats stats;
    std::string error_message;  // debug detail for ERROR outcomes only
};

struct EvalLimits {
    // Cumulative geometry-primitive budget per run; exceeding it folds the run
    // into ERROR(runtime). Scripts are untrusted input and must not hang us.
    uint64_t step_cap = 1'000'000;
};

// Deterministic work meter; throws EngineLimitError once the cap is exceeded.
class StepMeter {
  public:
    explicit StepMeter(uint64_t cap) : cap_(cap) {}
    void charge(uint64_t n) {
        used_ += n;
        if (used_ > cap_) throw EngineLimitError("evaluation step cap exceeded");
    }
    uint64_t used() const { return used_; }

  private:
    uint64_t used_ = 0;
    uint64_t cap_;
};

// Process-wide count of script evaluations, for cross-checking budget ledgers.
class EvalMeter {
  public:
    static void bump();
    static uint64_t count();
    static void reset();

    // RAII: while alive, runs on this thread are not counted. Used by the
    // mock oracle for its simulation-internal evaluations, which stand in for
    // a remote model's private reasoning rather than agent-triggered runs.
    class Suspend {
      public:
        Suspend();
        ~Suspend();
        Suspend(const Suspend&) = delete;
        Suspend& operator=(const Suspend&) = delete;
    };
};

// Expression evaluation. Identifiers resolve to env first (script-defined
// names shadow layout layers), then to layout layers (absent layer == empty).
// Check methods evaluate to their marker region, so checks compose.
Region eval_expr(const Expr& e, const Layout& layout, const std::map<std::string, Region>& env,
                 StepMeter& meter);

// Marker region of one check; non-empty iff the check is violated. All four
// kinds PASS at exactly d. `other` required for Separation/Enclosed.
Region eval_check(CheckKind kind, const Region& primary, const Region* other, Coord d,
                  StepMeter* meter = nullptr);

// Executes a resolved script. Never throws for script-level failures: parse
// and semantic problems cannot occur here (input is resolved) and evaluation
// failures (overflow, step cap) yield ERROR(runtime) with outputs discarded.
RunResult run_script(const CheckedScript& script, const Layout& layout,
                     const EvalLimits& limits = {});

// parse + resolve + run, folding ParseError / SemanticError into the outcome.
RunResult run_script_text(std::string_view text, const Layout& layout,
                          const EvalLimits& limits = {});

// The verdict function: outcome of running script text against a layout.
Outcome phi(const Layout& layout, std::string_view script_text, const EvalLimits& limits = {});

// All-pairs batch: result[i * layouts.size() + j] = phi(layouts[j], scripts[i]).
// workers > 1 parallelizes with OpenMP; results are bit-identical to serial.
std::vector<Outcome> phi_matrix(const std::vector<std::string>& scripts,
                                const std::vector<Layout>& layouts, int workers = 1,
                                const EvalLimits& limits = {});

}  // namespace drc
