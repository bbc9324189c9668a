#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "drc/engine.hpp"
#include "drc/geometry.hpp"
#include "drc/lang.hpp"

namespace drc {

// ---------------------------------------------------------------------------
// Task schema
// ---------------------------------------------------------------------------

struct LabeledLayout {
    Verdict label = Verdict::Pass;  // Pass or Violation, never Error
    Layout layout;
};

// One benchmark task: an English rule, the reference script enforcing it, and
// hidden evaluation layouts with cached labels. Labels always equal the
// verdict of the reference script; they are re-verified on load.
struct Task {
    std::string id;
    std::string rule;       // natural-language rule text
    std::string gt_script;  // reference DRC script
    std::string category;   // pdk-derived | multi-constraint | syntax-coverage
    std::vector<LabeledLayout> layouts;
};

// JSON bundle: {"id","rule","gt_script","category",
//               "layouts":[{"label":"PASS"|"VIOLATION", ...layout JSON...}]}.
nlohmann::json task_to_json(const Task& t);
// Re-executes gt_script on every layout; IngestError if any cached label
// disagrees, if the script errors, or if the PASS/VIOLATION mix is missing.
Task task_from_json(const nlohmann::json& j);
Task load_task(const std::string& path);
void save_task(const Task& t, const std::string& path);
// All *.json files under dir, ordered by task id. IngestError if none found.
std::vector<Task> load_tasks_dir(const std::string& dir);

// ---------------------------------------------------------------------------
// Check sites and corner layouts
// ---------------------------------------------------------------------------

// One enforced constraint extracted from a reference-script AST. `Containment`
// covers the subtraction idiom `inner - outer` (non-empty difference is a
// violation); it has no threshold.
struct CheckSite {
    enum class Kind { Width, Spacing, Separation, Enclosed, Containment };
    Kind kind = Kind::Width;
    std::string primary;  // physical layer under check
    std::string other;    // second layer (separation/enclosed/containment)
    int64_t dist_nm = 0;  // threshold in whole nm; 0 for containment

    bool operator==(const CheckSite&) const = default;
};

const char* check_site_kind_name(CheckSite::Kind k);

// Extracts sites from the template family this project generates: checks on
// plain layers (through single-assignment aliases), `a - b` containment, and
// the enclosure rewrite `(a & b) - b.sized(-d)`. Scripts outside the family
// yield only the sites that match; unmatched outputs are skipped.
std::vector<CheckSite> extract_check_sites(const CheckedScript& script);
std::vector<CheckSite> extract_check_sites_text(const std::string& script_text);

// Geometry request for one site. `Scalar` pins the site's defining dimension
// (strip width / pair gap / enclosure margin) to value_nm; the rest are
// topology cases for two-layer sites.
struct CornerSpec {
    enum class Kind { Scalar, PartialOverlap, Contained, DisjointFar };
    Kind kind = Kind::Scalar;
    int64_t value_nm = 0;  // Scalar only; >= 0 (width requires >= 1)

    static CornerSpec scalar(int64_t nm) { return CornerSpec{Kind::Scalar, nm}; }
    static CornerSpec partial_overlap() { return CornerSpec{Kind::PartialOverlap, 0}; }
    static CornerSpec contained() { return CornerSpec{Kind::Contained, 0}; }
    static CornerSpec disjoint_far() { return CornerSpec{Kind::DisjointFar, 0}; }
};

// Builds a layout that realizes `spec` at sites[target] and leaves every other
// site's layers empty (tasks give each site its own layers, so absent geometry
// satisfies the other checks vacuously). DomainError on a spec/kind mismatch.
Layout corner_layout(const std::vector<CheckSite>& sites, size_t target, const CornerSpec& spec,
                     const std::string& name = "");

// One layout with compliant geometry for every site at once.
Layout compliant_layout(const std::vector<CheckSite>& sites, const std::string& name = "");

// ---------------------------------------------------------------------------
// Synthetic task generation
// ---------------------------------------------------------------------------

inline constexpr const char* kCategoryPdk = "pdk-derived";
inline constexpr const char* kCategoryMulti = "multi-constraint";
inline constexpr const char* kCategorySyntax = "syntax-coverage";

struct TaskGenSpec {
    int count = 1;
    uint64_t seed = 0;
    // Subset filter; empty means all three categories in the default mix
    // (~0.31 / 0.49 / 0.20 pdk-derived / multi-constraint / syntax-coverage).
    std::vector<std::string> categories;
};

// Deterministic in (count, seed, categories). Every task carries, per site,
// the threshold corners at d-1 / d / d+1 nm (verdicts VIOLATION / PASS / PASS)
// plus the applicable topology corners, and one all-compliant layout. Labels
// are computed by executing the reference script. Throws GenerationFailed if
// a sampled task cannot realize its corners after 20 resamples, DomainError
// on count < 1 or an unknown category name.
std::vector<Task> gen_synthetic_tasks(const TaskGenSpec& spec);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// 1 iff the script's verdict matches the cached label on every layout; any
// ERROR outcome forces 0.
int success_indicator(const Task& task, const std::string& script);

// 1 iff the script yields ERROR on any layout (compile errors hit all).
int error_indicator(const Task& task, const std::string& script);

// Oracle upper bounds over one task's N per-sample indicators: success if any
// sample succeeded; error only if every sample errored. DomainError on empty.
int oracle_at_n_success(const std::vector<int>& per_sample_success);
int oracle_at_n_error(const std::vector<int>& per_sample_error);

// 1 - C(n-c,k)/C(n,k) in product form; exact 1.0 when n-c < k.
// DomainError unless 0 <= c <= n and 1 <= k <= n.
double pass_at_k(int n, int c, int k);

// F1 with VIOLATION as the positive class over the task's layouts; any ERROR
// outcome forces 0; 0 when precision+recall are both undefined.
double f1_per_task(const Task& task, const std::string& script);

// Mean over generated tests of [verdict of gt_script != expected label].
// DomainError on an empty test list.
double label_error_rate(const std::string& gt_script,
                        const std::vector<std::pair<Layout, Verdict>>& tests);

}  // namespace drc
