#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spectra/checkpoint.hpp"

namespace spectra {

/// Interpolates shared names as (1-m)*a + m*b in f64; names present in only
/// one input are copied through verbatim. Shared names with different shapes
/// are a hard error. m must lie in [0, 1]; the endpoints copy exactly.
Checkpoint linear_merge(const Checkpoint& a, const Checkpoint& b, double m);

struct MergeSpec {
    Checkpoint base;    // pretrained-backbone role
    Checkpoint rgb;     // model trained on the RGB subset
    Checkpoint others;  // model trained on the non-RGB subsets
    double m1 = 0.9;
    double m2 = 0.5;
};

/// Stage one folds the RGB model into the base weights; stage two folds the
/// non-RGB model into that intermediate.
Checkpoint two_stage_merge(const MergeSpec& spec);

/// Named metrics for one candidate checkpoint; the first metric is primary.
using MergeEvalFn =
    std::function<std::vector<std::pair<std::string, double>>(const Checkpoint&)>;

struct RatioRow {
    double m = 0.0;
    std::vector<std::pair<std::string, double>> metrics;
};

struct GridSearchResult {
    std::vector<RatioRow> stage1;  // over m1, m2 = 0
    std::vector<RatioRow> stage2;  // over m2 at the chosen m1
    double chosen_m1 = 0.0;
    double chosen_m2 = 0.0;
};

/// Evaluates the stage-1 ratios, fixes the best m1 (ties prefer the larger
/// ratio), then sweeps m2 on top of it. The selection is made once here;
/// callers persist and reuse it.
GridSearchResult grid_search(const Checkpoint& base, const Checkpoint& rgb,
                             const Checkpoint& others, const std::vector<double>& grid,
                             const MergeEvalFn& eval_fn);

/// CSV: m,<metric1>,<metric2>,... one row per ratio.
void write_ratio_csv(const std::vector<RatioRow>& rows, const std::string& path);
std::vector<RatioRow> read_ratio_csv(const std::string& path);

}  // namespace spectra
