#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spectra/tensor.hpp"

namespace spectra {

struct GradCheckEntry {
    std::string name;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    double analytic_norm = 0.0;  // over probed scalars
    double numeric_norm = 0.0;
    std::size_t probes = 0;
    std::size_t below_floor = 0;  // coordinates verified by the absolute gate
    bool frozen = false;
};

struct GradReport {
    std::vector<GradCheckEntry> params;
    double max_abs_err = 0.0;
    double max_rel_err = 0.0;
    std::size_t below_floor_total = 0;

    bool pass(double rel_tol) const { return max_rel_err < rel_tol; }
    std::string to_string() const;
};

struct GradCheckOptions {
    double step = 1e-3;
    /// 0 probes every scalar; otherwise a deterministic sample of this many
    /// entries per parameter (first/last always included).
    int max_probes_per_param = 0;
    std::uint64_t probe_seed = 17;
    /// A coordinate whose relative error exceeds `rel_tol` at `step` is
    /// re-probed at step/10 and step/100; the best agreement wins. Central
    /// differences converge quadratically for a correct gradient, so a real
    /// bug keeps failing while truncation (or an |.|-kink collision) clears.
    double rel_tol = 1e-4;
    int refine_levels = 2;
    /// f64 rounding noise makes gradients below roughly 1e-5 unverifiable in
    /// relative terms. Coordinates where analytic and numeric are both under
    /// this floor pass via an absolute gate (|a - n| < 0.01 * floor) instead
    /// of the relative one; they are tallied separately in the report.
    double measurable_floor = 5e-5;
};

/// Central-difference check of the analytic gradients already accumulated in
/// `store.grad(...)`. `loss_fn` must be a pure function of the store values;
/// it is re-evaluated at perturbed parameters and every value is restored
/// afterwards. Frozen parameters are excluded from the update set and are
/// reported with gradient exactly 0. Relative error per scalar is
/// |a - n| / max(|a|, |n|, 1e-8).
GradReport finite_difference_gradient(const std::function<double()>& loss_fn,
                                      ParameterStore& store,
                                      const GradCheckOptions& opts = {});

}  // namespace spectra
