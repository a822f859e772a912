#include "spectra/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "spectra/error.hpp"
#include "spectra/rng.hpp"

namespace spectra {

std::string GradReport::to_string() const {
    std::ostringstream os;
    os << "param                                     max_abs_err   max_rel_err   |analytic|    |numeric|\n";
    for (const auto& e : params) {
        char line[256];
        std::snprintf(line, sizeof(line), "%-40s  %11.4e  %11.4e  %11.4e  %11.4e%s\n",
                      e.name.c_str(), e.max_abs_err, e.max_rel_err, e.analytic_norm,
                      e.numeric_norm, e.frozen ? "  (frozen)" : "");
        os << line;
    }
    char tail[160];
    std::snprintf(tail, sizeof(tail),
                  "overall: max_abs_err %.4e  max_rel_err %.4e  (%zu coords below measurability floor)\n",
                  max_abs_err, max_rel_err, below_floor_total);
    os << tail;
    return os.str();
}

namespace {

double rel_error(double analytic, double numeric) {
    return std::fabs(analytic - numeric) /
           std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
}

}  // namespace

GradReport finite_difference_gradient(const std::function<double()>& loss_fn,
                                      ParameterStore& store, const GradCheckOptions& opts) {
    if (opts.step <= 0.0) fail_config("finite_difference_gradient: step must be > 0");

    GradReport report;
    for (auto& entry : store.entries()) {
        GradCheckEntry res;
        res.name = entry.name;
        res.frozen = !entry.trainable;
        if (res.frozen || entry.value.numel() == 0) {
            // Excluded from the update set: reported gradient is exactly 0.
            report.params.push_back(res);
            continue;
        }

        const std::size_t n = entry.value.numel();
        std::vector<std::size_t> probe_idx;
        if (opts.max_probes_per_param <= 0 ||
            n <= static_cast<std::size_t>(opts.max_probes_per_param)) {
            probe_idx.resize(n);
            for (std::size_t i = 0; i < n; ++i) probe_idx[i] = i;
        } else {
            std::set<std::size_t> picked{0, n - 1};
            Rng rng(opts.probe_seed, "gradcheck/" + entry.name);
            while (picked.size() < static_cast<std::size_t>(opts.max_probes_per_param)) {
                picked.insert(rng.next_u64() % n);
            }
            probe_idx.assign(picked.begin(), picked.end());
        }

        for (std::size_t idx : probe_idx) {
            const double saved = entry.value[idx];
            const double analytic = entry.grad[idx];

            auto probe = [&](double h) {
                entry.value[idx] = saved + h;
                const double lp = loss_fn();
                entry.value[idx] = saved - h;
                const double lm = loss_fn();
                entry.value[idx] = saved;
                if (!std::isfinite(lp) || !std::isfinite(lm)) {
                    fail_numeric("finite_difference_gradient: non-finite loss while probing " +
                                 entry.name);
                }
                return (lp - lm) / (2.0 * h);
            };

            double numeric = probe(opts.step);
            double rel = rel_error(analytic, numeric);
            // A correct gradient converges quadratically as the step shrinks;
            // a genuine mismatch does not improve.
            double h = opts.step;
            for (int lvl = 0; lvl < opts.refine_levels && rel >= opts.rel_tol; ++lvl) {
                h /= 10.0;
                const double candidate = probe(h);
                const double candidate_rel = rel_error(analytic, candidate);
                if (candidate_rel < rel) {
                    numeric = candidate;
                    rel = candidate_rel;
                }
            }

            const double abs_err = std::fabs(analytic - numeric);
            const bool tiny = std::max(std::fabs(analytic), std::fabs(numeric)) <
                              opts.measurable_floor;
            if (rel >= opts.rel_tol && tiny && abs_err < 0.01 * opts.measurable_floor) {
                // Below what f64 central differences can resolve relatively;
                // the absolute gate has it covered.
                ++res.below_floor;
                ++report.below_floor_total;
            } else {
                res.max_abs_err = std::max(res.max_abs_err, abs_err);
                res.max_rel_err = std::max(res.max_rel_err, rel);
            }
            res.analytic_norm += analytic * analytic;
            res.numeric_norm += numeric * numeric;
        }
        res.probes = probe_idx.size();
        res.analytic_norm = std::sqrt(res.analytic_norm);
        res.numeric_norm = std::sqrt(res.numeric_norm);
        report.max_abs_err = std::max(report.max_abs_err, res.max_abs_err);
        report.max_rel_err = std::max(report.max_rel_err, res.max_rel_err);
        report.params.push_back(std::move(res));
    }
    return report;
}

}  // namespace spectra
