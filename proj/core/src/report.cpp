#include "spectra/report.hpp"

#include <cstdio>
#include <set>
#include <sstream>

#include "spectra/evalkit.hpp"
#include "spectra/merge.hpp"
#include "spectra/trainer.hpp"

namespace spectra {

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace

std::string render_log_table(const std::string& csv_path) {
    const std::vector<StepLogRow> log = read_step_log(csv_path);
    std::ostringstream os;
    os << "| step | l_siglip | l_m_siglip | l_m_dinov2 | l_m_vit | total |\n";
    os << "|---:|---:|---:|---:|---:|---:|\n";
    const std::size_t stride = log.size() > 20 ? (log.size() + 19) / 20 : 1;
    for (std::size_t i = 0; i < log.size(); i += stride) {
        const auto& r = log[i];
        os << "| " << r.step << " | " << fmt(r.l_siglip) << " | " << fmt(r.l_m_siglip) << " | "
           << fmt(r.l_m_dinov2) << " | " << fmt(r.l_m_vit) << " | " << fmt(r.total) << " |\n";
    }
    if (!log.empty() && (log.size() - 1) % stride != 0) {
        const auto& r = log.back();
        os << "| " << r.step << " | " << fmt(r.l_siglip) << " | " << fmt(r.l_m_siglip) << " | "
           << fmt(r.l_m_dinov2) << " | " << fmt(r.l_m_vit) << " | " << fmt(r.total) << " |\n";
    }
    return os.str();
}

std::string render_eval_table(const std::vector<std::string>& json_paths) {
    std::vector<EvalReport> reports;
    std::set<std::string> metric_names;
    for (const auto& path : json_paths) {
        reports.push_back(read_eval_report(path));
        for (const auto& [name, value] : reports.back().metrics) metric_names.insert(name);
    }
    std::ostringstream os;
    os << "| task | dataset |";
    for (const auto& name : metric_names) os << " " << name << " |";
    os << " checkpoint |\n|---|---|";
    for (std::size_t i = 0; i < metric_names.size(); ++i) os << "---:|";
    os << "---|\n";
    for (const auto& rep : reports) {
        os << "| " << rep.task << " | " << rep.dataset << " |";
        for (const auto& name : metric_names) {
            bool found = false;
            for (const auto& [mname, value] : rep.metrics) {
                if (mname == name) {
                    os << " " << fmt(value) << " |";
                    found = true;
                    break;
                }
            }
            if (!found) os << " - |";
        }
        os << " " << rep.checkpoint_hash << " |\n";
    }
    return os.str();
}

std::string render_ratio_table(const std::string& csv_path) {
    const std::vector<RatioRow> rows = read_ratio_csv(csv_path);
    std::ostringstream os;
    os << "| m |";
    if (!rows.empty()) {
        for (const auto& [name, value] : rows.front().metrics) os << " " << name << " |";
    }
    os << "\n|---:|";
    if (!rows.empty()) {
        for (std::size_t i = 0; i < rows.front().metrics.size(); ++i) os << "---:|";
    }
    os << "\n";
    for (const auto& row : rows) {
        os << "| " << fmt(row.m) << " |";
        for (const auto& [name, value] : row.metrics) os << " " << fmt(value) << " |";
        os << "\n";
    }
    return os.str();
}

}  // namespace spectra
