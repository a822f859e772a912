#include "spectra/merge.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "spectra/error.hpp"

namespace spectra {

Checkpoint linear_merge(const Checkpoint& a, const Checkpoint& b, double m) {
    if (m < 0.0 || m > 1.0) fail_config("linear_merge: m must be in [0, 1]");
    std::unordered_map<std::string, const CheckpointRecord*> b_index;
    for (const auto& rec : b.records) b_index[rec.name] = &rec;

    Checkpoint out;
    out.has_trailer = true;  // merged weights never carry optimizer state
    for (const auto& ra : a.records) {
        auto it = b_index.find(ra.name);
        if (it == b_index.end()) {
            out.records.push_back(ra);  // a-only: copy through
            continue;
        }
        const CheckpointRecord& rb = *it->second;
        if (ra.shape != rb.shape) {
            fail_config("linear_merge: shape conflict on '" + ra.name + "': " + shape_str(ra.shape) +
                        " vs " + shape_str(rb.shape));
        }
        CheckpointRecord rec;
        rec.name = ra.name;
        rec.shape = ra.shape;
        if (m == 0.0) {
            rec.data = ra.data;
        } else if (m == 1.0) {
            rec.data = rb.data;
        } else {
            rec.data.resize(ra.data.size());
            for (std::size_t i = 0; i < ra.data.size(); ++i) {
                rec.data[i] = (1.0 - m) * ra.data[i] + m * rb.data[i];
            }
        }
        out.records.push_back(std::move(rec));
        b_index.erase(it);
    }
    // b-only names, in b's order.
    for (const auto& rb : b.records) {
        if (b_index.count(rb.name)) out.records.push_back(rb);
    }
    return out;
}

Checkpoint two_stage_merge(const MergeSpec& spec) {
    Checkpoint intermediate = linear_merge(spec.base, spec.rgb, spec.m1);
    return linear_merge(intermediate, spec.others, spec.m2);
}

GridSearchResult grid_search(const Checkpoint& base, const Checkpoint& rgb,
                             const Checkpoint& others, const std::vector<double>& grid,
                             const MergeEvalFn& eval_fn) {
    if (grid.empty()) fail_config("grid_search: empty ratio grid");

    auto pick_best = [](const std::vector<RatioRow>& rows) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const double cur = rows[i].metrics.at(0).second;
            const double top = rows[best].metrics.at(0).second;
            // Ties prefer the larger ratio.
            if (cur > top || (cur == top && rows[i].m > rows[best].m)) best = i;
        }
        return best;
    };

    GridSearchResult result;
    for (double m1 : grid) {
        RatioRow row;
        row.m = m1;
        row.metrics = eval_fn(linear_merge(base, rgb, m1));
        result.stage1.push_back(std::move(row));
    }
    result.chosen_m1 = result.stage1[pick_best(result.stage1)].m;

    const Checkpoint intermediate = linear_merge(base, rgb, result.chosen_m1);
    for (double m2 : grid) {
        RatioRow row;
        row.m = m2;
        row.metrics = eval_fn(linear_merge(intermediate, others, m2));
        result.stage2.push_back(std::move(row));
    }
    result.chosen_m2 = result.stage2[pick_best(result.stage2)].m;
    return result;
}

void write_ratio_csv(const std::vector<RatioRow>& rows, const std::string& path) {
    if (rows.empty()) fail_config("write_ratio_csv: no rows");
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot write ratio table '" + path + "'");
    os << "m";
    for (const auto& [name, value] : rows.front().metrics) os << "," << name;
    os << "\n";
    char buf[64];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.12g", row.m);
        os << buf;
        for (const auto& [name, value] : row.metrics) {
            std::snprintf(buf, sizeof(buf), "%.17g", value);
            os << "," << buf;
        }
        os << "\n";
    }
}

std::vector<RatioRow> read_ratio_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_io("cannot open ratio table '" + path + "'");
    std::string header;
    if (!std::getline(is, header)) fail_format("ratio table '" + path + "': empty");
    std::vector<std::string> names;
    {
        std::stringstream ss(header);
        std::string field;
        while (std::getline(ss, field, ',')) names.push_back(field);
    }
    if (names.empty() || names.front() != "m") fail_format("ratio table '" + path + "': bad header");

    std::vector<RatioRow> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        RatioRow row;
        std::size_t col = 0;
        while (std::getline(ss, field, ',')) {
            const double v = std::stod(field);
            if (col == 0) {
                row.m = v;
            } else {
                if (col >= names.size()) fail_format("ratio table '" + path + "': too many columns");
                row.metrics.emplace_back(names[col], v);
            }
            ++col;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace spectra
