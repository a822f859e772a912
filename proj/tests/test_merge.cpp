#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "spectra/error.hpp"
#include "spectra/merge.hpp"
#include "spectra/rng.hpp"

namespace fs = std::filesystem;
using namespace spectra;

namespace {

Checkpoint random_checkpoint(const std::vector<std::pair<std::string, std::vector<int>>>& layout,
                             std::uint64_t seed) {
    Checkpoint ckpt;
    for (const auto& [name, shape] : layout) {
        CheckpointRecord rec;
        rec.name = name;
        rec.shape = shape;
        std::size_t numel = 1;
        for (int d : shape) numel *= static_cast<std::size_t>(d);
        Rng rng(seed, "ckpt/" + name);
        rec.data.resize(numel);
        for (auto& v : rec.data) v = rng.normal();
        ckpt.records.push_back(std::move(rec));
    }
    return ckpt;
}

const std::vector<std::pair<std::string, std::vector<int>>> kLayout = {
    {"a.w", {4, 3}}, {"a.b", {4}}, {"b.w", {2, 2}}};

}  // namespace

TEST_CASE("linear_merge endpoints reproduce the inputs exactly") {
    Checkpoint a = random_checkpoint(kLayout, 1);
    Checkpoint b = random_checkpoint(kLayout, 2);

    Checkpoint at0 = linear_merge(a, b, 0.0);
    Checkpoint at1 = linear_merge(a, b, 1.0);
    for (std::size_t r = 0; r < kLayout.size(); ++r) {
        CHECK(at0.records[r].data == a.records[r].data);
        CHECK(at1.records[r].data == b.records[r].data);
    }
    CHECK_THROWS_AS(linear_merge(a, b, -0.1), Error);
    CHECK_THROWS_AS(linear_merge(a, b, 1.1), Error);
}

TEST_CASE("linear_merge of scalars interpolates arithmetically") {
    Checkpoint a, b;
    a.records.push_back({"x", {1}, {1.0}});
    b.records.push_back({"x", {1}, {3.0}});
    Checkpoint mid = linear_merge(a, b, 0.5);
    CHECK(mid.records[0].data[0] == 2.0);
}

TEST_CASE("linear_merge satisfies a + m (b - a) to 1e-12 on random checkpoints") {
    Checkpoint a = random_checkpoint(kLayout, 3);
    Checkpoint b = random_checkpoint(kLayout, 4);
    Rng rng(5, "ms");
    for (int trial = 0; trial < 20; ++trial) {
        const double m = rng.uniform01();
        Checkpoint merged = linear_merge(a, b, m);
        for (std::size_t r = 0; r < kLayout.size(); ++r) {
            for (std::size_t i = 0; i < merged.records[r].data.size(); ++i) {
                const double expect =
                    a.records[r].data[i] + m * (b.records[r].data[i] - a.records[r].data[i]);
                CHECK(std::fabs(merged.records[r].data[i] - expect) < 1e-12);
            }
        }
    }
}

TEST_CASE("disjoint names copy through; shape conflicts are hard errors") {
    Checkpoint a = random_checkpoint({{"shared", {2}}, {"only_a", {3}}}, 6);
    Checkpoint b = random_checkpoint({{"shared", {2}}, {"only_b", {4}}}, 7);
    Checkpoint merged = linear_merge(a, b, 0.25);
    REQUIRE(merged.records.size() == 3);
    CHECK(merged.records[0].name == "shared");
    CHECK(merged.records[1].name == "only_a");
    CHECK(merged.records[1].data == a.records[1].data);
    CHECK(merged.records[2].name == "only_b");
    CHECK(merged.records[2].data == b.records[1].data);

    Checkpoint conflicting = random_checkpoint({{"shared", {3}}}, 8);
    CHECK_THROWS_AS(linear_merge(a, conflicting, 0.5), Error);
}

TEST_CASE("two_stage_merge composes the stages and collapses on a fixed point") {
    MergeSpec spec;
    spec.base = random_checkpoint(kLayout, 9);
    spec.rgb = random_checkpoint(kLayout, 10);
    spec.others = random_checkpoint(kLayout, 11);
    spec.m1 = 0.9;
    spec.m2 = 0.5;

    Checkpoint merged = two_stage_merge(spec);
    Checkpoint intermediate = linear_merge(spec.base, spec.rgb, 0.9);
    Checkpoint direct = linear_merge(intermediate, spec.others, 0.5);
    for (std::size_t r = 0; r < kLayout.size(); ++r) {
        CHECK(merged.records[r].data == direct.records[r].data);
    }

    // Double endpoint: m1 = m2 = 0 returns the base.
    spec.m1 = 0.0;
    spec.m2 = 0.0;
    Checkpoint base_only = two_stage_merge(spec);
    for (std::size_t r = 0; r < kLayout.size(); ++r) {
        CHECK(base_only.records[r].data == spec.base.records[r].data);
    }

    // m2 = 1 returns others regardless of m1.
    spec.m1 = 0.3;
    spec.m2 = 1.0;
    Checkpoint others_only = two_stage_merge(spec);
    for (std::size_t r = 0; r < kLayout.size(); ++r) {
        CHECK(others_only.records[r].data == spec.others.records[r].data);
    }

    // Fixed point: when others equals the stage-1 output, stage 2 is inert.
    spec.m1 = 0.9;
    spec.m2 = 0.37;
    spec.others = intermediate;
    Checkpoint collapsed = two_stage_merge(spec);
    for (std::size_t r = 0; r < kLayout.size(); ++r) {
        for (std::size_t i = 0; i < collapsed.records[r].data.size(); ++i) {
            CHECK(std::fabs(collapsed.records[r].data[i] - intermediate.records[r].data[i]) < 1e-12);
        }
    }
}

TEST_CASE("grid_search endpoints reproduce component metrics and ties pick the larger ratio") {
    Checkpoint base = random_checkpoint(kLayout, 12);
    Checkpoint rgb = random_checkpoint(kLayout, 13);
    Checkpoint others = random_checkpoint(kLayout, 14);
    const std::vector<double> grid = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};

    // Metric: first scalar of a.w — linear in the merge, so endpoints are exact.
    MergeEvalFn eval_fn = [](const Checkpoint& ckpt) {
        return std::vector<std::pair<std::string, double>>{{"probe", ckpt.records[0].data[0]}};
    };
    GridSearchResult r = grid_search(base, rgb, others, grid, eval_fn);
    REQUIRE(r.stage1.size() == grid.size());
    CHECK(r.stage1.front().metrics[0].second == base.records[0].data[0]);
    CHECK(r.stage1.back().metrics[0].second == rgb.records[0].data[0]);
    CHECK(r.stage2.back().metrics[0].second == others.records[0].data[0]);

    // Constant metric: the tie rule selects the largest ratio in both stages.
    MergeEvalFn constant_fn = [](const Checkpoint&) {
        return std::vector<std::pair<std::string, double>>{{"probe", 1.0}};
    };
    GridSearchResult tie = grid_search(base, rgb, others, grid, constant_fn);
    CHECK(tie.chosen_m1 == 1.0);
    CHECK(tie.chosen_m2 == 1.0);

    CHECK_THROWS_AS(grid_search(base, rgb, others, {}, eval_fn), Error);
}

TEST_CASE("ratio CSV round-trips") {
    std::vector<RatioRow> rows = {{0.0, {{"top1", 0.25}, {"top5", 0.5}}},
                                  {0.5, {{"top1", 0.375}, {"top5", 0.625}}},
                                  {1.0, {{"top1", 0.5}, {"top5", 0.75}}}};
    fs::path dir = fs::temp_directory_path() / "spectra_tests" / "ratio_csv";
    fs::create_directories(dir);
    const std::string path = (dir / "table.csv").string();
    write_ratio_csv(rows, path);
    std::vector<RatioRow> parsed = read_ratio_csv(path);
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(parsed[i].m == rows[i].m);
        REQUIRE(parsed[i].metrics.size() == 2);
        CHECK(parsed[i].metrics[0].first == "top1");
        CHECK(parsed[i].metrics[0].second == rows[i].metrics[0].second);
        CHECK(parsed[i].metrics[1].second == rows[i].metrics[1].second);
    }
}
