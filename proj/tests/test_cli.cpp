// CLI contract tests: spawn the real binary (path in SPECTRA_CLI).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run_cli(const std::string& args) {
    const char* cli = std::getenv("SPECTRA_CLI");
    REQUIRE(cli != nullptr);
    const std::string cmd = std::string(cli) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    std::array<char, 4096> buf{};
    std::size_t n;
    while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) result.output.append(buf.data(), n);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string scratch_dir(const char* name) {
    fs::path dir = fs::temp_directory_path() / "spectra_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is.good());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("--help output matches the committed golden file") {
    const char* data_dir = std::getenv("SPECTRA_TEST_DATA");
    REQUIRE(data_dir != nullptr);
    RunResult help = run_cli("--help");
    CHECK(help.exit_code == 0);
    const std::string golden = slurp(std::string(data_dir) + "/help_golden.txt");
    CHECK(help.output == golden);
}

TEST_CASE("help enumerates every config default") {
    RunResult help = run_cli("--help");
    for (const char* key : {"seed", "synthgeo.scenes", "synthgeo.train_fraction", "trainer.lr",
                            "trainer.weight_decay", "trainer.epochs", "trainer.batch",
                            "losses.alpha_s", "losses.alpha_d", "losses.alpha_v", "merge.m1",
                            "merge.m2", "merge.grid", "evalkit.task", "evalkit.templates",
                            "model.d_lambda", "model.pe_scale", "teachers.seed_dinov2_t"}) {
        INFO(key);
        CHECK(help.output.find(key) != std::string::npos);
    }
}

TEST_CASE("gen-data writes byte-identical outputs across reruns") {
    const std::string dir = scratch_dir("cli_gen");
    const std::string config = dir + "/c.toml";
    {
        std::ofstream os(config);
        os << "seed = 11\n[synthgeo]\nscenes = 3\nimage_size = 16\nmodalities = [\"rgb\", \"ir1\"]\n";
    }
    RunResult first = run_cli("gen-data --config " + config + " --out " + dir + "/a");
    CHECK(first.exit_code == 0);
    RunResult second = run_cli("gen-data --config " + config + " --out " + dir + "/b");
    CHECK(second.exit_code == 0);
    CHECK(slurp(dir + "/a/manifest.jsonl") == slurp(dir + "/b/manifest.jsonl"));
    CHECK(slurp(dir + "/a/img_s0000_rgb.sgeo") == slurp(dir + "/b/img_s0000_rgb.sgeo"));
    CHECK(slurp(dir + "/a/img_s0002_ir1.sgeo.json") == slurp(dir + "/b/img_s0002_ir1.sgeo.json"));
}

TEST_CASE("config errors exit with code 2 and name the offending key") {
    const std::string dir = scratch_dir("cli_err");
    const std::string config = dir + "/bad.toml";
    {
        std::ofstream os(config);
        os << "[synthgeo]\nmodalities = [\"thermal9\"]\n";
    }
    RunResult r = run_cli("gen-data --config " + config + " --out " + dir + "/x");
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("thermal9") != std::string::npos);

    RunResult unknown_key = run_cli("gen-data --config " + dir + "/nonexistent.toml --out " + dir);
    CHECK(unknown_key.exit_code == 2);

    RunResult bad_flag = run_cli("train --manifest x.jsonl");  // missing required --out-dir
    CHECK(bad_flag.exit_code == 2);

    RunResult missing_manifest =
        run_cli("eval --checkpoint none.ckpt --manifest none.jsonl --out " + dir + "/r.json");
    CHECK(missing_manifest.exit_code == 2);
}

TEST_CASE("report renders tables from artifacts") {
    const std::string dir = scratch_dir("cli_report");
    {
        std::ofstream os(dir + "/log.csv");
        os << "step,l_siglip,l_m_siglip,l_m_dinov2,l_m_vit,total\n";
        os << "0,2.0,1.0,1.0,1.0,5.0\n1,1.5,0.8,0.9,0.7,3.9\n";
    }
    RunResult r = run_cli("report --log " + dir + "/log.csv --out " + dir + "/report.md");
    CHECK(r.exit_code == 0);
    const std::string md = slurp(dir + "/report.md");
    CHECK(md.find("| step |") != std::string::npos);
    CHECK(md.find("| 1 |") != std::string::npos);
}
