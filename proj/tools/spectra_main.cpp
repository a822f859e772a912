// spectra: synthetic multimodal contrastive training workbench.
//
// Subcommands: gen-data, train, eval, merge, merge-search, gradcheck, report.
// Exit codes: 0 success, 1 numeric failure, 2 usage/config/file error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "spectra/checkpoint.hpp"
#include "spectra/config.hpp"
#include "spectra/error.hpp"
#include "spectra/evalkit.hpp"
#include "spectra/kernels.hpp"
#include "spectra/gradcheck.hpp"
#include "spectra/merge.hpp"
#include "spectra/model.hpp"
#include "spectra/report.hpp"
#include "spectra/synthgeo.hpp"
#include "spectra/trainer.hpp"

namespace fs = std::filesystem;
using namespace spectra;

namespace {

int exit_code_for(const Error& err) {
    return err.kind() == ErrorKind::numeric ? 1 : 2;
}

RunConfig config_from_flag(const std::string& config_path) {
    if (config_path.empty()) {
        RunConfig cfg = default_run_config();
        cfg.train.config_hash = run_config_hash(cfg);
        if (const char* env_seed = std::getenv("SPECTRA_SEED")) {
            cfg.seed = std::strtoull(env_seed, nullptr, 10);
            cfg.train.seed = cfg.seed;
            cfg.gen.seed = cfg.seed;
            cfg.train.config_hash = run_config_hash(cfg);
        }
        return cfg;
    }
    return load_run_config(config_path);
}

StudentModel make_model(const RunConfig& cfg) {
    StudentModel model(cfg.model);
    model.init_params(cfg.seed);
    return model;
}

StudentModel model_with_checkpoint(const RunConfig& cfg, const std::string& ckpt_path,
                                   Checkpoint* out_ckpt = nullptr) {
    StudentModel model = make_model(cfg);
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    load_into_store(ckpt, model.store());
    if (out_ckpt) *out_ckpt = std::move(ckpt);
    return model;
}

struct EvalData {
    std::vector<TrainRecord> records;
    std::vector<ManifestRecord> manifest_records;
};

EvalData load_eval_data(const RunConfig& cfg, const std::string& manifest_path) {
    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::string dir = fs::path(manifest_path).parent_path().string();
    EvalData data;
    for (const auto& rec : manifest.records) {
        if (!cfg.eval.split.empty() && rec.split != cfg.eval.split) continue;
        if (!cfg.eval.modality_filter.empty() &&
            std::find(cfg.eval.modality_filter.begin(), cfg.eval.modality_filter.end(),
                      rec.modality) == cfg.eval.modality_filter.end()) {
            continue;
        }
        data.manifest_records.push_back(rec);
    }
    if (data.manifest_records.empty()) {
        fail_config("eval: no records match split '" + cfg.eval.split + "' and modality filter");
    }
    DatasetManifest filtered;
    filtered.records = data.manifest_records;
    data.records = load_training_records(filtered, dir, {}, "", cfg.model.text);
    return data;
}

std::vector<std::pair<std::string, double>> run_eval_task(const StudentModel& model,
                                                          const RunConfig& cfg,
                                                          const EvalData& data,
                                                          const std::string& dump_sims_path) {
    std::vector<std::pair<std::string, double>> metrics;
    if (cfg.eval.task == "zeroshot") {
        const ClassPromptSet prompts = build_prompts(model, cfg.eval_classes(), cfg.eval.templates);
        const Tensor image_embeds = embed_images(model, data.records);
        const std::vector<int> truth = dominant_ids(data.manifest_records, prompts.classes);
        const ZeroShotResult result = zero_shot_classify(image_embeds, prompts, truth);
        if (!dump_sims_path.empty()) write_matrix_raster(dump_sims_path, result.sims);
        metrics.emplace_back("top1", result.top1);
        metrics.emplace_back("top5", result.top5);
    } else if (cfg.eval.task == "multilabel") {
        const ClassPromptSet prompts = build_prompts(model, cfg.eval_classes(), cfg.eval.templates);
        const Tensor image_embeds = embed_images(model, data.records);
        const auto truth_sets = label_id_sets(data.manifest_records, prompts.classes);
        const ContrastiveParams cp = contrastive_from_store(model.store());
        const MultiLabelResult result = multilabel_classify(image_embeds, prompts, truth_sets, cp);
        metrics.emplace_back("precision", result.precision);
        metrics.emplace_back("recall", result.recall);
        metrics.emplace_back("f1", result.f1);
    } else if (cfg.eval.task == "retrieval") {
        const Tensor image_embeds = embed_images(model, data.records);
        const Tensor text_embeds = embed_texts(model, data.records);
        const RetrievalResult result = retrieval_recall(image_embeds, text_embeds);
        if (!dump_sims_path.empty()) {
            Tensor sims({image_embeds.dim(0), image_embeds.dim(0)});
            mm_bt(image_embeds.data(), image_embeds.dim(0), image_embeds.dim(1),
                  text_embeds.data(), text_embeds.dim(0), sims.data());
            write_matrix_raster(dump_sims_path, sims);
        }
        for (const auto& [k, v] : result.image_to_text) {
            metrics.emplace_back("i2t_recall@" + std::to_string(k), v);
        }
        for (const auto& [k, v] : result.text_to_image) {
            metrics.emplace_back("t2i_recall@" + std::to_string(k), v);
        }
    } else {
        fail_config("unknown eval task '" + cfg.eval.task + "'");
    }
    return metrics;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_dir) {
    const RunConfig cfg = config_from_flag(config_path);
    const DatasetManifest manifest = generate_manifest(cfg.gen, out_dir);
    std::cout << "wrote " << manifest.records.size() << " records ("
              << cfg.gen.scenes << " scenes x " << cfg.gen.modalities.size()
              << " modalities) to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& manifest_path,
              const std::string& out_dir, const std::string& modality_filter_flag,
              std::optional<int> epochs_flag, std::optional<int> steps_flag,
              const std::string& save_init_path, bool no_distill) {
    RunConfig cfg = config_from_flag(config_path);
    if (epochs_flag) cfg.train.epochs = *epochs_flag;
    if (no_distill) cfg.train.distill = false;
    if (!modality_filter_flag.empty()) {
        cfg.train.modality_filter = expand_modality_filter(modality_filter_flag);
    }
    cfg.train.config_hash = run_config_hash(cfg);

    const DatasetManifest manifest = load_manifest(manifest_path);
    const std::string dir = fs::path(manifest_path).parent_path().string();
    std::vector<TrainRecord> records =
        load_training_records(manifest, dir, cfg.train.modality_filter, "train", cfg.model.text);
    if (records.empty()) fail_config("train: no training records after filtering");

    StudentModel model = make_model(cfg);
    const int max_steps = steps_flag ? *steps_flag : 0;
    // With a step cap the epoch count only limits the cap, so widen it.
    if (max_steps > 0) {
        const int per_epoch = std::max<int>(1, static_cast<int>(records.size()) / cfg.train.batch);
        cfg.train.epochs = std::max(cfg.train.epochs, (max_steps + per_epoch - 1) / per_epoch);
    }
    TrainResult result = train(model, std::move(records), cfg.train, max_steps);

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) fail_io("cannot create out dir '" + out_dir + "'");
    save_checkpoint(result.trained, (fs::path(out_dir) / "checkpoint.ckpt").string());
    write_step_log(result.log, (fs::path(out_dir) / "log.csv").string());
    if (!save_init_path.empty()) save_checkpoint(result.initial, save_init_path);

    std::cout << "trained " << result.log.size() << " steps; loss " << result.log.front().total
              << " -> " << result.log.back().total << "; artifacts in " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_path,
             const std::string& manifest_flag, const std::string& task_flag,
             const std::string& out_path, const std::string& dump_sims_path) {
    RunConfig cfg = config_from_flag(config_path);
    if (!task_flag.empty()) cfg.eval.task = task_flag;
    const std::string manifest_path = manifest_flag;
    if (manifest_path.empty()) fail_config("eval: --manifest is required");

    Checkpoint ckpt;
    const StudentModel model = model_with_checkpoint(cfg, ckpt_path, &ckpt);
    const EvalData data = load_eval_data(cfg, manifest_path);
    const auto metrics = run_eval_task(model, cfg, data, dump_sims_path);
    write_eval_report(out_path, cfg.eval.task, manifest_path, metrics,
                      checkpoint_content_hash(ckpt));
    std::cout << "task " << cfg.eval.task << " on " << data.records.size() << " records:";
    for (const auto& [name, value] : metrics) std::cout << " " << name << "=" << value;
    std::cout << "\nreport written to " << out_path << "\n";
    return 0;
}

int cmd_merge(const std::string& base_path, const std::string& rgb_path,
              const std::string& others_path, double m1, double m2, const std::string& out_path) {
    MergeSpec spec;
    spec.base = load_checkpoint(base_path);
    spec.rgb = load_checkpoint(rgb_path);
    spec.others = load_checkpoint(others_path);
    spec.m1 = m1;
    spec.m2 = m2;
    const Checkpoint merged = two_stage_merge(spec);
    save_checkpoint(merged, out_path);
    std::cout << "merged " << merged.records.size() << " records with m1=" << m1 << " m2=" << m2
              << " into " << out_path << "\n";
    return 0;
}

int cmd_merge_search(const std::string& eval_config_path, const std::string& base_path,
                     const std::string& rgb_path, const std::string& others_path,
                     const std::string& grid_flag, const std::string& manifest_flag,
                     const std::string& out_prefix) {
    RunConfig cfg = config_from_flag(eval_config_path);
    if (!grid_flag.empty()) {
        std::vector<double> grid;
        std::string cur;
        for (char c : grid_flag + ",") {
            if (c == ',') {
                if (!cur.empty()) grid.push_back(std::stod(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        cfg.merge.grid = grid;
    }
    if (manifest_flag.empty()) fail_config("merge-search: --manifest is required");

    const Checkpoint base = load_checkpoint(base_path);
    const Checkpoint rgb = load_checkpoint(rgb_path);
    const Checkpoint others = load_checkpoint(others_path);

    StudentModel model = make_model(cfg);
    const EvalData data = load_eval_data(cfg, manifest_flag);
    MergeEvalFn eval_fn = [&](const Checkpoint& candidate) {
        load_into_store(candidate, model.store());
        return run_eval_task(model, cfg, data, "");
    };

    const GridSearchResult result = grid_search(base, rgb, others, cfg.merge.grid, eval_fn);
    write_ratio_csv(result.stage1, out_prefix + "_stage1.csv");
    write_ratio_csv(result.stage2, out_prefix + "_stage2.csv");
    {
        std::ofstream os(out_prefix + "_selection.json", std::ios::binary);
        if (!os) fail_io("cannot write selection file");
        os << "{\n  \"m1\": " << result.chosen_m1 << ",\n  \"m2\": " << result.chosen_m2
           << "\n}\n";
    }
    std::cout << "merge-search selected m1=" << result.chosen_m1 << " m2=" << result.chosen_m2
              << "; tables written with prefix " << out_prefix << "\n";
    return 0;
}

struct GradcheckCase {
    std::string label;
    ObjectiveSpec spec;
};

int cmd_gradcheck(bool desk, int probes, std::uint64_t seed, bool randomize,
                  const std::string& objective, bool verbose, double step) {
    const ModelConfig mc = desk ? ModelConfig::desk_default() : ModelConfig::tiny();
    StudentModel model(mc);
    model.init_params(seed);
    if (randomize) {
        // Perturb every trainable parameter so zero-initialized paths (the
        // prompt maps) also carry signal.
        for (auto& e : model.store().entries()) {
            if (!e.trainable) continue;
            Rng rng(seed, "gradcheck-randomize/" + e.name);
            for (std::size_t i = 0; i < e.value.numel(); ++i) e.value[i] += rng.normal(0.0, 0.05);
        }
    }

    // Two synthetic records with different channel counts.
    const int size = mc.vision.image_size;
    std::vector<TrainRecord> records;
    {
        TrainRecord rec;
        rec.image.spec = {{0.665, 0.560, 0.490}, "rgb"};
        rec.image.pixels = Tensor({3, size, size});
        Rng rng(seed, "gradcheck/image0");
        for (std::size_t i = 0; i < rec.image.pixels.numel(); ++i) rec.image.pixels[i] = rng.uniform01();
        rec.tokens = tokenize("a calm river winding through dense forest", 4096, mc.text.max_tokens);
        records.push_back(std::move(rec));
    }
    {
        TrainRecord rec;
        rec.image.spec = {{0.443, 0.560, 0.665, 0.842, 1.610}, "msi5"};
        rec.image.pixels = Tensor({5, size, size});
        Rng rng(seed, "gradcheck/image1");
        for (std::size_t i = 0; i < rec.image.pixels.numel(); ++i) rec.image.pixels[i] = rng.uniform01();
        rec.tokens = tokenize("bright rooftops beside a wide gravel road", 4096, mc.text.max_tokens);
        records.push_back(std::move(rec));
    }
    model.precompute_teacher_features(records, TeacherToggles{});

    std::vector<GradcheckCase> cases;
    auto add_case = [&cases](const std::string& label, bool contrastive, LossWeights w,
                             TeacherToggles t) {
        cases.push_back({label, ObjectiveSpec{contrastive, w, t}});
    };
    const bool want_all = objective == "all";
    if (want_all || objective == "siglip") {
        add_case("siglip", true, {0, 0, 0}, {false, false, false});
    }
    if (want_all || objective == "match-siglip_t") {
        add_case("match-siglip_t", false, {1, 0, 0}, {true, false, false});
    }
    if (want_all || objective == "match-dinov2_t") {
        add_case("match-dinov2_t", false, {0, 1, 0}, {false, true, false});
    }
    if (want_all || objective == "match-vit_t") {
        add_case("match-vit_t", false, {0, 0, 1}, {false, false, true});
    }
    if (want_all || objective == "full") {
        add_case("full", true, {2.0, 1.0, 1.0}, {true, true, true});
    }
    if (cases.empty()) fail_config("gradcheck: unknown objective '" + objective + "'");

    bool ok = true;
    for (const auto& c : cases) {
        model.store().zero_grads();
        model.forward_backward(records, c.spec);
        GradCheckOptions opts;
        opts.step = step;
        opts.max_probes_per_param = probes;
        opts.probe_seed = seed;
        auto loss_fn = [&]() { return model.forward(records, c.spec).report.total; };
        const GradReport report = finite_difference_gradient(loss_fn, model.store(), opts);
        const bool pass = report.pass(1e-4);
        ok = ok && pass;
        std::printf("[%s] %-16s max_rel_err %.3e  max_abs_err %.3e\n", pass ? "PASS" : "FAIL",
                    c.label.c_str(), report.max_rel_err, report.max_abs_err);
        if (verbose || !pass) std::cout << report.to_string();
    }
    return ok ? 0 : 1;
}

int cmd_report(const std::vector<std::string>& logs, const std::vector<std::string>& evals,
               const std::vector<std::string>& ratios, const std::string& out_path) {
    std::ostringstream os;
    os << "# Run report\n";
    for (const auto& path : logs) {
        os << "\n## Training log: " << path << "\n\n" << render_log_table(path);
    }
    if (!evals.empty()) {
        os << "\n## Evaluation\n\n" << render_eval_table(evals);
    }
    for (const auto& path : ratios) {
        os << "\n## Merge ratios: " << path << "\n\n" << render_ratio_table(path);
    }
    const std::string text = os.str();
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream osf(out_path, std::ios::binary);
        if (!osf) fail_io("cannot write report '" + out_path + "'");
        osf << text;
        std::cout << "report written to " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"spectra: wavelength-conditioned contrastive training workbench"};
    app.name("spectra");
    app.require_subcommand(1);
    app.footer(config_defaults_help());

    std::string config_path, out_dir, manifest_path, ckpt_path, out_path, task;
    std::string modality_filter, save_init, dump_sims;
    std::string base_path, rgb_path, others_path, grid_flag, out_prefix;
    std::optional<int> epochs_flag, steps_flag;
    bool no_distill = false;
    double m1 = 0.9, m2 = 0.5;
    bool desk = false, tiny = true, randomize = false, verbose = false;
    int probes = 12;
    double fd_step = 1e-3;
    std::uint64_t gseed = 7;
    std::string objective = "all";
    std::vector<std::string> report_logs, report_evals, report_ratios;

    auto* gen = app.add_subcommand("gen-data", "Generate the synthetic multimodal corpus");
    gen->add_option("--config", config_path, "TOML config");
    gen->add_option("--out", out_dir, "Output directory")->required();

    auto* tr = app.add_subcommand("train", "Train on a manifest subset");
    tr->add_option("--config", config_path, "TOML config");
    tr->add_option("--manifest", manifest_path, "Manifest JSONL")->required();
    tr->add_option("--out-dir", out_dir, "Artifact directory")->required();
    tr->add_option("--modality-filter", modality_filter, "rgb | others | all | comma list");
    tr->add_option("--epochs", epochs_flag, "Override epoch count");
    tr->add_option("--steps", steps_flag, "Stop after this many optimizer steps");
    tr->add_option("--save-init", save_init, "Also write the initialization checkpoint here");
    tr->add_flag("--no-distill", no_distill, "Contrastive-only training");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    ev->add_option("--config", config_path, "TOML config");
    ev->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    ev->add_option("--manifest", manifest_path, "Manifest JSONL")->required();
    ev->add_option("--task", task, "zeroshot | multilabel | retrieval");
    ev->add_option("--out", out_path, "Report JSON path")->required();
    ev->add_option("--dump-sims", dump_sims, "Write the similarity matrix raster here");

    auto* mg = app.add_subcommand("merge", "Two-stage linear weight merge");
    mg->add_option("--base", base_path, "Backbone-role checkpoint")->required();
    mg->add_option("--rgb", rgb_path, "RGB-trained checkpoint")->required();
    mg->add_option("--others", others_path, "Non-RGB-trained checkpoint")->required();
    mg->add_option("--m1", m1, "Stage-1 ratio")->required();
    mg->add_option("--m2", m2, "Stage-2 ratio")->required();
    mg->add_option("--out", out_path, "Merged checkpoint path")->required();

    auto* ms = app.add_subcommand("merge-search", "Grid search over merge ratios");
    ms->add_option("--eval-config", config_path, "TOML config with the [evalkit] protocol");
    ms->add_option("--base", base_path, "Backbone-role checkpoint")->required();
    ms->add_option("--rgb", rgb_path, "RGB-trained checkpoint")->required();
    ms->add_option("--others", others_path, "Non-RGB-trained checkpoint")->required();
    ms->add_option("--grid", grid_flag, "Comma-separated ratios (default from config)");
    ms->add_option("--manifest", manifest_path, "Manifest JSONL for the eval")->required();
    ms->add_option("--out-prefix", out_prefix, "Prefix for _stage1.csv/_stage2.csv/_selection.json")
        ->required();

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    gc->add_flag("--tiny", tiny, "Gradcheck-sized model (default)");
    gc->add_flag("--desk", desk, "Desk-scale model instead of tiny");
    gc->add_option("--probes", probes, "Probed scalars per parameter (0 = all)");
    gc->add_option("--step", fd_step, "Central-difference step");
    gc->add_option("--seed", gseed, "Seed for init, data and probe choice");
    gc->add_flag("--randomize", randomize, "Perturb all trainable params before checking");
    gc->add_option("--objective", objective,
                   "all | siglip | match-siglip_t | match-dinov2_t | match-vit_t | full");
    gc->add_flag("--verbose", verbose, "Print the full per-parameter report");

    auto* rp = app.add_subcommand("report", "Render CSV/JSON artifacts as Markdown");
    rp->add_option("--log", report_logs, "Step-log CSV (repeatable)");
    rp->add_option("--eval", report_evals, "Eval report JSON (repeatable)");
    rp->add_option("--ratios", report_ratios, "Merge-ratio CSV (repeatable)");
    rp->add_option("--out", out_path, "Output file (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_dir);
        if (tr->parsed()) {
            return cmd_train(config_path, manifest_path, out_dir, modality_filter, epochs_flag,
                             steps_flag, save_init, no_distill);
        }
        if (ev->parsed()) return cmd_eval(config_path, ckpt_path, manifest_path, task, out_path, dump_sims);
        if (mg->parsed()) return cmd_merge(base_path, rgb_path, others_path, m1, m2, out_path);
        if (ms->parsed()) {
            return cmd_merge_search(config_path, base_path, rgb_path, others_path, grid_flag,
                                    manifest_path, out_prefix);
        }
        if (gc->parsed()) {
            return cmd_gradcheck(desk, probes, gseed, randomize, objective, verbose, fd_step);
        }
        if (rp->parsed()) return cmd_report(report_logs, report_evals, report_ratios, out_path);
    } catch (const Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return exit_code_for(err);
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 2;
}
