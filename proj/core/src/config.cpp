#include "spectra/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

#include "spectra/error.hpp"
#include "spectra/rng.hpp"

namespace spectra {

std::vector<std::string> RunConfig::eval_classes() const {
    return eval.classes.empty() ? land_cover_classes() : eval.classes;
}

RunConfig default_run_config() { return RunConfig{}; }

namespace {

TeacherConfig* find_teacher(RunConfig& cfg, const std::string& name) {
    for (auto& t : cfg.model.teachers) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

}  // namespace

void apply_config_table(const TomlTable& table, RunConfig& cfg) {
    std::set<std::string> known;
    auto mark = [&known](const std::string& key) { known.insert(key); };

    auto get = [&](const std::string& key) -> const TomlValue* {
        mark(key);
        auto it = table.find(key);
        return it == table.end() ? nullptr : &it->second;
    };

    if (const auto* v = get("seed")) cfg.seed = static_cast<std::uint64_t>(v->as_int("seed"));

    // [synthgeo]
    if (const auto* v = get("synthgeo.scenes")) cfg.gen.scenes = static_cast<int>(v->as_int("synthgeo.scenes"));
    if (const auto* v = get("synthgeo.image_size")) cfg.gen.image_size = static_cast<int>(v->as_int("synthgeo.image_size"));
    if (const auto* v = get("synthgeo.modalities")) cfg.gen.modalities = v->as_string_array("synthgeo.modalities");
    if (const auto* v = get("synthgeo.train_fraction")) cfg.gen.train_fraction = v->as_number("synthgeo.train_fraction");

    // [model]
    if (const auto* v = get("model.d_lambda")) {
        const int d = static_cast<int>(v->as_int("model.d_lambda"));
        cfg.model.vision.hyper.d_lambda = d;
        cfg.model.maka.d_lambda = d;
    }
    if (const auto* v = get("model.pe_scale")) {
        cfg.model.vision.hyper.pe_scale = v->as_number("model.pe_scale");
        cfg.model.maka.pe_scale = cfg.model.vision.hyper.pe_scale;
    }
    if (const auto* v = get("model.n_queries")) cfg.model.vision.hyper.n_queries = static_cast<int>(v->as_int("model.n_queries"));
    if (const auto* v = get("model.per_teacher_prompt")) cfg.model.maka.per_teacher_prompt = v->as_bool("model.per_teacher_prompt");
    if (const auto* v = get("model.image_size")) cfg.model.vision.image_size = static_cast<int>(v->as_int("model.image_size"));
    if (const auto* v = get("model.patch")) cfg.model.vision.patch = static_cast<int>(v->as_int("model.patch"));
    if (const auto* v = get("model.vision_blocks")) cfg.model.vision.blocks = static_cast<int>(v->as_int("model.vision_blocks"));
    if (const auto* v = get("model.text_blocks")) cfg.model.text.blocks = static_cast<int>(v->as_int("model.text_blocks"));
    if (const auto* v = get("model.embed_dim")) {
        cfg.model.vision.embed_dim = static_cast<int>(v->as_int("model.embed_dim"));
        cfg.model.text.embed_dim = cfg.model.vision.embed_dim;
    }

    // [teachers]
    for (const char* name : {"siglip_t", "dinov2_t", "vit_t"}) {
        const std::string key = std::string("teachers.seed_") + name;
        if (const auto* v = get(key)) {
            TeacherConfig* t = find_teacher(cfg, name);
            if (!t) fail_config("config: teacher '" + std::string(name) + "' not in model");
            t->seed = static_cast<std::uint64_t>(v->as_int(key));
        }
    }

    // [trainer]
    if (const auto* v = get("trainer.lr")) cfg.train.lr = v->as_number("trainer.lr");
    if (const auto* v = get("trainer.weight_decay")) cfg.train.weight_decay = v->as_number("trainer.weight_decay");
    if (const auto* v = get("trainer.epochs")) cfg.train.epochs = static_cast<int>(v->as_int("trainer.epochs"));
    if (const auto* v = get("trainer.batch")) cfg.train.batch = static_cast<int>(v->as_int("trainer.batch"));
    if (const auto* v = get("trainer.modality_filter")) cfg.train.modality_filter = v->as_string_array("trainer.modality_filter");
    if (const auto* v = get("trainer.distill")) cfg.train.distill = v->as_bool("trainer.distill");
    if (const auto* v = get("trainer.clip_norm")) cfg.train.clip_norm = v->as_number("trainer.clip_norm");
    if (const auto* v = get("trainer.use_siglip_t")) cfg.train.toggles.siglip_t = v->as_bool("trainer.use_siglip_t");
    if (const auto* v = get("trainer.use_dinov2_t")) cfg.train.toggles.dinov2_t = v->as_bool("trainer.use_dinov2_t");
    if (const auto* v = get("trainer.use_vit_t")) cfg.train.toggles.vit_t = v->as_bool("trainer.use_vit_t");

    // [losses]
    if (const auto* v = get("losses.alpha_s")) cfg.train.weights.alpha_s = v->as_number("losses.alpha_s");
    if (const auto* v = get("losses.alpha_d")) cfg.train.weights.alpha_d = v->as_number("losses.alpha_d");
    if (const auto* v = get("losses.alpha_v")) cfg.train.weights.alpha_v = v->as_number("losses.alpha_v");
    if (const auto* v = get("losses.init_log_t")) cfg.model.init_log_t = v->as_number("losses.init_log_t");
    if (const auto* v = get("losses.init_bias")) cfg.model.init_bias = v->as_number("losses.init_bias");

    // [merge]
    if (const auto* v = get("merge.m1")) cfg.merge.m1 = v->as_number("merge.m1");
    if (const auto* v = get("merge.m2")) cfg.merge.m2 = v->as_number("merge.m2");
    if (const auto* v = get("merge.grid")) cfg.merge.grid = v->as_number_array("merge.grid");

    // [evalkit]
    if (const auto* v = get("evalkit.task")) cfg.eval.task = v->as_string("evalkit.task");
    if (const auto* v = get("evalkit.split")) cfg.eval.split = v->as_string("evalkit.split");
    if (const auto* v = get("evalkit.modality_filter")) cfg.eval.modality_filter = v->as_string_array("evalkit.modality_filter");
    if (const auto* v = get("evalkit.templates")) cfg.eval.templates = v->as_string_array("evalkit.templates");
    if (const auto* v = get("evalkit.classes")) cfg.eval.classes = v->as_string_array("evalkit.classes");

    for (const auto& [key, value] : table) {
        if (!known.count(key)) fail_config("config: unknown key '" + key + "'");
    }

    cfg.train.seed = cfg.seed;
    cfg.gen.seed = cfg.seed;
    cfg.train.config_hash = run_config_hash(cfg);
}

RunConfig load_run_config(const std::string& path) {
    RunConfig cfg = default_run_config();
    apply_config_table(parse_toml_file(path), cfg);
    if (const char* env_seed = std::getenv("SPECTRA_SEED")) {
        cfg.seed = std::strtoull(env_seed, nullptr, 10);
        cfg.train.seed = cfg.seed;
        cfg.gen.seed = cfg.seed;
        cfg.train.config_hash = run_config_hash(cfg);
    }
    return cfg;
}

namespace {

std::string join_strings(const std::vector<std::string>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += "\"" + v[i] + "\"";
    }
    return out + "]";
}

std::string join_numbers(const std::vector<double>& v) {
    std::string out = "[";
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        std::snprintf(buf, sizeof(buf), "%g", v[i]);
        out += buf;
    }
    return out + "]";
}

}  // namespace

std::string config_defaults_help() {
    const RunConfig d = default_run_config();
    std::ostringstream os;
    char buf[160];
    auto line = [&](const char* key, const std::string& value, const char* desc) {
        std::snprintf(buf, sizeof(buf), "  %-28s %-34s %s\n", key, value.c_str(), desc);
        os << buf;
    };
    os << "Config keys and defaults (TOML):\n";
    line("seed", std::to_string(d.seed), "root seed; env SPECTRA_SEED overrides");
    line("synthgeo.scenes", std::to_string(d.gen.scenes), "number of synthetic scenes");
    line("synthgeo.image_size", std::to_string(d.gen.image_size), "square raster size");
    line("synthgeo.modalities", join_strings(d.gen.modalities), "modalities to render");
    line("synthgeo.train_fraction", "0.8", "scene-level train split fraction");
    line("model.d_lambda", std::to_string(d.model.vision.hyper.d_lambda), "wavelength embedding dim");
    line("model.pe_scale", "1000", "wavelength scale inside the encoding");
    line("model.n_queries", std::to_string(d.model.vision.hyper.n_queries), "weight query tokens");
    line("model.per_teacher_prompt", "true", "per-teacher prompt maps (false = shared)");
    line("model.image_size", std::to_string(d.model.vision.image_size), "model input size");
    line("model.patch", std::to_string(d.model.vision.patch), "patch size");
    line("model.vision_blocks", std::to_string(d.model.vision.blocks), "vision tower depth");
    line("model.text_blocks", std::to_string(d.model.text.blocks), "text tower depth");
    line("model.embed_dim", std::to_string(d.model.vision.embed_dim), "joint embedding dim");
    line("teachers.seed_siglip_t", "9001", "teacher parameter seed");
    line("teachers.seed_dinov2_t", "9002", "teacher parameter seed");
    line("teachers.seed_vit_t", "9003", "teacher parameter seed");
    line("trainer.lr", "0.0005", "AdamW learning rate");
    line("trainer.weight_decay", "1e-07", "decoupled weight decay");
    line("trainer.epochs", std::to_string(d.train.epochs), "epochs (full protocol: 20)");
    line("trainer.batch", std::to_string(d.train.batch), "batch size (pairs)");
    line("trainer.modality_filter", join_strings(d.train.modality_filter), "modality allowlist; empty = all");
    line("trainer.distill", "true", "false = contrastive-only training");
    line("trainer.clip_norm", "0", "global gradient clip; 0 = off");
    line("trainer.use_siglip_t", "true", "enable the siglip_t branch");
    line("trainer.use_dinov2_t", "true", "enable the dinov2_t branch");
    line("trainer.use_vit_t", "true", "enable the vit_t branch");
    line("losses.alpha_s", "2", "siglip_t match weight");
    line("losses.alpha_d", "1", "dinov2_t match weight");
    line("losses.alpha_v", "1", "vit_t match weight");
    line("losses.init_log_t", "2.302585092994046", "initial log temperature (ln 10)");
    line("losses.init_bias", "-10", "initial contrastive bias");
    line("merge.m1", "0.9", "stage-1 merge ratio");
    line("merge.m2", "0.5", "stage-2 merge ratio");
    line("merge.grid", join_numbers(d.merge.grid), "ratio grid for merge-search");
    line("evalkit.task", d.eval.task, "zeroshot | multilabel | retrieval");
    line("evalkit.split", d.eval.split, "manifest split to evaluate");
    line("evalkit.modality_filter", join_strings(d.eval.modality_filter), "eval modality allowlist");
    line("evalkit.templates", join_strings(d.eval.templates), "prompt templates ({class} substituted)");
    line("evalkit.classes", "[] (full land-cover vocabulary)", "class names for prompts");
    return os.str();
}

std::uint64_t run_config_hash(const RunConfig& cfg) {
    std::ostringstream os;
    os << cfg.seed << '|' << cfg.train.lr << '|' << cfg.train.weight_decay << '|'
       << cfg.train.epochs << '|' << cfg.train.batch << '|' << cfg.train.weights.alpha_s << '|'
       << cfg.train.weights.alpha_d << '|' << cfg.train.weights.alpha_v << '|'
       << cfg.train.distill << '|' << cfg.train.clip_norm << '|'
       << cfg.train.toggles.siglip_t << cfg.train.toggles.dinov2_t << cfg.train.toggles.vit_t << '|';
    for (const auto& m : cfg.train.modality_filter) os << m << ',';
    os << '|' << cfg.model.vision.image_size << '|' << cfg.model.vision.patch << '|'
       << cfg.model.vision.dim << '|' << cfg.model.vision.blocks << '|'
       << cfg.model.vision.hyper.d_lambda << '|' << cfg.model.vision.hyper.n_queries << '|'
       << cfg.model.vision.hyper.pe_scale << '|' << cfg.model.text.blocks << '|'
       << cfg.model.vision.embed_dim << '|' << cfg.model.maka.per_teacher_prompt << '|'
       << cfg.model.init_log_t << '|' << cfg.model.init_bias;
    for (const auto& t : cfg.model.teachers) os << '|' << t.name << ':' << t.seed;
    return fnv1a64(os.str());
}

}  // namespace spectra
