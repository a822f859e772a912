#include "spectra/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "spectra/error.hpp"
#include "spectra/rng.hpp"

namespace fs = std::filesystem;

namespace spectra {

ObjectiveSpec TrainConfig::objective() const {
    ObjectiveSpec spec;
    spec.contrastive = true;
    if (distill) {
        spec.weights = weights;
        spec.toggles = toggles;
    } else {
        spec.weights = {0.0, 0.0, 0.0};
        spec.toggles = {false, false, false};
    }
    return spec;
}

void adamw_step(ParameterStore& store, AdamState& state, double lr, double weight_decay,
                double beta1, double beta2, double eps) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (auto& e : store.entries()) {
        if (!e.trainable) continue;
        ensure_finite(e.grad, "gradient of " + e.name);
        auto it = state.moments.find(e.name);
        if (it == state.moments.end()) {
            it = state.moments.emplace(e.name, std::make_pair(Tensor(e.value.shape()),
                                                              Tensor(e.value.shape()))).first;
        }
        Tensor& m = it->second.first;
        Tensor& v = it->second.second;
        for (std::size_t i = 0; i < e.value.numel(); ++i) {
            e.value[i] *= 1.0 - lr * weight_decay;
            const double g = e.grad[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            e.value[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

void write_step_log(const std::vector<StepLogRow>& log, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot write step log '" + path + "'");
    os << "step,l_siglip,l_m_siglip,l_m_dinov2,l_m_vit,total\n";
    char line[256];
    for (const auto& row : log) {
        std::snprintf(line, sizeof(line), "%d,%.12g,%.12g,%.12g,%.12g,%.12g\n", row.step,
                      row.l_siglip, row.l_m_siglip, row.l_m_dinov2, row.l_m_vit, row.total);
        os << line;
    }
}

std::vector<StepLogRow> read_step_log(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_io("cannot open step log '" + path + "'");
    std::vector<StepLogRow> log;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        StepLogRow row;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf", &row.step, &row.l_siglip,
                        &row.l_m_siglip, &row.l_m_dinov2, &row.l_m_vit, &row.total) != 6) {
            fail_format("step log '" + path + "': bad line '" + line + "'");
        }
        log.push_back(row);
    }
    return log;
}

namespace {

double match_term(const LossReport& report, const char* teacher) {
    const MatchTerms* terms = report.find(teacher);
    return terms ? terms->total() : 0.0;
}

void clip_gradients(ParameterStore& store, double clip_norm) {
    double sq = 0.0;
    for (const auto& e : store.entries()) {
        if (!e.trainable) continue;
        for (std::size_t i = 0; i < e.grad.numel(); ++i) sq += e.grad[i] * e.grad[i];
    }
    const double norm = std::sqrt(sq);
    if (norm <= clip_norm) return;
    const double scale = clip_norm / norm;
    for (auto& e : store.entries()) {
        if (!e.trainable) continue;
        for (std::size_t i = 0; i < e.grad.numel(); ++i) e.grad[i] *= scale;
    }
}

}  // namespace

TrainResult train(StudentModel& model, std::vector<TrainRecord> records, const TrainConfig& config,
                  int max_steps) {
    if (records.empty()) fail_config("train: dataset is empty after filtering");
    if (config.batch < 2) fail_config("train: batch must be >= 2");
    if (static_cast<std::size_t>(config.batch) > records.size()) {
        fail_config("train: batch " + std::to_string(config.batch) + " exceeds dataset size " +
                    std::to_string(records.size()));
    }
    if (!(config.lr > 0.0) && config.lr != 0.0) fail_config("train: bad learning rate");

    const ObjectiveSpec objective = config.objective();
    if (config.distill) model.precompute_teacher_features(records, objective.toggles);

    TrainResult result;
    result.initial = checkpoint_from_store(model.store());
    result.initial.config_hash = config.config_hash;
    result.initial.step = 0;

    AdamState adam;
    const int steps_per_epoch = static_cast<int>(records.size()) / config.batch;
    int step = 0;
    bool done = false;
    for (int epoch = 0; epoch < config.epochs && !done; ++epoch) {
        std::vector<int> order(records.size());
        for (std::size_t i = 0; i < records.size(); ++i) order[i] = static_cast<int>(i);
        Rng shuffle_rng(config.seed, "shuffle/epoch" + std::to_string(epoch));
        shuffle_rng.shuffle(order);

        for (int b = 0; b < steps_per_epoch && !done; ++b) {
            std::vector<TrainRecord> batch;
            batch.reserve(static_cast<std::size_t>(config.batch));
            for (int k = 0; k < config.batch; ++k) {
                batch.push_back(records[static_cast<std::size_t>(order[static_cast<std::size_t>(b * config.batch + k)])]);
            }

            model.store().zero_grads();
            StudentModel::StepOutput out = model.forward_backward(batch, objective);
            if (!std::isfinite(out.report.total)) {
                fail_numeric("train: non-finite loss " + std::to_string(out.report.total) +
                             " at step " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch) + ")");
            }
            if (config.clip_norm > 0.0) clip_gradients(model.store(), config.clip_norm);
            adamw_step(model.store(), adam, config.lr, config.weight_decay);

            StepLogRow row;
            row.step = step;
            row.l_siglip = out.report.l_siglip;
            row.l_m_siglip = match_term(out.report, "siglip_t");
            row.l_m_dinov2 = match_term(out.report, "dinov2_t");
            row.l_m_vit = match_term(out.report, "vit_t");
            row.total = out.report.total;
            result.log.push_back(row);

            ++step;
            if (max_steps > 0 && step >= max_steps) done = true;
        }
    }

    result.trained = checkpoint_from_store(model.store());
    result.trained.config_hash = config.config_hash;
    result.trained.step = static_cast<std::uint64_t>(step);
    result.trained.has_moments = true;
    result.trained.adam_step = adam.step;
    for (const auto& e : model.store().entries()) {
        if (!e.trainable) continue;
        auto it = adam.moments.find(e.name);
        MomentRecord mom;
        mom.name = e.name;
        mom.shape = e.value.shape();
        if (it != adam.moments.end()) {
            mom.m = it->second.first.raw();
            mom.v = it->second.second.raw();
        } else {
            mom.m.assign(e.value.numel(), 0.0);
            mom.v.assign(e.value.numel(), 0.0);
        }
        result.trained.moments.push_back(std::move(mom));
    }
    return result;
}

std::vector<std::string> expand_modality_filter(const std::string& keyword) {
    if (keyword.empty() || keyword == "all") return {};
    if (keyword == "others") {
        std::vector<std::string> out;
        for (const auto& name : modality_names()) {
            if (name != "rgb") out.push_back(name);
        }
        return out;
    }
    // Comma-separated explicit list.
    std::vector<std::string> out;
    std::string cur;
    for (char c : keyword) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    for (const auto& name : out) modality_by_name(name);  // validates
    return out;
}

std::vector<TrainRecord> load_training_records(const DatasetManifest& manifest,
                                               const std::string& base_dir,
                                               const std::vector<std::string>& modality_filter,
                                               const std::string& split_filter,
                                               const TextTower::Config& text_cfg) {
    std::vector<TrainRecord> records;
    for (const auto& rec : manifest.records) {
        if (!modality_filter.empty() &&
            std::find(modality_filter.begin(), modality_filter.end(), rec.modality) ==
                modality_filter.end()) {
            continue;
        }
        if (!split_filter.empty() && rec.split != split_filter) continue;
        TrainRecord out;
        out.image = read_raster((fs::path(base_dir) / rec.path).string());
        out.image.spec.modality_name = rec.modality;
        out.tokens = tokenize(rec.caption, 4096, text_cfg.max_tokens);
        records.push_back(std::move(out));
    }
    return records;
}

}  // namespace spectra
