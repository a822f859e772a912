#include "spectra/evalkit.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "spectra/error.hpp"
#include "spectra/kernels.hpp"

using ordered_json = nlohmann::ordered_json;

namespace spectra {

namespace {

std::string fill_template(const std::string& tmpl, const std::string& cls) {
    const std::string placeholder = "{class}";
    std::string out = tmpl;
    const auto pos = out.find(placeholder);
    if (pos == std::string::npos) fail_config("prompt template missing {class}: '" + tmpl + "'");
    out.replace(pos, placeholder.size(), cls);
    return out;
}

}  // namespace

ClassPromptSet build_prompts(const StudentModel& model, const std::vector<std::string>& classes,
                             const std::vector<std::string>& templates) {
    if (classes.empty()) fail_config("build_prompts: no classes");
    if (templates.empty()) fail_config("build_prompts: no templates");
    const auto& text_cfg = model.text().config();
    ClassPromptSet prompts;
    prompts.classes = classes;
    prompts.embeds = Tensor({static_cast<int>(classes.size()), text_cfg.embed_dim});
    for (std::size_t k = 0; k < classes.size(); ++k) {
        Tensor sum({text_cfg.embed_dim});
        for (const auto& tmpl : templates) {
            TextTokens tokens = tokenize(fill_template(tmpl, classes[k]), 4096, text_cfg.max_tokens);
            Tensor emb = model.text().encode(model.store(), tokens);
            axpy(sum, 1.0, emb);
        }
        Tensor unit = l2_normalize(sum);
        for (int j = 0; j < text_cfg.embed_dim; ++j) prompts.embeds.at2(static_cast<int>(k), j) = unit[static_cast<std::size_t>(j)];
    }
    return prompts;
}

Tensor embed_images(const StudentModel& model, const std::vector<TrainRecord>& records) {
    if (records.empty()) fail_config("embed_images: no records");
    const int d = model.vision().config().embed_dim;
    Tensor out({static_cast<int>(records.size()), d});
    for (std::size_t i = 0; i < records.size(); ++i) {
        VisionTower::Output enc = model.vision().encode(model.store(), records[i].image);
        for (int j = 0; j < d; ++j) out.at2(static_cast<int>(i), j) = enc.embedding[static_cast<std::size_t>(j)];
    }
    return out;
}

Tensor embed_texts(const StudentModel& model, const std::vector<TrainRecord>& records) {
    if (records.empty()) fail_config("embed_texts: no records");
    const int d = model.text().config().embed_dim;
    Tensor out({static_cast<int>(records.size()), d});
    for (std::size_t i = 0; i < records.size(); ++i) {
        Tensor emb = model.text().encode(model.store(), records[i].tokens);
        for (int j = 0; j < d; ++j) out.at2(static_cast<int>(i), j) = emb[static_cast<std::size_t>(j)];
    }
    return out;
}

ZeroShotResult zero_shot_classify(const Tensor& image_embeds, const ClassPromptSet& prompts,
                                  const std::vector<int>& truth) {
    const int n = image_embeds.dim(0);
    const int k = prompts.embeds.dim(0);
    const int d = image_embeds.dim(1);
    if (k < 1) fail_config("zero_shot_classify: no classes");
    if (truth.size() != static_cast<std::size_t>(n)) fail_config("zero_shot_classify: truth size mismatch");

    ZeroShotResult result;
    result.sims = Tensor({n, k});
    mm_bt(image_embeds.data(), n, d, prompts.embeds.data(), k, result.sims.data());

    const int top_k = std::min(5, k);
    int correct1 = 0, correct5 = 0;
    result.predictions.resize(static_cast<std::size_t>(n));
    std::vector<int> order(static_cast<std::size_t>(k));
    for (int i = 0; i < n; ++i) {
        const double* row = result.sims.data() + static_cast<std::size_t>(i) * k;
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return row[a] > row[b]; });
        result.predictions[static_cast<std::size_t>(i)] = order[0];
        if (order[0] == truth[static_cast<std::size_t>(i)]) ++correct1;
        for (int r = 0; r < top_k; ++r) {
            if (order[static_cast<std::size_t>(r)] == truth[static_cast<std::size_t>(i)]) {
                ++correct5;
                break;
            }
        }
    }
    result.top1 = static_cast<double>(correct1) / n;
    result.top5 = static_cast<double>(correct5) / n;
    return result;
}

MultiLabelResult multilabel_classify(const Tensor& image_embeds, const ClassPromptSet& prompts,
                                     const std::vector<std::vector<int>>& truth_sets,
                                     const ContrastiveParams& cp) {
    const int n = image_embeds.dim(0);
    const int k = prompts.embeds.dim(0);
    const int d = image_embeds.dim(1);
    if (truth_sets.size() != static_cast<std::size_t>(n)) {
        fail_config("multilabel_classify: truth size mismatch");
    }
    Tensor sims({n, k});
    mm_bt(image_embeds.data(), n, d, prompts.embeds.data(), k, sims.data());

    const double t = cp.temperature();
    double macro_p = 0.0, macro_r = 0.0, macro_f1 = 0.0;
    for (int c = 0; c < k; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (int i = 0; i < n; ++i) {
            const bool predicted = t * sims.at2(i, c) + cp.bias > 0.0;
            const auto& truth = truth_sets[static_cast<std::size_t>(i)];
            const bool actual = std::find(truth.begin(), truth.end(), c) != truth.end();
            if (predicted && actual) ++tp;
            if (predicted && !actual) ++fp;
            if (!predicted && actual) ++fn;
        }
        const double p = (tp + fp) ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
        const double r = (tp + fn) ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        const double f1 = (p + r > 0.0) ? 2.0 * p * r / (p + r) : 0.0;
        macro_p += p;
        macro_r += r;
        macro_f1 += f1;
    }
    return {macro_p / k, macro_r / k, macro_f1 / k};
}

namespace {

double direction_recall(const Tensor& queries, const Tensor& candidates, int k) {
    const int n = queries.dim(0);
    const int d = queries.dim(1);
    std::vector<int> order(static_cast<std::size_t>(n));
    int hits = 0;
    std::vector<double> sims(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double* q = queries.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < n; ++j) {
            const double* c = candidates.data() + static_cast<std::size_t>(j) * d;
            double dot = 0.0;
            for (int x = 0; x < d; ++x) dot += q[x] * c[x];
            sims[static_cast<std::size_t>(j)] = dot;
        }
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return sims[static_cast<std::size_t>(a)] > sims[static_cast<std::size_t>(b)]; });
        for (int r = 0; r < k; ++r) {
            if (order[static_cast<std::size_t>(r)] == i) {
                ++hits;
                break;
            }
        }
    }
    return static_cast<double>(hits) / n;
}

}  // namespace

RetrievalResult retrieval_recall(const Tensor& image_embeds, const Tensor& text_embeds,
                                 std::vector<int> ks) {
    if (!image_embeds.same_shape(text_embeds)) fail_config("retrieval_recall: shape mismatch");
    const int n = image_embeds.dim(0);
    RetrievalResult result;
    for (int k : ks) {
        if (k > n) {
            std::cerr << "[evalkit] warning: recall@" << k << " skipped, only " << n
                      << " candidates\n";
            result.skipped_ks.push_back(k);
            continue;
        }
        result.image_to_text[k] = direction_recall(image_embeds, text_embeds, k);
        result.text_to_image[k] = direction_recall(text_embeds, image_embeds, k);
    }
    return result;
}

void write_eval_report(const std::string& path, const std::string& task,
                       const std::string& dataset,
                       const std::vector<std::pair<std::string, double>>& metrics,
                       const std::string& checkpoint_hash) {
    ordered_json j;
    j["task"] = task;
    j["dataset"] = dataset;
    ordered_json m;
    for (const auto& [name, value] : metrics) m[name] = value;
    j["metrics"] = m;
    j["model_checkpoint_hash"] = checkpoint_hash;
    std::ofstream os(path, std::ios::binary);
    if (!os) fail_io("cannot write eval report '" + path + "'");
    os << j.dump(2) << "\n";
}

EvalReport read_eval_report(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail_io("cannot open eval report '" + path + "'");
    ordered_json j = ordered_json::parse(is, nullptr, false);
    if (j.is_discarded()) fail_format("eval report '" + path + "': invalid JSON");
    EvalReport report;
    report.task = j.at("task").get<std::string>();
    report.dataset = j.at("dataset").get<std::string>();
    for (const auto& [key, value] : j.at("metrics").items()) {
        report.metrics.emplace_back(key, value.get<double>());
    }
    report.checkpoint_hash = j.at("model_checkpoint_hash").get<std::string>();
    return report;
}

std::vector<int> dominant_ids(const std::vector<ManifestRecord>& records,
                              const std::vector<std::string>& classes) {
    std::vector<int> out;
    for (const auto& rec : records) {
        auto it = std::find(classes.begin(), classes.end(), rec.dominant);
        if (it == classes.end()) fail_config("dominant class '" + rec.dominant + "' not in class list");
        out.push_back(static_cast<int>(it - classes.begin()));
    }
    return out;
}

std::vector<std::vector<int>> label_id_sets(const std::vector<ManifestRecord>& records,
                                            const std::vector<std::string>& classes) {
    std::vector<std::vector<int>> out;
    for (const auto& rec : records) {
        std::vector<int> ids;
        for (const auto& label : rec.labels) {
            auto it = std::find(classes.begin(), classes.end(), label);
            if (it == classes.end()) fail_config("label '" + label + "' not in class list");
            ids.push_back(static_cast<int>(it - classes.begin()));
        }
        out.push_back(std::move(ids));
    }
    return out;
}

}  // namespace spectra
