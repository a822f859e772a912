#include "spectra/model.hpp"

#include "spectra/error.hpp"

namespace spectra {

ModelConfig ModelConfig::desk_default() {
    ModelConfig cfg;
    cfg.vision.image_size = 64;
    cfg.vision.patch = 8;
    cfg.vision.dim = 64;
    cfg.vision.blocks = 4;
    cfg.vision.heads = 4;
    cfg.vision.embed_dim = 32;
    cfg.vision.hyper.d_lambda = 128;
    cfg.vision.hyper.heads = 4;
    cfg.vision.hyper.n_queries = 16;
    cfg.text.dim = 64;
    cfg.text.blocks = 2;
    cfg.text.heads = 4;
    cfg.text.vocab = 4096;
    cfg.text.max_tokens = 32;
    cfg.text.embed_dim = 32;
    cfg.maka.feature_dim = 64;
    cfg.maka.d_lambda = 128;
    return cfg;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig cfg;
    cfg.vision.image_size = 16;
    cfg.vision.patch = 2;
    cfg.vision.dim = 64;
    cfg.vision.blocks = 1;
    cfg.vision.heads = 4;
    cfg.vision.embed_dim = 16;
    cfg.vision.hyper.d_lambda = 16;
    cfg.vision.hyper.heads = 4;
    cfg.vision.hyper.n_queries = 4;
    cfg.text.dim = 64;
    cfg.text.blocks = 1;
    cfg.text.heads = 4;
    cfg.text.vocab = 64;
    cfg.text.max_tokens = 16;
    cfg.text.embed_dim = 16;
    cfg.maka.feature_dim = 64;
    cfg.maka.d_lambda = 16;
    cfg.teachers = {
        {"siglip_t", 48, 8, 1, 4, 9001},
        {"dinov2_t", 64, 4, 1, 4, 9002},
        {"vit_t", 80, 8, 1, 4, 9003},
    };
    return cfg;
}

bool TeacherToggles::enabled(const std::string& name) const {
    if (name == "siglip_t") return siglip_t;
    if (name == "dinov2_t") return dinov2_t;
    if (name == "vit_t") return vit_t;
    fail_config("unknown teacher toggle '" + name + "'");
}

StudentModel::StudentModel(ModelConfig cfg)
    : cfg_(std::move(cfg)), vision_(cfg_.vision), text_(cfg_.text), teachers_(cfg_.teachers) {
    std::vector<TeacherTarget> targets;
    for (std::size_t i = 0; i < teachers_.size(); ++i) {
        const TeacherModel& t = teachers_.at(i);
        const int g = t.grid(cfg_.vision.image_size);
        if (g < 1) {
            fail_config("teacher '" + t.name() + "' patch larger than image size");
        }
        targets.push_back({t.name(), t.width(), g, g});
    }
    cfg_.maka.feature_dim = cfg_.vision.dim;
    maka_ = Maka(cfg_.maka, std::move(targets));
}

void StudentModel::init_params(std::uint64_t seed) {
    if (store_.size() > 0) fail_config("model parameters already initialized");
    vision_.register_params(store_, seed);
    text_.register_params(store_, seed);
    maka_.register_params(store_, seed);
    register_contrastive_params(store_, cfg_.init_log_t, cfg_.init_bias);
}

Tensor StudentModel::teacher_features(const TeacherModel& teacher, const MultimodalImage& img) const {
    return teacher.forward(rgb_extract(img));
}

void StudentModel::precompute_teacher_features(std::vector<TrainRecord>& records,
                                               const TeacherToggles& toggles) const {
    for (auto& rec : records) {
        for (std::size_t t = 0; t < teachers_.size(); ++t) {
            const TeacherModel& teacher = teachers_.at(t);
            if (!toggles.enabled(teacher.name())) continue;
            if (rec.teacher_features.count(teacher.name())) continue;
            rec.teacher_features[teacher.name()] = teacher_features(teacher, rec.image);
        }
    }
}

StudentModel::StepOutput StudentModel::forward(const std::vector<TrainRecord>& records,
                                               const ObjectiveSpec& spec) const {
    // The pass is pure over the store; the const_cast only feeds the shared
    // run() path, which touches grads exclusively in with_grads mode.
    return const_cast<StudentModel*>(this)->run(records, spec, /*with_grads=*/false);
}

StudentModel::StepOutput StudentModel::forward_backward(const std::vector<TrainRecord>& records,
                                                        const ObjectiveSpec& spec) {
    return run(records, spec, /*with_grads=*/true);
}

StudentModel::StepOutput StudentModel::run(const std::vector<TrainRecord>& records,
                                           const ObjectiveSpec& spec, bool with_grads) {
    const int n = static_cast<int>(records.size());
    if (n < 1) fail_config("model step: empty batch");
    const int d_e = cfg_.vision.embed_dim;

    std::vector<VisionTower::Cache> vision_caches(with_grads ? records.size() : 0);
    std::vector<TextTower::Cache> text_caches(with_grads && spec.contrastive ? records.size() : 0);

    // One hypernet pass per distinct wavelength set in the batch; every
    // same-modality member shares the generated kernels.
    struct KernelGroup {
        std::string key;
        std::vector<int> members;
        PatchKernels kernels;
        Hypernet::Cache hyper_cache;
        Tensor dweights, dbias;
    };
    std::vector<KernelGroup> groups;
    std::vector<int> group_of(records.size(), -1);
    for (int i = 0; i < n; ++i) {
        const WavelengthSpec& wl = records[static_cast<std::size_t>(i)].image.spec;
        std::string key(reinterpret_cast<const char*>(wl.lambdas.data()),
                        wl.lambdas.size() * sizeof(double));
        int g = -1;
        for (std::size_t k = 0; k < groups.size(); ++k) {
            if (groups[k].key == key) {
                g = static_cast<int>(k);
                break;
            }
        }
        if (g < 0) {
            g = static_cast<int>(groups.size());
            groups.push_back({std::move(key), {}, {}, {}, {}, {}});
        }
        groups[static_cast<std::size_t>(g)].members.push_back(i);
        group_of[static_cast<std::size_t>(i)] = g;
    }
    const Hypernet& hyper = vision_.hypernet();
    for (auto& group : groups) {
        const TrainRecord& first = records[static_cast<std::size_t>(group.members.front())];
        group.kernels = hyper.generate(store_, first.image.spec,
                                       with_grads ? &group.hyper_cache : nullptr);
        if (with_grads) {
            group.dweights = Tensor(group.kernels.weights.shape());
            group.dbias = Tensor(group.kernels.bias.shape());
        }
    }

    // Per-record forward of both towers.
    std::vector<VisionTower::Output> vision_out(records.size());
    EmbeddingBatch batch;
    if (spec.contrastive) {
        batch.image_embeds = Tensor({n, d_e});
        batch.text_embeds = Tensor({n, d_e});
    }
    for (int i = 0; i < n; ++i) {
        const KernelGroup& group = groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(i)])];
        vision_out[static_cast<std::size_t>(i)] = vision_.encode_with_kernels(
            store_, records[static_cast<std::size_t>(i)].image, group.kernels,
            with_grads ? &vision_caches[static_cast<std::size_t>(i)] : nullptr);
        if (spec.contrastive) {
            Tensor temb = text_.encode(store_, records[static_cast<std::size_t>(i)].tokens,
                                       with_grads ? &text_caches[static_cast<std::size_t>(i)] : nullptr);
            const Tensor& iemb = vision_out[static_cast<std::size_t>(i)].embedding;
            for (int j = 0; j < d_e; ++j) {
                batch.image_embeds.at2(i, j) = iemb[static_cast<std::size_t>(j)];
                batch.text_embeds.at2(i, j) = temb[static_cast<std::size_t>(j)];
            }
        }
    }

    double l_siglip = 0.0;
    const ContrastiveParams cp = contrastive_from_store(store_);
    if (spec.contrastive) {
        l_siglip = sigmoid_contrastive(batch, cp);
    }

    // Distillation branches, fixed teacher order.
    struct Branch {
        const TeacherModel* teacher = nullptr;
        std::vector<Tensor> student_features;  // projected per record
        std::vector<Tensor> teacher_feats;
        std::vector<Maka::Cache> caches;
        MatchTerms mean_terms;
    };
    std::vector<Branch> branches;
    for (std::size_t t = 0; t < teachers_.size(); ++t) {
        const TeacherModel& teacher = teachers_.at(t);
        if (!spec.toggles.enabled(teacher.name())) continue;
        Branch branch;
        branch.teacher = &teacher;
        const TeacherTarget& target = maka_.target(teacher.name());
        branch.caches.resize(with_grads ? records.size() : 0);
        for (int i = 0; i < n; ++i) {
            const TrainRecord& rec = records[static_cast<std::size_t>(i)];
            auto it = rec.teacher_features.find(teacher.name());
            Tensor ft = it != rec.teacher_features.end() ? it->second
                                                         : teacher_features(teacher, rec.image);
            Tensor fs = maka_.agglomerate(
                store_, vision_out[static_cast<std::size_t>(i)].features, rec.image.spec, target,
                with_grads ? &branch.caches[static_cast<std::size_t>(i)] : nullptr);
            MatchTerms terms = feature_match(fs, ft);
            branch.mean_terms.l1 += terms.l1 / n;
            branch.mean_terms.mse += terms.mse / n;
            branch.mean_terms.cos += terms.cos / n;
            if (with_grads) {
                branch.student_features.push_back(std::move(fs));
                branch.teacher_feats.push_back(std::move(ft));
            }
        }
        branches.push_back(std::move(branch));
    }

    std::vector<std::pair<std::string, MatchTerms>> branch_terms;
    for (const auto& b : branches) branch_terms.emplace_back(b.teacher->name(), b.mean_terms);

    StepOutput out;
    if (spec.contrastive) {
        out.report = vect_total(l_siglip, branch_terms, spec.weights);
    } else {
        // Branch-only objective: the contrastive term is absent, not zero-weighted.
        out.report.l_siglip = 0.0;
        out.report.matches = branch_terms;
        out.report.total = 0.0;
        for (const auto& [name, terms] : branch_terms) {
            out.report.total += loss_weight_for(spec.weights, name) * terms.total();
        }
    }
    out.batch = std::move(batch);

    if (!with_grads) return out;

    // ---- backward ----
    std::vector<Tensor> dembeddings(records.size());
    std::vector<Tensor> dfeatures(records.size());

    if (spec.contrastive) {
        ContrastiveGrads cg = sigmoid_contrastive_backward(out.batch, cp);
        store_.grad(kContrastiveLogT)[0] += cg.dlog_t;
        store_.grad(kContrastiveBias)[0] += cg.dbias;
        for (int i = 0; i < n; ++i) {
            Tensor dimg({d_e});
            Tensor dtxt({d_e});
            for (int j = 0; j < d_e; ++j) {
                dimg[static_cast<std::size_t>(j)] = cg.dimage.at2(i, j);
                dtxt[static_cast<std::size_t>(j)] = cg.dtext.at2(i, j);
            }
            dembeddings[static_cast<std::size_t>(i)] = std::move(dimg);
            text_.backward(store_, text_caches[static_cast<std::size_t>(i)], dtxt);
        }
    }

    for (auto& branch : branches) {
        const double alpha = loss_weight_for(spec.weights, branch.teacher->name());
        if (alpha == 0.0) continue;
        const double scale = alpha / n;
        for (int i = 0; i < n; ++i) {
            Tensor dfs = feature_match_backward(branch.student_features[static_cast<std::size_t>(i)],
                                                branch.teacher_feats[static_cast<std::size_t>(i)]);
            for (std::size_t k = 0; k < dfs.numel(); ++k) dfs[k] *= scale;
            Tensor df = maka_.backward(store_, branch.caches[static_cast<std::size_t>(i)], dfs);
            if (dfeatures[static_cast<std::size_t>(i)].empty()) {
                dfeatures[static_cast<std::size_t>(i)] = std::move(df);
            } else {
                axpy(dfeatures[static_cast<std::size_t>(i)], 1.0, df);
            }
        }
    }

    for (int i = 0; i < n; ++i) {
        KernelGroup& group = groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(i)])];
        vision_.backward_to_kernels(store_, vision_caches[static_cast<std::size_t>(i)],
                                    dembeddings[static_cast<std::size_t>(i)],
                                    dfeatures[static_cast<std::size_t>(i)], group.dweights,
                                    group.dbias);
    }
    for (auto& group : groups) {
        hyper.backward(store_, group.hyper_cache, group.dweights, group.dbias);
    }
    return out;
}

}  // namespace spectra
