#pragma once

#include <map>
#include <string>
#include <vector>

#include "spectra/model.hpp"
#include "spectra/synthgeo.hpp"

namespace spectra {

/// One unit-norm text embedding per class, built from prompt templates
/// ("{class}" is substituted). Multiple templates are averaged and
/// renormalized.
struct ClassPromptSet {
    std::vector<std::string> classes;
    Tensor embeds;  // (k x d_e)
};

ClassPromptSet build_prompts(const StudentModel& model, const std::vector<std::string>& classes,
                             const std::vector<std::string>& templates);

/// Image embeddings for a record list, one row per record.
Tensor embed_images(const StudentModel& model, const std::vector<TrainRecord>& records);
/// Text embeddings for the records' captions.
Tensor embed_texts(const StudentModel& model, const std::vector<TrainRecord>& records);

struct ZeroShotResult {
    std::vector<int> predictions;
    double top1 = 0.0;
    double top5 = 0.0;
    Tensor sims;  // (n x k) cosine similarities
};

/// Argmax over cosine similarity; ties go to the lowest class index. Top-5
/// counts membership among the five best-ranked classes.
ZeroShotResult zero_shot_classify(const Tensor& image_embeds, const ClassPromptSet& prompts,
                                  const std::vector<int>& truth);

struct MultiLabelResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Class c is predicted positive iff t*cos + b > 0. Macro-averaged over
/// classes; classes without positive predictions contribute precision 0,
/// and F1 is 0 whenever precision + recall is 0.
MultiLabelResult multilabel_classify(const Tensor& image_embeds, const ClassPromptSet& prompts,
                                     const std::vector<std::vector<int>>& truth_sets,
                                     const ContrastiveParams& cp);

struct RetrievalResult {
    std::map<int, double> image_to_text;  // k -> recall@k
    std::map<int, double> text_to_image;
    std::vector<int> skipped_ks;
};

/// Ranks candidates by cosine similarity with a stable sort (ties keep the
/// lower index first); recall@k is the fraction of queries whose true mate
/// ranks inside the top k. Any k > N is skipped with a warning.
RetrievalResult retrieval_recall(const Tensor& image_embeds, const Tensor& text_embeds,
                                 std::vector<int> ks = {1, 5, 10});

/// Report JSON: {task, dataset, metrics{...}, model_checkpoint_hash}.
void write_eval_report(const std::string& path, const std::string& task,
                       const std::string& dataset,
                       const std::vector<std::pair<std::string, double>>& metrics,
                       const std::string& checkpoint_hash);

struct EvalReport {
    std::string task;
    std::string dataset;
    std::vector<std::pair<std::string, double>> metrics;
    std::string checkpoint_hash;
};

EvalReport read_eval_report(const std::string& path);

/// Dominant-class ids (into `classes`) for eval records.
std::vector<int> dominant_ids(const std::vector<ManifestRecord>& records,
                              const std::vector<std::string>& classes);
/// Label-id sets for eval records.
std::vector<std::vector<int>> label_id_sets(const std::vector<ManifestRecord>& records,
                                            const std::vector<std::string>& classes);

}  // namespace spectra
