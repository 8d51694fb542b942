#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "avec/config.hpp"
#include "avec/dataset.hpp"
#include "avec/model.hpp"

namespace avec {

struct RetrievalReport {
  std::string direction;  // "video_to_audio" or "audio_to_video"
  double r1 = 0.0, r5 = 0.0, r10 = 0.0;
  std::size_t gallery_size = 0;
};

/// Cosine ranking of each query against the gallery; query i's true match is
/// gallery item i. Ties break in index order. R@k is monotone in k by
/// construction and invariant to positive rescaling of the embeddings.
RetrievalReport compute_recall(const std::string& direction,
                               const std::vector<std::vector<double>>& queries,
                               const std::vector<std::vector<double>>& gallery);

/// Embeds the un-augmented items of one modality through the encoder and the
/// cross-modal projection, using the same anchor computation as training
/// (centroid path with the configured sample count where applicable).
std::vector<std::vector<double>> inter_embeddings(const ModelSet& models,
                                                  const TrainConfig& cfg,
                                                  const PairedDataset& data,
                                                  Modality modality,
                                                  std::uint64_t eval_seed);

/// Zero-shot retrieval in both directions over paired items.
std::pair<RetrievalReport, RetrievalReport> retrieval_eval(const ModelSet& models,
                                                           const TrainConfig& cfg,
                                                           const PairedDataset& eval_set,
                                                           std::uint64_t eval_seed);

enum class FeatureSource { audio, visual, concatenated };

std::string feature_source_name(FeatureSource s);
FeatureSource feature_source_from_name(const std::string& s);

struct ProbeReport {
  double accuracy = 0.0;
  std::string source;
};

struct ProbeOptions {
  std::size_t iterations = 300;
  double lr = 0.05;
  double holdout_fraction = 0.25;
};

/// Multinomial logistic regression head; training is full-batch and
/// deterministic (zero init, convex objective).
struct AffineClassifier {
  Tensor weight;  // [dim, classes]
  Tensor bias;    // [classes]

  std::vector<std::size_t> predict(const std::vector<std::vector<double>>& feats) const;
};

AffineClassifier train_affine_classifier(const std::vector<std::vector<double>>& feats,
                                         const std::vector<std::size_t>& labels,
                                         std::size_t classes, std::size_t iterations,
                                         double lr);

double classifier_accuracy(const AffineClassifier& clf,
                           const std::vector<std::vector<double>>& feats,
                           const std::vector<std::size_t>& labels);

/// Mean-pooled frozen encoder outputs of un-augmented inputs; concatenated
/// source stacks audio then visual features.
std::vector<std::vector<double>> pooled_features(const ModelSet& models,
                                                 const PairedDataset& data,
                                                 FeatureSource source);

/// Trains an affine classifier on frozen features and reports held-out
/// accuracy (deterministic stratified split).
ProbeReport linear_probe(const ModelSet& models, const PairedDataset& labeled,
                         FeatureSource source, const ProbeOptions& opts = {});

}  // namespace avec
