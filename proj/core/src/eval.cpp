#include "avec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "avec/losses.hpp"
#include "avec/optim.hpp"
#include "avec/random.hpp"

namespace avec {

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double denom = std::max(std::sqrt(na) * std::sqrt(nb), kNormalizeEps);
  return dot / denom;
}

}  // namespace

RetrievalReport compute_recall(const std::string& direction,
                               const std::vector<std::vector<double>>& queries,
                               const std::vector<std::vector<double>>& gallery) {
  if (queries.empty() || queries.size() != gallery.size()) {
    throw std::invalid_argument("compute_recall: need a non-empty paired eval set");
  }
  const std::size_t n = queries.size();
  std::size_t hits1 = 0, hits5 = 0, hits10 = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double true_sim = cosine(queries[q], gallery[q]);
    // Rank of the true item = number of gallery entries strictly better, with
    // index order breaking ties (lower index wins).
    std::size_t rank = 0;
    for (std::size_t g = 0; g < n; ++g) {
      if (g == q) continue;
      const double sim = cosine(queries[q], gallery[g]);
      if (sim > true_sim || (sim == true_sim && g < q)) ++rank;
    }
    if (rank < 1) ++hits1;
    if (rank < 5) ++hits5;
    if (rank < 10) ++hits10;
  }
  RetrievalReport report;
  report.direction = direction;
  report.gallery_size = n;
  report.r1 = static_cast<double>(hits1) / static_cast<double>(n);
  report.r5 = static_cast<double>(hits5) / static_cast<double>(n);
  report.r10 = static_cast<double>(hits10) / static_cast<double>(n);
  return report;
}

std::vector<std::vector<double>> inter_embeddings(const ModelSet& models,
                                                  const TrainConfig& cfg,
                                                  const PairedDataset& data,
                                                  Modality modality,
                                                  std::uint64_t eval_seed) {
  if (data.items.empty()) throw std::invalid_argument("inter_embeddings: empty eval set");
  const bool uses_predictor = cfg.inter_anchor == InterAnchor::equivariant ||
                              cfg.inter_anchor == InterAnchor::centroid;
  const std::size_t n_vectors =
      cfg.inter_anchor == InterAnchor::centroid ? cfg.centroid_samples : 1;
  const bool is_audio = modality == Modality::audio;
  AugmentationSampler sampler(
      modality, is_audio ? cfg.model.audio_time : cfg.model.image_size,
      is_audio ? cfg.model.audio_freq : cfg.model.image_size, SamplerConfig{},
      derive_seed(eval_seed, is_audio ? "eval.augment.audio" : "eval.augment.visual"));

  const Encoder& enc = models.encoder(modality);
  const TransformationPredictor& pred = models.predictor(modality);
  const ProjectionHead& head = models.inter_head(modality);

  std::vector<std::vector<double>> out;
  out.reserve(data.items.size());
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    Tape tape(false);
    Tensor h = enc.encode(tape, is_audio ? data.audio_input(i) : data.visual_input(i));
    Tensor rep;
    if (uses_predictor) {
      std::vector<AugmentationVector> ts;
      ts.reserve(n_vectors);
      for (std::size_t s = 0; s < n_vectors; ++s) ts.push_back(sampler.sample_vector());
      rep = pred.compute_centroid(tape, h, ts);
    } else {
      rep = tape.mean_pool(h);
    }
    Tensor z = head.project(tape, rep);
    out.emplace_back(z.values().begin(), z.values().end());
  }
  return out;
}

std::pair<RetrievalReport, RetrievalReport> retrieval_eval(const ModelSet& models,
                                                           const TrainConfig& cfg,
                                                           const PairedDataset& eval_set,
                                                           std::uint64_t eval_seed) {
  auto audio = inter_embeddings(models, cfg, eval_set, Modality::audio, eval_seed);
  auto visual = inter_embeddings(models, cfg, eval_set, Modality::visual, eval_seed);
  return {compute_recall("video_to_audio", visual, audio),
          compute_recall("audio_to_video", audio, visual)};
}

std::string feature_source_name(FeatureSource s) {
  switch (s) {
    case FeatureSource::audio: return "audio";
    case FeatureSource::visual: return "visual";
    case FeatureSource::concatenated: return "concatenated";
  }
  throw std::logic_error("bad feature source");
}

FeatureSource feature_source_from_name(const std::string& s) {
  if (s == "audio") return FeatureSource::audio;
  if (s == "visual") return FeatureSource::visual;
  if (s == "concatenated") return FeatureSource::concatenated;
  throw std::invalid_argument("unknown feature source: " + s);
}

std::vector<std::vector<double>> pooled_features(const ModelSet& models,
                                                 const PairedDataset& data,
                                                 FeatureSource source) {
  std::vector<std::vector<double>> out;
  out.reserve(data.items.size());
  for (std::size_t i = 0; i < data.items.size(); ++i) {
    Tape tape(false);
    std::vector<double> feat;
    if (source == FeatureSource::audio || source == FeatureSource::concatenated) {
      Tensor p = tape.mean_pool(models.audio_encoder.encode(tape, data.audio_input(i)));
      feat.insert(feat.end(), p.values().begin(), p.values().end());
    }
    if (source == FeatureSource::visual || source == FeatureSource::concatenated) {
      Tensor p = tape.mean_pool(models.visual_encoder.encode(tape, data.visual_input(i)));
      feat.insert(feat.end(), p.values().begin(), p.values().end());
    }
    out.push_back(std::move(feat));
  }
  return out;
}

std::vector<std::size_t> AffineClassifier::predict(
    const std::vector<std::vector<double>>& feats) const {
  const std::size_t d = weight.dim(0), k = weight.dim(1);
  std::vector<std::size_t> labels;
  labels.reserve(feats.size());
  for (const auto& f : feats) {
    if (f.size() != d) throw std::invalid_argument("predict: feature width mismatch");
    std::size_t best = 0;
    double best_score = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      double score = bias[c];
      for (std::size_t j = 0; j < d; ++j) score += f[j] * weight.at(j, c);
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    labels.push_back(best);
  }
  return labels;
}

AffineClassifier train_affine_classifier(const std::vector<std::vector<double>>& feats,
                                         const std::vector<std::size_t>& labels,
                                         std::size_t classes, std::size_t iterations,
                                         double lr) {
  if (feats.empty() || feats.size() != labels.size()) {
    throw std::invalid_argument("train_affine_classifier: bad training set");
  }
  const std::size_t n = feats.size(), d = feats[0].size();
  Tensor features({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) features.mut(i * d + j) = feats[i][j];
  std::vector<std::pair<std::size_t, std::size_t>> label_idx;
  label_idx.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= classes) {
      throw std::invalid_argument("train_affine_classifier: label out of range");
    }
    label_idx.emplace_back(i, labels[i]);
  }

  Parameter w("probe.weight", Tensor({d, classes}));
  Parameter b("probe.bias", Tensor({classes}));
  Parameter* params[] = {&w, &b};
  for (std::size_t it = 0; it < iterations; ++it) {
    w.tensor.zero_grad();
    b.tensor.zero_grad();
    Tape tape;
    Tensor logits = tape.add_bias(tape.matmul(features, w.tensor), b.tensor);
    Tensor lse = tape.log(tape.row_sum(tape.exp(logits)));
    Tensor correct = tape.gather_pairs(logits, label_idx);
    Tensor loss = tape.scale(tape.sum(tape.sub(lse, correct)), 1.0 / static_cast<double>(n));
    tape.backward(loss);
    adamw_step(params, lr, {0.9, 0.999, 0.0, 1e-8});
  }
  return AffineClassifier{w.tensor, b.tensor};
}

double classifier_accuracy(const AffineClassifier& clf,
                           const std::vector<std::vector<double>>& feats,
                           const std::vector<std::size_t>& labels) {
  if (feats.empty() || feats.size() != labels.size()) {
    throw std::invalid_argument("classifier_accuracy: bad eval set");
  }
  const auto pred = clf.predict(feats);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

ProbeReport linear_probe(const ModelSet& models, const PairedDataset& labeled,
                         FeatureSource source, const ProbeOptions& opts) {
  if (labeled.items.empty()) throw std::invalid_argument("linear_probe: empty dataset");
  std::set<std::size_t> distinct;
  for (const PairedItem& item : labeled.items) distinct.insert(item.label);
  if (distinct.size() < 2) {
    throw std::invalid_argument("linear_probe: degenerate labels (single class)");
  }
  const std::size_t classes = *distinct.rbegin() + 1;

  const auto feats = pooled_features(models, labeled, source);
  // Deterministic stratified-ish split: every k-th item is held out.
  const auto holdout_stride = static_cast<std::size_t>(
      std::max(2.0, std::round(1.0 / std::max(opts.holdout_fraction, 1e-9))));
  std::vector<std::vector<double>> train_x, test_x;
  std::vector<std::size_t> train_y, test_y;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (i % holdout_stride == holdout_stride - 1) {
      test_x.push_back(feats[i]);
      test_y.push_back(labeled.items[i].label);
    } else {
      train_x.push_back(feats[i]);
      train_y.push_back(labeled.items[i].label);
    }
  }
  if (test_x.empty()) {
    test_x = train_x;
    test_y = train_y;
  }
  const AffineClassifier clf =
      train_affine_classifier(train_x, train_y, classes, opts.iterations, opts.lr);
  ProbeReport report;
  report.source = feature_source_name(source);
  report.accuracy = classifier_accuracy(clf, test_x, test_y);
  return report;
}

}  // namespace avec
