#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "litefs/generator.hpp"
#include "litefs/perception.hpp"

namespace litefs {

// Per-scale arrays are indexed by ScaleIndex (quarter, half, full).
struct LossWeights {
  std::array<double, 3> alpha_adv{0.02, 0.02, 1.0};
  std::array<double, 3> beta_id{0.02, 0.02, 20.0};
  double lambda_adv = 1.0;
  double lambda_id = 1.0;
  double lambda_vgg = 4.0;
  double lambda_rec = 10.0;

  void validate() const;
};

struct LossReport {
  std::array<double, 3> adv{};  // hinge_g per scale
  std::array<double, 3> id{};   // 1 - cos per scale (unweighted)
  double adv_total = 0;         // alpha-weighted
  double id_total = 0;          // beta-weighted
  double vgg = 0;
  double rec = 0;
  double total_g = 0;
  std::array<double, 3> d{};  // hinge_d per scale
  double total_d = 0;

  // (term, value) rows in a fixed order, as written to the loss CSV.
  std::vector<std::pair<std::string, double>> rows() const;
};

template <typename T>
Tensor<T> hinge_d_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits);

template <typename T>
Tensor<T> hinge_g_loss(const Tensor<T>& fake_logits);

// Mean over the batch of 1 - cos(f_src, embed(image)).
template <typename T>
Tensor<T> identity_term(const Tensor<T>& image, const FaceEmbedding<T>& f_src, const FaceEmbedder<T>& embedder);

// sum_s beta[s] * identity_term(outputs[s]).
template <typename T>
Tensor<T> identity_loss(const MultiScaleOutput<T>& outputs, const FaceEmbedding<T>& f_src,
                        const FaceEmbedder<T>& embedder, const std::array<double, 3>& beta);

// Sum over the extractor's layers of mean |F(x) - F(target)|.
template <typename T>
Tensor<T> attribute_loss(const Tensor<T>& x256, const Tensor<T>& target, const FeatureExtractor<T>& extractor);

// Mean squared error, or exactly zero when no ground truth exists.
template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& x256, const std::optional<Tensor<T>>& gt);

// Per-sample reconstruction for mixed batches: samples with has_gt[b] == 0
// contribute zero; the sum is divided by the full batch size.
template <typename T>
Tensor<T> masked_reconstruction_loss(const Tensor<T>& x256, const Tensor<T>& gt, std::span<const T> has_gt);

template <typename T>
struct GeneratorLossParts {
  std::array<Tensor<T>, 3> adv;  // hinge_g per scale
  std::array<Tensor<T>, 3> id;   // identity_term per scale
  Tensor<T> vgg;
  Tensor<T> rec;
};

// Weighted combination; the report carries every term and its totals are
// recomputed from the report with identical arithmetic.
template <typename T>
std::pair<Tensor<T>, LossReport> total_generator_loss(const GeneratorLossParts<T>& parts, const LossWeights& w);

// Recombines a report's itemized terms into the generator total, in T.
template <typename T>
T recombine_total(const LossReport& report, const LossWeights& w);

}  // namespace litefs
