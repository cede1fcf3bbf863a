#include "litefs/losses.hpp"

namespace litefs {

void LossWeights::validate() const {
  auto bad = [](double v) { return !(v >= 0.0); };
  for (int s = 0; s < 3; ++s) {
    if (bad(alpha_adv[s]) || bad(beta_id[s])) throw ConfigError("loss weights must be nonnegative");
  }
  if (bad(lambda_adv) || bad(lambda_id) || bad(lambda_vgg) || bad(lambda_rec)) {
    throw ConfigError("loss weights must be nonnegative");
  }
}

std::vector<std::pair<std::string, double>> LossReport::rows() const {
  const char* scales[] = {"64", "128", "256"};
  std::vector<std::pair<std::string, double>> out;
  for (int s = 0; s < 3; ++s) out.push_back({std::string("adv") + scales[s], adv[s]});
  for (int s = 0; s < 3; ++s) out.push_back({std::string("id") + scales[s], id[s]});
  out.push_back({"adv", adv_total});
  out.push_back({"id", id_total});
  out.push_back({"vgg", vgg});
  out.push_back({"rec", rec});
  out.push_back({"total_g", total_g});
  for (int s = 0; s < 3; ++s) out.push_back({std::string("d") + scales[s], d[s]});
  out.push_back({"total_d", total_d});
  return out;
}

template <typename T>
Tensor<T> hinge_d_loss(const Tensor<T>& real_logits, const Tensor<T>& fake_logits) {
  auto real_term = mean(relu(add_scalar(scale(real_logits, T{-1}), T{1})));
  auto fake_term = mean(relu(add_scalar(fake_logits, T{1})));
  return add(real_term, fake_term);
}

template <typename T>
Tensor<T> hinge_g_loss(const Tensor<T>& fake_logits) {
  return scale(mean(fake_logits), T{-1});
}

template <typename T>
Tensor<T> identity_term(const Tensor<T>& image, const FaceEmbedding<T>& f_src, const FaceEmbedder<T>& embedder) {
  const auto f_gen = embedder.embed(image);
  if (f_gen.batch() != f_src.batch() || f_gen.dim() != f_src.dim()) {
    throw DimensionError("identity loss: embedding shapes differ");
  }
  return mean(add_scalar(scale(row_dot(f_src.rows(), f_gen.rows()), T{-1}), T{1}));
}

template <typename T>
Tensor<T> identity_loss(const MultiScaleOutput<T>& outputs, const FaceEmbedding<T>& f_src,
                        const FaceEmbedder<T>& embedder, const std::array<double, 3>& beta) {
  Tensor<T> total;
  for (std::size_t s = 0; s < 3; ++s) {
    auto term = scale(identity_term(outputs[s], f_src, embedder), static_cast<T>(beta[s]));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <typename T>
Tensor<T> attribute_loss(const Tensor<T>& x256, const Tensor<T>& target, const FeatureExtractor<T>& extractor) {
  if (x256.shape() != target.shape()) {
    throw DimensionError("attribute loss: " + shape_string(x256.shape()) + " vs " + shape_string(target.shape()));
  }
  const auto fx = extractor.extract(x256);
  const auto ft = extractor.extract(target);
  Tensor<T> total;
  for (std::size_t i = 0; i < fx.size(); ++i) {
    auto term = mean(abs(sub(fx[i], ft[i])));
    total = total.defined() ? add(total, term) : term;
  }
  return total;
}

template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& x256, const std::optional<Tensor<T>>& gt) {
  if (!gt) return Tensor<T>::scalar(T{0});
  if (gt->shape() != x256.shape()) {
    throw DimensionError("reconstruction loss: " + shape_string(x256.shape()) + " vs " + shape_string(gt->shape()));
  }
  return mean(square(sub(x256, *gt)));
}

template <typename T>
Tensor<T> masked_reconstruction_loss(const Tensor<T>& x256, const Tensor<T>& gt, std::span<const T> has_gt) {
  if (gt.shape() != x256.shape()) {
    throw DimensionError("reconstruction loss: " + shape_string(x256.shape()) + " vs " + shape_string(gt.shape()));
  }
  const auto batch = x256.dim(0);
  if (static_cast<std::int64_t>(has_gt.size()) != batch) throw DimensionError("reconstruction mask size mismatch");
  std::vector<T> w(has_gt.begin(), has_gt.end());
  for (auto& v : w) v /= static_cast<T>(batch);
  return weighted_sum(sample_means(square(sub(x256, gt))), std::span<const T>(w));
}

template <typename T>
T recombine_total(const LossReport& r, const LossWeights& w) {
  T adv = static_cast<T>(r.adv[0]) * static_cast<T>(w.alpha_adv[0]);
  adv = adv + static_cast<T>(r.adv[1]) * static_cast<T>(w.alpha_adv[1]);
  adv = adv + static_cast<T>(r.adv[2]) * static_cast<T>(w.alpha_adv[2]);
  T id = static_cast<T>(r.id[0]) * static_cast<T>(w.beta_id[0]);
  id = id + static_cast<T>(r.id[1]) * static_cast<T>(w.beta_id[1]);
  id = id + static_cast<T>(r.id[2]) * static_cast<T>(w.beta_id[2]);
  T total = adv * static_cast<T>(w.lambda_adv) + id * static_cast<T>(w.lambda_id);
  total = total + static_cast<T>(r.vgg) * static_cast<T>(w.lambda_vgg);
  total = total + static_cast<T>(r.rec) * static_cast<T>(w.lambda_rec);
  return total;
}

template <typename T>
std::pair<Tensor<T>, LossReport> total_generator_loss(const GeneratorLossParts<T>& p, const LossWeights& w) {
  w.validate();
  auto weighted = [](const std::array<Tensor<T>, 3>& terms, const std::array<double, 3>& k) {
    Tensor<T> acc = scale(terms[0], static_cast<T>(k[0]));
    acc = add(acc, scale(terms[1], static_cast<T>(k[1])));
    return add(acc, scale(terms[2], static_cast<T>(k[2])));
  };
  const auto adv = weighted(p.adv, w.alpha_adv);
  const auto id = weighted(p.id, w.beta_id);
  auto total = add(scale(adv, static_cast<T>(w.lambda_adv)), scale(id, static_cast<T>(w.lambda_id)));
  total = add(total, scale(p.vgg, static_cast<T>(w.lambda_vgg)));
  total = add(total, scale(p.rec, static_cast<T>(w.lambda_rec)));

  LossReport r;
  for (std::size_t s = 0; s < 3; ++s) {
    r.adv[s] = p.adv[s].item();
    r.id[s] = p.id[s].item();
  }
  r.adv_total = adv.item();
  r.id_total = id.item();
  r.vgg = p.vgg.item();
  r.rec = p.rec.item();
  r.total_g = recombine_total<T>(r, w);
  return {total, r};
}

#define LITEFS_INSTANTIATE_LOSSES(T)                                                                           \
  template Tensor<T> hinge_d_loss<T>(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> hinge_g_loss<T>(const Tensor<T>&);                                                        \
  template Tensor<T> identity_term<T>(const Tensor<T>&, const FaceEmbedding<T>&, const FaceEmbedder<T>&);      \
  template Tensor<T> identity_loss<T>(const MultiScaleOutput<T>&, const FaceEmbedding<T>&, const FaceEmbedder<T>&, \
                                      const std::array<double, 3>&);                                           \
  template Tensor<T> attribute_loss<T>(const Tensor<T>&, const Tensor<T>&, const FeatureExtractor<T>&);        \
  template Tensor<T> reconstruction_loss<T>(const Tensor<T>&, const std::optional<Tensor<T>>&);                \
  template Tensor<T> masked_reconstruction_loss<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>);    \
  template T recombine_total<T>(const LossReport&, const LossWeights&);                                        \
  template std::pair<Tensor<T>, LossReport> total_generator_loss<T>(const GeneratorLossParts<T>&, const LossWeights&);

LITEFS_INSTANTIATE_LOSSES(float)
LITEFS_INSTANTIATE_LOSSES(double)

}  // namespace litefs
