#pragma once

#include <algorithm>
#include <vector>

#include "hg/dcdmmd/distances.hpp"
#include "hg/evalkit/retrieval.hpp"
#include "hg/model/model.hpp"
#include "hg/synthdata/image.hpp"

namespace hg::eval {

// Inference-mode features of a set of images through the student path.
template <typename S>
struct FeatureBundle {
  Tensor<S> global;     // (N, C)
  Tensor<S> raw_parts;  // (N, p, C)
  Tensor<S> attention;  // (N, p, C)
  Tensor<S> attended;   // (N, p, C)

  int count() const { return global.empty() ? 0 : global.dim(0); }

  // psi = [global ; f_a^1 ; ... ; f_a^p], row-major (N, C*(1+p)) in double.
  std::vector<double> signatures() const {
    const int N = count(), C = global.dim(1), p = attended.dim(1);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(N) * C * (1 + p));
    for (int n = 0; n < N; ++n) {
      for (int c = 0; c < C; ++c) out.push_back(global.at(n, c));
      for (int i = 0; i < p; ++i)
        for (int c = 0; c < C; ++c) out.push_back(attended.at(n, i, c));
    }
    return out;
  }
  int signature_width() const { return global.dim(1) * (1 + attended.dim(1)); }
};

namespace detail {

template <typename S>
Tensor<S> concat_rows(const std::vector<Tensor<S>>& chunks) {
  std::vector<int> shape = chunks.front().shape();
  std::vector<S> data;
  int n = 0;
  for (const auto& t : chunks) {
    n += t.dim(0);
    data.insert(data.end(), t.vec().begin(), t.vec().end());
  }
  shape[0] = n;
  return Tensor<S>(shape, std::move(data));
}

}  // namespace detail

template <typename S>
FeatureBundle<S> extract_features(model::Model<S>& m, const Tensor<S>& images) {
  typename model::Encoder<S>::Cache ec;
  typename model::AttentionEmbedding<S>::Cache ac;
  const Tensor<S> fmap = m.encode(images, model::Mode::inference, ec);
  FeatureBundle<S> f;
  f.global = model::global_pool(fmap);
  f.raw_parts = model::part_pool(fmap, m.config().parts);
  f.attention = m.student_attention(f.raw_parts, model::Mode::inference, ac);
  f.attended = model::apply_attention(f.raw_parts, f.attention);
  return f;
}

template <typename S>
FeatureBundle<S> extract_features(model::Model<S>& m, const std::vector<synth::LabeledImage>& images,
                                  int chunk = 64) {
  require(!images.empty(), "extract_features: empty image list");
  std::vector<Tensor<S>> g, r, a, fa;
  for (std::size_t start = 0; start < images.size(); start += static_cast<std::size_t>(chunk)) {
    const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(chunk));
    std::vector<const synth::LabeledImage*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&images[i]);
    auto f = extract_features(m, synth::to_batch<S>(ptrs));
    g.push_back(std::move(f.global));
    r.push_back(std::move(f.raw_parts));
    a.push_back(std::move(f.attention));
    fa.push_back(std::move(f.attended));
  }
  return {detail::concat_rows(g), detail::concat_rows(r), detail::concat_rows(a), detail::concat_rows(fa)};
}

// Signature of a single image.
template <typename S>
std::vector<double> extract_signature(model::Model<S>& m, const synth::LabeledImage& image) {
  const auto f = extract_features(m, synth::to_batch<S>(std::vector<const synth::LabeledImage*>{&image}));
  return f.signatures();
}

inline std::vector<int> identities(const std::vector<synth::LabeledImage>& images) {
  std::vector<int> out;
  for (const auto& im : images) out.push_back(im.identity);
  return out;
}

inline std::vector<int> cameras(const std::vector<synth::LabeledImage>& images) {
  std::vector<int> out;
  for (const auto& im : images) out.push_back(im.camera);
  return out;
}

// Mean over parts of the within/between histogram overlap of a part feature set.
template <typename S>
double mean_part_overlap(const Tensor<S>& parts, const std::vector<int>& labels, int num_bins = 50) {
  const auto dd = dcd::pairwise_part_distances(parts, labels);
  double s = 0.0;
  for (const auto& d : dd) s += dcd_overlap(d.within, d.between, num_bins);
  return s / static_cast<double>(dd.size());
}

struct RetrievalSummary {
  EvalReport report;
  double overlap_attended = 0.0;  // query set, attended parts
  double overlap_raw = 0.0;       // query set, raw parts
};

// Full retrieval evaluation of query against gallery.
template <typename S>
RetrievalSummary evaluate(model::Model<S>& m, const std::vector<synth::LabeledImage>& query,
                          const std::vector<synth::LabeledImage>& gallery, Metric metric = Metric::euclidean,
                          const EvalOptions& opt = {}, int num_bins = 50) {
  const auto fq = extract_features(m, query);
  const auto fg = extract_features(m, gallery);
  const auto dist = distance_matrix(fq.signatures(), fg.signatures(), fq.signature_width(), metric);
  RetrievalSummary s;
  s.report = cmc_map(dist, identities(query), cameras(query), identities(gallery), cameras(gallery), opt);
  s.report.metric = metric_name(metric);
  const auto q_ids = identities(query);
  s.overlap_attended = mean_part_overlap(fq.attended, q_ids, num_bins);
  s.overlap_raw = mean_part_overlap(fq.raw_parts, q_ids, num_bins);
  s.report.dcd_overlap = s.overlap_attended;
  return s;
}

}  // namespace hg::eval
