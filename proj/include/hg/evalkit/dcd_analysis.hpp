#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hg/dcdmmd/distances.hpp"
#include "hg/dcdmmd/mmd.hpp"
#include "hg/evalkit/signature.hpp"

namespace hg::eval {

// Distance samples of one feature set, one entry per part.
struct DomainDistances {
  std::string name;
  std::vector<dcd::DistanceDistributionPair> parts;

  std::vector<double> pooled(bool within) const {
    std::vector<double> out;
    for (const auto& d : parts) {
      const auto& v = within ? d.within : d.between;
      out.insert(out.end(), v.begin(), v.end());
    }
    return out;
  }
};

struct DcdAnalysis {
  std::vector<DomainDistances> domains;  // holistic, occluded_raw, occluded_attended
  double overlap_holistic = 0.0;
  double overlap_occluded_raw = 0.0;
  double overlap_occluded_attended = 0.0;
  double mmd_wc = 0.0;  // holistic vs occluded attended, within-class, mean over parts
  double mmd_bc = 0.0;
  int num_bins = 50;

  nlohmann::json summary() const {
    return {{"overlap_holistic", overlap_holistic},
            {"overlap_occluded_raw", overlap_occluded_raw},
            {"overlap_occluded_attended", overlap_occluded_attended},
            {"mmd_wc", mmd_wc},
            {"mmd_bc", mmd_bc},
            {"num_bins", num_bins}};
  }
};

inline double mean_overlap(const DomainDistances& d, int num_bins) {
  double s = 0.0;
  for (const auto& p : d.parts) s += dcd_overlap(p.within, p.between, num_bins);
  return s / static_cast<double>(d.parts.size());
}

template <typename S>
DomainDistances domain_distances(const std::string& name, const Tensor<S>& parts, const std::vector<int>& labels,
                                 synth::Domain domain) {
  return {name, dcd::pairwise_part_distances(parts, labels, domain)};
}

// DCDs of the holistic set (raw parts) and of the occluded set with and without attention.
template <typename S>
DcdAnalysis analyze_dcd(model::Model<S>& m, const std::vector<synth::LabeledImage>& holistic,
                        const std::vector<synth::LabeledImage>& occluded, const dcd::KernelConfig& kernel,
                        int num_bins = 50) {
  require(holistic.size() >= 2 && occluded.size() >= 2, "analyze_dcd: need at least two images per domain");
  const auto fh = extract_features(m, holistic);
  const auto fo = extract_features(m, occluded);
  const auto hl = identities(holistic), ol = identities(occluded);
  DcdAnalysis a;
  a.num_bins = num_bins;
  a.domains.push_back(domain_distances("holistic", fh.raw_parts, hl, synth::Domain::holistic));
  a.domains.push_back(domain_distances("occluded_raw", fo.raw_parts, ol, synth::Domain::occluded));
  a.domains.push_back(domain_distances("occluded_attended", fo.attended, ol, synth::Domain::occluded));
  a.overlap_holistic = mean_overlap(a.domains[0], num_bins);
  a.overlap_occluded_raw = mean_overlap(a.domains[1], num_bins);
  a.overlap_occluded_attended = mean_overlap(a.domains[2], num_bins);
  const auto& h = a.domains[0].parts;
  const auto& o = a.domains[2].parts;
  int wc_parts = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!h[i].within.empty() && !o[i].within.empty()) {
      a.mmd_wc += dcd::mmd(h[i].within, o[i].within, kernel);
      ++wc_parts;
    }
    a.mmd_bc += dcd::mmd(h[i].between, o[i].between, kernel);
  }
  if (wc_parts > 0) a.mmd_wc /= wc_parts;
  a.mmd_bc /= static_cast<double>(h.size());
  return a;
}

}  // namespace hg::eval
