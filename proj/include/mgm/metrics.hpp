#pragma once

#include <utility>
#include <vector>

#include "mgm/corpus.hpp"
#include "mgm/image.hpp"
#include "mgm/tokens.hpp"

namespace mgm {

struct FeatureSet {
  int count = 0;
  int dim = 0;
  std::vector<float> values;  // count×dim row-major, finite

  const float* row(int i) const { return values.data() + static_cast<std::size_t>(i) * dim; }
  static FeatureSet from_rows(int count, int dim, std::vector<float> values);
};

// Flattened pixels plus a 2-level average-pool pyramid. Internally
// consistent across runs of this codebase only; not comparable to any
// published feature-network metric values.
FeatureSet image_features(const std::vector<Image>& images);

// ||μa−μb||² + tr(Σa+Σb−2(ΣaΣb)^{1/2}); 64-bit throughout, matrix square
// roots by eigendecomposition of the symmetrized product. Eigenvalues below
// -1e-8 are an error, small negatives clamp to zero.
double frechet_distance(const FeatureSet& a, const FeatureSet& b);

// Manifold metrics over k-NN balls (radius = distance to the k-th neighbor
// within a point's own set, self excluded; membership is inclusive).
// precision: fraction of gen inside the union of real balls; recall swaps
// the roles.
std::pair<double, double> knn_precision_recall(const FeatureSet& real, const FeatureSet& gen,
                                               int k);
// density: (1/(k·n_gen))·Σ_gen #real-balls containing the point; coverage:
// fraction of real balls containing ≥1 gen point.
std::pair<double, double> knn_density_coverage(const FeatureSet& real, const FeatureSet& gen,
                                               int k);

// KL(empirical ‖ reference), summed over the unigram factor and the
// raster-transition factor (rows weighted by empirical source frequency).
// Empirical distributions are smoothed with pseudo-count 0.5.
double token_histogram_kl(const std::vector<TokenGrid>& grids, const ReferenceDistribution& ref);

// baseline/parallel; both counts must be >= 1.
double speedup_ratio(long long baseline_forwards, long long parallel_forwards);

}  // namespace mgm
