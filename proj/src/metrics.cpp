#include "mgm/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mgm/error.hpp"

namespace mgm {

namespace {

void validate_features(const FeatureSet& f, const char* who) {
  if (f.count < 1 || f.dim < 1) {
    throw InvalidParameterError(std::string(who) + ": empty feature set");
  }
  for (float v : f.values) {
    if (!std::isfinite(v)) {
      throw InvalidParameterError(std::string(who) + ": non-finite feature value");
    }
  }
}

Eigen::MatrixXd to_matrix(const FeatureSet& f) {
  Eigen::MatrixXd m(f.count, f.dim);
  for (int i = 0; i < f.count; ++i) {
    for (int j = 0; j < f.dim; ++j) {
      m(i, j) = static_cast<double>(f.row(i)[j]);
    }
  }
  return m;
}

// PSD square root; eigenvalues below -tol are a contract violation, the
// rest clamp to zero before the sqrt.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym, const char* who) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw ContractError(std::string(who) + ": eigendecomposition failed");
  }
  Eigen::VectorXd ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev(i) < -1e-8) {
      throw ContractError(std::string(who) + ": matrix has eigenvalue " +
                          std::to_string(ev(i)) + " below -1e-8");
    }
    ev(i) = ev(i) > 0.0 ? std::sqrt(ev(i)) : 0.0;
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Squared Euclidean distance in double; both callers and the test oracle
// sum over dimensions in index order so results compare exactly.
double sqdist(const float* a, const float* b, int d) {
  double s = 0.0;
  for (int j = 0; j < d; ++j) {
    const double t = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    s += t * t;
  }
  return s;
}

// Squared radius of each point's k-NN ball within its own set (self excluded).
std::vector<double> knn_radii(const FeatureSet& f, int k) {
  std::vector<double> radii(f.count);
  std::vector<double> dists;
  for (int i = 0; i < f.count; ++i) {
    dists.clear();
    for (int j = 0; j < f.count; ++j) {
      if (j != i) dists.push_back(sqdist(f.row(i), f.row(j), f.dim));
    }
    std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
    radii[i] = dists[k - 1];
  }
  return radii;
}

void validate_knn_inputs(const FeatureSet& real, const FeatureSet& gen, int k, bool need_gen_radii) {
  validate_features(real, "knn");
  validate_features(gen, "knn");
  if (real.dim != gen.dim) throw DimensionError("knn: feature dims differ");
  if (k < 1) throw InvalidParameterError("knn: k must be >= 1");
  if (k >= real.count || (need_gen_radii && k >= gen.count)) {
    throw InvalidParameterError("knn: k must be smaller than the set it draws radii from");
  }
}

}  // namespace

FeatureSet FeatureSet::from_rows(int count, int dim, std::vector<float> values) {
  if (count < 1 || dim < 1 ||
      values.size() != static_cast<std::size_t>(count) * static_cast<std::size_t>(dim)) {
    throw DimensionError("FeatureSet: values size does not match count×dim");
  }
  FeatureSet f;
  f.count = count;
  f.dim = dim;
  f.values = std::move(values);
  return f;
}

FeatureSet image_features(const std::vector<Image>& images) {
  if (images.empty()) throw ContractError("image_features: no images");
  const Image& first = images.front();
  std::vector<float> values;
  for (const Image& img : images) {
    if (img.height != first.height || img.width != first.width ||
        img.channels != first.channels) {
      throw DimensionError("image_features: images must share dimensions");
    }
    values.insert(values.end(), img.pixels.begin(), img.pixels.end());
    Image level = img;
    for (int l = 0; l < 2; ++l) {
      Image pooled = make_image(std::max(1, level.height / 2), std::max(1, level.width / 2),
                                level.channels);
      for (int y = 0; y < pooled.height; ++y) {
        for (int x = 0; x < pooled.width; ++x) {
          for (int c = 0; c < pooled.channels; ++c) {
            float s = 0.0f;
            int n = 0;
            for (int dy = 0; dy < 2; ++dy) {
              for (int dx = 0; dx < 2; ++dx) {
                const int sy = y * 2 + dy, sx = x * 2 + dx;
                if (sy < level.height && sx < level.width) {
                  s += level.at(sy, sx, c);
                  ++n;
                }
              }
            }
            pooled.at(y, x, c) = s / static_cast<float>(n);
          }
        }
      }
      values.insert(values.end(), pooled.pixels.begin(), pooled.pixels.end());
      level = std::move(pooled);
    }
  }
  const int dim = static_cast<int>(values.size() / images.size());
  return FeatureSet::from_rows(static_cast<int>(images.size()), dim, std::move(values));
}

double frechet_distance(const FeatureSet& a, const FeatureSet& b) {
  validate_features(a, "frechet_distance");
  validate_features(b, "frechet_distance");
  if (a.dim != b.dim) throw DimensionError("frechet_distance: feature dims differ");
  if (a.count < 2 || b.count < 2) {
    throw InvalidParameterError("frechet_distance: needs >= 2 samples per set");
  }

  const Eigen::MatrixXd ma = to_matrix(a);
  const Eigen::MatrixXd mb = to_matrix(b);
  const Eigen::VectorXd mu_a = ma.colwise().mean();
  const Eigen::VectorXd mu_b = mb.colwise().mean();
  const Eigen::MatrixXd ca = (ma.rowwise() - mu_a.transpose()).transpose() *
                             (ma.rowwise() - mu_a.transpose()) / (a.count - 1);
  const Eigen::MatrixXd cb = (mb.rowwise() - mu_b.transpose()).transpose() *
                             (mb.rowwise() - mu_b.transpose()) / (b.count - 1);

  // tr((ΣaΣb)^{1/2}) via the similar PSD matrix Σa^{1/2} Σb Σa^{1/2}.
  const Eigen::MatrixXd ra = psd_sqrt((ca + ca.transpose()) / 2.0, "frechet_distance");
  Eigen::MatrixXd inner = ra * cb * ra;
  inner = (inner + inner.transpose()) / 2.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
  if (es.info() != Eigen::Success) {
    throw ContractError("frechet_distance: eigendecomposition failed");
  }
  double tr_sqrt = 0.0;
  for (int i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()(i);
    if (ev < -1e-8) {
      throw ContractError("frechet_distance: cross term has eigenvalue " +
                          std::to_string(ev) + " below -1e-8");
    }
    if (ev > 0.0) tr_sqrt += std::sqrt(ev);
  }
  return (mu_a - mu_b).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
}

std::pair<double, double> knn_precision_recall(const FeatureSet& real, const FeatureSet& gen,
                                               int k) {
  validate_knn_inputs(real, gen, k, true);
  const std::vector<double> real_radii = knn_radii(real, k);
  const std::vector<double> gen_radii = knn_radii(gen, k);

  int covered_gen = 0;
  for (int g = 0; g < gen.count; ++g) {
    for (int r = 0; r < real.count; ++r) {
      if (sqdist(gen.row(g), real.row(r), real.dim) <= real_radii[r]) {
        ++covered_gen;
        break;
      }
    }
  }
  int covered_real = 0;
  for (int r = 0; r < real.count; ++r) {
    for (int g = 0; g < gen.count; ++g) {
      if (sqdist(real.row(r), gen.row(g), real.dim) <= gen_radii[g]) {
        ++covered_real;
        break;
      }
    }
  }
  return {static_cast<double>(covered_gen) / gen.count,
          static_cast<double>(covered_real) / real.count};
}

std::pair<double, double> knn_density_coverage(const FeatureSet& real, const FeatureSet& gen,
                                               int k) {
  validate_knn_inputs(real, gen, k, false);
  const std::vector<double> real_radii = knn_radii(real, k);

  long long ball_hits = 0;
  for (int g = 0; g < gen.count; ++g) {
    for (int r = 0; r < real.count; ++r) {
      if (sqdist(gen.row(g), real.row(r), real.dim) <= real_radii[r]) ++ball_hits;
    }
  }
  int covered = 0;
  for (int r = 0; r < real.count; ++r) {
    for (int g = 0; g < gen.count; ++g) {
      if (sqdist(gen.row(g), real.row(r), real.dim) <= real_radii[r]) {
        ++covered;
        break;
      }
    }
  }
  return {static_cast<double>(ball_hits) / (static_cast<double>(k) * gen.count),
          static_cast<double>(covered) / real.count};
}

double token_histogram_kl(const std::vector<TokenGrid>& grids, const ReferenceDistribution& ref) {
  if (grids.empty()) throw ContractError("token_histogram_kl: no grids");
  const int k = ref.codebook_size;
  std::vector<long long> unigram(k, 0);
  std::vector<long long> pairs(static_cast<std::size_t>(k) * k, 0);
  std::vector<double> ref_unigram(k, 0.0);
  long long total = 0;

  for (const TokenGrid& g : grids) {
    for (std::size_t i = 0; i < g.tokens.size(); ++i) {
      const int t = g.tokens[i];
      if (t < 0 || t >= k) throw ContractError("token_histogram_kl: token out of range");
      ++unigram[t];
      if (i > 0) ++pairs[static_cast<std::size_t>(g.tokens[i - 1]) * k + t];
    }
    const std::vector<double> mu = exact_unigram(ref, static_cast<int>(g.tokens.size()));
    for (int j = 0; j < k; ++j) ref_unigram[j] += mu[j] * static_cast<double>(g.tokens.size());
    total += static_cast<long long>(g.tokens.size());
  }
  for (double& v : ref_unigram) v /= static_cast<double>(total);

  const double pseudo = 0.5;
  double kl = 0.0;
  for (int j = 0; j < k; ++j) {
    const double p = (unigram[j] + pseudo) / (total + pseudo * k);
    kl += p * std::log(p / ref_unigram[j]);
  }

  long long total_pairs = 0;
  for (long long c : pairs) total_pairs += c;
  if (total_pairs > 0) {
    for (int i = 0; i < k; ++i) {
      long long row = 0;
      for (int j = 0; j < k; ++j) row += pairs[static_cast<std::size_t>(i) * k + j];
      if (row == 0) continue;
      const double weight = static_cast<double>(row) / static_cast<double>(total_pairs);
      double row_kl = 0.0;
      for (int j = 0; j < k; ++j) {
        const double p =
            (pairs[static_cast<std::size_t>(i) * k + j] + pseudo) / (row + pseudo * k);
        row_kl += p * std::log(p / ref.trans(i, j));
      }
      kl += weight * row_kl;
    }
  }
  return kl;
}

double speedup_ratio(long long baseline_forwards, long long parallel_forwards) {
  if (baseline_forwards < 1 || parallel_forwards < 1) {
    throw ContractError("speedup_ratio: forward counts must be >= 1");
  }
  return static_cast<double>(baseline_forwards) / static_cast<double>(parallel_forwards);
}

}  // namespace mgm
