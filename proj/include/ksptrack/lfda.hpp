#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "ksptrack/config.hpp"
#include "ksptrack/errors.hpp"
#include "ksptrack/features.hpp"
#include "ksptrack/forest.hpp"
#include "ksptrack/rng.hpp"

namespace ksptrack {

/// Local Fisher discriminant projection. `projection` is lfda_dims x
/// feature_dim; each row v satisfies S_b v = lambda S_w v.
struct LfdaModel {
  Eigen::MatrixXd projection;
  Eigen::VectorXd eigenvalues;  // descending, one per row
  std::size_t positives = 0;
  std::size_t negatives = 0;
  int knn = 0;

  [[nodiscard]] int feature_dim() const noexcept { return static_cast<int>(projection.cols()); }

  /// ||V (a - b)||^2
  [[nodiscard]] double projected_sq_distance(std::span<const double> a, std::span<const double> b) const {
    if (a.size() != b.size() || static_cast<Eigen::Index>(a.size()) != projection.cols())
      throw ValidationError("lfda: feature dimension mismatch (" + std::to_string(a.size()) + ", " +
                            std::to_string(b.size()) + " vs " + std::to_string(projection.cols()) + ")");
    Eigen::VectorXd diff(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) diff[static_cast<Eigen::Index>(i)] = a[i] - b[i];
    return (projection * diff).squaredNorm();
  }
};

struct LfdaScatter {
  Eigen::MatrixXd between;  // local between-class scatter S_b
  Eigen::MatrixXd within;   // local within-class scatter S_w (regularized)
};

/// Local scatter matrices of labeled rows `x` (n x d). Affinity uses local
/// scaling: sigma_i is the distance to the k-th same-class neighbour and
/// A_ij = exp(-|x_i - x_j|^2 / (sigma_i sigma_j)) when i and j are mutual
/// k-nearest neighbours within their class, zero otherwise.
inline LfdaScatter lfda_scatter(const Eigen::MatrixXd& x, const std::vector<int>& labels, int k) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw ValidationError("lfda: label count mismatch");

  Eigen::MatrixXd affinity = Eigen::MatrixXd::Zero(n, n);
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  std::vector<double> class_size(n);
  for (int c : classes) {
    std::vector<Eigen::Index> members;
    for (Eigen::Index i = 0; i < n; ++i)
      if (labels[i] == c) members.push_back(i);
    const auto m = static_cast<Eigen::Index>(members.size());
    for (auto i : members) class_size[i] = static_cast<double>(m);
    Eigen::MatrixXd dist2(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) dist2(a, b) = (x.row(members[a]) - x.row(members[b])).squaredNorm();
    const Eigen::Index kk = std::min<Eigen::Index>(k, m - 1);
    std::vector<double> sigma(m, 0.0);
    std::vector<std::vector<Eigen::Index>> nbrs(m);
    std::vector<Eigen::Index> order(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::stable_sort(order.begin(), order.end(), [&](Eigen::Index p, Eigen::Index q) {
        if (p == a) return q != a;  // self first
        if (q == a) return false;
        return dist2(a, p) < dist2(a, q);
      });
      nbrs[a].assign(order.begin() + 1, order.begin() + 1 + kk);
      std::sort(nbrs[a].begin(), nbrs[a].end());
      sigma[a] = kk > 0 ? std::sqrt(dist2(a, order[kk])) : 0.0;
    }
    for (Eigen::Index a = 0; a < m; ++a)
      for (auto b : nbrs[a]) {
        if (!std::binary_search(nbrs[b].begin(), nbrs[b].end(), a)) continue;
        const double s = sigma[a] * sigma[b];
        const double v = dist2(a, b) == 0.0 ? 1.0 : (s > 0.0 ? std::exp(-dist2(a, b) / s) : 0.0);
        affinity(members[a], members[b]) = v;
      }
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd ww(n, n), wb(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (labels[i] == labels[j]) {
        ww(i, j) = affinity(i, j) / class_size[i];
        wb(i, j) = affinity(i, j) * (inv_n - 1.0 / class_size[i]);
      } else {
        ww(i, j) = 0.0;
        wb(i, j) = inv_n;
      }
    }
  // 1/2 sum_ij W_ij (x_i - x_j)(x_i - x_j)' = X' (D - W) X
  auto scatter = [&](const Eigen::MatrixXd& w) {
    Eigen::MatrixXd lap = -w;
    lap.diagonal() += w.rowwise().sum();
    Eigen::MatrixXd s = x.transpose() * (lap * x);
    return Eigen::MatrixXd(0.5 * (s + s.transpose()));
  };
  LfdaScatter out{scatter(wb), scatter(ww)};
  double reg = 1e-6 * out.within.trace() / static_cast<double>(d);
  if (!(reg > 0.0)) reg = 1e-12;
  out.within.diagonal().array() += reg;
  return out;
}

/// Row scaling: v' S_w v = 1, or |v| = 1.
enum class LfdaNorm { WithinScatter, Euclidean };

/// Top `dims` generalized eigenvectors of (S_b, S_w) via Cholesky reduction
/// to a symmetric standard problem. Sign fixed so each row's
/// largest-magnitude entry is positive.
inline LfdaModel lfda_projection(const LfdaScatter& s, int dims, LfdaNorm norm = LfdaNorm::WithinScatter) {
  const Eigen::Index d = s.within.rows();
  dims = std::min<int>(dims, static_cast<int>(d));
  Eigen::LLT<Eigen::MatrixXd> llt(s.within);
  if (llt.info() != Eigen::Success) throw InvariantError("lfda: within-class scatter is not positive definite");
  const Eigen::MatrixXd lower = llt.matrixL();
  // C = L^-1 S_b L^-T
  Eigen::MatrixXd c = lower.triangularView<Eigen::Lower>().solve(s.between);
  c = lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(c.transpose()));
  c = 0.5 * (c + c.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success) throw InvariantError("lfda: eigen decomposition failed");

  LfdaModel model;
  model.projection.resize(dims, d);
  model.eigenvalues.resize(dims);
  for (int r = 0; r < dims; ++r) {
    const Eigen::Index col = d - 1 - r;
    Eigen::VectorXd v = lower.transpose().triangularView<Eigen::Upper>().solve(eig.eigenvectors().col(col));
    v /= norm == LfdaNorm::WithinScatter ? std::sqrt(v.dot(s.within * v)) : v.norm();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    model.projection.row(r) = v.transpose();
    model.eigenvalues[r] = eig.eigenvalues()[col];
  }
  return model;
}

/// Positives: superpixels with rho > tau_trans. Negatives: an equal number
/// drawn without replacement from those at or below it. Each class is capped
/// at cfg.lfda_max_samples (random subset). Rows are scaled to unit length.
inline LfdaModel fit_lfda(const FeatureTable& feats, const ObjectnessTable& rho, const Config& cfg, Rng& rng) {
  if (rho.values.size() != feats.rows()) throw ValidationError("fit_lfda: objectness table does not match features");
  std::vector<std::size_t> above, below;
  for (std::size_t i = 0; i < rho.values.size(); ++i) (rho.values[i] > cfg.tau_trans ? above : below).push_back(i);
  const auto need = static_cast<std::size_t>(std::min(cfg.lfda_dims, feats.dim())) + 1;
  if (above.size() < need || below.size() < need)
    throw ValidationError("fit_lfda: " + std::to_string(above.size()) + " superpixels above tau_trans and " +
                          std::to_string(below.size()) + " below, need at least " + std::to_string(need) +
                          " of each; lower tau_trans");
  auto take = [&](std::vector<std::size_t>& pool, std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
  };
  const auto cap = static_cast<std::size_t>(cfg.lfda_max_samples);
  if (above.size() > cap) take(above, cap);
  take(below, std::min(above.size(), below.size()));

  const auto n = static_cast<Eigen::Index>(above.size() + below.size());
  Eigen::MatrixXd x(n, feats.dim());
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(n));
  Eigen::Index r = 0;
  for (auto g : above) {
    for (int j = 0; j < feats.dim(); ++j) x(r, j) = feats.row(g)[j];
    labels.push_back(1);
    ++r;
  }
  for (auto g : below) {
    for (int j = 0; j < feats.dim(); ++j) x(r, j) = feats.row(g)[j];
    labels.push_back(0);
    ++r;
  }
  auto model = lfda_projection(lfda_scatter(x, labels, cfg.lfda_knn), cfg.lfda_dims, LfdaNorm::Euclidean);
  model.positives = above.size();
  model.negatives = below.size();
  model.knn = cfg.lfda_knn;
  return model;
}

/// Transition similarity exp(-||V (a_from - a_to)||^2).
inline double alpha(const LfdaModel& model, std::span<const double> a_from, std::span<const double> a_to) {
  return std::exp(-model.projected_sq_distance(a_from, a_to));
}

/// Entrance similarity of a candidate superpixel to the annotated one.
inline double beta(const LfdaModel& model, std::span<const double> a_candidate, std::span<const double> a_annotated) {
  return std::exp(-model.projected_sq_distance(a_candidate, a_annotated));
}

}  // namespace ksptrack
