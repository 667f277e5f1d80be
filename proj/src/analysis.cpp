#include "sdsim/analysis.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <limits>

#include "sdsim/errors.hpp"

namespace sdsim {

std::string to_string(NaiveModel m) {
  return m == NaiveModel::Zero ? "zero" : "mean";
}

std::string to_string(ResponseClass c) {
  switch (c) {
    case ResponseClass::Correct: return "correct";
    case ResponseClass::CategoryCoordinate: return "category_coordinate";
    case ResponseClass::CrossCategory: return "cross_category";
    case ResponseClass::Superordinate: return "superordinate";
    case ResponseClass::Unclassified: return "unclassified";
  }
  return "?";
}

std::vector<LevelError> per_level_error(const Matrix& yhat, const Dataset& ds,
                                        NaiveModel naive) {
  if (yhat.rows() != ds.features() || yhat.cols() != ds.items())
    throw std::invalid_argument("prediction shape does not match dataset");

  Vector naive_col = Vector::Zero(ds.features());
  if (naive == NaiveModel::Mean)
    naive_col = (ds.Y * ds.freq) / ds.freq.sum();

  std::vector<LevelError> out(static_cast<std::size_t>(ds.depth));
  for (int k = 0; k < ds.depth; ++k) out[static_cast<std::size_t>(k)].level = k + 1;

  for (int f = 0; f < ds.features(); ++f) {
    auto& e = out[static_cast<std::size_t>(ds.level_of_feature[static_cast<std::size_t>(f)] - 1)];
    for (int p = 0; p < ds.items(); ++p) {
      const double d = ds.Y(f, p) - yhat(f, p);
      const double dn = ds.Y(f, p) - naive_col(f);
      e.sse += ds.freq(p) * d * d;
      e.naive_sse += ds.freq(p) * dn * dn;
    }
  }
  for (auto& e : out) {
    if (e.naive_sse > 0.0)
      e.percent = 100.0 * e.sse / e.naive_sse;
    else
      e.percent = e.sse == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return out;
}

double weighted_sse(const Matrix& map, const Dataset& ds) {
  if (map.rows() != ds.features() || map.cols() != ds.items())
    throw std::invalid_argument("map shape does not match dataset");
  double sse = 0.0;
  for (int p = 0; p < ds.items(); ++p)
    sse += ds.freq(p) * (ds.Y.col(p) - map.col(p)).squaredNorm();
  return sse;
}

Matrix truncated_svd_oracle(const Dataset& ds, int rank) {
  const int max_rank = static_cast<int>(std::min(ds.Y.rows(), ds.Y.cols()));
  if (rank < 0 || rank > max_rank)
    throw std::invalid_argument("oracle rank out of range");
  if (rank == 0) return Matrix::Zero(ds.features(), ds.items());

  const Vector sqrt_freq = ds.freq.array().sqrt();
  const Matrix weighted = ds.Y * sqrt_freq.asDiagonal();
  Eigen::JacobiSVD<Matrix> svd(weighted,
                               Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix truncated = svd.matrixU().leftCols(rank) *
                           svd.singularValues().head(rank).asDiagonal() *
                           svd.matrixV().leftCols(rank).transpose();
  return truncated * sqrt_freq.cwiseInverse().asDiagonal();
}

double oracle_gap(const NetworkState& net, const Dataset& ds, int rank) {
  if (net.activation != Activation::Linear)
    throw std::invalid_argument("oracle_gap is defined for linear networks only");
  const int max_rank = static_cast<int>(std::min(ds.Y.rows(), ds.Y.cols()));
  const Matrix oracle = truncated_svd_oracle(ds, std::min(rank, max_rank));
  const double denom = std::max(oracle.norm(), 1e-12);
  return (composite_map(net) - oracle).norm() / denom;
}

int decode_item(const Vector& yhat, const Dataset& ds) {
  if (yhat.size() != ds.features())
    throw std::invalid_argument("output length does not match feature count");
  int best = 0;
  double best_dist = (yhat - ds.Y.col(0)).squaredNorm();
  for (int p = 1; p < ds.items(); ++p) {
    const double d = (yhat - ds.Y.col(p)).squaredNorm();
    if (d < best_dist) {
      best = p;
      best_dist = d;
    }
  }
  return best;
}

ClassifiedResponse classify_response(const Vector& yhat, int true_item,
                                     const Dataset& ds,
                                     const ClassifyThresholds& thr) {
  if (!(thr.tau_super > 0.0) || !(thr.tau_super < thr.tau_correct))
    throw std::invalid_argument("thresholds must satisfy 0 < tau_super < tau_correct");
  if (yhat.size() != ds.features())
    throw std::invalid_argument("output length does not match feature count");
  if (true_item < 0 || true_item >= ds.items())
    throw std::invalid_argument("unknown item id");

  double max_leaf = -std::numeric_limits<double>::infinity();
  double max_root = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < ds.features(); ++f) {
    const int level = ds.level_of_feature[static_cast<std::size_t>(f)];
    if (level == ds.depth) max_leaf = std::max(max_leaf, yhat(f));
    if (level == 1) max_root = std::max(max_root, yhat(f));
  }
  if (max_leaf < thr.tau_super && max_root >= thr.tau_correct)
    return {ResponseClass::Superordinate, std::nullopt};

  const int decoded = decode_item(yhat, ds);
  if (decoded == true_item) {
    bool all_active_high = true;
    for (int f = 0; f < ds.features(); ++f) {
      if (ds.Y(f, true_item) == 1.0 && yhat(f) < thr.tau_correct) {
        all_active_high = false;
        break;
      }
    }
    if (all_active_high) return {ResponseClass::Correct, decoded};
    return {ResponseClass::Unclassified, decoded};
  }
  const int shared_level = lca_level(ds, decoded, true_item);
  if (shared_level == ds.depth - 1)
    return {ResponseClass::CategoryCoordinate, decoded};
  return {ResponseClass::CrossCategory, decoded};
}

ModeSpectrum mode_spectrum(const Dataset& ds) {
  const Vector sqrt_freq = ds.freq.array().sqrt();
  const Matrix weighted = ds.Y * sqrt_freq.asDiagonal();
  Eigen::JacobiSVD<Matrix> svd(weighted,
                               Eigen::ComputeThinU | Eigen::ComputeThinV);

  ModeSpectrum spec;
  spec.singular_values = svd.singularValues();
  spec.left = svd.matrixU();
  spec.right = svd.matrixV();

  const int modes = static_cast<int>(spec.singular_values.size());
  spec.level_assignment.resize(static_cast<std::size_t>(modes));
  for (int m = 0; m < modes; ++m) {
    Vector mass = Vector::Zero(ds.depth);
    for (int f = 0; f < ds.features(); ++f) {
      const int level = ds.level_of_feature[static_cast<std::size_t>(f)];
      mass(level - 1) += spec.left(f, m) * spec.left(f, m);
    }
    int best_level = 1;
    for (int k = 2; k <= ds.depth; ++k)
      if (mass(k - 1) > mass(best_level - 1)) best_level = k;
    spec.level_assignment[static_cast<std::size_t>(m)] = best_level;
  }
  return spec;
}

}  // namespace sdsim
