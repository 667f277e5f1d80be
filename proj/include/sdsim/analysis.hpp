#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sdsim/hierarchy.hpp"
#include "sdsim/netcore.hpp"
#include "sdsim/types.hpp"

namespace sdsim {

// The naive reference that normalized errors are measured against. Zero is
// the all-zero predictor (identical to a fully atrophied network); Mean is
// the frequency-weighted dataset mean column.
enum class NaiveModel { Zero, Mean };

std::string to_string(NaiveModel m);

struct LevelError {
  int level = 0;
  double sse = 0.0;        // sum_f@level sum_p freq[p] * (Y - Yhat)^2
  double naive_sse = 0.0;  // same sum for the naive predictor
  double percent = 0.0;    // 100 * sse / naive_sse
};

std::vector<LevelError> per_level_error(const Matrix& yhat, const Dataset& ds,
                                        NaiveModel naive = NaiveModel::Zero);

// Weighted SSE of a linear map against the dataset (no 1/2 factor):
// sum_p freq[p] * |Y[:,p] - map[:,p]|^2.
double weighted_sse(const Matrix& map, const Dataset& ds);

// Best rank-r approximation, in the freq-weighted Frobenius norm, of the
// least-squares item->feature map (Y itself, since X is the identity).
// Computed as an SVD of Y*diag(sqrt(freq)) truncated and un-weighted.
Matrix truncated_svd_oracle(const Dataset& ds, int rank);

// Relative Frobenius distance between the network's composite map and the
// rank-r oracle. Ranks above min(F, P) behave as full rank. Linear nets only.
double oracle_gap(const NetworkState& net, const Dataset& ds, int rank);

// Nearest stored item by Euclidean distance; ties break to the lowest index.
int decode_item(const Vector& yhat, const Dataset& ds);

enum class ResponseClass {
  Correct,
  CategoryCoordinate,
  CrossCategory,
  Superordinate,
  Unclassified,
};

std::string to_string(ResponseClass c);

struct ClassifyThresholds {
  double tau_super = 0.2;
  double tau_correct = 0.5;
};

struct ClassifiedResponse {
  ResponseClass cls = ResponseClass::Unclassified;
  std::optional<int> decoded_item;  // absent for Superordinate only

  bool operator==(const ClassifiedResponse&) const = default;
};

// Clinical error taxonomy, applied in fixed order:
//  1. every leaf-level output below tau_super while the top-level output
//     stays above tau_correct -> Superordinate;
//  2. decoded own item with all true-active features above tau_correct ->
//     Correct;
//  3. decoded another item -> CategoryCoordinate at sibling distance,
//     CrossCategory beyond;
//  4. anything else -> Unclassified.
ClassifiedResponse classify_response(const Vector& yhat, int true_item,
                                     const Dataset& ds,
                                     const ClassifyThresholds& thr = {});

struct ModeSpectrum {
  Vector singular_values;             // non-increasing
  Matrix left;                        // F x r
  Matrix right;                       // P x r
  std::vector<int> level_assignment;  // dominant hierarchy level per mode
};

// SVD of Y*diag(sqrt(freq)). A mode's level is the argmax over levels of its
// squared left-singular mass restricted to that level's features.
ModeSpectrum mode_spectrum(const Dataset& ds);

}  // namespace sdsim
