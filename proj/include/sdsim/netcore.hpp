#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "sdsim/hierarchy.hpp"
#include "sdsim/types.hpp"

namespace sdsim {

enum class Activation { Linear, Relu };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct NetworkConfig {
  int hidden = 16;
  // W1 entries are i.i.d. uniform with standard deviation init_scale. W2
  // entries carry an extra Bernoulli(init_density) mask (variance-corrected),
  // so each output feature starts wired to a sparse subset of hidden units;
  // density 1 is plain i.i.d. uniform. Sparse feature-side wiring makes the
  // trained network concentrate each semantic mode on fewer hidden carriers,
  // which is what gives progressive deletions their bite.
  double init_scale = 0.2;
  double init_density = 0.15;
  double learning_rate = 0.05;
  Activation activation = Activation::Linear;
  std::uint64_t seed = 0;
};

// Two-layer map y = W2 * phi(W1 * x) with linear output. Dead neurons keep
// their W1 row and W2 column at exact zero, and stay zero under training.
struct NetworkState {
  Matrix w1;                        // H x P
  Matrix w2;                        // F x H
  std::vector<std::uint8_t> alive;  // H entries, 1 = alive
  Activation activation = Activation::Linear;

  int hidden() const { return static_cast<int>(w1.rows()); }
  int alive_count() const;
};

// Fresh state with i.i.d. uniform weights of standard deviation init_scale,
// all neurons alive. Deterministic for a given seed.
NetworkState init_network(const NetworkConfig& cfg, int items, int features);

Matrix forward(const NetworkState& net, const Matrix& x);

// L = 1/2 * sum_p freq[p] * |y[:,p] - yhat[:,p]|^2
double loss(const NetworkState& net, const Matrix& x, const Matrix& y,
            const Vector& freq);
double loss(const NetworkState& net, const Dataset& ds);

// One full-batch gradient step. Throws RuntimeFault if weights leave the
// finite range (step size too large).
void gd_step_inplace(NetworkState& net, const Matrix& x, const Matrix& y,
                     const Vector& freq, double rate);
NetworkState gd_step(const NetworkState& net, const Dataset& ds, double rate);

struct TrainOptions {
  double epsilon = 1e-8;
  long max_epochs = 100000;
  double learning_rate = 0.05;
  int curve_stride = 0;  // record every k-th epoch loss; 0 disables
};

struct TrainReport {
  long epochs_run = 0;
  double final_loss = 0.0;
  bool converged = false;
  std::vector<double> loss_curve;
};

// Full-batch descent until loss <= epsilon or max_epochs. The first ten
// epochs double as a stability probe: any loss increase there, or a later
// rise past 10x the running minimum, aborts with a diagnostic.
TrainReport train_to_convergence_inplace(NetworkState& net, const Matrix& x,
                                         const Matrix& y, const Vector& freq,
                                         const TrainOptions& opts);
std::pair<NetworkState, TrainReport> train_to_convergence(
    NetworkState net, const Dataset& ds, const TrainOptions& opts);

// Exactly `epochs` steps at a fixed rate (the relearning budget).
void train_epochs_inplace(NetworkState& net, const Matrix& x, const Matrix& y,
                          const Vector& freq, long epochs, double rate);

// Marks the given neurons dead and zeroes their weights. Deleting a dead or
// out-of-range neuron is an error.
void delete_neurons_inplace(NetworkState& net, const std::vector<int>& ids);
NetworkState delete_neurons(NetworkState net, const std::vector<int>& ids);

// W2 * W1. Only defined for linear hidden activation.
Matrix composite_map(const NetworkState& net);

// Plain-text checkpoint: header "H P F activation", W1 then W2 row-major as
// hex-floats (exact to the last ulp), then the alive mask as a 0/1 line.
void save_checkpoint(const NetworkState& net, std::ostream& os);
void save_checkpoint_file(const NetworkState& net, const std::string& path);
NetworkState load_checkpoint(std::istream& is);
NetworkState load_checkpoint_file(const std::string& path);

}  // namespace sdsim
