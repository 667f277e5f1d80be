#include "sdsim/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <set>
#include <sstream>

#include "sdsim/errors.hpp"
#include "sdsim/rng.hpp"
#include "sdsim/textio.hpp"

namespace sdsim {

namespace {

// Scratch matrices for the training loop so per-epoch work allocates nothing.
struct GdWorkspace {
  Matrix pre;    // H x cols, W1 * x
  Matrix hid;    // H x cols, phi(pre)
  Matrix err;    // F x cols, (yhat - y) * diag(freq)
  Matrix back;   // H x cols
  Matrix gw1;    // H x P
  Matrix gw2;    // F x H
};

void check_shapes(const NetworkState& net, const Matrix& x, const Matrix& y,
                  const Vector& freq) {
  if (net.w1.cols() != x.rows())
    throw std::invalid_argument("input rows do not match W1 columns");
  if (net.w2.rows() != y.rows())
    throw std::invalid_argument("target rows do not match W2 rows");
  if (x.cols() != y.cols())
    throw std::invalid_argument("input and target column counts differ");
  if (freq.size() != x.cols())
    throw std::invalid_argument("frequency length does not match column count");
}

// Forward pass: fills pre/hid, leaves err = (yhat - y) * diag(freq), and
// returns the weighted half-SSE loss at the current weights.
double forward_loss(const NetworkState& net, const Matrix& x, const Matrix& y,
                    const Vector& freq, GdWorkspace& ws) {
  ws.pre.noalias() = net.w1 * x;
  if (net.activation == Activation::Relu)
    ws.hid = ws.pre.cwiseMax(0.0);
  else
    ws.hid = ws.pre;
  ws.err.noalias() = net.w2 * ws.hid;
  ws.err -= y;

  double l = 0.0;
  for (Eigen::Index p = 0; p < ws.err.cols(); ++p) {
    l += freq(p) * ws.err.col(p).squaredNorm();
    ws.err.col(p) *= freq(p);
  }
  return 0.5 * l;
}

// Gradient application using the intermediates left by forward_loss.
void apply_gradient(NetworkState& net, const Matrix& x, double rate,
                    GdWorkspace& ws) {
  ws.gw2.noalias() = ws.err * ws.hid.transpose();
  ws.back.noalias() = net.w2.transpose() * ws.err;
  if (net.activation == Activation::Relu) {
    // Subgradient 0 at exactly zero pre-activation.
    ws.back = (ws.pre.array() > 0.0).select(ws.back, 0.0);
  }
  ws.gw1.noalias() = ws.back * x.transpose();

  net.w1 -= rate * ws.gw1;
  net.w2 -= rate * ws.gw2;

  // Dead rows/columns have exactly-zero gradients; re-mask anyway so the
  // bit-level zero invariant cannot erode.
  for (int h = 0; h < net.hidden(); ++h) {
    if (!net.alive[static_cast<std::size_t>(h)]) {
      net.w1.row(h).setZero();
      net.w2.col(h).setZero();
    }
  }

  if (!net.w1.allFinite() || !net.w2.allFinite())
    throw RuntimeFault(
        "gradient step produced non-finite weights (step size too large?)");
}

}  // namespace

std::string to_string(Activation a) {
  return a == Activation::Linear ? "linear" : "relu";
}

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::Linear;
  if (s == "relu") return Activation::Relu;
  throw ConfigError("unknown activation '" + s + "' (expected linear or relu)");
}

int NetworkState::alive_count() const {
  int n = 0;
  for (const auto a : alive) n += a ? 1 : 0;
  return n;
}

NetworkState init_network(const NetworkConfig& cfg, int items, int features) {
  if (cfg.hidden < 1) throw ConfigError("hidden layer size must be at least 1");
  if (cfg.init_scale < 0.0) throw ConfigError("init_scale must be nonnegative");
  if (!(cfg.init_density > 0.0) || cfg.init_density > 1.0)
    throw ConfigError("init_density must be in (0, 1]");
  if (items < 1 || features < 1)
    throw std::invalid_argument("network dimensions must be positive");

  NetworkState net;
  net.activation = cfg.activation;
  net.w1.resize(cfg.hidden, items);
  net.w2.resize(features, cfg.hidden);
  net.alive.assign(static_cast<std::size_t>(cfg.hidden), 1);

  // W1 is dense uniform so every hidden unit starts responsive (a zero row
  // would freeze a relu unit for good). W2 entries carry a Bernoulli(density)
  // mask times uniform on [-b, b], with b chosen so the overall entry
  // variance is init_scale^2 at any density; density 1 reduces to plain
  // i.i.d. uniform on [-sigma*sqrt(3), sigma*sqrt(3)]. Sparse feature-side
  // wiring concentrates each semantic mode on a few hidden carriers.
  std::mt19937_64 gen(cfg.seed);
  const double w1_bound = cfg.init_scale * std::sqrt(3.0);
  for (Eigen::Index r = 0; r < net.w1.rows(); ++r)
    for (Eigen::Index c = 0; c < net.w1.cols(); ++c)
      net.w1(r, c) = uniform_real(gen, -w1_bound, w1_bound);

  const double w2_bound = cfg.init_scale * std::sqrt(3.0 / cfg.init_density);
  for (Eigen::Index r = 0; r < net.w2.rows(); ++r) {
    for (Eigen::Index c = 0; c < net.w2.cols(); ++c) {
      const bool active = uniform01(gen) < cfg.init_density;
      const double value = uniform_real(gen, -w2_bound, w2_bound);
      net.w2(r, c) = active ? value : 0.0;
    }
  }
  return net;
}

Matrix forward(const NetworkState& net, const Matrix& x) {
  if (net.w1.cols() != x.rows())
    throw std::invalid_argument("input rows do not match W1 columns");
  Matrix hid = net.w1 * x;
  if (net.activation == Activation::Relu) hid = hid.cwiseMax(0.0);
  return net.w2 * hid;
}

double loss(const NetworkState& net, const Matrix& x, const Matrix& y,
            const Vector& freq) {
  check_shapes(net, x, y, freq);
  const Matrix residual = forward(net, x) - y;
  double l = 0.0;
  for (Eigen::Index p = 0; p < residual.cols(); ++p)
    l += freq(p) * residual.col(p).squaredNorm();
  return 0.5 * l;
}

double loss(const NetworkState& net, const Dataset& ds) {
  return loss(net, ds.X, ds.Y, ds.freq);
}

void gd_step_inplace(NetworkState& net, const Matrix& x, const Matrix& y,
                     const Vector& freq, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  check_shapes(net, x, y, freq);
  GdWorkspace ws;
  forward_loss(net, x, y, freq, ws);
  apply_gradient(net, x, rate, ws);
}

NetworkState gd_step(const NetworkState& net, const Dataset& ds, double rate) {
  NetworkState out = net;
  gd_step_inplace(out, ds.X, ds.Y, ds.freq, rate);
  return out;
}

TrainReport train_to_convergence_inplace(NetworkState& net, const Matrix& x,
                                         const Matrix& y, const Vector& freq,
                                         const TrainOptions& opts) {
  if (!(opts.epsilon > 0.0))
    throw std::invalid_argument("convergence epsilon must be positive");
  if (opts.max_epochs < 0)
    throw std::invalid_argument("max_epochs must be nonnegative");
  if (!(opts.learning_rate > 0.0))
    throw std::invalid_argument("learning rate must be positive");
  check_shapes(net, x, y, freq);

  constexpr long kProbeEpochs = 10;
  TrainReport report;
  GdWorkspace ws;
  double min_loss = std::numeric_limits<double>::infinity();
  double prev_loss = std::numeric_limits<double>::infinity();
  double current = 0.0;

  long steps = 0;
  for (long epoch = 0;; ++epoch) {
    current = forward_loss(net, x, y, freq, ws);
    if (opts.curve_stride > 0 && epoch % opts.curve_stride == 0)
      report.loss_curve.push_back(current);
    if (current <= opts.epsilon) {
      report.converged = true;
      break;
    }
    if (epoch >= opts.max_epochs) break;
    if (epoch < kProbeEpochs && current > prev_loss * (1.0 + 1e-9))
      throw RuntimeFault(
          "loss increased during the stability probe; lower the learning rate");
    min_loss = std::min(min_loss, current);
    if (current > 10.0 * min_loss)
      throw RuntimeFault(
          "training diverged: loss rose past 10x its running minimum");
    prev_loss = current;
    apply_gradient(net, x, opts.learning_rate, ws);
    ++steps;
  }

  report.epochs_run = steps;
  report.final_loss = current;
  return report;
}

std::pair<NetworkState, TrainReport> train_to_convergence(
    NetworkState net, const Dataset& ds, const TrainOptions& opts) {
  TrainReport report =
      train_to_convergence_inplace(net, ds.X, ds.Y, ds.freq, opts);
  return {std::move(net), std::move(report)};
}

void train_epochs_inplace(NetworkState& net, const Matrix& x, const Matrix& y,
                          const Vector& freq, long epochs, double rate) {
  if (epochs < 0) throw std::invalid_argument("epoch budget must be nonnegative");
  if (!(rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  check_shapes(net, x, y, freq);

  GdWorkspace ws;
  double min_loss = std::numeric_limits<double>::infinity();
  for (long epoch = 0; epoch < epochs; ++epoch) {
    const double l = forward_loss(net, x, y, freq, ws);
    min_loss = std::min(min_loss, l);
    if (l > 10.0 * min_loss)
      throw RuntimeFault(
          "relearning diverged: loss rose past 10x its running minimum");
    apply_gradient(net, x, rate, ws);
  }
}

void delete_neurons_inplace(NetworkState& net, const std::vector<int>& ids) {
  std::set<int> seen;
  for (const int h : ids) {
    if (h < 0 || h >= net.hidden())
      throw std::invalid_argument("neuron id out of range: " + std::to_string(h));
    if (!net.alive[static_cast<std::size_t>(h)] || !seen.insert(h).second)
      throw std::invalid_argument("neuron already dead: " + std::to_string(h));
  }
  for (const int h : ids) {
    net.alive[static_cast<std::size_t>(h)] = 0;
    net.w1.row(h).setZero();
    net.w2.col(h).setZero();
  }
}

NetworkState delete_neurons(NetworkState net, const std::vector<int>& ids) {
  delete_neurons_inplace(net, ids);
  return net;
}

Matrix composite_map(const NetworkState& net) {
  if (net.activation != Activation::Linear)
    throw std::invalid_argument(
        "composite_map is input-dependent for relu networks");
  return net.w2 * net.w1;
}

void save_checkpoint(const NetworkState& net, std::ostream& os) {
  os << net.hidden() << ' ' << net.w1.cols() << ' ' << net.w2.rows() << ' '
     << to_string(net.activation) << '\n';
  for (Eigen::Index r = 0; r < net.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < net.w1.cols(); ++c) {
      if (c) os << ' ';
      os << format_hex(net.w1(r, c));
    }
    os << '\n';
  }
  for (Eigen::Index r = 0; r < net.w2.rows(); ++r) {
    for (Eigen::Index c = 0; c < net.w2.cols(); ++c) {
      if (c) os << ' ';
      os << format_hex(net.w2(r, c));
    }
    os << '\n';
  }
  for (int h = 0; h < net.hidden(); ++h) {
    if (h) os << ' ';
    os << (net.alive[static_cast<std::size_t>(h)] ? 1 : 0);
  }
  os << '\n';
}

void save_checkpoint_file(const NetworkState& net, const std::string& path) {
  std::ostringstream ss;
  save_checkpoint(net, ss);
  write_file_atomic(path, ss.str());
}

NetworkState load_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw RuntimeFault("checkpoint: missing header");
  const auto header = split_ws(line);
  if (header.size() != 4)
    throw RuntimeFault("checkpoint: header must be 'H P F activation'");
  const int h = static_cast<int>(parse_long(header[0]));
  const int p = static_cast<int>(parse_long(header[1]));
  const int f = static_cast<int>(parse_long(header[2]));
  if (h < 1 || p < 1 || f < 1)
    throw RuntimeFault("checkpoint: nonpositive dimensions");

  NetworkState net;
  net.activation = activation_from_string(header[3]);
  net.w1.resize(h, p);
  net.w2.resize(f, h);
  net.alive.assign(static_cast<std::size_t>(h), 1);

  const auto read_row = [&](Matrix& m, Eigen::Index row) {
    if (!std::getline(is, line))
      throw RuntimeFault("checkpoint: truncated weight matrix");
    const auto toks = split_ws(line);
    if (static_cast<Eigen::Index>(toks.size()) != m.cols())
      throw RuntimeFault("checkpoint: bad weight row width");
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(row, c) = parse_double(toks[static_cast<std::size_t>(c)]);
  };
  for (Eigen::Index r = 0; r < net.w1.rows(); ++r) read_row(net.w1, r);
  for (Eigen::Index r = 0; r < net.w2.rows(); ++r) read_row(net.w2, r);

  if (!std::getline(is, line)) throw RuntimeFault("checkpoint: missing alive mask");
  const auto toks = split_ws(line);
  if (static_cast<int>(toks.size()) != h)
    throw RuntimeFault("checkpoint: bad alive mask width");
  for (int i = 0; i < h; ++i) {
    const long v = parse_long(toks[static_cast<std::size_t>(i)]);
    if (v != 0 && v != 1) throw RuntimeFault("checkpoint: alive mask must be 0/1");
    net.alive[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
  }

  if (!net.w1.allFinite() || !net.w2.allFinite())
    throw RuntimeFault("checkpoint: non-finite weights");
  for (int i = 0; i < h; ++i) {
    if (!net.alive[static_cast<std::size_t>(i)] &&
        (net.w1.row(i).cwiseAbs().sum() != 0.0 ||
         net.w2.col(i).cwiseAbs().sum() != 0.0))
      throw RuntimeFault("checkpoint: dead neuron has nonzero weights");
  }
  return net;
}

NetworkState load_checkpoint_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeFault("cannot open checkpoint: " + path);
  return load_checkpoint(in);
}

}  // namespace sdsim
