#pragma once

// Bootstrap ensemble of SSA/LRF models for a single obstacle. Members differ in
// training-window length and truncation rank; every member forecasts the next
// n_h obstacle centers.

#include "ssampc/ssa.hpp"

#include <Eigen/Dense>

#include <array>
#include <deque>
#include <vector>

namespace ssampc {

enum class Axis { x = 0, y = 1, z = 2 };

struct BootstrapParams
{
  int n_train = 100;     // initial training window, samples
  int n_step = 5;        // window growth per enumeration step
  double delta_t = 20.0; // rank-selection threshold
  int n_sigma = 8;       // rank relaxation steps
  int n_strap = 40;      // ensemble size
  int window = 24;       // embedding length L
  int n_h = 10;          // forecast horizon
  int max_history = 0;   // 0 selects 4 * n_train

  int history_capacity() const { return max_history > 0 ? max_history : 4 * n_train; }

  /// Throws ArgumentError on hard violations. Returns false when only the
  /// advisory n_train >= 10 * n_h bound is violated.
  bool validate() const;
};

/// Per-axis sliding history of obstacle-center measurements.
class MeasurementBuffer
{
public:
  explicit MeasurementBuffer(int capacity);

  /// Appends one 3-axis sample, dropping the oldest once at capacity.
  void push(const Eigen::Vector3d& sample);

  int size() const { return static_cast<int>(axes_[0].size()); }
  int capacity() const { return capacity_; }
  long total_pushed() const { return total_; }

  /// Most recent `count` samples of one axis, oldest first.
  Eigen::VectorXd recent(Axis axis, int count) const;
  Eigen::VectorXd all(Axis axis) const { return recent(axis, size()); }

private:
  int capacity_;
  long total_ = 0;
  std::array<std::deque<double>, 3> axes_;
};

/// One bootstrap member for one axis.
struct ModelTuple
{
  Axis axis = Axis::x;
  Eigen::VectorXd eigenvalues;   // kept eigenvalues, length rank_used
  Eigen::MatrixXd eigenvectors;  // L x rank_used
  LrfModel lrf;
  int train_window = 0;
  int rank_used = 0;
  double residual = 0.0;  // RMS reconstruction error on the training window
  bool backup = false;    // constant-velocity fallback, no SSA content
};

struct BootstrapModels
{
  std::array<std::vector<ModelTuple>, 3> per_axis;
  int candidates = 0;           // SSA candidates enumerated (summed over axes)
  int verticality_skipped = 0;  // candidates rejected by the verticality check
  int backup_filled = 0;        // back-up members added (summed over axes)
};

/// n_strap x n_h x 3 forecast tensor, stored member-major.
struct ForecastEnsemble
{
  std::vector<Eigen::MatrixX3d> members;  // each n_h x 3, meters
  int obstacle_id = 0;
  long origin_index = 0;
  int backup_members = 0;

  int size() const { return static_cast<int>(members.size()); }
  int horizon() const { return members.empty() ? 0 : static_cast<int>(members.front().rows()); }
  Eigen::Vector3d mean(int step) const;
  Eigen::Vector3d stddev(int step) const;  // per-axis, divisor n - 1
};

/// Appends a measurement; rejects non-finite samples with NumericError.
void accumulate_measurement(MeasurementBuffer& buffer, const Eigen::Vector3d& sample);

/// Enumerates windows n_train, n_train + n_step, ... (most recent samples) and
/// ranks t..t+n_sigma per window until n_strap candidates per axis exist.
/// Surplus candidates are trimmed by smallest residual; shortfalls are filled
/// with back-up members.
BootstrapModels generate_ensemble(const MeasurementBuffer& buffer, const BootstrapParams& params);

/// Applies every member to the latest data and forecasts n_h steps.
ForecastEnsemble forecast_ensemble(const BootstrapModels& models, const MeasurementBuffer& buffer,
                                   int n_h);

/// Least-squares constant-velocity extrapolation over the last min(10, n)
/// samples. Forecast step i is i sample periods past the final sample.
Eigen::VectorXd backup_forecast(const Eigen::Ref<const Eigen::VectorXd>& series, int n_h);

}  // namespace ssampc
