#include "ssampc/bootstrap.hpp"

#include "ssampc/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace ssampc {

bool BootstrapParams::validate() const
{
  if (window < 2) throw ArgumentError("bootstrap: embedding length must be >= 2");
  if (window > n_train / 2) throw ArgumentError("bootstrap: embedding length must be <= n_train / 2");
  if (n_step < 1) throw ArgumentError("bootstrap: n_step must be >= 1");
  if (n_strap < 2) throw ArgumentError("bootstrap: n_strap must be >= 2");
  if (n_sigma < 0) throw ArgumentError("bootstrap: n_sigma must be >= 0");
  if (n_h < 1) throw ArgumentError("bootstrap: n_h must be >= 1");
  if (!(delta_t > 0.0)) throw ArgumentError("bootstrap: delta_t must be positive");
  if (history_capacity() < n_train) throw ArgumentError("bootstrap: history capacity below n_train");
  return n_train >= 10 * n_h;
}

MeasurementBuffer::MeasurementBuffer(int capacity) : capacity_(capacity)
{
  if (capacity < 1) throw ArgumentError("MeasurementBuffer: capacity must be positive");
}

void MeasurementBuffer::push(const Eigen::Vector3d& sample)
{
  for (int a = 0; a < 3; ++a) {
    auto& q = axes_[static_cast<std::size_t>(a)];
    q.push_back(sample(a));
    if (static_cast<int>(q.size()) > capacity_) q.pop_front();
  }
  ++total_;
}

Eigen::VectorXd MeasurementBuffer::recent(Axis axis, int count) const
{
  const auto& q = axes_[static_cast<std::size_t>(axis)];
  if (count < 0 || count > static_cast<int>(q.size())) {
    throw DimensionError("MeasurementBuffer::recent: requested " + std::to_string(count) +
                         " of " + std::to_string(q.size()) + " samples");
  }
  Eigen::VectorXd out(count);
  const auto offset = q.size() - static_cast<std::size_t>(count);
  for (int i = 0; i < count; ++i) out(i) = q[offset + static_cast<std::size_t>(i)];
  return out;
}

Eigen::Vector3d ForecastEnsemble::mean(int step) const
{
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (const auto& m : members) acc += m.row(step).transpose();
  return acc / static_cast<double>(members.size());
}

Eigen::Vector3d ForecastEnsemble::stddev(int step) const
{
  if (members.size() < 2) return Eigen::Vector3d::Zero();
  const Eigen::Vector3d mu = mean(step);
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (const auto& m : members) {
    const Eigen::Vector3d d = m.row(step).transpose() - mu;
    acc += d.cwiseProduct(d);
  }
  return (acc / static_cast<double>(members.size() - 1)).cwiseSqrt();
}

void accumulate_measurement(MeasurementBuffer& buffer, const Eigen::Vector3d& sample)
{
  if (!sample.allFinite()) throw NumericError("accumulate_measurement: non-finite sample");
  buffer.push(sample);
}

Eigen::VectorXd backup_forecast(const Eigen::Ref<const Eigen::VectorXd>& series, int n_h)
{
  if (n_h <= 0) throw ArgumentError("backup_forecast: horizon must be positive");
  const auto n = series.size();
  if (n < 1) throw InsufficientDataError("backup_forecast: empty series");
  const auto m = std::min<Eigen::Index>(10, n);
  const Eigen::VectorXd y = series.tail(m);

  double slope = 0.0;
  double t_mean = 0.5 * static_cast<double>(m - 1);
  const double y_mean = y.mean();
  if (m >= 2) {
    double sxy = 0.0;
    double sxx = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double dt = static_cast<double>(i) - t_mean;
      sxy += dt * (y(i) - y_mean);
      sxx += dt * dt;
    }
    slope = sxy / sxx;
  }
  Eigen::VectorXd out(n_h);
  for (int i = 0; i < n_h; ++i) {
    const double t = static_cast<double>(m - 1 + i + 1);
    out(i) = y_mean + slope * (t - t_mean);
  }
  return out;
}

namespace {

ModelTuple make_backup(Axis axis)
{
  ModelTuple tuple;
  tuple.axis = axis;
  tuple.backup = true;
  return tuple;
}

std::vector<ModelTuple> enumerate_axis(const MeasurementBuffer& buffer, const BootstrapParams& p,
                                       Axis axis, BootstrapModels& stats)
{
  std::vector<ModelTuple> cands;
  const int available = buffer.size();
  const auto target = static_cast<std::size_t>(p.n_strap);

  for (int w = p.n_train; w <= available && cands.size() < target; w += p.n_step) {
    const Eigen::VectorXd series = buffer.recent(axis, w);
    const SpectralModel model = spectral_decompose(build_hankel(series, p.window));
    const int numeric_rank = model.numeric_rank();
    if (numeric_rank == 0) continue;
    const int t = select_rank(model, p.delta_t, w);

    // Cumulative reconstruction Y^{1:r}, grown one component at a time.
    Eigen::VectorXd recon = Eigen::VectorXd::Zero(w);
    int recon_rank = 0;
    for (int tt = t; tt <= t + p.n_sigma; ++tt) {
      const int rank = std::min({tt, numeric_rank, p.window - 1});
      ++stats.candidates;
      LrfModel lrf;
      try {
        lrf = lrf_coefficients(model, rank);
      } catch (const VerticalityError&) {
        ++stats.verticality_skipped;
        continue;
      }
      while (recon_rank < rank) {
        recon += elementary_reconstruction(model, recon_rank);
        ++recon_rank;
      }
      ModelTuple tuple;
      tuple.axis = axis;
      tuple.eigenvalues = model.eigenvalues.head(rank);
      tuple.eigenvectors = model.eigenvectors.leftCols(rank);
      tuple.lrf = std::move(lrf);
      tuple.train_window = w;
      tuple.rank_used = rank;
      tuple.residual = (series - recon).norm() / std::sqrt(static_cast<double>(w));
      cands.push_back(std::move(tuple));
    }
  }

  if (cands.size() > target) {
    std::vector<std::size_t> order(cands.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return cands[a].residual < cands[b].residual;
    });
    order.resize(target);
    std::sort(order.begin(), order.end());
    std::vector<ModelTuple> kept;
    kept.reserve(target);
    for (auto idx : order) kept.push_back(std::move(cands[idx]));
    cands = std::move(kept);
  }
  while (cands.size() < target) {
    cands.push_back(make_backup(axis));
    ++stats.backup_filled;
  }
  return cands;
}

}  // namespace

BootstrapModels generate_ensemble(const MeasurementBuffer& buffer, const BootstrapParams& params)
{
  params.validate();
  if (buffer.size() < params.n_train) {
    throw InsufficientDataError("generate_ensemble: " + std::to_string(buffer.size()) +
                                " samples, need " + std::to_string(params.n_train));
  }
  BootstrapModels out;
  for (int a = 0; a < 3; ++a) {
    out.per_axis[static_cast<std::size_t>(a)] =
      enumerate_axis(buffer, params, static_cast<Axis>(a), out);
  }
  return out;
}

ForecastEnsemble forecast_ensemble(const BootstrapModels& models, const MeasurementBuffer& buffer,
                                   int n_h)
{
  if (n_h <= 0) throw ArgumentError("forecast_ensemble: horizon must be positive");
  const auto n_strap = models.per_axis[0].size();
  for (const auto& axis_models : models.per_axis) {
    if (axis_models.size() != n_strap || n_strap == 0) {
      throw DimensionError("forecast_ensemble: every axis needs the same non-zero member count");
    }
  }

  ForecastEnsemble ens;
  ens.origin_index = buffer.total_pushed() - 1;
  ens.members.assign(n_strap, Eigen::MatrixX3d::Zero(n_h, 3));

  std::array<Eigen::VectorXd, 3> full;
  for (int a = 0; a < 3; ++a) full[static_cast<std::size_t>(a)] = buffer.all(static_cast<Axis>(a));

  for (std::size_t j = 0; j < n_strap; ++j) {
    bool used_backup = false;
    for (int a = 0; a < 3; ++a) {
      const auto& tuple = models.per_axis[static_cast<std::size_t>(a)][j];
      const auto& series_all = full[static_cast<std::size_t>(a)];
      Eigen::VectorXd pred;
      const int l = static_cast<int>(tuple.eigenvectors.rows());
      const int w = std::min(tuple.train_window, buffer.size());
      const bool usable = !tuple.backup && tuple.lrf.verticality < kMaxVerticality && w >= l + 1;
      if (usable) {
        const Eigen::VectorXd series = series_all.tail(w);
        const Eigen::VectorXd tail = reconstruct_tail(series, tuple.eigenvectors, l - 1);
        pred = forecast(tail, tuple.lrf, n_h);
      }
      if (!usable || !pred.allFinite()) {
        pred = backup_forecast(series_all, n_h);
        used_backup = true;
      }
      ens.members[j].col(a) = pred;
    }
    if (used_backup) ++ens.backup_members;
  }
  return ens;
}

}  // namespace ssampc
