#include "ssampc/ssa.hpp"

#include "ssampc/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ssampc {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what)
{
  if (!m.allFinite()) {
    throw NumericError(std::string(what) + ": non-finite entries");
  }
}

double degeneracy_floor(const SpectralModel& model)
{
  const double lead = model.eigenvalues.size() > 0 ? model.eigenvalues(0) : 0.0;
  return kDegenerateEigenvalue * lead;
}

// Hankelized rank-one term mu * (H^T mu)^T.
Eigen::VectorXd elementary(const HankelView& h, const Eigen::Ref<const Eigen::VectorXd>& mu)
{
  const Eigen::VectorXd v = h.matrix.transpose() * mu;
  const Eigen::MatrixXd term = mu * v.transpose();
  return hankelize(term);
}

}  // namespace

int SpectralModel::numeric_rank() const
{
  const double floor = degeneracy_floor(*this);
  int rank = 0;
  for (Eigen::Index p = 0; p < eigenvalues.size(); ++p) {
    if (eigenvalues(p) > floor) ++rank;
  }
  return rank;
}

HankelView build_hankel(const Eigen::Ref<const Eigen::VectorXd>& series, int window)
{
  const auto n = static_cast<int>(series.size());
  if (window < 2 || window > n - 1) {
    throw DimensionError("build_hankel: window " + std::to_string(window) +
                         " outside [2, " + std::to_string(n - 1) + "]");
  }
  const int k = n - window + 1;
  HankelView h;
  h.matrix.resize(window, k);
  for (int j = 0; j < k; ++j) {
    h.matrix.col(j) = series.segment(j, window);
  }
  return h;
}

SpectralModel spectral_decompose(const HankelView& hankel)
{
  require_finite(hankel.matrix, "spectral_decompose");
  const int l = hankel.window();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(l, l);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(hankel.matrix);
  cov.triangularView<Eigen::StrictlyUpper>() = cov.transpose();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw NumericError("spectral_decompose: eigen solver failed");
  }

  SpectralModel model;
  model.source = hankel;
  model.eigenvalues = solver.eigenvalues().reverse();
  model.eigenvectors = solver.eigenvectors().rowwise().reverse();

  const double scale = std::max(1.0, model.eigenvalues(0));
  for (int p = 0; p < l; ++p) {
    double& lambda = model.eigenvalues(p);
    if (lambda < 0.0) {
      if (lambda < -1e-10 * scale) {
        throw NumericError("spectral_decompose: negative eigenvalue " + std::to_string(lambda));
      }
      lambda = 0.0;
    }
    auto col = model.eigenvectors.col(p);
    Eigen::Index idx = 0;
    col.cwiseAbs().maxCoeff(&idx);
    if (col(idx) < 0.0) col = -col;
  }
  return model;
}

Eigen::VectorXd hankelize(const Eigen::Ref<const Eigen::MatrixXd>& m)
{
  const auto l = m.rows();
  const auto k = m.cols();
  if (l == 0 || k == 0) return {};
  // Averages are taken relative to the first entry of each anti-diagonal so
  // that constant diagonals come back bit-exact.
  Eigen::VectorXd out(l + k - 1);
  for (Eigen::Index s = 0; s < l + k - 1; ++s) {
    const Eigen::Index i_lo = std::max<Eigen::Index>(0, s - (k - 1));
    const Eigen::Index i_hi = std::min<Eigen::Index>(l - 1, s);
    const double anchor = m(i_lo, s - i_lo);
    double acc = 0.0;
    for (Eigen::Index i = i_lo; i <= i_hi; ++i) acc += m(i, s - i) - anchor;
    out(s) = anchor + acc / static_cast<double>(i_hi - i_lo + 1);
  }
  return out;
}

Eigen::VectorXd reconstruct(const SpectralModel& model, std::span<const int> components)
{
  const int l = model.window();
  const double floor = degeneracy_floor(model);
  Eigen::MatrixXd basis(l, static_cast<Eigen::Index>(components.size()));
  for (std::size_t c = 0; c < components.size(); ++c) {
    const int p = components[c];
    if (p < 0 || p >= l) {
      throw DimensionError("reconstruct: component " + std::to_string(p) + " out of range");
    }
    if (!(model.eigenvalues(p) > floor)) {
      throw DegenerateComponentError("reconstruct: component " + std::to_string(p) +
                                     " has a degenerate eigenvalue");
    }
    basis.col(static_cast<Eigen::Index>(c)) = model.eigenvectors.col(p);
  }
  const Eigen::MatrixXd projected = basis * (basis.transpose() * model.source.matrix);
  return hankelize(projected);
}

Eigen::VectorXd reconstruct_leading(const SpectralModel& model, int rank)
{
  std::vector<int> comps(static_cast<std::size_t>(std::max(rank, 0)));
  for (int p = 0; p < rank; ++p) comps[static_cast<std::size_t>(p)] = p;
  return reconstruct(model, comps);
}

Eigen::VectorXd elementary_reconstruction(const SpectralModel& model, int component)
{
  if (component < 0 || component >= model.window()) {
    throw DimensionError("elementary_reconstruction: component out of range");
  }
  if (!(model.eigenvalues(component) > degeneracy_floor(model))) {
    return Eigen::VectorXd::Zero(model.source.series_length());
  }
  return elementary(model.source, model.eigenvectors.col(component));
}

Eigen::VectorXd elementary_norms(const SpectralModel& model)
{
  const int l = model.window();
  const double floor = degeneracy_floor(model);
  Eigen::VectorXd norms = Eigen::VectorXd::Zero(l);
  for (int p = 0; p < l; ++p) {
    if (model.eigenvalues(p) > floor) {
      norms(p) = elementary(model.source, model.eigenvectors.col(p)).norm();
    }
  }
  return norms;
}

int select_rank(const SpectralModel& model, double delta_t, int n)
{
  if (!(delta_t > 0.0)) throw ArgumentError("select_rank: delta_t must be positive");
  if (n <= 0) throw ArgumentError("select_rank: n must be positive");
  const int l = model.window();
  const int cap = std::max(1, l - 2);
  const double threshold = delta_t / n;
  const double floor = degeneracy_floor(model);

  // Norms are computed lazily; ranks are typically small.
  std::vector<double> norms(static_cast<std::size_t>(l), -1.0);
  auto norm_of = [&](int p) {  // 0-based component
    auto& slot = norms[static_cast<std::size_t>(p)];
    if (slot < 0.0) {
      slot = model.eigenvalues(p) > floor
               ? elementary(model.source, model.eigenvectors.col(p)).norm()
               : 0.0;
    }
    return slot;
  };

  for (int t = 1; t <= cap; ++t) {
    if (t + 1 >= l) break;
    // ||Y^{1:t} - Y^{1:t+1}|| is the norm of component t+1 (1-based).
    if (norm_of(t) - norm_of(t + 1) <= threshold) return t;
  }
  return cap;
}

LrfModel lrf_from_basis(const Eigen::Ref<const Eigen::MatrixXd>& basis)
{
  const auto l = basis.rows();
  const auto d = basis.cols();
  if (l < 2 || d < 1 || d > l - 1) {
    throw DimensionError("lrf: rank must lie in [1, L-1]");
  }
  const Eigen::VectorXd pi = basis.row(l - 1).transpose();
  const double v2 = pi.squaredNorm();
  if (!(v2 < kMaxVerticality)) {
    throw VerticalityError("lrf: verticality coefficient " + std::to_string(v2) + " >= 1");
  }
  // reversed = [phi_{L-1}, ..., phi_1]
  const Eigen::VectorXd reversed = basis.topRows(l - 1) * pi / (1.0 - v2);
  LrfModel out;
  out.phi = reversed.reverse();
  out.verticality = v2;
  out.rank = static_cast<int>(d);
  return out;
}

LrfModel lrf_coefficients(const SpectralModel& model, int rank)
{
  const int l = model.window();
  if (rank < 1 || rank > l - 1) {
    throw DimensionError("lrf_coefficients: rank " + std::to_string(rank) + " outside [1, " +
                         std::to_string(l - 1) + "]");
  }
  return lrf_from_basis(model.eigenvectors.leftCols(rank));
}

Eigen::VectorXd forecast(const Eigen::Ref<const Eigen::VectorXd>& tail, const LrfModel& model,
                         int horizon)
{
  if (horizon <= 0) throw ArgumentError("forecast: horizon must be positive");
  const auto order = model.phi.size();
  if (tail.size() < order) {
    throw DimensionError("forecast: tail shorter than L-1");
  }
  Eigen::VectorXd history(order + horizon);
  history.head(order) = tail.tail(order);
  for (Eigen::Index h = 0; h < horizon; ++h) {
    const Eigen::Index next = order + h;
    double y = 0.0;
    for (Eigen::Index j = 0; j < order; ++j) {
      y += model.phi(j) * history(next - 1 - j);
    }
    history(next) = y;
  }
  return history.tail(horizon);
}

Eigen::VectorXd reconstruct_tail(const Eigen::Ref<const Eigen::VectorXd>& series,
                                 const Eigen::Ref<const Eigen::MatrixXd>& basis, int count)
{
  const auto n = series.size();
  const auto l = basis.rows();
  if (l < 2 || l > n - 1) throw DimensionError("reconstruct_tail: window out of range");
  if (count < 1 || count > n) throw DimensionError("reconstruct_tail: bad count");
  const auto k = n - l + 1;
  const auto first_col = std::max<Eigen::Index>(0, k - count);
  const auto cols = k - first_col;

  Eigen::MatrixXd hcols(l, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    hcols.col(j) = series.segment(first_col + j, l);
  }
  const Eigen::MatrixXd proj = basis * (basis.transpose() * hcols);

  Eigen::VectorXd out(count);
  for (int c = 0; c < count; ++c) {
    const Eigen::Index s = n - count + c;
    double sum = 0.0;
    int terms = 0;
    const Eigen::Index j_lo = std::max<Eigen::Index>(0, s - (l - 1));
    const Eigen::Index j_hi = std::min<Eigen::Index>(k - 1, s);
    for (Eigen::Index j = j_lo; j <= j_hi; ++j) {
      sum += proj(s - j, j - first_col);
      ++terms;
    }
    out(c) = sum / terms;
  }
  return out;
}

}  // namespace ssampc
