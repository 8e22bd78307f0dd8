#pragma once

// Single-channel singular spectrum analysis: delay embedding, eigen
// decomposition of the lag covariance, diagonal averaging, rank selection and
// linear-recurrence forecasting.

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace ssampc {

/// Samples of one measured channel.
struct TimeSeries
{
  Eigen::VectorXd values;
  double sample_rate = 20.0;  // Hz
};

/// Trajectory (Hankel) matrix of a series. entry(i, j) = values(i + j).
struct HankelView
{
  Eigen::MatrixXd matrix;  // L x K, K = N - L + 1

  int window() const { return static_cast<int>(matrix.rows()); }
  int columns() const { return static_cast<int>(matrix.cols()); }
  int series_length() const { return window() + columns() - 1; }
};

/// Eigenpairs of X = H H^T, sorted by non-increasing eigenvalue.
struct SpectralModel
{
  Eigen::VectorXd eigenvalues;   // length L, clamped to >= 0
  Eigen::MatrixXd eigenvectors;  // L x L, column p pairs with eigenvalues(p)
  HankelView source;

  int window() const { return source.window(); }
  /// Number of eigenvalues above the degeneracy threshold 1e-12 * lambda_1.
  int numeric_rank() const;
};

/// Coefficients of y_n = sum_{j=1}^{L-1} phi_j * y_{n-j}. phi(0) is phi_1 and
/// multiplies the most recent sample.
struct LrfModel
{
  Eigen::VectorXd phi;
  double verticality = 0.0;  // v^2
  int rank = 0;
};

/// Relative threshold below which an eigenvalue counts as zero.
inline constexpr double kDegenerateEigenvalue = 1e-12;

/// Largest admissible verticality coefficient.
inline constexpr double kMaxVerticality = 1.0 - 1e-8;

HankelView build_hankel(const Eigen::Ref<const Eigen::VectorXd>& series, int window);

SpectralModel spectral_decompose(const HankelView& hankel);

/// Anti-diagonal averaging; the generating series of the Frobenius-nearest
/// Hankel matrix.
Eigen::VectorXd hankelize(const Eigen::Ref<const Eigen::MatrixXd>& m);

/// Series reconstructed from the listed components (0-based indices into the
/// sorted spectrum).
Eigen::VectorXd reconstruct(const SpectralModel& model, std::span<const int> components);

/// Series reconstructed from the leading `rank` components.
Eigen::VectorXd reconstruct_leading(const SpectralModel& model, int rank);

/// Diagonal-averaged rank-one term of one component (0-based). Degenerate
/// components return zeros.
Eigen::VectorXd elementary_reconstruction(const SpectralModel& model, int component);

/// Euclidean norms of the elementary reconstructions of each component.
/// Components below the degeneracy threshold contribute exactly zero.
Eigen::VectorXd elementary_norms(const SpectralModel& model);

/// Smallest t >= 1 with ||Y~_{t+1}|| - ||Y~_{t+2}|| <= delta_t / n, capped at
/// L - 2, where Y~_p is the elementary reconstruction of component p (1-based).
int select_rank(const SpectralModel& model, double delta_t, int n);

/// Recurrence coefficients from the leading `rank` eigenvectors.
LrfModel lrf_coefficients(const SpectralModel& model, int rank);

/// Same as lrf_coefficients but from an explicit L x d eigenvector basis.
LrfModel lrf_from_basis(const Eigen::Ref<const Eigen::MatrixXd>& basis);

/// Iterates the recurrence `horizon` times past the end of `tail`.
Eigen::VectorXd forecast(const Eigen::Ref<const Eigen::VectorXd>& tail, const LrfModel& model,
                         int horizon);

/// Last `count` samples of the diagonal-averaged projection of the series'
/// Hankel matrix onto span(basis). Only the trailing columns are touched.
Eigen::VectorXd reconstruct_tail(const Eigen::Ref<const Eigen::VectorXd>& series,
                                 const Eigen::Ref<const Eigen::MatrixXd>& basis, int count);

}  // namespace ssampc
