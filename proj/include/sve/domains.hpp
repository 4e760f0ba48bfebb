#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace sve {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Closed convex state space. PSD states are stored column-major as vectors
/// of length n * n.
class ConvexDomain {
 public:
  enum class Kind { orthant, unit_interval_box, unit_ball, psd_cone };

  static ConvexDomain orthant(int d) { return ConvexDomain(Kind::orthant, d); }
  static ConvexDomain unit_interval_box(int d) { return ConvexDomain(Kind::unit_interval_box, d); }
  static ConvexDomain unit_ball(int d) { return ConvexDomain(Kind::unit_ball, d); }
  /// Cone of n x n symmetric positive semidefinite matrices.
  static ConvexDomain psd_cone(int n) { return ConvexDomain(Kind::psd_cone, n); }

  Kind kind() const { return kind_; }
  /// Length of the state vector.
  int dimension() const { return kind_ == Kind::psd_cone ? n_ * n_ : n_; }
  /// Matrix size for the PSD cone, dimension otherwise.
  int size() const { return n_; }
  std::string name() const;

  bool contains(const Vec& x, double tol = 1e-12) const;
  Vec project(const Vec& x) const;
  void project_inplace(Vec& x) const;
  std::vector<Vec> boundary_samples(std::mt19937_64& rng, int count) const;

 private:
  ConvexDomain(Kind kind, int n);
  Kind kind_;
  int n_;
};

ConvexDomain::Kind parse_domain_kind(const std::string& name);

Vec project(const ConvexDomain& domain, const Vec& x);

struct AffineParams {
  Vec b0;
  Mat B;
  Vec sigmas;
};

struct WishartParams {
  Mat alpha;
  Mat M;
  Mat Q;
};

/// Drift b(x) and diffusion sigma(x) with d x d diffusion matrices.
class CoefficientModel {
 public:
  virtual ~CoefficientModel() = default;
  virtual int dimension() const = 0;
  virtual void drift(const Vec& x, Vec& out) const = 0;
  virtual Mat diffusion(const Vec& x) const = 0;
  /// out = sigma(x) dw
  virtual void apply_diffusion(const Vec& x, const Vec& dw, Vec& out) const;
  /// C with |b(x)| + |sigma(x)| <= C (1 + |x|).
  virtual double growth_constant() const = 0;
  virtual std::optional<AffineParams> affine_params() const { return std::nullopt; }
  virtual std::optional<WishartParams> wishart_params() const { return std::nullopt; }
  virtual std::string describe() const = 0;

  Vec drift(const Vec& x) const;
};

using ModelPtr = std::shared_ptr<const CoefficientModel>;

/// b(x) = b0 + B x, sigma(x) = diag(sigma_i sqrt(x_i^+)).
class AffineSqrtModel final : public CoefficientModel {
 public:
  AffineSqrtModel(Vec b0, Mat B, Vec sigmas);
  int dimension() const override { return static_cast<int>(b0_.size()); }
  void drift(const Vec& x, Vec& out) const override;
  Mat diffusion(const Vec& x) const override;
  void apply_diffusion(const Vec& x, const Vec& dw, Vec& out) const override;
  double growth_constant() const override;
  std::optional<AffineParams> affine_params() const override { return AffineParams{b0_, B_, sigmas_}; }
  std::string describe() const override;
  using CoefficientModel::drift;

  /// Throws PreconditionViolated unless b0 >= 0, B_ij >= 0 (i != j) and sigma_i > 0.
  void check_sign_conditions() const;

 private:
  Vec b0_;
  Mat B_;
  Vec sigmas_;
};

/// Scalar CIR: b(x) = theta - lambda x, sigma(x) = sigma sqrt(x^+).
std::shared_ptr<const AffineSqrtModel> cir_model(double theta, double lambda, double sigma);

/// b(x) = a + b x, sigma(x) = sigma sqrt(x (1 - x)) clipped to [0, 1].
class WrightFisherModel final : public CoefficientModel {
 public:
  WrightFisherModel(double a, double b, double sigma);
  int dimension() const override { return 1; }
  void drift(const Vec& x, Vec& out) const override;
  Mat diffusion(const Vec& x) const override;
  double growth_constant() const override;
  std::string describe() const override;
  using CoefficientModel::drift;

 private:
  double a_, b_, sigma_;
};

/// b(X) = alpha + M X + X M^T, sigma(X) dW = sqrt(X) dW Q + Q^T dW^T sqrt(X).
class WishartModel final : public CoefficientModel {
 public:
  WishartModel(Mat alpha, Mat M, Mat Q);
  int dimension() const override { return static_cast<int>(alpha_.rows() * alpha_.rows()); }
  int size() const { return static_cast<int>(alpha_.rows()); }
  void drift(const Vec& x, Vec& out) const override;
  Mat diffusion(const Vec& x) const override;
  void apply_diffusion(const Vec& x, const Vec& dw, Vec& out) const override;
  double growth_constant() const override;
  std::optional<WishartParams> wishart_params() const override { return WishartParams{alpha_, M_, Q_}; }
  std::string describe() const override;
  using CoefficientModel::drift;

 private:
  Mat alpha_, M_, Q_;
};

/// Constant coefficients: b(x) = b, sigma(x) = S.
class ConstantModel final : public CoefficientModel {
 public:
  ConstantModel(Vec b, Mat S);
  int dimension() const override { return static_cast<int>(b_.size()); }
  void drift(const Vec&, Vec& out) const override { out = b_; }
  Mat diffusion(const Vec&) const override { return S_; }
  void apply_diffusion(const Vec&, const Vec& dw, Vec& out) const override { out.noalias() = S_ * dw; }
  double growth_constant() const override { return b_.norm() + S_.norm(); }
  std::string describe() const override;
  using CoefficientModel::drift;

 private:
  Vec b_;
  Mat S_;
};

struct ConditionResult {
  std::string name;
  bool passed = true;
  double worst_violation = 0.0;
  std::optional<Vec> worst_point;
  std::optional<double> lambda;
};

struct InvarianceReport {
  bool passed = true;
  std::vector<ConditionResult> conditions;
};

/// Checks the boundary conditions of the orthant, the unit box and the
/// Wishart cone on sampled boundary points. The orthant and box conditions do
/// not depend on lambda. Throws UnsupportedDomain for other combinations.
InvarianceReport validate_invariance_conditions(const ConvexDomain& domain,
                                                const CoefficientModel& model,
                                                const std::vector<double>& lambda_set,
                                                int n_boundary_samples, std::uint64_t rng_seed);

/// Symmetric square root with negative eigenvalues clipped.
Mat psd_sqrt(const Mat& X);

}  // namespace sve
