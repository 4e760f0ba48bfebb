#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sve {

/// Constants (eta, gamma) of the bound
///   int_s^t G(t,u)^2 du + int_0^s (G(t,u) - G(s,u))^2 du <= eta (t - s)^(2 gamma).
struct HolderParams {
  double eta;
  double gamma;
};

/// Zeroth and first moments of u -> kernel(t, u) over a cell [a, b]:
/// m0 = int_a^b k du, m1 = int_a^b k (u - a)/(b - a) du.
struct CellMoments {
  double m0;
  double m1;
};

/// Two-time kernel on the triangle 0 <= s <= t.
class DoubleKernel {
 public:
  virtual ~DoubleKernel() = default;

  /// Checked evaluation. Throws DomainError outside the triangle or past the
  /// horizon and SingularDiagonal for s == t on a singular kernel.
  double eval(double t, double s) const;

  /// Value on the diagonal, +infinity for singular kernels.
  virtual double diagonal(double s) const = 0;
  virtual bool is_convolution() const { return false; }
  virtual bool singular_on_diagonal() const { return false; }
  virtual std::optional<HolderParams> holder_params() const { return std::nullopt; }
  std::optional<double> horizon() const { return horizon_; }

  /// int_a^b kernel(t, u) du for 0 <= a <= b <= t.
  virtual double integrate(double t, double a, double b) const;
  virtual CellMoments moments(double t, double a, double b) const;

  /// Points in (0, t) where u -> kernel(t, u) is not smooth.
  virtual std::vector<double> breakpoints(double /*t*/) const { return {}; }

  virtual std::string describe() const = 0;

  /// Unchecked evaluation for s < t (or s == t on non-singular kernels).
  virtual double value(double t, double s) const = 0;

 protected:
  explicit DoubleKernel(std::optional<double> horizon = std::nullopt) : horizon_(horizon) {}
  std::optional<double> horizon_;
};

using KernelPtr = std::shared_ptr<const DoubleKernel>;

double eval_kernel(const DoubleKernel& kernel, double t, double s);

// ---------------------------------------------------------------------------
// Scalar building blocks

/// b(s) / c(t) in the exponential-product family.
struct ScalarFn {
  enum class Kind { constant, affine, exponential };
  Kind kind = Kind::constant;
  double a = 1.0;
  double b = 0.0;

  static ScalarFn constant(double a) { return {Kind::constant, a, 0.0}; }
  /// a + b t
  static ScalarFn affine(double a, double b) { return {Kind::affine, a, b}; }
  /// a exp(b t)
  static ScalarFn exponential(double a, double b) { return {Kind::exponential, a, b}; }

  double operator()(double t) const;
  std::string describe() const;
};

/// Cumulative rate P(t) with P(0) = 0, nondecreasing.
struct CumulativeRate {
  enum class Kind { linear, power, exp };
  Kind kind = Kind::linear;
  double c = 1.0;
  double beta = 1.0;

  /// c t
  static CumulativeRate linear(double c) { return {Kind::linear, c, 1.0}; }
  /// c t^beta
  static CumulativeRate power(double c, double beta) { return {Kind::power, c, beta}; }
  /// c (e^t - 1)
  static CumulativeRate exp(double c) { return {Kind::exp, c, 1.0}; }

  double operator()(double t) const;
  double density(double t) const;
  std::string describe() const;
};

/// Cumulative time change H(t) = int_0^t h(u) du.
struct TimeChange {
  enum class Kind { identity, exp, power, affine_power };
  Kind kind = Kind::identity;
  double beta = 1.0;
  double shift = 0.0;

  static TimeChange identity() { return {}; }
  /// h(u) = e^u
  static TimeChange exponential() { return {Kind::exp, 1.0, 0.0}; }
  /// h(u) = u^(beta - 1), beta in (0, 1]
  static TimeChange power(double beta);
  /// h(u) = u^beta + shift
  static TimeChange affine_power(double beta, double shift);

  double H(double t) const;
  double h(double u) const;
  /// Closed-form inverse of H; nullopt when none is available.
  std::optional<double> H_inverse(double y) const;

  /// (lambda, C, beta) with h >= lambda and H(t) - H(s) <= C (t - s)^beta on [0, T].
  struct Regularity {
    double lambda;
    double C;
    double beta;
  };
  std::optional<Regularity> regularity(double T) const;
  std::string describe() const;
};

// ---------------------------------------------------------------------------
// Convolution functions G

class ConvolutionFn {
 public:
  virtual ~ConvolutionFn() = default;
  /// G(x) for x > 0.
  virtual double operator()(double x) const = 0;
  /// lim_{x -> 0} G(x), +infinity when singular.
  virtual double at_zero() const = 0;
  /// int_0^x G
  virtual double primitive(double x) const = 0;
  /// int_0^x y G(y) dy
  virtual double first_moment(double x) const = 0;
  virtual std::optional<HolderParams> holder(std::optional<double> T) const = 0;
  virtual bool completely_monotone() const = 0;
  virtual std::string describe() const = 0;
};

using ConvolutionFnPtr = std::shared_ptr<const ConvolutionFn>;

/// G(x) = x^(alpha - 1) / Gamma(alpha), alpha in (1/2, 1].
class FractionalG final : public ConvolutionFn {
 public:
  explicit FractionalG(double alpha);
  double alpha() const { return alpha_; }
  double operator()(double x) const override;
  double at_zero() const override;
  double primitive(double x) const override;
  double first_moment(double x) const override;
  std::optional<HolderParams> holder(std::optional<double> T) const override;
  bool completely_monotone() const override { return true; }
  std::string describe() const override;

 private:
  double alpha_;
  double inv_gamma_;
  double inv_gamma1_;
  double inv_gamma_moment_;
};

/// G(x) = sum_i w_i exp(-lambda_i x), w_i >= 0, lambda_i >= 0.
class ExpMixtureG final : public ConvolutionFn {
 public:
  explicit ExpMixtureG(std::vector<std::pair<double, double>> weight_rate);
  const std::vector<std::pair<double, double>>& terms() const { return terms_; }
  double operator()(double x) const override;
  double at_zero() const override;
  double primitive(double x) const override;
  double first_moment(double x) const override;
  std::optional<HolderParams> holder(std::optional<double> T) const override;
  bool completely_monotone() const override { return true; }
  std::string describe() const override;

 private:
  std::vector<std::pair<double, double>> terms_;
};

/// G(x) = a + b x. Nonnegative on the horizon only when a >= 0 and a + b T >= 0.
class AffineG final : public ConvolutionFn {
 public:
  AffineG(double a, double b);
  double operator()(double x) const override { return a_ + b_ * x; }
  double at_zero() const override { return a_; }
  double primitive(double x) const override;
  double first_moment(double x) const override;
  std::optional<HolderParams> holder(std::optional<double> T) const override;
  bool completely_monotone() const override { return b_ == 0.0 && a_ >= 0.0; }
  std::string describe() const override;

 private:
  double a_;
  double b_;
};

// ---------------------------------------------------------------------------
// Kernel families

/// Gamma(t, s) = G(H(t) - H(s)). With the identity time change this is the
/// convolution kernel G(t - s).
class TimeChangedKernel final : public DoubleKernel {
 public:
  TimeChangedKernel(ConvolutionFnPtr G, TimeChange H, std::optional<double> horizon = std::nullopt);

  const ConvolutionFn& G() const { return *G_; }
  const ConvolutionFnPtr& G_ptr() const { return G_; }
  const TimeChange& time_change() const { return H_; }

  double value(double t, double s) const override;
  double diagonal(double s) const override;
  bool is_convolution() const override { return H_.kind == TimeChange::Kind::identity; }
  bool singular_on_diagonal() const override;
  std::optional<HolderParams> holder_params() const override;
  double integrate(double t, double a, double b) const override;
  CellMoments moments(double t, double a, double b) const override;
  std::string describe() const override;
  /// Moments of v -> Gamma(v, s) over [a, b] with a >= s; empty without a
  /// closed-form inverse of H.
  std::optional<CellMoments> column_moments(double s, double a, double b) const;

 private:
  std::optional<CellMoments> substituted(double pivot, double a, double b, bool column) const;
  ConvolutionFnPtr G_;
  TimeChange H_;
};

/// Gamma(t, s) = b(s) c(t) exp(-(R(t) - R(s))).
class ExponentialProductKernel final : public DoubleKernel {
 public:
  ExponentialProductKernel(ScalarFn b, ScalarFn c, CumulativeRate R,
                           std::optional<double> horizon = std::nullopt);
  double value(double t, double s) const override;
  double diagonal(double s) const override;
  bool is_convolution() const override;
  std::optional<HolderParams> holder_params() const override;
  std::string describe() const override;

 private:
  ScalarFn b_;
  ScalarFn c_;
  CumulativeRate R_;
};

/// Gamma(t, s) = sum_i w_i exp(-(P_i(t) - P_i(s))).
class CompletelyMonotoneKernel final : public DoubleKernel {
 public:
  struct Atom {
    double weight;
    double index;
    CumulativeRate rate;
  };

  /// Atoms are sorted by index. Throws std::invalid_argument on negative
  /// weights, zero total mass or a violated index ordering of the rates.
  explicit CompletelyMonotoneKernel(std::vector<Atom> atoms,
                                    std::optional<double> horizon = std::nullopt);

  const std::vector<Atom>& atoms() const { return atoms_; }
  double value(double t, double s) const override;
  double diagonal(double s) const override;
  bool is_convolution() const override;
  std::optional<HolderParams> holder_params() const override;
  double integrate(double t, double a, double b) const override;
  std::string describe() const override;

 private:
  std::vector<Atom> atoms_;
};

/// Continuous approximation built from dyadic cell averages times a tent profile.
class SmoothedKernel final : public DoubleKernel {
 public:
  SmoothedKernel(KernelPtr base, int M, double T);

  int level() const { return M_; }
  double cell_width() const { return h_; }
  /// Tent profile on [0, 1].
  double tent(double v) const;

  double value(double t, double s) const override;
  double diagonal(double s) const override { return value(s, s); }
  std::optional<HolderParams> holder_params() const override;
  double integrate(double t, double a, double b) const override;
  CellMoments moments(double t, double a, double b) const override;
  std::vector<double> breakpoints(double t) const override;
  std::string describe() const override;

 private:
  std::size_t cell_of(double s) const;
  double cell_average(double t, std::size_t i) const;
  // Piecewise-linear pieces of u -> value(t, u) on [a, b].
  template <class F>
  void for_each_piece(double t, double a, double b, F&& f) const;

  KernelPtr base_;
  int M_;
  double T_;
  std::size_t cells_;
  double h_;
};

/// Gamma~(t, s) = Gamma(T - s, T - t).
class ReversedKernel final : public DoubleKernel {
 public:
  ReversedKernel(KernelPtr base, double T);
  const KernelPtr& base() const { return base_; }
  double reversal_time() const { return T_; }

  double value(double t, double s) const override;
  double diagonal(double s) const override;
  bool is_convolution() const override { return base_->is_convolution(); }
  bool singular_on_diagonal() const override { return base_->singular_on_diagonal(); }
  std::optional<HolderParams> holder_params() const override;
  double integrate(double t, double a, double b) const override;
  CellMoments moments(double t, double a, double b) const override;
  std::string describe() const override;

 private:
  KernelPtr base_;
  double T_;
};

/// Gamma + c.
class OffsetKernel final : public DoubleKernel {
 public:
  OffsetKernel(KernelPtr base, double c);
  double value(double t, double s) const override { return base_->value(t, s) + c_; }
  double diagonal(double s) const override { return base_->diagonal(s) + c_; }
  bool is_convolution() const override { return base_->is_convolution(); }
  bool singular_on_diagonal() const override { return base_->singular_on_diagonal(); }
  double integrate(double t, double a, double b) const override;
  CellMoments moments(double t, double a, double b) const override;
  std::vector<double> breakpoints(double t) const override { return base_->breakpoints(t); }
  std::string describe() const override;

 private:
  KernelPtr base_;
  double c_;
};

/// c * Gamma, c > 0.
class ScaledKernel final : public DoubleKernel {
 public:
  ScaledKernel(KernelPtr base, double c);
  double value(double t, double s) const override { return c_ * base_->value(t, s); }
  double diagonal(double s) const override { return c_ * base_->diagonal(s); }
  bool is_convolution() const override { return base_->is_convolution(); }
  bool singular_on_diagonal() const override { return base_->singular_on_diagonal(); }
  std::optional<HolderParams> holder_params() const override;
  double integrate(double t, double a, double b) const override;
  CellMoments moments(double t, double a, double b) const override;
  std::vector<double> breakpoints(double t) const override { return base_->breakpoints(t); }
  std::string describe() const override;

 private:
  KernelPtr base_;
  double c_;
};

// ---------------------------------------------------------------------------
// Factories

KernelPtr constant_kernel(double c);
/// Gamma(t, s) = a + b (t - s)
KernelPtr affine_kernel(double a, double b);
KernelPtr fractional_kernel(double alpha, TimeChange H = TimeChange::identity(),
                            std::optional<double> horizon = std::nullopt);
KernelPtr exp_mixture_kernel(std::vector<std::pair<double, double>> weight_rate,
                             TimeChange H = TimeChange::identity(),
                             std::optional<double> horizon = std::nullopt);

/// Finite completely monotone approximation of the fractional kernel: the
/// Bernstein density of x^(alpha-1)/Gamma(alpha) is integrated over geometric
/// bins spanning [rate_min, rate_max] plus a first bin starting at 0.
std::shared_ptr<const CompletelyMonotoneKernel> fractional_cm_mixture(double alpha, int n_atoms,
                                                                      double rate_min = 1e-2,
                                                                      double rate_max = 1e4);

// ---------------------------------------------------------------------------
// Operations

KernelPtr reverse_kernel(const KernelPtr& kernel, double T);
KernelPtr smooth_kernel(const KernelPtr& kernel, int M, double T);
std::shared_ptr<const CompletelyMonotoneKernel> cm_truncate(const CompletelyMonotoneKernel& kernel,
                                                            double M);
KernelPtr offset_kernel(const KernelPtr& kernel, double c);
KernelPtr scale_kernel(const KernelPtr& kernel, double c);

struct HolderFit {
  std::optional<double> eta_hat;
  std::optional<double> gamma_hat;
  std::pair<double, double> worst_pair;
  /// D(t, s) for each input pair, in input order.
  std::vector<double> D;
};

/// D(t, s) = int_s^t G(t,u)^2 du + int_0^s (G(t,u) - G(s,u))^2 du.
double holder_modulus(const DoubleKernel& kernel, double t, double s, int quad_resolution);

HolderFit holder_check(const DoubleKernel& kernel, double T,
                       const std::vector<std::pair<double, double>>& grid, int quad_resolution);

double l2_distance(const DoubleKernel& a, const DoubleKernel& b, double t, int quad_resolution);

}  // namespace sve
