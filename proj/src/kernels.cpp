#include "sve/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "sve/errors.hpp"
#include "sve/quadrature.hpp"

namespace sve {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

void check_cell(double t, double a, double b) {
  if (!(a >= 0.0) || !(b >= a) || b > t * (1.0 + 1e-14) + 1e-300) {
    throw DomainError("integration cell [" + fmt(a) + ", " + fmt(b) + "] not inside [0, " +
                      fmt(t) + "]");
  }
}

// 8-point Gauss-Legendre on [a, b] for smooth integrands.
template <class F>
double gl8(const F& f, double a, double b) {
  static constexpr double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                  0.9602898564975363};
  static constexpr double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                  0.1012285362903763};
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < 4; ++i) acc += w[i] * (f(c - h * x[i]) + f(c + h * x[i]));
  return acc * h;
}

// sup|Gamma|^2 + sup|d_t Gamma|^2 T^2 bound for kernels Lipschitz in t.
HolderParams lipschitz_holder(double sup_value, double sup_dt, double T) {
  return {sup_value * sup_value + sup_dt * sup_dt * T * T, 0.5};
}

std::vector<double> pieces_between(double a, double b, std::vector<double> breaks) {
  std::vector<double> pts{a};
  std::sort(breaks.begin(), breaks.end());
  for (double x : breaks) {
    if (x > a && x < b) pts.push_back(x);
  }
  pts.push_back(b);
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

}  // namespace

// ---------------------------------------------------------------------------
// DoubleKernel

double DoubleKernel::eval(double t, double s) const {
  if (!std::isfinite(t) || !std::isfinite(s) || s < 0.0 || s > t) {
    throw DomainError("kernel evaluated outside 0 <= s <= t: (t, s) = (" + fmt(t) + ", " +
                      fmt(s) + ")");
  }
  if (horizon_ && t > *horizon_ * (1.0 + 1e-12) + 1e-300) {
    throw DomainError("kernel evaluated past its horizon " + fmt(*horizon_) + ": t = " + fmt(t));
  }
  if (s == t) {
    if (singular_on_diagonal()) {
      throw SingularDiagonal("kernel is singular on the diagonal at s = " + fmt(s));
    }
    return diagonal(s);
  }
  return value(t, s);
}

double eval_kernel(const DoubleKernel& kernel, double t, double s) { return kernel.eval(t, s); }

double DoubleKernel::integrate(double t, double a, double b) const {
  check_cell(t, a, b);
  if (a == b) return 0.0;
  const bool sing = singular_on_diagonal();
  auto f = [&](double u) {
    if (u >= t) return sing ? 0.0 : diagonal(t);
    const double v = value(t, u);
    return std::isfinite(v) ? v : 0.0;
  };
  const auto pts = pieces_between(a, b, breakpoints(t));
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    acc += sing ? quad::endpoint_singular(f, pts[i], pts[i + 1]) : quad::adaptive(f, pts[i], pts[i + 1]);
  }
  return acc;
}

CellMoments DoubleKernel::moments(double t, double a, double b) const {
  check_cell(t, a, b);
  if (a == b) return {0.0, 0.0};
  const bool sing = singular_on_diagonal();
  const double width = b - a;
  auto f = [&](double u) {
    if (u >= t) return sing ? 0.0 : diagonal(t);
    const double v = value(t, u);
    return std::isfinite(v) ? v : 0.0;
  };
  auto g = [&](double u) { return f(u) * (u - a) / width; };
  const auto pts = pieces_between(a, b, breakpoints(t));
  CellMoments m{0.0, 0.0};
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (sing) {
      m.m0 += quad::endpoint_singular(f, pts[i], pts[i + 1]);
      m.m1 += quad::endpoint_singular(g, pts[i], pts[i + 1]);
    } else {
      m.m0 += quad::adaptive(f, pts[i], pts[i + 1]);
      m.m1 += quad::adaptive(g, pts[i], pts[i + 1]);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Scalar building blocks

double ScalarFn::operator()(double t) const {
  switch (kind) {
    case Kind::constant:
      return a;
    case Kind::affine:
      return a + b * t;
    case Kind::exponential:
      return a * std::exp(b * t);
  }
  return a;
}

std::string ScalarFn::describe() const {
  switch (kind) {
    case Kind::constant:
      return "const(" + fmt(a) + ")";
    case Kind::affine:
      return "affine(" + fmt(a) + "," + fmt(b) + ")";
    case Kind::exponential:
      return "exp(" + fmt(a) + "," + fmt(b) + ")";
  }
  return "?";
}

double CumulativeRate::operator()(double t) const {
  switch (kind) {
    case Kind::linear:
      return c * t;
    case Kind::power:
      return c * std::pow(t, beta);
    case Kind::exp:
      return c * std::expm1(t);
  }
  return 0.0;
}

double CumulativeRate::density(double t) const {
  switch (kind) {
    case Kind::linear:
      return c;
    case Kind::power:
      return c * beta * std::pow(t, beta - 1.0);
    case Kind::exp:
      return c * std::exp(t);
  }
  return 0.0;
}

std::string CumulativeRate::describe() const {
  switch (kind) {
    case Kind::linear:
      return "linear(" + fmt(c) + ")";
    case Kind::power:
      return "power(" + fmt(c) + "," + fmt(beta) + ")";
    case Kind::exp:
      return "exp(" + fmt(c) + ")";
  }
  return "?";
}

TimeChange TimeChange::power(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("power time change needs beta in (0, 1]");
  return {Kind::power, beta, 0.0};
}

TimeChange TimeChange::affine_power(double beta, double shift) {
  if (!(beta >= 0.0) || !(shift >= 0.0)) {
    throw std::invalid_argument("affine_power time change needs beta >= 0 and shift >= 0");
  }
  return {Kind::affine_power, beta, shift};
}

double TimeChange::H(double t) const {
  switch (kind) {
    case Kind::identity:
      return t;
    case Kind::exp:
      return std::expm1(t);
    case Kind::power:
      return std::pow(t, beta) / beta;
    case Kind::affine_power:
      return std::pow(t, beta + 1.0) / (beta + 1.0) + shift * t;
  }
  return t;
}

double TimeChange::h(double u) const {
  switch (kind) {
    case Kind::identity:
      return 1.0;
    case Kind::exp:
      return std::exp(u);
    case Kind::power:
      return std::pow(u, beta - 1.0);
    case Kind::affine_power:
      return std::pow(u, beta) + shift;
  }
  return 1.0;
}

std::optional<double> TimeChange::H_inverse(double y) const {
  switch (kind) {
    case Kind::identity:
      return y;
    case Kind::exp:
      return std::log1p(y);
    case Kind::power:
      return std::pow(beta * y, 1.0 / beta);
    case Kind::affine_power:
      if (beta == 0.0 && shift + 1.0 > 0.0) return y / (1.0 + shift);
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<TimeChange::Regularity> TimeChange::regularity(double T) const {
  switch (kind) {
    case Kind::identity:
      return Regularity{1.0, 1.0, 1.0};
    case Kind::exp:
      return Regularity{1.0, std::exp(T), 1.0};
    case Kind::power:
      return Regularity{std::pow(T, beta - 1.0), 1.0 / beta, beta};
    case Kind::affine_power: {
      const double lambda = beta == 0.0 ? 1.0 + shift : shift;
      if (!(lambda > 0.0)) return std::nullopt;
      return Regularity{lambda, std::pow(T, beta) + shift, 1.0};
    }
  }
  return std::nullopt;
}

std::string TimeChange::describe() const {
  switch (kind) {
    case Kind::identity:
      return "identity";
    case Kind::exp:
      return "exp";
    case Kind::power:
      return "power(" + fmt(beta) + ")";
    case Kind::affine_power:
      return "affine_power(" + fmt(beta) + "," + fmt(shift) + ")";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Convolution functions

FractionalG::FractionalG(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.5 && alpha <= 1.0)) {
    throw std::invalid_argument("fractional kernel needs alpha in (1/2, 1], got " + fmt(alpha));
  }
  inv_gamma_ = 1.0 / std::tgamma(alpha);
  inv_gamma1_ = 1.0 / std::tgamma(alpha + 1.0);
  inv_gamma_moment_ = inv_gamma_ / (alpha + 1.0);
}

double FractionalG::operator()(double x) const {
  if (alpha_ == 1.0) return 1.0;
  return std::pow(x, alpha_ - 1.0) * inv_gamma_;
}

double FractionalG::at_zero() const { return alpha_ == 1.0 ? 1.0 : kInf; }

double FractionalG::primitive(double x) const { return std::pow(x, alpha_) * inv_gamma1_; }

double FractionalG::first_moment(double x) const {
  return std::pow(x, alpha_ + 1.0) * inv_gamma_moment_;
}

std::optional<HolderParams> FractionalG::holder(std::optional<double>) const {
  const double g = alpha_ - 0.5;
  return HolderParams{1.0 / (std::tgamma(2.0 * alpha_) * std::sin(std::numbers::pi * g)), g};
}

std::string FractionalG::describe() const { return "fractional(" + fmt(alpha_) + ")"; }

ExpMixtureG::ExpMixtureG(std::vector<std::pair<double, double>> weight_rate)
    : terms_(std::move(weight_rate)) {
  if (terms_.empty()) throw std::invalid_argument("exponential mixture needs at least one term");
  for (const auto& [w, r] : terms_) {
    if (!(w >= 0.0) || !(r >= 0.0) || !std::isfinite(w) || !std::isfinite(r)) {
      throw std::invalid_argument("exponential mixture needs finite w >= 0 and rate >= 0");
    }
  }
}

double ExpMixtureG::operator()(double x) const {
  double acc = 0.0;
  for (const auto& [w, r] : terms_) acc += w * std::exp(-r * x);
  return acc;
}

double ExpMixtureG::at_zero() const {
  double acc = 0.0;
  for (const auto& [w, r] : terms_) acc += w;
  return acc;
}

double ExpMixtureG::primitive(double x) const {
  double acc = 0.0;
  for (const auto& [w, r] : terms_) acc += r > 0.0 ? -w * std::expm1(-r * x) / r : w * x;
  return acc;
}

double ExpMixtureG::first_moment(double x) const {
  double acc = 0.0;
  for (const auto& [w, r] : terms_) {
    if (r == 0.0) {
      acc += 0.5 * w * x * x;
      continue;
    }
    const double z = r * x;
    // 1 - e^{-z}(1 + z)
    double q;
    if (z < 1e-2) {
      q = z * z * (0.5 - z * (1.0 / 3.0 - z * (0.125 - z / 30.0)));
    } else {
      q = -std::expm1(-z) - z * std::exp(-z);
    }
    acc += w * q / (r * r);
  }
  return acc;
}

std::optional<HolderParams> ExpMixtureG::holder(std::optional<double> T) const {
  if (!T) return std::nullopt;
  double lip = 0.0;
  for (const auto& [w, r] : terms_) lip += w * r;
  return lipschitz_holder(at_zero(), lip, *T);
}

std::string ExpMixtureG::describe() const {
  std::string s = "exp_mixture(";
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (i) s += ";";
    s += fmt(terms_[i].first) + "," + fmt(terms_[i].second);
  }
  return s + ")";
}

AffineG::AffineG(double a, double b) : a_(a), b_(b) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw std::invalid_argument("affine G needs finite a, b");
}

double AffineG::primitive(double x) const { return a_ * x + 0.5 * b_ * x * x; }

double AffineG::first_moment(double x) const { return 0.5 * a_ * x * x + b_ * x * x * x / 3.0; }

std::optional<HolderParams> AffineG::holder(std::optional<double> T) const {
  if (b_ == 0.0) return HolderParams{a_ * a_, 0.5};
  if (!T) return std::nullopt;
  return lipschitz_holder(std::abs(a_) + std::abs(b_) * *T, std::abs(b_), *T);
}

std::string AffineG::describe() const {
  if (b_ == 0.0) return "constant(" + fmt(a_) + ")";
  return "affine(" + fmt(a_) + "," + fmt(b_) + ")";
}

// ---------------------------------------------------------------------------
// TimeChangedKernel

TimeChangedKernel::TimeChangedKernel(ConvolutionFnPtr G, TimeChange H, std::optional<double> horizon)
    : DoubleKernel(horizon), G_(std::move(G)), H_(H) {
  if (!G_) throw std::invalid_argument("time-changed kernel needs G");
}

double TimeChangedKernel::value(double t, double s) const {
  const double x = H_.kind == TimeChange::Kind::identity ? t - s : H_.H(t) - H_.H(s);
  if (x <= 0.0) return G_->at_zero();
  return (*G_)(x);
}

double TimeChangedKernel::diagonal(double) const { return G_->at_zero(); }

bool TimeChangedKernel::singular_on_diagonal() const { return !std::isfinite(G_->at_zero()); }

std::optional<HolderParams> TimeChangedKernel::holder_params() const {
  if (H_.kind == TimeChange::Kind::identity) return G_->holder(horizon_);
  if (!horizon_) return std::nullopt;
  const auto reg = H_.regularity(*horizon_);
  if (!reg) return std::nullopt;
  const auto g = G_->holder(H_.H(*horizon_));
  if (!g) return std::nullopt;
  return HolderParams{g->eta / reg->lambda * std::pow(reg->C, 2.0 * g->gamma), reg->beta * g->gamma};
}

std::optional<CellMoments> TimeChangedKernel::substituted(double pivot, double a, double b, bool column) const {
  if (!H_.H_inverse(0.0)) return std::nullopt;
  const double Hp = H_.H(pivot);
  const double width = b - a;
  // x = |H(u) - H(pivot)|, u = H^-1(H(pivot) -+ x)
  auto u_of = [&](double x) { return *H_.H_inverse(column ? Hp + x : Hp - x); };
  auto weight = [&](double x) {
    const double u = u_of(x);
    const double w = (*G_)(x) / H_.h(u);
    return std::isfinite(w) ? w : 0.0;
  };
  const double x0 = column ? H_.H(a) - Hp : Hp - H_.H(b);
  const double x1 = column ? H_.H(b) - Hp : Hp - H_.H(a);
  const double lo = std::max(std::min(x0, x1), 0.0), hi = std::max(x0, x1);
  if (!(hi > lo)) return CellMoments{0.0, 0.0};
  const bool sing = singular_on_diagonal();
  auto run = [&](const quad::Integrand& f) {
    return sing ? quad::endpoint_singular(f, lo, hi) : quad::adaptive(f, lo, hi);
  };
  const double m0 = run(weight);
  const double m1 = run([&](double x) { return weight(x) * (u_of(x) - a) / width; });
  return CellMoments{m0, m1};
}

std::optional<CellMoments> TimeChangedKernel::column_moments(double s, double a, double b) const {
  if (a < s) throw DomainError("column integral needs a >= s");
  if (a == b) return CellMoments{0.0, 0.0};
  return substituted(s, a, b, true);
}

double TimeChangedKernel::integrate(double t, double a, double b) const {
  if (H_.kind != TimeChange::Kind::identity) {
    check_cell(t, a, b);
    if (a == b) return 0.0;
    if (const auto m = substituted(t, a, std::min(b, t), false)) return m->m0;
    return DoubleKernel::integrate(t, a, b);
  }
  check_cell(t, a, b);
  if (a == b) return 0.0;
  const double lo = std::max(t - b, 0.0);
  if (singular_on_diagonal() && lo >= 4.0 * (b - a)) {
    return gl8([&](double u) { return (*G_)(t - u); }, a, b);
  }
  return G_->primitive(t - a) - G_->primitive(lo);
}

CellMoments TimeChangedKernel::moments(double t, double a, double b) const {
  if (H_.kind != TimeChange::Kind::identity) {
    check_cell(t, a, b);
    if (a == b) return {0.0, 0.0};
    if (const auto m = substituted(t, a, std::min(b, t), false)) return *m;
    return DoubleKernel::moments(t, a, b);
  }
  check_cell(t, a, b);
  if (a == b) return {0.0, 0.0};
  const double width = b - a;
  const double hi = t - a;
  const double lo = std::max(t - b, 0.0);
  if (singular_on_diagonal() && lo >= 4.0 * width) {
    const double m0 = gl8([&](double u) { return (*G_)(t - u); }, a, b);
    const double m1 = gl8([&](double u) { return (*G_)(t - u) * (u - a); }, a, b) / width;
    return {m0, m1};
  }
  const double m0 = G_->primitive(hi) - G_->primitive(lo);
  const double m1 = (hi * m0 - (G_->first_moment(hi) - G_->first_moment(lo))) / width;
  return {m0, m1};
}

std::string TimeChangedKernel::describe() const {
  if (H_.kind == TimeChange::Kind::identity) return G_->describe();
  return "time_changed(" + G_->describe() + "," + H_.describe() + ")";
}

// ---------------------------------------------------------------------------
// ExponentialProductKernel

ExponentialProductKernel::ExponentialProductKernel(ScalarFn b, ScalarFn c, CumulativeRate R,
                                                   std::optional<double> horizon)
    : DoubleKernel(horizon), b_(b), c_(c), R_(R) {}

double ExponentialProductKernel::value(double t, double s) const {
  return b_(s) * c_(t) * std::exp(-(R_(t) - R_(s)));
}

double ExponentialProductKernel::diagonal(double s) const { return b_(s) * c_(s); }

bool ExponentialProductKernel::is_convolution() const {
  return b_.kind == ScalarFn::Kind::constant && c_.kind == ScalarFn::Kind::constant &&
         R_.kind == CumulativeRate::Kind::linear;
}

std::optional<HolderParams> ExponentialProductKernel::holder_params() const {
  if (!horizon_) return std::nullopt;
  const double T = *horizon_;
  if (R_.kind == CumulativeRate::Kind::power && R_.beta < 1.0) return std::nullopt;
  auto sup2 = [](double x, double y) { return std::max(std::abs(x), std::abs(y)); };
  const double sb = sup2(b_(0.0), b_(T));
  const double sc = sup2(c_(0.0), c_(T));
  double dc = 0.0;
  if (c_.kind == ScalarFn::Kind::affine) dc = std::abs(c_.b);
  if (c_.kind == ScalarFn::Kind::exponential) dc = sup2(c_.a * c_.b, c_.a * c_.b * std::exp(c_.b * T));
  const double r = sup2(R_.density(0.0), R_.density(T));
  return lipschitz_holder(sb * sc, sb * (dc + sc * r), T);
}

std::string ExponentialProductKernel::describe() const {
  return "exp_product(b=" + b_.describe() + ",c=" + c_.describe() + ",R=" + R_.describe() + ")";
}

// ---------------------------------------------------------------------------
// CompletelyMonotoneKernel

CompletelyMonotoneKernel::CompletelyMonotoneKernel(std::vector<Atom> atoms,
                                                   std::optional<double> horizon)
    : DoubleKernel(horizon), atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("completely monotone kernel needs atoms");
  std::stable_sort(atoms_.begin(), atoms_.end(),
                   [](const Atom& x, const Atom& y) { return x.index < y.index; });
  double mass = 0.0;
  for (const auto& a : atoms_) {
    if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) {
      throw std::invalid_argument("completely monotone kernel needs finite nonnegative weights");
    }
    if (!(a.rate.c >= 0.0) || !(a.rate.beta > 0.0)) {
      throw std::invalid_argument("cumulative rates must be nondecreasing");
    }
    mass += a.weight;
  }
  if (!(mass > 0.0)) throw std::invalid_argument("completely monotone kernel needs positive mass");
  // P_{i+1} - P_i nondecreasing, checked on a grid.
  const double span = horizon_.value_or(10.0);
  constexpr int kGrid = 64;
  for (std::size_t i = 0; i + 1 < atoms_.size(); ++i) {
    const auto& p = atoms_[i].rate;
    const auto& q = atoms_[i + 1].rate;
    double prev = 0.0;
    for (int k = 1; k <= kGrid; ++k) {
      const double t = span * k / kGrid;
      const double d = q(t) - p(t);
      if (d < prev - 1e-12 * std::max({1.0, std::abs(q(t)), std::abs(p(t))})) {
        throw std::invalid_argument("atom rates violate the index ordering at t = " + fmt(t));
      }
      prev = d;
    }
  }
}

double CompletelyMonotoneKernel::value(double t, double s) const {
  double acc = 0.0;
  for (const auto& a : atoms_) acc += a.weight * std::exp(-(a.rate(t) - a.rate(s)));
  return acc;
}

double CompletelyMonotoneKernel::diagonal(double) const {
  double acc = 0.0;
  for (const auto& a : atoms_) acc += a.weight;
  return acc;
}

bool CompletelyMonotoneKernel::is_convolution() const {
  return std::all_of(atoms_.begin(), atoms_.end(),
                     [](const Atom& a) { return a.rate.kind == CumulativeRate::Kind::linear; });
}

std::optional<HolderParams> CompletelyMonotoneKernel::holder_params() const {
  double lip = 0.0;
  for (const auto& a : atoms_) {
    if (a.rate.kind == CumulativeRate::Kind::linear) {
      lip += a.weight * a.rate.c;
    } else if (a.rate.kind == CumulativeRate::Kind::power && a.rate.beta >= 1.0 && horizon_) {
      lip += a.weight * a.rate.density(*horizon_);
    } else if (a.rate.kind == CumulativeRate::Kind::exp && horizon_) {
      lip += a.weight * a.rate.density(*horizon_);
    } else {
      return std::nullopt;
    }
  }
  const double T = horizon_.value_or(0.0);
  if (!horizon_ && lip > 0.0) return std::nullopt;
  return lipschitz_holder(diagonal(0.0), lip, T);
}

double CompletelyMonotoneKernel::integrate(double t, double a, double b) const {
  if (!is_convolution()) return DoubleKernel::integrate(t, a, b);
  check_cell(t, a, b);
  double acc = 0.0;
  for (const auto& at : atoms_) {
    const double c = at.rate.c;
    if (c == 0.0) {
      acc += at.weight * (b - a);
    } else {
      acc += at.weight * std::exp(-c * (t - b)) * (-std::expm1(-c * (b - a))) / c;
    }
  }
  return acc;
}

std::string CompletelyMonotoneKernel::describe() const {
  std::string s = "completely_monotone(";
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (i) s += ";";
    s += fmt(atoms_[i].weight) + "@" + fmt(atoms_[i].index) + ":" + atoms_[i].rate.describe();
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// SmoothedKernel

SmoothedKernel::SmoothedKernel(KernelPtr base, int M, double T)
    : DoubleKernel(T), base_(std::move(base)), M_(M), T_(T) {
  if (!base_) throw std::invalid_argument("smooth_kernel needs a kernel");
  if (M < 0 || M > 30) throw std::invalid_argument("smooth_kernel needs 0 <= M <= 30");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("smooth_kernel needs T > 0");
  cells_ = std::size_t{1} << M;
  h_ = T / static_cast<double>(cells_);
}

double SmoothedKernel::tent(double v) const {
  if (v <= 0.0 || v >= 1.0) return 0.0;
  const double k = M_ + 2.0;
  if (v < 1.0 / k) return k * v;
  if (v > 1.0 - 1.0 / k) return k * (1.0 - v);
  return 1.0;
}

std::size_t SmoothedKernel::cell_of(double s) const {
  const double q = std::floor(s / h_);
  if (q <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(q), cells_ - 1);
}

double SmoothedKernel::cell_average(double t, std::size_t i) const {
  const double a = static_cast<double>(i) * h_;
  const double b = std::min(static_cast<double>(i + 1) * h_, t);
  if (!(b > a)) return 0.0;
  return base_->integrate(t, a, b) / h_;
}

double SmoothedKernel::value(double t, double s) const {
  const std::size_t i = cell_of(s);
  const double v = (s - static_cast<double>(i) * h_) / h_;
  const double psi = tent(v);
  if (psi == 0.0) return 0.0;
  return psi * cell_average(t, i);
}

std::optional<HolderParams> SmoothedKernel::holder_params() const {
  const auto p = base_->holder_params();
  if (!p) return std::nullopt;
  return HolderParams{2.0 * p->eta, p->gamma};
}

template <class F>
void SmoothedKernel::for_each_piece(double t, double a, double b, F&& f) const {
  const double k = M_ + 2.0;
  const std::size_t first = cell_of(a);
  for (std::size_t i = first; i < cells_; ++i) {
    const double lo = static_cast<double>(i) * h_;
    if (lo >= b) break;
    const double avg = cell_average(t, i);
    const double knots[4] = {lo, lo + h_ / k, lo + h_ - h_ / k, lo + h_};
    for (int j = 0; j < 3; ++j) {
      const double p = std::max(knots[j], a);
      const double q = std::min(knots[j + 1], b);
      if (q <= p) continue;
      auto g = [&](double u) { return tent((u - lo) / h_) * avg; };
      f(p, q, g);
    }
  }
}

double SmoothedKernel::integrate(double t, double a, double b) const {
  check_cell(t, a, b);
  double acc = 0.0;
  for_each_piece(t, a, b, [&](double p, double q, auto&& g) { acc += 0.5 * (q - p) * (g(p) + g(q)); });
  return acc;
}

CellMoments SmoothedKernel::moments(double t, double a, double b) const {
  check_cell(t, a, b);
  if (a == b) return {0.0, 0.0};
  const double width = b - a;
  CellMoments m{0.0, 0.0};
  for_each_piece(t, a, b, [&](double p, double q, auto&& g) {
    const double mid = 0.5 * (p + q);
    m.m0 += 0.5 * (q - p) * (g(p) + g(q));
    m.m1 += (q - p) / 6.0 *
            (g(p) * (p - a) + 4.0 * g(mid) * (mid - a) + g(q) * (q - a)) / width;
  });
  return m;
}

std::vector<double> SmoothedKernel::breakpoints(double t) const {
  std::vector<double> out;
  const double k = M_ + 2.0;
  for (std::size_t i = 0; i < cells_; ++i) {
    const double lo = static_cast<double>(i) * h_;
    if (lo >= t) break;
    for (double x : {lo, lo + h_ / k, lo + h_ - h_ / k}) {
      if (x > 0.0 && x < t) out.push_back(x);
    }
  }
  for (double x : base_->breakpoints(t)) out.push_back(x);
  std::sort(out.begin(), out.end());
  return out;
}

std::string SmoothedKernel::describe() const {
  return "smoothed(" + base_->describe() + ",M=" + std::to_string(M_) + ",T=" + fmt(T_) + ")";
}

// ---------------------------------------------------------------------------
// ReversedKernel

ReversedKernel::ReversedKernel(KernelPtr base, double T)
    : DoubleKernel(T), base_(std::move(base)), T_(T) {
  if (!base_) throw std::invalid_argument("reverse_kernel needs a kernel");
  if (!(T > 0.0) || !std::isfinite(T)) throw std::invalid_argument("reverse_kernel needs T > 0");
  if (base_->horizon() && *base_->horizon() < T * (1.0 - 1e-12)) {
    throw DomainError("reversal time exceeds the kernel horizon");
  }
}

double ReversedKernel::value(double t, double s) const {
  if (t > T_ * (1.0 + 1e-12)) throw DomainError("reversed kernel evaluated past T");
  const double tt = std::max(T_ - s, 0.0), ss = std::max(T_ - t, 0.0);
  if (ss >= tt) {
    return base_->singular_on_diagonal() ? std::numeric_limits<double>::infinity() : base_->diagonal(tt);
  }
  return base_->eval(tt, ss);
}

double ReversedKernel::diagonal(double s) const { return base_->diagonal(T_ - s); }

std::optional<HolderParams> ReversedKernel::holder_params() const {
  if (base_->is_convolution()) return base_->holder_params();
  return std::nullopt;
}

double ReversedKernel::integrate(double t, double a, double b) const {
  if (!base_->is_convolution()) {
    if (dynamic_cast<const TimeChangedKernel*>(base_.get())) return moments(t, a, b).m0;
    return DoubleKernel::integrate(t, a, b);
  }
  if (t > T_ * (1.0 + 1e-12)) throw DomainError("reversed kernel integrated past T");
  return base_->integrate(t, a, b);
}

CellMoments ReversedKernel::moments(double t, double a, double b) const {
  if (!base_->is_convolution()) {
    check_cell(t, a, b);
    if (const auto* tc = dynamic_cast<const TimeChangedKernel*>(base_.get())) {
      // u -> T - u maps the cell onto a column of the base kernel.
      const double s = std::max(T_ - t, 0.0);
      const double lo = std::max(T_ - std::min(b, t), s);
      if (const auto c = tc->column_moments(s, lo, std::max(T_ - a, lo))) return {c->m0, c->m0 - c->m1};
    }
    return DoubleKernel::moments(t, a, b);
  }
  if (t > T_ * (1.0 + 1e-12)) throw DomainError("reversed kernel integrated past T");
  return base_->moments(t, a, b);
}

std::string ReversedKernel::describe() const {
  return "reversed(" + base_->describe() + ",T=" + fmt(T_) + ")";
}

// ---------------------------------------------------------------------------
// OffsetKernel / ScaledKernel

OffsetKernel::OffsetKernel(KernelPtr base, double c)
    : DoubleKernel(base ? base->horizon() : std::nullopt), base_(std::move(base)), c_(c) {
  if (!base_) throw std::invalid_argument("offset_kernel needs a kernel");
  if (!(c >= 0.0) || !std::isfinite(c)) throw std::invalid_argument("offset must be finite and >= 0");
}

double OffsetKernel::integrate(double t, double a, double b) const {
  return base_->integrate(t, a, b) + c_ * (b - a);
}

CellMoments OffsetKernel::moments(double t, double a, double b) const {
  auto m = base_->moments(t, a, b);
  return {m.m0 + c_ * (b - a), m.m1 + 0.5 * c_ * (b - a)};
}

std::string OffsetKernel::describe() const {
  return "offset(" + base_->describe() + "," + fmt(c_) + ")";
}

ScaledKernel::ScaledKernel(KernelPtr base, double c)
    : DoubleKernel(base ? base->horizon() : std::nullopt), base_(std::move(base)), c_(c) {
  if (!base_) throw std::invalid_argument("scale_kernel needs a kernel");
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("scale must be finite and > 0");
}

std::optional<HolderParams> ScaledKernel::holder_params() const {
  auto p = base_->holder_params();
  if (!p) return std::nullopt;
  return HolderParams{c_ * c_ * p->eta, p->gamma};
}

double ScaledKernel::integrate(double t, double a, double b) const {
  return c_ * base_->integrate(t, a, b);
}

CellMoments ScaledKernel::moments(double t, double a, double b) const {
  auto m = base_->moments(t, a, b);
  return {c_ * m.m0, c_ * m.m1};
}

std::string ScaledKernel::describe() const {
  return "scaled(" + base_->describe() + "," + fmt(c_) + ")";
}

// ---------------------------------------------------------------------------
// Factories

KernelPtr constant_kernel(double c) {
  return std::make_shared<TimeChangedKernel>(std::make_shared<AffineG>(c, 0.0),
                                             TimeChange::identity());
}

KernelPtr affine_kernel(double a, double b) {
  return std::make_shared<TimeChangedKernel>(std::make_shared<AffineG>(a, b),
                                             TimeChange::identity());
}

KernelPtr fractional_kernel(double alpha, TimeChange H, std::optional<double> horizon) {
  return std::make_shared<TimeChangedKernel>(std::make_shared<FractionalG>(alpha), H, horizon);
}

KernelPtr exp_mixture_kernel(std::vector<std::pair<double, double>> weight_rate, TimeChange H,
                             std::optional<double> horizon) {
  return std::make_shared<TimeChangedKernel>(std::make_shared<ExpMixtureG>(std::move(weight_rate)),
                                             H, horizon);
}

std::shared_ptr<const CompletelyMonotoneKernel> fractional_cm_mixture(double alpha, int n_atoms,
                                                                      double rate_min,
                                                                      double rate_max) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("mixture needs alpha in (0, 1)");
  if (n_atoms < 2) throw std::invalid_argument("mixture needs at least two atoms");
  if (!(rate_min > 0.0) || !(rate_max > rate_min)) {
    throw std::invalid_argument("mixture needs 0 < rate_min < rate_max");
  }
  const double norm = std::tgamma(alpha) * std::tgamma(2.0 - alpha);
  std::vector<double> edges{0.0};
  for (int k = 0; k < n_atoms; ++k) {
    edges.push_back(rate_min * std::pow(rate_max / rate_min, static_cast<double>(k) / (n_atoms - 1)));
  }
  std::vector<CompletelyMonotoneKernel::Atom> atoms;
  for (int k = 1; k <= n_atoms; ++k) {
    const double lo = edges[k - 1];
    const double hi = edges[k];
    const double d1 = std::pow(hi, 1.0 - alpha) - std::pow(lo, 1.0 - alpha);
    const double d2 = std::pow(hi, 2.0 - alpha) - std::pow(lo, 2.0 - alpha);
    const double rate = (1.0 - alpha) / (2.0 - alpha) * d2 / d1;
    atoms.push_back({d1 / norm, rate, CumulativeRate::linear(rate)});
  }
  return std::make_shared<CompletelyMonotoneKernel>(std::move(atoms));
}

// ---------------------------------------------------------------------------
// Operations

KernelPtr reverse_kernel(const KernelPtr& kernel, double T) {
  if (auto r = std::dynamic_pointer_cast<const ReversedKernel>(kernel)) {
    if (r->reversal_time() == T) return r->base();
  }
  return std::make_shared<ReversedKernel>(kernel, T);
}

KernelPtr smooth_kernel(const KernelPtr& kernel, int M, double T) {
  return std::make_shared<SmoothedKernel>(kernel, M, T);
}

std::shared_ptr<const CompletelyMonotoneKernel> cm_truncate(const CompletelyMonotoneKernel& kernel,
                                                            double M) {
  if (!(M >= 0.0)) throw std::invalid_argument("cm_truncate needs M >= 0");
  std::vector<CompletelyMonotoneKernel::Atom> kept;
  for (const auto& a : kernel.atoms()) {
    if (std::abs(a.index) <= M && a.weight > 0.0) kept.push_back(a);
  }
  if (kept.empty()) throw EmptyTruncation("no atom has |index| <= " + fmt(M));
  return std::make_shared<CompletelyMonotoneKernel>(std::move(kept), kernel.horizon());
}

KernelPtr offset_kernel(const KernelPtr& kernel, double c) {
  return std::make_shared<OffsetKernel>(kernel, c);
}

KernelPtr scale_kernel(const KernelPtr& kernel, double c) {
  return std::make_shared<ScaledKernel>(kernel, c);
}

double holder_modulus(const DoubleKernel& kernel, double t, double s, int quad_resolution) {
  if (!(s >= 0.0) || !(t > s)) throw DomainError("holder_modulus needs 0 <= s < t");
  const bool sing = kernel.singular_on_diagonal();
  const double delta = t - s;
  auto own = [&](double u) {
    const double v = kernel.value(t, u);
    return v * v;
  };
  const double d1 =
      quad::composite_refined(own, s, t, kernel.breakpoints(t), quad_resolution, sing, 1e-4);
  if (s == 0.0) return d1;
  std::vector<double> breaks = kernel.breakpoints(t);
  for (double x : kernel.breakpoints(s)) breaks.push_back(x);
  for (double d = delta; d < s; d *= 2.0) breaks.push_back(s - d);
  auto diff = [&](double u) {
    const double v = kernel.value(t, u) - kernel.value(s, u);
    return v * v;
  };
  const double d2 = quad::composite_refined(diff, 0.0, s, breaks, quad_resolution, sing, 1e-4);
  return d1 + d2;
}

HolderFit holder_check(const DoubleKernel& kernel, double T,
                       const std::vector<std::pair<double, double>>& grid, int quad_resolution) {
  if (quad_resolution < 64) throw std::invalid_argument("holder_check needs quad_resolution >= 64");
  if (grid.empty()) throw std::invalid_argument("holder_check needs at least one pair");
  HolderFit fit;
  for (const auto& [t, s] : grid) {
    if (!(s >= 0.0) || !(t > s) || t > T) {
      throw DomainError("holder_check pair (" + fmt(t) + ", " + fmt(s) + ") outside the triangle");
    }
    fit.D.push_back(holder_modulus(kernel, t, s, quad_resolution));
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (fit.D[i] > 0.0) {
      xs.push_back(std::log(grid[i].first - grid[i].second));
      ys.push_back(std::log(fit.D[i]));
    }
  }
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  if (n > 0) {
    mx /= n;
    my /= n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  double gamma = 0.5;
  if (n >= 2 && sxx > 1e-14 * n) {
    const double raw = 0.5 * sxy / sxx;
    gamma = std::clamp(raw, 1e-6, 0.5);
    const double intercept = my - 2.0 * gamma * mx;
    fit.gamma_hat = gamma;
    fit.eta_hat = std::exp(intercept);
  }
  double worst = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double delta = grid[i].first - grid[i].second;
    const double r = fit.gamma_hat ? fit.D[i] / std::pow(delta, 2.0 * gamma) : fit.D[i];
    if (r > worst) {
      worst = r;
      fit.worst_pair = grid[i];
    }
  }
  return fit;
}

double l2_distance(const DoubleKernel& a, const DoubleKernel& b, double t, int quad_resolution) {
  if (!(t > 0.0)) return 0.0;
  std::vector<double> breaks = a.breakpoints(t);
  for (double x : b.breakpoints(t)) breaks.push_back(x);
  const bool sing = a.singular_on_diagonal() || b.singular_on_diagonal();
  auto f = [&](double u) {
    const double d = a.value(t, u) - b.value(t, u);
    return d * d;
  };
  return quad::composite_refined(f, 0.0, t, breaks, std::max(quad_resolution, 8), sing, 1e-3);
}

}  // namespace sve
