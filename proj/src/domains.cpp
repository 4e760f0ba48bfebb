#include "sve/domains.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "sve/errors.hpp"

namespace sve {

namespace {

Mat as_matrix(const Vec& x, int n) { return Eigen::Map<const Mat>(x.data(), n, n); }

Vec as_vector(const Mat& m) { return Eigen::Map<const Vec>(m.data(), m.size()); }

std::string vec_str(const Vec& v) {
  std::ostringstream os;
  os.precision(17);
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// ConvexDomain

ConvexDomain::ConvexDomain(Kind kind, int n) : kind_(kind), n_(n) {
  if (n < 1) throw std::invalid_argument("domain dimension must be >= 1");
}

std::string ConvexDomain::name() const {
  switch (kind_) {
    case Kind::orthant:
      return "orthant";
    case Kind::unit_interval_box:
      return "unit_interval_box";
    case Kind::unit_ball:
      return "unit_ball";
    case Kind::psd_cone:
      return "psd_cone";
  }
  return "?";
}

ConvexDomain::Kind parse_domain_kind(const std::string& name) {
  if (name == "orthant") return ConvexDomain::Kind::orthant;
  if (name == "unit_interval_box" || name == "unit_interval") return ConvexDomain::Kind::unit_interval_box;
  if (name == "unit_ball") return ConvexDomain::Kind::unit_ball;
  if (name == "psd_cone") return ConvexDomain::Kind::psd_cone;
  throw UnsupportedDomain("unknown domain kind '" + name + "'");
}

bool ConvexDomain::contains(const Vec& x, double tol) const {
  if (x.size() != dimension()) return false;
  if (!x.allFinite()) return false;
  switch (kind_) {
    case Kind::orthant:
      return x.minCoeff() >= -tol;
    case Kind::unit_interval_box:
      return x.minCoeff() >= -tol && x.maxCoeff() <= 1.0 + tol;
    case Kind::unit_ball:
      return x.norm() <= 1.0 + tol;
    case Kind::psd_cone: {
      const Mat X = as_matrix(x, n_);
      if ((X - X.transpose()).cwiseAbs().maxCoeff() > tol) return false;
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (X + X.transpose()), Eigen::EigenvaluesOnly);
      return es.eigenvalues().minCoeff() >= -tol;
    }
  }
  return false;
}

Vec ConvexDomain::project(const Vec& x) const {
  if (x.size() != dimension()) throw std::invalid_argument("state has the wrong dimension");
  switch (kind_) {
    case Kind::orthant:
      return x.cwiseMax(0.0);
    case Kind::unit_interval_box:
      return x.cwiseMax(0.0).cwiseMin(1.0);
    case Kind::unit_ball: {
      const double r = x.norm();
      return r > 1.0 ? Vec(x / r) : x;
    }
    case Kind::psd_cone: {
      const Mat X = as_matrix(x, n_);
      Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (X + X.transpose()));
      const Vec ev = es.eigenvalues().cwiseMax(0.0);
      const Mat V = es.eigenvectors();
      Mat P = V * ev.asDiagonal() * V.transpose();
      P = 0.5 * (P + P.transpose());
      return as_vector(P);
    }
  }
  return x;
}

void ConvexDomain::project_inplace(Vec& x) const {
  switch (kind_) {
    case Kind::orthant:
      x = x.cwiseMax(0.0);
      return;
    case Kind::unit_interval_box:
      x = x.cwiseMax(0.0).cwiseMin(1.0);
      return;
    default:
      x = project(x);
  }
}

Vec project(const ConvexDomain& domain, const Vec& x) { return domain.project(x); }

std::vector<Vec> ConvexDomain::boundary_samples(std::mt19937_64& rng, int count) const {
  std::vector<Vec> out;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  for (int k = 0; k < count; ++k) {
    switch (kind_) {
      case Kind::orthant: {
        const int face = k % n_;
        Vec x(n_);
        for (int i = 0; i < n_; ++i) x[i] = std::exp(std::log(1e-3) + unif(rng) * std::log(1e4));
        x[face] = 0.0;
        out.push_back(x);
        break;
      }
      case Kind::unit_interval_box: {
        const int face = (k / 2) % n_;
        Vec x(n_);
        for (int i = 0; i < n_; ++i) x[i] = unif(rng);
        x[face] = (k % 2 == 0) ? 0.0 : 1.0;
        out.push_back(x);
        break;
      }
      case Kind::unit_ball: {
        Vec x(n_);
        for (int i = 0; i < n_; ++i) x[i] = normal(rng);
        out.push_back(x / x.norm());
        break;
      }
      case Kind::psd_cone: {
        Mat V(n_, std::max(n_ - 1, 1));
        for (Eigen::Index i = 0; i < V.size(); ++i) V.data()[i] = normal(rng);
        Mat X = n_ == 1 ? Mat::Zero(1, 1) : Mat(V * V.transpose());
        out.push_back(as_vector(X));
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Models

void CoefficientModel::apply_diffusion(const Vec& x, const Vec& dw, Vec& out) const {
  out.noalias() = diffusion(x) * dw;
}

Vec CoefficientModel::drift(const Vec& x) const {
  Vec out(dimension());
  drift(x, out);
  return out;
}

AffineSqrtModel::AffineSqrtModel(Vec b0, Mat B, Vec sigmas)
    : b0_(std::move(b0)), B_(std::move(B)), sigmas_(std::move(sigmas)) {
  const auto d = b0_.size();
  if (d < 1 || B_.rows() != d || B_.cols() != d || sigmas_.size() != d) {
    throw std::invalid_argument("affine parameters have inconsistent dimensions");
  }
  if (!b0_.allFinite() || !B_.allFinite() || !sigmas_.allFinite()) {
    throw std::invalid_argument("affine parameters must be finite");
  }
}

void AffineSqrtModel::drift(const Vec& x, Vec& out) const {
  out = b0_;
  out.noalias() += B_ * x;
}

Mat AffineSqrtModel::diffusion(const Vec& x) const {
  Mat S = Mat::Zero(b0_.size(), b0_.size());
  for (Eigen::Index i = 0; i < b0_.size(); ++i) S(i, i) = sigmas_[i] * std::sqrt(std::max(x[i], 0.0));
  return S;
}

void AffineSqrtModel::apply_diffusion(const Vec& x, const Vec& dw, Vec& out) const {
  out.resize(b0_.size());
  for (Eigen::Index i = 0; i < b0_.size(); ++i) {
    out[i] = sigmas_[i] * std::sqrt(std::max(x[i], 0.0)) * dw[i];
  }
}

double AffineSqrtModel::growth_constant() const { return b0_.norm() + B_.norm() + sigmas_.norm(); }

std::string AffineSqrtModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "affine_sqrt(b0=" << vec_str(b0_) << ",B=" << vec_str(as_vector(B_))
     << ",sigmas=" << vec_str(sigmas_) << ")";
  return os.str();
}

void AffineSqrtModel::check_sign_conditions() const {
  const auto d = b0_.size();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (b0_[i] < 0.0) throw PreconditionViolated("b0 must be componentwise >= 0");
    if (!(sigmas_[i] > 0.0)) throw PreconditionViolated("sigmas must be > 0");
    for (Eigen::Index j = 0; j < d; ++j) {
      if (i != j && B_(i, j) < 0.0) throw PreconditionViolated("B must have nonnegative off-diagonal entries");
    }
  }
}

std::shared_ptr<const AffineSqrtModel> cir_model(double theta, double lambda, double sigma) {
  return std::make_shared<AffineSqrtModel>(Vec::Constant(1, theta), Mat::Constant(1, 1, -lambda),
                                           Vec::Constant(1, sigma));
}

WrightFisherModel::WrightFisherModel(double a, double b, double sigma) : a_(a), b_(b), sigma_(sigma) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(sigma >= 0.0)) {
    throw std::invalid_argument("Wright-Fisher parameters must be finite with sigma >= 0");
  }
}

void WrightFisherModel::drift(const Vec& x, Vec& out) const {
  out.resize(1);
  out[0] = a_ + b_ * x[0];
}

Mat WrightFisherModel::diffusion(const Vec& x) const {
  const double y = std::clamp(x[0], 0.0, 1.0);
  return Mat::Constant(1, 1, sigma_ * std::sqrt(y * (1.0 - y)));
}

double WrightFisherModel::growth_constant() const {
  return std::abs(a_) + std::abs(b_) + 0.5 * sigma_;
}

std::string WrightFisherModel::describe() const {
  std::ostringstream os;
  os.precision(17);
  os << "wright_fisher(a=" << a_ << ",b=" << b_ << ",sigma=" << sigma_ << ")";
  return os.str();
}

Mat psd_sqrt(const Mat& X) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (X + X.transpose()));
  const Vec ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

WishartModel::WishartModel(Mat alpha, Mat M, Mat Q)
    : alpha_(std::move(alpha)), M_(std::move(M)), Q_(std::move(Q)) {
  const auto n = alpha_.rows();
  if (n < 1 || alpha_.cols() != n || M_.rows() != n || M_.cols() != n || Q_.rows() != n ||
      Q_.cols() != n) {
    throw std::invalid_argument("Wishart parameters must be square of equal size");
  }
}

void WishartModel::drift(const Vec& x, Vec& out) const {
  const Mat X = as_matrix(x, size());
  out = as_vector(alpha_ + M_ * X + X * M_.transpose());
}

Mat WishartModel::diffusion(const Vec& x) const {
  const int n = size();
  Mat S(n * n, n * n);
  Vec e = Vec::Zero(n * n);
  Vec col;
  for (int k = 0; k < n * n; ++k) {
    e.setZero();
    e[k] = 1.0;
    apply_diffusion(x, e, col);
    S.col(k) = col;
  }
  return S;
}

void WishartModel::apply_diffusion(const Vec& x, const Vec& dw, Vec& out) const {
  const int n = size();
  const Mat R = psd_sqrt(as_matrix(x, n));
  const Mat W = as_matrix(dw, n);
  const Mat Y = R * W * Q_;
  out = as_vector(Y + Y.transpose());
}

double WishartModel::growth_constant() const {
  return alpha_.norm() + 2.0 * M_.norm() + 2.0 * std::sqrt(static_cast<double>(size())) * Q_.norm();
}

std::string WishartModel::describe() const {
  return "wishart(alpha=" + vec_str(as_vector(alpha_)) + ",M=" + vec_str(as_vector(M_)) +
         ",Q=" + vec_str(as_vector(Q_)) + ")";
}

ConstantModel::ConstantModel(Vec b, Mat S) : b_(std::move(b)), S_(std::move(S)) {
  if (S_.rows() != b_.size() || S_.cols() != b_.size()) {
    throw std::invalid_argument("constant model needs a d x d diffusion");
  }
}

std::string ConstantModel::describe() const {
  return "constant(b=" + vec_str(b_) + ",S=" + vec_str(as_vector(S_)) + ")";
}

// ---------------------------------------------------------------------------
// Validators

InvarianceReport validate_invariance_conditions(const ConvexDomain& domain,
                                                const CoefficientModel& model,
                                                const std::vector<double>& lambda_set,
                                                int n_boundary_samples, std::uint64_t rng_seed) {
  if (model.dimension() != domain.dimension()) {
    throw std::invalid_argument("model and domain dimensions differ");
  }
  for (double l : lambda_set) {
    if (!(l > 0.0)) throw std::invalid_argument("lambda values must be > 0");
  }
  InvarianceReport report;
  std::mt19937_64 rng(rng_seed);
  const int d = domain.dimension();

  auto record = [](ConditionResult& c, double violation, const Vec& x) {
    if (violation > c.worst_violation) {
      c.worst_violation = violation;
      c.worst_point = x;
    }
    if (violation > 0.0) c.passed = false;
  };

  switch (domain.kind()) {
    case ConvexDomain::Kind::orthant:
    case ConvexDomain::Kind::unit_interval_box: {
      const bool box = domain.kind() == ConvexDomain::Kind::unit_interval_box;
      const int faces = box ? 2 * d : d;
      std::vector<ConditionResult> drift_c(faces), diff_c(faces);
      for (int f = 0; f < faces; ++f) {
        const int i = box ? f / 2 : f;
        const std::string where = "x_" + std::to_string(i) + (box && f % 2 ? " = 1" : " = 0");
        drift_c[f].name = "drift points inward on " + where;
        diff_c[f].name = "diffusion row vanishes on " + where;
      }
      const int count = std::max(n_boundary_samples, 1) * (box ? 2 : 1);
      Vec b(d);
      for (const Vec& x : domain.boundary_samples(rng, count * d)) {
        model.drift(x, b);
        const Mat S = model.diffusion(x);
        for (int i = 0; i < d; ++i) {
          if (x[i] == 0.0) {
            const int f = box ? 2 * i : i;
            record(drift_c[f], std::max(0.0, -b[i]), x);
            record(diff_c[f], S.row(i).cwiseAbs().maxCoeff(), x);
          } else if (box && x[i] == 1.0) {
            const int f = 2 * i + 1;
            record(drift_c[f], std::max(0.0, b[i]), x);
            record(diff_c[f], S.row(i).cwiseAbs().maxCoeff(), x);
          }
        }
      }
      for (int f = 0; f < faces; ++f) {
        report.conditions.push_back(drift_c[f]);
        report.conditions.push_back(diff_c[f]);
      }
      break;
    }
    case ConvexDomain::Kind::psd_cone: {
      const auto w = model.wishart_params();
      if (!w) throw UnsupportedDomain("psd_cone validation needs Wishart parameters");
      const int n = domain.size();
      const Mat QQ = w->Q * w->Q.transpose();
      for (double lambda : lambda_set) {
        ConditionResult c;
        c.name = "alpha - lambda (n - 1) Q Q^T is positive semidefinite";
        c.lambda = lambda;
        const Mat A = w->alpha - lambda * (n - 1) * QQ;
        Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly);
        const double m = es.eigenvalues().minCoeff();
        if (m < -1e-12) {
          c.passed = false;
          c.worst_violation = -m;
        }
        report.conditions.push_back(c);
      }
      ConditionResult sym;
      sym.name = "alpha is symmetric";
      const double asym = (w->alpha - w->alpha.transpose()).cwiseAbs().maxCoeff();
      if (asym > 1e-12) {
        sym.passed = false;
        sym.worst_violation = asym;
      }
      report.conditions.push_back(sym);
      break;
    }
    case ConvexDomain::Kind::unit_ball:
      throw UnsupportedDomain("no invariance validator for the unit ball");
  }
  report.passed = std::all_of(report.conditions.begin(), report.conditions.end(),
                              [](const ConditionResult& c) { return c.passed; });
  return report;
}

}  // namespace sve
