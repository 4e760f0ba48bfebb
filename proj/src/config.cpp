#include "sve/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sve/errors.hpp"

namespace sve {

namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::string t = s;
  for (char& c : t) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(t);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected a number, got '" + v + "'");
  }
}

long long to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': expected an integer, got '" + v + "'");
  }
}

Vec to_vec(const std::string& key, const std::string& v) {
  const auto w = words(v);
  if (w.empty()) throw ConfigError("'" + key + "': empty vector");
  Vec out(static_cast<Eigen::Index>(w.size()));
  for (std::size_t i = 0; i < w.size(); ++i) out[static_cast<Eigen::Index>(i)] = to_double(key, w[i]);
  return out;
}

/// Rows separated by ';'.
Mat to_mat(const std::string& key, const std::string& v) {
  const auto rows = split(v, ';');
  if (rows.empty()) throw ConfigError("'" + key + "': empty matrix");
  std::vector<Vec> r;
  for (const auto& row : rows) r.push_back(to_vec(key, row));
  Mat out(static_cast<Eigen::Index>(r.size()), r[0].size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i].size() != out.cols()) throw ConfigError("'" + key + "': ragged matrix");
    out.row(static_cast<Eigen::Index>(i)) = r[i].transpose();
  }
  return out;
}

ScalarFn to_scalar_fn(const std::string& key, const std::string& v) {
  const auto w = words(v);
  if (w.empty()) throw ConfigError("'" + key + "': empty function");
  auto arg = [&](std::size_t i) { return i < w.size() ? to_double(key, w[i]) : 0.0; };
  if (w[0] == "constant" && w.size() == 2) return ScalarFn::constant(arg(1));
  if (w[0] == "affine" && w.size() == 3) return ScalarFn::affine(arg(1), arg(2));
  if (w[0] == "exponential" && w.size() == 3) return ScalarFn::exponential(arg(1), arg(2));
  throw ConfigError("'" + key + "': expected 'constant a', 'affine a b' or 'exponential a b'");
}

CumulativeRate to_rate(const std::string& key, const std::vector<std::string>& w, std::size_t at) {
  if (w.size() <= at) throw ConfigError("'" + key + "': missing rate tag");
  const std::string& tag = w[at];
  const std::size_t left = w.size() - at - 1;
  if (tag == "linear" && left == 1) return CumulativeRate::linear(to_double(key, w[at + 1]));
  if (tag == "exp" && left == 1) return CumulativeRate::exp(to_double(key, w[at + 1]));
  if (tag == "power" && left == 2) {
    return CumulativeRate::power(to_double(key, w[at + 1]), to_double(key, w[at + 2]));
  }
  throw ConfigError("'" + key + "': expected 'linear c', 'exp c' or 'power c beta'");
}

class Reader {
 public:
  Reader(const pt::ptree& tree, const std::string& section,
         std::initializer_list<const char*> allowed)
      : section_(section) {
    const auto node = tree.get_child_optional(section);
    if (!node) return;
    present_ = true;
    node_ = *node;
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& kv : node_) {
      if (!ok.count(kv.first)) throw ConfigError("unknown key '" + kv.first + "' in [" + section + "]");
    }
  }

  std::optional<std::string> get(const std::string& key) const {
    if (!present_) return std::nullopt;
    const auto v = node_.get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }
  std::string name(const std::string& key) const { return section_ + "." + key; }

  void str(const std::string& key, std::string& out) const {
    if (auto v = get(key)) out = *v;
  }
  void num(const std::string& key, double& out) const {
    if (auto v = get(key)) out = to_double(name(key), *v);
  }
  template <class I>
  void integer(const std::string& key, I& out) const {
    if (auto v = get(key)) {
      const long long x = to_int(name(key), *v);
      if (x < 0 && std::is_unsigned_v<I>) throw ConfigError("'" + name(key) + "' must be >= 0");
      out = static_cast<I>(x);
    }
  }
  void vec(const std::string& key, Vec& out) const {
    if (auto v = get(key)) out = to_vec(name(key), *v);
  }
  void mat(const std::string& key, Mat& out) const {
    if (auto v = get(key)) out = to_mat(name(key), *v);
  }

 private:
  std::string section_;
  bool present_ = false;
  pt::ptree node_;
};

}  // namespace

RunConfig parse_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config syntax: ") + e.what());
  }

  static const std::set<std::string> sections{"kernel", "model",      "domain", "initial",
                                              "scheme", "riccati", "positivity", "holder"};
  std::optional<std::string> version;
  for (const auto& kv : tree) {
    if (sections.count(kv.first)) continue;
    if (kv.first != "schema_version" || !kv.second.empty()) {
      throw ConfigError("unknown key or section '" + kv.first + "'");
    }
    version = trim(kv.second.data());
  }
  if (!version) throw ConfigError("missing schema_version");
  if (to_int("schema_version", *version) != RunConfig::kSchemaVersion) {
    throw ConfigError("unsupported schema_version " + *version);
  }

  RunConfig cfg;
  {
    const Reader r(tree, "kernel",
                   {"family", "value", "a", "b", "alpha", "time_change", "time_change_beta",
                    "time_change_shift", "terms", "atoms", "b_fn", "c_fn", "rate", "n_atoms",
                    "smooth_level", "offset", "scale", "horizon"});
    auto& k = cfg.kernel;
    r.str("family", k.family);
    r.num("value", k.value);
    r.num("a", k.a);
    r.num("b", k.b);
    r.num("alpha", k.alpha);
    r.str("time_change", k.time_change);
    r.num("time_change_beta", k.time_change_beta);
    r.num("time_change_shift", k.time_change_shift);
    if (auto v = r.get("terms")) {
      for (const auto& t : split(*v, ';')) {
        const auto w = words(t);
        if (w.size() != 2) throw ConfigError("'kernel.terms': expected 'weight rate; ...'");
        k.terms.emplace_back(to_double("kernel.terms", w[0]), to_double("kernel.terms", w[1]));
      }
    }
    if (auto v = r.get("atoms")) {
      for (const auto& t : split(*v, ';')) {
        const auto w = words(t);
        if (w.size() < 3) throw ConfigError("'kernel.atoms': expected 'weight index rate...; ...'");
        k.atoms.push_back({to_double("kernel.atoms", w[0]), to_double("kernel.atoms", w[1]),
                           to_rate("kernel.atoms", w, 2)});
      }
    }
    if (auto v = r.get("b_fn")) k.b_fn = to_scalar_fn("kernel.b_fn", *v);
    if (auto v = r.get("c_fn")) k.c_fn = to_scalar_fn("kernel.c_fn", *v);
    if (auto v = r.get("rate")) k.rate = to_rate("kernel.rate", words(*v), 0);
    r.integer("n_atoms", k.n_atoms);
    r.integer("smooth_level", k.smooth_level);
    r.num("offset", k.offset);
    r.num("scale", k.scale);
    if (auto v = r.get("horizon")) k.horizon = to_double("kernel.horizon", *v);
  }
  {
    const Reader r(tree, "model",
                   {"family", "theta", "lambda", "sigma", "b0", "B", "sigmas", "a", "b", "alpha", "M",
                    "Q", "drift", "S"});
    auto& m = cfg.model;
    r.str("family", m.family);
    r.num("theta", m.theta);
    r.num("lambda", m.lambda);
    r.num("sigma", m.sigma);
    r.vec("b0", m.b0);
    r.mat("B", m.B);
    r.vec("sigmas", m.sigmas);
    r.num("a", m.wf_a);
    r.num("b", m.wf_b);
    r.mat("alpha", m.alpha);
    r.mat("M", m.M);
    r.mat("Q", m.Q);
    if (auto v = r.get("drift")) m.b0 = to_vec("model.drift", *v);
    r.mat("S", m.S);
  }
  {
    const Reader r(tree, "domain", {"kind", "size"});
    r.str("kind", cfg.domain.kind);
    r.integer("size", cfg.domain.size);
  }
  {
    const Reader r(tree, "initial", {"x0"});
    r.vec("x0", cfg.x0);
  }
  {
    const Reader r(tree, "scheme",
                   {"n_steps", "horizon", "inner_substeps", "variant", "domain_mode", "check_weights",
                    "seed", "n_paths"});
    auto& s = cfg.scheme;
    r.integer("n_steps", s.n_steps);
    r.num("horizon", s.horizon);
    r.integer("inner_substeps", s.inner_substeps);
    try {
      if (auto v = r.get("variant")) s.variant = parse_variant(*v);
      if (auto v = r.get("domain_mode")) s.domain_mode = parse_domain_mode(*v);
      if (auto v = r.get("check_weights")) s.check_weights = parse_check_weights(*v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    r.integer("seed", s.seed);
    r.integer("n_paths", cfg.n_paths);
  }
  {
    const Reader r(tree, "riccati", {"grid_steps", "max_picard_iters", "tol", "weight_mode", "f"});
    auto& q = cfg.riccati;
    r.integer("grid_steps", q.grid_steps);
    r.integer("max_picard_iters", q.max_picard_iters);
    r.num("tol", q.tol);
    if (auto v = r.get("weight_mode")) {
      if (*v == "closed_form") {
        q.weight_mode = WeightMode::closed_form;
      } else if (*v == "adaptive_quadrature") {
        q.weight_mode = WeightMode::adaptive_quadrature;
      } else {
        throw ConfigError("'riccati.weight_mode': expected closed_form or adaptive_quadrature");
      }
    }
    r.vec("f", q.f);
  }
  {
    const Reader r(tree, "positivity", {"max_order", "n_samples", "tol"});
    r.integer("max_order", cfg.positivity.max_order);
    r.integer("n_samples", cfg.positivity.n_samples);
    r.num("tol", cfg.positivity.tol);
  }
  {
    const Reader r(tree, "holder", {"exponents", "quad_resolution"});
    if (auto v = r.get("exponents")) {
      const Vec e = to_vec("holder.exponents", *v);
      cfg.holder.exponents.assign(e.data(), e.data() + e.size());
    }
    r.integer("quad_resolution", cfg.holder.quad_resolution);
  }
  try {
    cfg.scheme.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (cfg.riccati.grid_steps < 1) throw ConfigError("'riccati.grid_steps' must be >= 1");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

TimeChange build_time_change(const RunConfig::Kernel& spec) {
  if (spec.time_change == "identity") return TimeChange::identity();
  if (spec.time_change == "exp") return TimeChange::exponential();
  if (spec.time_change == "power") return TimeChange::power(spec.time_change_beta);
  if (spec.time_change == "affine_power") {
    return TimeChange::affine_power(spec.time_change_beta, spec.time_change_shift);
  }
  throw ConfigError("unknown time_change '" + spec.time_change + "'");
}

KernelPtr build_kernel(const RunConfig::Kernel& spec, double T) {
  const std::optional<double> horizon = spec.horizon ? spec.horizon : std::optional<double>(T);
  KernelPtr k;
  const std::string& f = spec.family;
  if (f == "constant") {
    k = constant_kernel(spec.value);
  } else if (f == "affine") {
    k = affine_kernel(spec.a, spec.b);
  } else if (f == "fractional") {
    k = fractional_kernel(spec.alpha, build_time_change(spec), horizon);
  } else if (f == "exp_mixture") {
    if (spec.terms.empty()) throw ConfigError("exp_mixture needs kernel.terms");
    k = exp_mixture_kernel(spec.terms, build_time_change(spec), horizon);
  } else if (f == "exponential_product") {
    k = std::make_shared<ExponentialProductKernel>(spec.b_fn, spec.c_fn, spec.rate, horizon);
  } else if (f == "completely_monotone") {
    if (spec.atoms.empty()) throw ConfigError("completely_monotone needs kernel.atoms");
    k = std::make_shared<CompletelyMonotoneKernel>(spec.atoms, horizon);
  } else if (f == "fractional_cm") {
    k = fractional_cm_mixture(spec.alpha, spec.n_atoms);
  } else {
    throw ConfigError("unknown kernel family '" + f + "'");
  }
  if (spec.smooth_level > 0) k = smooth_kernel(k, spec.smooth_level, T);
  if (spec.scale != 1.0) k = scale_kernel(k, spec.scale);
  if (spec.offset != 0.0) k = offset_kernel(k, spec.offset);
  return k;
}

ModelPtr build_model(const RunConfig::Model& m) {
  if (m.family == "cir") return cir_model(m.theta, m.lambda, m.sigma);
  if (m.family == "affine_sqrt") {
    if (m.b0.size() == 0) throw ConfigError("affine_sqrt needs model.b0");
    const auto d = m.b0.size();
    const Mat B = m.B.size() ? m.B : Mat::Zero(d, d);
    const Vec s = m.sigmas.size() ? m.sigmas : Vec::Zero(d);
    if (B.rows() != d || B.cols() != d || s.size() != d) throw ConfigError("affine_sqrt dimensions disagree");
    return std::make_shared<AffineSqrtModel>(m.b0, B, s);
  }
  if (m.family == "wright_fisher") return std::make_shared<WrightFisherModel>(m.wf_a, m.wf_b, m.sigma);
  if (m.family == "wishart") {
    if (m.alpha.size() == 0 || m.M.size() == 0 || m.Q.size() == 0) {
      throw ConfigError("wishart needs model.alpha, model.M and model.Q");
    }
    return std::make_shared<WishartModel>(m.alpha, m.M, m.Q);
  }
  if (m.family == "constant") {
    if (m.b0.size() == 0) throw ConfigError("constant model needs model.drift");
    const Mat S = m.S.size() ? m.S : Mat::Zero(m.b0.size(), m.b0.size());
    return std::make_shared<ConstantModel>(m.b0, S);
  }
  throw ConfigError("unknown model family '" + m.family + "'");
}

ConvexDomain build_domain(const RunConfig::Domain& spec) {
  if (spec.size < 1) throw ConfigError("domain.size must be >= 1");
  try {
    switch (parse_domain_kind(spec.kind)) {
      case ConvexDomain::Kind::orthant:
        return ConvexDomain::orthant(spec.size);
      case ConvexDomain::Kind::unit_interval_box:
        return ConvexDomain::unit_interval_box(spec.size);
      case ConvexDomain::Kind::unit_ball:
        return ConvexDomain::unit_ball(spec.size);
      case ConvexDomain::Kind::psd_cone:
        return ConvexDomain::psd_cone(spec.size);
    }
  } catch (const UnsupportedDomain& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown domain kind");
}

RiccatiConfig build_riccati_config(const RunConfig& cfg) {
  RiccatiConfig rc = RiccatiConfig::uniform(cfg.scheme.horizon, cfg.riccati.grid_steps);
  rc.max_picard_iters = cfg.riccati.max_picard_iters;
  rc.tol = cfg.riccati.tol;
  rc.weight_mode = cfg.riccati.weight_mode;
  return rc;
}

}  // namespace sve
