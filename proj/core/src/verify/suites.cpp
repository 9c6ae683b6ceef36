// SPDX-License-Identifier: Apache-2.0
#include "f3/verify/suites.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include "f3/alignment/alignment.hpp"
#include "f3/federation/parallel.hpp"
#include "f3/globalmodel/global_model.hpp"
#include "f3/localmodels/embedding.hpp"
#include "f3/numcore/autodiff.hpp"
#include "f3/numcore/errors.hpp"
#include "f3/numcore/gradcheck.hpp"
#include "f3/numcore/ops.hpp"
#include "f3/numcore/rng.hpp"

namespace f3 {

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string method_name(SamplerKind m, ReferenceKind r) {
  if (m == SamplerKind::gumbel) return "gumbel";
  return "icdf_" + std::string(to_string(r));
}

double draw(SamplerKind m, double theta, double tau, const ReferenceDistribution& ref, DrawStream& s) {
  return m == SamplerKind::icdf ? icdf_sample(theta, tau, ref, s) : gumbel_sample(theta, tau, s);
}

double draw_logit(SamplerKind m, double theta, double tau, const ReferenceDistribution& ref, DrawStream& s) {
  return m == SamplerKind::icdf ? icdf_sample_logit(theta, tau, ref, s) : gumbel_sample_logit(theta, tau, s);
}

double analytic_cdf(SamplerKind m, double t, double theta, double tau, const ReferenceDistribution& ref) {
  return m == SamplerKind::icdf ? icdf_cdf(t, theta, tau, ref) : gumbel_cdf(t, theta, tau);
}

double analytic_cdf_logit(SamplerKind m, double w, double theta, double tau, const ReferenceDistribution& ref) {
  return m == SamplerKind::icdf ? icdf_cdf_logit(w, theta, tau, ref) : gumbel_cdf_logit(w, theta, tau);
}

// Kolmogorov distance between a sorted sample and a continuous CDF. The
// supremum is attained at a sample point, on one side of the jump.
double ks_distance(const std::vector<double>& sorted, const auto& cdf) {
  const auto n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i + 1) / n), std::abs(f - static_cast<double>(i) / n)});
  }
  return d;
}

Matrix random_matrix(std::size_t r, std::size_t c, const CounterRng& rng, std::uint64_t stream, double lo = -1.0,
                     double hi = 1.0) {
  Matrix m(r, c);
  for (std::size_t k = 0; k < m.size(); ++k) m[k] = lo + (hi - lo) * rng.uniform(stream, k);
  return m;
}

std::vector<std::size_t> random_permutation(std::size_t n, const CounterRng& rng, std::uint64_t stream) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform(stream, i) * static_cast<double>(i));
    std::swap(p[i - 1], p[std::min(j, i - 1)]);
  }
  return p;
}

int first_below(const SinkhornDiagnostics& d, double tol) {
  for (std::size_t j = 0; j < d.residual.size(); ++j) {
    if (d.residual[j] < tol) return static_cast<int>(j);
  }
  return -1;
}

}  // namespace

// ---- CDF ----

CdfSuite cdf_suite(const CdfSuiteOptions& opt) {
  CdfSuite out;
  std::uint64_t stream_id = 0;
  auto run = [&](SamplerKind method, ReferenceKind rk, double theta, double tau) {
    const ReferenceDistribution ref(rk);
    const std::uint64_t id = stream_id++;
    DrawStream stream(opt.seed, id);
    DrawStream replay(opt.seed, id);
    // The distance is taken on the logit scale, where the law is resolvable
    // even when z itself rounds to 0 or 1; sup-norms agree under the monotone map.
    std::vector<double> w(opt.samples), z(opt.samples);
    CdfCase c{.method = method, .reference = rk, .theta = theta, .tau = tau, .samples = opt.samples};
    for (std::size_t k = 0; k < w.size(); ++k) {
      w[k] = draw_logit(method, theta, tau, ref, stream);
      z[k] = draw(method, theta, tau, ref, replay);
      c.sampler_mismatch = std::max(c.sampler_mismatch, std::abs(z[k] - sigmoid(w[k])));
    }
    std::sort(w.begin(), w.end());
    std::sort(z.begin(), z.end());
    const auto F = [&](double t) { return analytic_cdf(method, t, theta, tau, ref); };
    c.sup_norm = ks_distance(w, [&](double x) { return analytic_cdf_logit(method, x, theta, tau, ref); });
    if (method == SamplerKind::icdf && ref.bounded()) {
      const double q = ref.inverse_cdf(theta);
      c.bounded = true;
      c.support_lo = sigmoid((q - ref.upper()) / tau);
      c.support_hi = sigmoid((q - ref.lower()) / tau);
      const double eps = 1e-9;
      c.boundary_ok = F(c.support_lo - eps) == 0.0 && F(0.0) == 0.0 && F(c.support_hi + eps) == 1.0 &&
                      F(1.0) == 1.0 && z.front() >= c.support_lo && z.back() <= c.support_hi;
    }
    out.cases.push_back(c);

    for (std::size_t j = 0; j < opt.grid; ++j) {
      const double t = static_cast<double>(j) / static_cast<double>(opt.grid - 1);
      const auto below = std::upper_bound(z.begin(), z.end(), t) - z.begin();
      out.rows.push_back({method, rk, theta, tau, t, F(t), static_cast<double>(below) / static_cast<double>(z.size())});
    }
  };

  for (SamplerKind method : opt.methods) {
    for (double theta : opt.thetas) {
      for (double tau : opt.taus) {
        if (method == SamplerKind::gumbel) {
          run(method, ReferenceKind::standard_normal, theta, tau);
        } else {
          for (ReferenceKind rk : opt.references) run(method, rk, theta, tau);
        }
      }
    }
  }
  return out;
}

double CdfSuite::worst() const {
  double w = 0.0;
  for (const auto& c : cases) w = std::max(w, c.sup_norm);
  return w;
}

std::string CdfSuite::csv() const {
  std::ostringstream os;
  os << "method,theta,tau,t,analytic_cdf,empirical_cdf\n";
  for (const auto& r : rows) {
    os << method_name(r.method, r.reference) << ',' << g17(r.theta) << ',' << g17(r.tau) << ',' << g17(r.t) << ','
       << g17(r.analytic) << ',' << g17(r.empirical) << '\n';
  }
  return os.str();
}

// ---- bias ----

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("ls_slope: need at least two paired points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ContractError("ls_slope: x values are all equal");
  return sxy / sxx;
}

BiasSuite bias_suite(const BiasSuiteOptions& opt) {
  struct Job {
    SamplerKind method;
    double theta, tau;
  };
  std::vector<Job> jobs;
  for (SamplerKind m : opt.methods)
    for (double th : opt.thetas)
      for (double tau : opt.taus) jobs.push_back({m, th, tau});

  BiasSuite out;
  out.rows.resize(jobs.size());
  parallel_for(jobs.size(), opt.threads, [&](std::size_t k) {
    const Job& j = jobs[k];
    const BiasEstimate e = empirical_bias(j.theta, j.tau, j.method, opt.samples, hash_keys(opt.seed, k), opt.estimator);
    const BiasMethod bm = j.method == SamplerKind::icdf ? BiasMethod::icdf_normal : BiasMethod::gumbel;
    out.rows[k] = BiasRow{j.method, j.theta, j.tau, analytic_bias(j.theta, j.tau, bm), e.bias, e.std_error, e.samples};
  });

  if (opt.fit_rate && opt.taus.size() >= 2) {
    for (SamplerKind m : opt.methods) {
      for (double th : opt.thetas) {
        std::vector<double> x, y;
        for (const auto& r : out.rows) {
          if (r.method != m || r.theta != th || r.empirical == 0.0) continue;
          x.push_back(std::log(r.tau));
          y.push_back(std::log(std::abs(r.empirical)));
        }
        RateFit f{m, th, std::numeric_limits<double>::quiet_NaN()};
        if (x.size() >= 2) f.slope = ls_slope(x, y);
        out.fits.push_back(f);
      }
    }
  }
  return out;
}

const BiasRow* BiasSuite::find(SamplerKind method, double theta, double tau) const {
  for (const auto& r : rows) {
    if (r.method == method && r.theta == theta && r.tau == tau) return &r;
  }
  return nullptr;
}

std::string BiasSuite::csv() const {
  std::ostringstream os;
  os << "method,theta,tau,analytic_bias,empirical_bias,stderr\n";
  for (const auto& r : rows) {
    os << to_string(r.method) << ',' << g17(r.theta) << ',' << g17(r.tau) << ',' << g17(r.analytic) << ','
       << g17(r.empirical) << ',' << g17(r.std_error) << '\n';
  }
  return os.str();
}

// ---- Sinkhorn ----

SinkhornSuite sinkhorn_suite(const SinkhornSuiteOptions& opt) {
  SinkhornSuite out;
  const CounterRng rng(opt.seed);
  const std::size_t n = opt.n;

  auto add = [&](std::string name, const Matrix& K0, std::size_t iters) {
    SinkhornCase c;
    c.name = std::move(name);
    c.diagnostics = sinkhorn(K0, iters).diagnostics;
    c.fit = fit_decay_rate(c.diagnostics);
    c.mean_ratio = mean_decay_ratio(c.diagnostics);
    c.first_below_1e8 = first_below(c.diagnostics, 1e-8);
    out.cases.push_back(std::move(c));
  };

  // Log-normal entries: strictly positive with enough spread that the
  // residual decays over many iterations instead of collapsing in a few.
  Matrix K0(n, n);
  for (std::size_t k = 0; k < K0.size(); ++k) {
    const double u1 = rng.uniform(1, 2 * k), u2 = rng.uniform(1, 2 * k + 1);
    const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    K0[k] = std::exp(opt.spread * g);
  }
  add("random_positive", K0, opt.iterations);

  const auto p = random_permutation(n, rng, 2);
  Matrix near(n, n);
  for (std::size_t k = 0; k < near.size(); ++k) near[k] = opt.epsilon * rng.uniform(3, k);
  for (std::size_t i = 0; i < n; ++i) near(i, p[i]) += 1.0;
  add("near_permutation", near, opt.slow_iterations);
  return out;
}

std::string SinkhornSuite::csv() const {
  std::ostringstream os;
  os << "case,iteration,residual\n";
  for (const auto& c : cases) {
    for (std::size_t j = 0; j < c.diagnostics.residual.size(); ++j) {
      os << c.name << ',' << j << ',' << g17(c.diagnostics.residual[j]) << '\n';
    }
  }
  return os.str();
}

// ---- permutation invariance ----

PermutationSuite permutation_suite(std::size_t trials, std::uint64_t seed) {
  PermutationSuite out;
  out.trials = trials;
  const CounterRng rng(seed);
  const std::size_t d = 16, classes = 3, rows = 5;
  for (std::size_t t = 0; t < trials; ++t) {
    const bool gru = t % 2 == 1;
    const std::size_t in = gru ? 2 : 8;
    const Embedding e = gru ? Embedding(GruEmbedding::init(in, d, hash_keys(seed, t)))
                            : Embedding(FcEmbedding::init(in, d, hash_keys(seed, t)));
    const Head head = Head::init(d, classes, hash_keys(seed, t, 1));
    const Matrix x = random_matrix(rows, gru ? in * 12 : in, rng, 2 * t, -2.0, 2.0);
    const auto p = random_permutation(d, rng, 2 * t + 1);

    const Matrix h = embed(e, x);
    const auto [pe, ph] = permute(e, head, p);
    const Matrix hp = embed(pe, x);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < d; ++i) {
        out.max_latent_diff = std::max(out.max_latent_diff, std::abs(hp(r, i) - h(r, p[i])));
      }
    }
    out.max_prob_diff = std::max(out.max_prob_diff, max_abs_diff(head_probs(head, h), head_probs(ph, hp)));
  }
  return out;
}

// ---- gradient ----

GradientSuite gradient_suite(std::uint64_t seed) {
  const std::size_t n = 4, m = 8, d = 3, classes = 2;
  const CounterRng rng(seed);

  GlobalModelConfig cfg;
  cfg.hidden = 4;
  cfg.classes = classes;
  cfg.skip = true;
  cfg.graph = GraphMode::icdf;
  cfg.posterior.tau = 0.5;
  GlobalModel gm = GlobalModel::create(cfg, AlignmentSet::create(AlignmentMode::soft, n, d, d, hash_keys(seed, 1), 0.3),
                                       hash_keys(seed, 2));
  // Move the edge logits off zero so every edge has a distinct gradient.
  for (std::size_t k = 0; k < gm.posterior().logits().size(); ++k) {
    gm.posterior().logits()[k] = 2.0 * rng.uniform(9, k) - 1.0;
  }

  std::vector<Matrix> latents;
  for (std::size_t i = 0; i < n; ++i) latents.push_back(random_matrix(m, d, rng, 10 + i));
  for (std::size_t c = 0; c < d; ++c) latents[1](5, c) = 0.0;  // a missing client row
  std::vector<int> labels(m);
  for (std::size_t k = 0; k < m; ++k) labels[k] = static_cast<int>(k % classes);
  const EdgeNoise noise = gm.posterior().draw_noise(hash_keys(seed, 3), 1);

  std::vector<Matrix> start;
  for (const Matrix* p : std::as_const(gm).parameters()) start.push_back(*p);

  const ScalarFn f = [&](Tape& tape, std::span<const Var> params) {
    std::vector<Var> lat;
    for (const Matrix& l : latents) lat.push_back(tape.constant(l));
    const Var graph = gm.graph_from_noise(params, noise);
    return cross_entropy(softmax_rows(gm.logits(params, lat, graph)), labels);
  };
  const GradCheckReport rep = grad_check(f, start, 1e-4);

  GradientSuite out;
  out.max_rel_error = rep.worst();
  out.parameters = start.size();
  for (const Matrix& s : start) out.entries += s.size();
  return out;
}

// ---- JSON ----

nlohmann::json to_json(const CdfSuite& s) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : s.cases) {
    nlohmann::json j{{"method", method_name(c.method, c.reference)},
                     {"theta", c.theta},
                     {"tau", c.tau},
                     {"samples", c.samples},
                     {"sup_norm", c.sup_norm}};
    if (c.bounded) {
      j["support"] = {c.support_lo, c.support_hi};
      j["boundary_ok"] = c.boundary_ok;
    }
    cases.push_back(j);
  }
  return {{"cases", cases}, {"worst_sup_norm", s.worst()}};
}

nlohmann::json to_json(const BiasSuite& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : s.rows) {
    rows.push_back({{"method", std::string(to_string(r.method))},
                    {"theta", r.theta},
                    {"tau", r.tau},
                    {"analytic_bias", r.analytic},
                    {"empirical_bias", r.empirical},
                    {"stderr", r.std_error},
                    {"samples", r.samples}});
  }
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& f : s.fits) {
    fits.push_back({{"method", std::string(to_string(f.method))}, {"theta", f.theta}, {"slope", f.slope}});
  }
  return {{"rows", rows}, {"fits", fits}};
}

nlohmann::json to_json(const SinkhornSuite& s) {
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : s.cases) {
    cases.push_back({{"name", c.name},
                     {"sigma2", c.diagnostics.sigma2},
                     {"predicted_exponent", c.fit.predicted},
                     {"fitted_exponent", c.fit.sufficient ? nlohmann::json(c.fit.slope) : nlohmann::json(nullptr)},
                     {"fit_points", c.fit.points},
                     {"mean_ratio", c.mean_ratio},
                     {"first_below_1e-8", c.first_below_1e8},
                     {"final_residual", c.diagnostics.residual.back()}});
  }
  return {{"cases", cases}};
}

nlohmann::json to_json(const PermutationSuite& s) {
  return {{"trials", s.trials}, {"max_prob_diff", s.max_prob_diff}, {"max_latent_diff", s.max_latent_diff}};
}

nlohmann::json to_json(const GradientSuite& s) {
  return {{"max_rel_error", s.max_rel_error}, {"parameters", s.parameters}, {"entries", s.entries}};
}

}  // namespace f3
