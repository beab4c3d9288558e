// Copyright 2026 The shadowperc Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "shadowperc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shadowperc/csv.hpp"
#include "shadowperc/grid_io.hpp"
#include "shadowperc/ordering.hpp"
#include "shadowperc/parallel.hpp"
#include "shadowperc/percolation.hpp"
#include "shadowperc/renorm.hpp"
#include "shadowperc/sampler.hpp"
#include "shadowperc/shadow.hpp"

#ifndef SHADOWPERC_VERSION
#define SHADOWPERC_VERSION "dev"
#endif

namespace shadowperc {
namespace {

namespace fs = std::filesystem;

// Invalid configuration values; mapped to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

double parse_real(const std::string& text, const char* what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError(std::string(what) + ": not a number: " + text);
  }
  if (used != text.size() || std::isnan(v)) {
    throw ConfigError(std::string(what) + ": not a number: " + text);
  }
  return v;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  if (text.empty()) return parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

std::vector<double> parse_reals(const std::string& text, const char* what) {
  std::vector<double> v;
  for (const auto& p : split(text, ',')) v.push_back(parse_real(p, what));
  return v;
}

std::vector<std::int64_t> parse_ints(const std::string& text, const char* what) {
  std::vector<std::int64_t> v;
  for (const auto& p : split(text, ',')) {
    const double x = parse_real(p, what);
    if (x != std::floor(x) || std::abs(x) > 9.0e15) {
      throw ConfigError(std::string(what) + ": not an integer: " + p);
    }
    v.push_back(static_cast<std::int64_t>(x));
  }
  return v;
}

Rect parse_window(const std::string& text) {
  const auto v = parse_reals(text, "--window");
  if (v.size() != 4) throw ConfigError("--window needs x0,y0,x1,y1");
  const Rect r{v[0], v[1], v[2], v[3]};
  if (r.degenerate()) throw ConfigError("--window is empty");
  return r;
}

ShadowVariant parse_variant(const std::string& s) {
  if (s == "discrete") return ShadowVariant::Discrete;
  if (s == "continuous") return ShadowVariant::Continuous;
  throw ConfigError("--variant must be discrete or continuous");
}

unsigned workers_of(const RunConfig& cfg) {
  return cfg.workers == 0 ? default_workers() : cfg.workers;
}

Rect padded(Rect r, double pad) { return {r.x0 - pad, r.y0 - pad, r.x1 + pad, r.y1 + pad}; }

Rect hull(const Rect& a, const Rect& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

int discrete_stride(double h) {
  const double s = 1.0 / h;
  if (std::abs(s - std::round(s)) > 1e-9 || s < 1.0) {
    throw ConfigError("the discrete variant needs 1/h to be a positive integer");
  }
  return static_cast<int>(std::round(s));
}

fs::path prepare_out(const RunConfig& cfg, const std::string& manifest) {
  const fs::path dir(cfg.out);
  fs::create_directories(dir);
  std::ofstream m(dir / "manifest.ini", std::ios::binary);
  m << manifest;
  if (!m) throw IoError("cannot write " + (dir / "manifest.ini").string());
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw IoError("cannot write " + p.string());
  return f;
}

// Columns [0, nx) of a shadow computed on a wider grid.
ShadowField crop_columns(const ShadowField& s, std::size_t nx) {
  ShadowField out = s;
  out.geometry.nx = nx;
  out.alpha.clear();
  out.r.clear();
  out.valid.clear();
  for (std::size_t j = 0; j < s.geometry.ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      const std::size_t k = s.geometry.index(i, j);
      out.alpha.push_back(s.alpha[k]);
      out.r.push_back(s.r.empty() ? kNaN : s.r[k]);
      out.valid.push_back(s.valid[k]);
    }
  }
  return out;
}

int cmd_sample(const RunConfig& cfg, const std::string& manifest, std::ostream& log) {
  const Kernel k = make_kernel(cfg);
  const Rect window = parse_window(cfg.window);
  FieldOptions opt;
  opt.truncation = parse_real(cfg.trunc, "--trunc");
  opt.stride = cfg.stride > 0 ? cfg.stride : 1;
  opt.workers = workers_of(cfg);
  FieldOptions gopt = opt;
  gopt.derivative = Derivative::E1;
  const Rect region = padded(hull(required_noise_region(k, cfg.h, window, opt),
                                  required_noise_region(k, cfg.h, window, gopt)),
                             cfg.pad);
  const NoisePatch noise =
      sample_noise(region, cfg.h, cfg.seed, cfg.stream, kDefaultMaxNoiseCells, opt.workers);
  const FieldGrid f = convolve_field(noise, k, window, opt);
  const FieldGrid g = convolve_field(noise, k, window, gopt);
  const fs::path dir = prepare_out(cfg, manifest);
  write_grid_file((dir / "field.spg").string(), {to_record(f), to_record(g)});
  if (cfg.csv) {
    auto fc = open_out(dir / "field.csv");
    write_grid_csv(fc, to_record(f));
    auto gc = open_out(dir / "gradient.csv");
    write_grid_csv(gc, to_record(g));
  }
  log << "sample: " << f.geometry.nx << "x" << f.geometry.ny << " field and gradient -> "
      << (dir / "field.spg").string() << "\n";
  return exit_code::kOk;
}

ShadowField shadow_from_inputs(const RunConfig& cfg, ShadowVariant variant, double R) {
  const auto recs = read_grid_file(cfg.field);
  if (recs.empty()) throw ConfigError("--field file holds no grid");
  const FieldGrid f = field_from_record(recs[0]);
  if (variant == ShadowVariant::Discrete) {
    std::optional<std::int64_t> h;
    if (std::isfinite(R)) h = static_cast<std::int64_t>(R);
    return shadow_discrete(f, h);
  }
  if (!std::isfinite(R)) throw ConfigError("the continuous variant needs a finite --horizon");
  if (!cfg.gradient.empty()) {
    const auto grecs = read_grid_file(cfg.gradient);
    if (grecs.empty()) throw ConfigError("--gradient file holds no grid");
    return shadow_continuous(f, field_from_record(grecs[0]), R);
  }
  if (recs.size() < 2 || recs[1].header.kind != GridKind::Gradient) {
    throw ConfigError("the continuous variant needs a gradient grid");
  }
  return shadow_continuous(f, field_from_record(recs[1]), R);
}

int cmd_shadow(const RunConfig& cfg, const std::string& manifest, std::ostream& log) {
  const ShadowVariant variant = parse_variant(cfg.variant);
  const double R = parse_real(cfg.horizon, "--horizon");
  if (!(R >= 0.0)) throw ConfigError("--horizon must be nonnegative");
  const unsigned workers = workers_of(cfg);
  ShadowField s;
  if (!cfg.field.empty()) {
    s = shadow_from_inputs(cfg, variant, R);
  } else {
    const Kernel k = make_kernel(cfg);
    const Rect window = parse_window(cfg.window);
    const double trunc = parse_real(cfg.trunc, "--trunc");
    if (variant == ShadowVariant::Continuous) {
      if (!std::isfinite(R)) throw ConfigError("the continuous variant needs a finite --horizon");
      const HorizonKernelPair pair{R, trunc};
      const Rect region = padded(truncation_noise_region(k, cfg.h, window, {pair}), cfg.pad);
      const NoisePatch noise =
          sample_noise(region, cfg.h, cfg.seed, cfg.stream, kDefaultMaxNoiseCells, workers);
      s = alpha_on_window(noise, k, window, pair, workers);
    } else {
      if (std::isfinite(R) && R != std::floor(R)) {
        throw ConfigError("the discrete horizon must be an integer");
      }
      FieldOptions opt;
      opt.truncation = trunc;
      opt.stride = cfg.stride > 0 ? cfg.stride : discrete_stride(cfg.h);
      opt.workers = workers;
      const Rect ext{window.x0, window.y0, window.x1 + (std::isfinite(R) ? R : 0.0), window.y1};
      const Rect region = padded(required_noise_region(k, cfg.h, ext, opt), cfg.pad);
      const NoisePatch noise =
          sample_noise(region, cfg.h, cfg.seed, cfg.stream, kDefaultMaxNoiseCells, workers);
      const FieldGrid f = convolve_field(noise, k, ext, opt);
      std::optional<std::int64_t> horizon;
      if (std::isfinite(R)) horizon = static_cast<std::int64_t>(R);
      const ShadowField full = shadow_discrete(f, horizon);
      const LatticeBox pts = output_points(window, cfg.h, opt.stride);
      s = crop_columns(full, static_cast<std::size_t>(pts.nx));
    }
  }
  const fs::path dir = prepare_out(cfg, manifest);
  write_grid_file((dir / "shadow.spg").string(), to_records(s));
  const GrayImage img = render_mask(s, cfg.ell);
  auto pgm = open_out(dir / "shadow.pgm");
  write_pgm(pgm, img);
  if (cfg.csv) {
    auto c = open_out(dir / "shadow.csv");
    write_grid_csv(c, to_records(s)[0]);
  }
  std::size_t black = 0;
  for (std::uint8_t p : img.pixels) black += p == 0;
  const double frac = img.pixels.empty() ? 0.0 : static_cast<double>(black) / static_cast<double>(img.pixels.size());
  auto summary = open_out(dir / "summary.txt");
  summary << "variant " << to_string(s.variant) << "\n"
          << "size " << s.geometry.nx << "x" << s.geometry.ny << "\n"
          << "valid " << s.valid_count() << "\n"
          << "ell " << csv_number(cfg.ell) << "\n"
          << "black_fraction " << csv_number(frac) << "\n";
  log << "shadow: " << s.geometry.nx << "x" << s.geometry.ny << ", black fraction at ell="
      << cfg.ell << ": " << frac << "\n";
  return exit_code::kOk;
}

std::vector<double> ell_grid(const RunConfig& cfg) {
  if (cfg.ell_steps < 1) throw ConfigError("--ell-steps must be positive");
  if (cfg.ell_steps == 1) return {cfg.ell_min};
  if (!(cfg.ell_max >= cfg.ell_min)) throw ConfigError("--ell-max must be >= --ell-min");
  std::vector<double> v;
  const double step = (cfg.ell_max - cfg.ell_min) / (cfg.ell_steps - 1);
  for (int k = 0; k < cfg.ell_steps; ++k) v.push_back(cfg.ell_min + step * k);
  return v;
}

int cmd_scan(const RunConfig& cfg, const std::string& manifest, std::ostream& log) {
  CrossingScanConfig sc;
  sc.kernel = make_kernel(cfg);
  sc.variant = parse_variant(cfg.variant);
  sc.h = cfg.h;
  const double R = parse_real(cfg.horizon, "--horizon");
  if (std::isfinite(R)) {
    if (!(R > 0.0)) throw ConfigError("--horizon must be positive");
    sc.horizon.fixed = R;
  } else {
    if (!(cfg.horizon_factor > 0.0)) throw ConfigError("--horizon-factor must be positive");
    sc.horizon.factor = cfg.horizon_factor;
  }
  sc.truncation = parse_real(cfg.trunc, "--trunc");
  sc.ells = ell_grid(cfg);
  sc.lambdas = parse_ints(cfg.lambdas, "--lambdas");
  if (cfg.trials < 1) throw ConfigError("--trials must be positive");
  sc.trials = static_cast<std::size_t>(cfg.trials);
  sc.seed = cfg.seed;
  sc.workers = workers_of(cfg);
  sc.budget_seconds = parse_real(cfg.budget, "--budget");
  const CrossingTable table = crossing_scan(sc);
  const fs::path dir = prepare_out(cfg, manifest);
  auto out = open_out(dir / "crossing.csv");
  write_crossing_csv(out, table);
  log << "scan: " << table.rows.size() << " rows -> " << (dir / "crossing.csv").string()
      << (table.complete ? "\n" : " (budget reached, partial)\n");
  return table.complete ? exit_code::kOk : exit_code::kBudget;
}

struct Report {
  std::vector<std::array<std::string, 4>> rows;  // section, item, value, verdict
  bool pass = true;

  void add(const std::string& section, const std::string& item, const std::string& value,
           const std::string& verdict = "") {
    rows.push_back({section, item, value, verdict});
    if (verdict == "FAIL") pass = false;
  }
  void add(const std::string& section, const Verdict& v) {
    add(section, v.name, v.detail, v.pass ? "PASS" : "FAIL");
  }
};

int cmd_certify(const RunConfig& cfg, const std::string& manifest, std::ostream& log) {
  SchemeParams p;
  p.d = cfg.d;
  p.lambda0 = cfg.lambda0;
  p.mu = EventuallyConstant::parse(cfg.mu);
  p.sigma = EventuallyConstant::parse(cfg.sigma);
  p.levels = cfg.levels;
  if (p.d < 2) throw ConfigError("--d must be at least 2");
  if (p.lambda0 < 1) throw ConfigError("--lambda0 must be positive");
  if (p.levels < 0) throw ConfigError("--levels must be nonnegative");
  if (cfg.scale_convention != "strict" && cfg.scale_convention != "nonstrict") {
    throw ConfigError("--scale-convention must be strict or nonstrict");
  }

  Report rep;
  const std::string sec = "scheme";
  rep.add(sec, "d", std::to_string(p.d));
  rep.add(sec, "lambda0", std::to_string(p.lambda0));
  rep.add(sec, "mu", p.mu.to_string());
  rep.add(sec, "sigma", p.sigma.to_string());
  rep.add(sec, "levels", std::to_string(p.levels));
  const Verdict c1 = check_c1(p.mu, p.sigma);
  const C3Result c3 = check_c3(p.mu);
  rep.add("conditions", c1);
  rep.add("conditions", c3.verdict);
  if (c1.pass && c3.verdict.pass) {
    const CertBounds base = epsilon0(p);
    const double eps = cfg.epsilon == "auto" ? base.epsilon0 : parse_real(cfg.epsilon, "--epsilon");
    const double lp0 =
        cfg.log2_p0 == "auto" ? base.log2_epsilon0 - 1.0 : parse_real(cfg.log2_p0, "--log2-p0");
    const CertBounds cb = iterate_pn(p, lp0, eps);
    rep.add("bounds", "Sigma0", csv_number(cb.sigma0) + " = " + cb.sigma0_exact.to_string());
    rep.add("bounds", "log2 a0", csv_number(cb.log2_a.front()));
    rep.add("bounds", "epsilon0", csv_number(cb.epsilon0));
    rep.add("bounds", "log2 epsilon0", csv_number(cb.log2_epsilon0));
    rep.add("bounds", "epsilon", csv_number(cb.epsilon));
    rep.add("bounds", "log2 p0", csv_number(cb.log2_p0));
    for (std::size_t n = 0; n < cb.log2_p.size(); ++n) {
      rep.add("pn", "log2 p_" + std::to_string(n), csv_number(cb.log2_p[n]),
              cb.level_pass[n] ? "PASS" : "FAIL");
    }
    for (std::size_t n = 0; n < cb.log2_a.size(); ++n) {
      rep.add("an", "log2 a_" + std::to_string(n), csv_number(cb.log2_a[n]));
    }
    for (const auto& v : cb.verdicts) rep.add("verdicts", v);
    const int support_levels = std::min(p.levels, 10);
    for (int n = 0; n <= support_levels; ++n) {
      const FormalSupport fs0 = formal_support(p, n, std::vector<BigInt>(static_cast<std::size_t>(p.d), 0));
      std::ostringstream os;
      os << "[" << fs0.recursive_lo << ", " << fs0.recursive_hi << "] within +-" << fs0.half_width;
      rep.add("support", "level " + std::to_string(n), os.str(),
              fs0.inclusion_certified ? "PASS" : "FAIL");
    }
  } else {
    rep.add("verdicts", "certification", "skipped: scheme conditions fail", "FAIL");
  }
  if (!cfg.scale_lambda.empty()) {
    BigInt lam;
    try {
      lam = BigInt(cfg.scale_lambda);
    } catch (const std::exception&) {
      throw ConfigError("--scale-lambda must be an integer");
    }
    const bool strict = cfg.scale_convention == "strict";
    rep.add("scale", std::string("N for lambda = ") + cfg.scale_lambda +
                         (strict ? " (lambda_N < lambda)" : " (lambda_N <= lambda)"),
            std::to_string(scale_index(p, lam, strict)));
  }
  if (!cfg.skip_bootstrap) {
    BootstrapInputs in;
    in.a = cfg.boot_a;
    in.b = cfg.boot_b;
    in.lambda0 = cfg.boot_lambda0;
    in.ell = cfg.boot_ell;
    in.ell_prime = cfg.boot_ell_prime;
    in.u0 = cfg.boot_u0;
    in.C1 = cfg.boot_C1;
    in.c1 = cfg.boot_c1;
    in.levels = cfg.boot_levels;
    BootstrapCert bc;
    try {
      bc = bootstrap_cert(in);
    } catch (const Error& e) {
      throw ConfigError(std::string("bootstrap: ") + e.what());
    }
    rep.add("bootstrap", "delta", csv_number(bc.delta));
    rep.add("bootstrap", "gamma", csv_number(bc.gamma));
    rep.add("bootstrap", "growth constant", csv_number(bc.growth_constant));
    for (std::size_t n = 0; n < bc.lambda.size(); ++n) {
      rep.add("bootstrap", "lambda_" + std::to_string(n), csv_number(bc.lambda[n]));
      rep.add("bootstrap", "ell_" + std::to_string(n), csv_number(bc.ell[n]));
      rep.add("bootstrap", "log2 u_" + std::to_string(n), csv_number(bc.log2_u[n]));
    }
    for (const auto& v : bc.checks) rep.add("bootstrap", v);
  }

  const fs::path dir = prepare_out(cfg, manifest);
  auto csv = open_out(dir / "report.csv");
  csv << "section,item,value,verdict\n";
  for (const auto& r : rep.rows) {
    csv << csv_field(r[0]) << ',' << csv_field(r[1]) << ',' << csv_field(r[2]) << ','
        << csv_field(r[3]) << '\n';
  }
  auto txt = open_out(dir / "report.txt");
  std::string last;
  for (const auto& r : rep.rows) {
    if (r[0] != last) txt << (last.empty() ? "" : "\n") << "[" << r[0] << "]\n";
    last = r[0];
    txt << "  " << r[1] << ": " << r[2] << (r[3].empty() ? "" : "  " + r[3]) << "\n";
  }
  txt << "\noverall: " << (rep.pass ? "PASS" : "FAIL") << "\n";
  log << "certify: " << (rep.pass ? "PASS" : "FAIL") << " -> " << (dir / "report.txt").string() << "\n";
  return rep.pass ? exit_code::kOk : exit_code::kCertificationFail;
}

std::vector<Site> read_sites(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read site file " + path);
  std::vector<Site> sites;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto parts = split(line, ',');
    try {
      if (parts.size() != 2) throw ConfigError("bad site line: " + line);
      const auto v = parse_ints(line, "site");
      sites.push_back({v[0], v[1]});
    } catch (const ConfigError&) {
      if (!first) throw;  // a header line is allowed
    }
    first = false;
  }
  if (sites.empty()) throw ConfigError("site file holds no sites");
  return sites;
}

int cmd_order(const RunConfig& cfg, const std::string& manifest, std::ostream& log) {
  std::vector<Site> sites;
  if (!cfg.sites.empty()) {
    sites = read_sites(cfg.sites);
  } else {
    for (std::int64_t x : parse_ints(cfg.row, "--row")) sites.push_back({x, 0});
  }
  if (sites.empty()) throw ConfigError("no sites given");
  if (cfg.trials < 1000) throw ConfigError("--trials must be at least 1000 for order");
  const Kernel k = make_kernel(cfg);
  const unsigned workers = workers_of(cfg);

  CovMatrix cov;
  if (cfg.iid) {
    std::vector<double> eye(sites.size() * sites.size(), 0.0);
    for (std::size_t i = 0; i < sites.size(); ++i) eye[i * sites.size() + i] = 1.0;
    cov = covariance_from_matrix(std::move(eye), sites.size());
  } else {
    cov = build_covariance(k, sites);
  }
  std::vector<std::size_t> all(cov.n);
  for (std::size_t i = 0; i < cov.n; ++i) all[i] = i;
  OrderingSpec spec = OrderingSpec::identity_blocks({all});
  if (!cfg.perm.empty()) {
    std::vector<int> perm;
    for (std::int64_t v : parse_ints(cfg.perm, "--perm")) perm.push_back(static_cast<int>(v));
    spec.perms[0] = perm;
  }
  try {
    spec.validate(cov.n);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  const double delta = gershgorin_delta(cov);
  if (!(delta < 1.0)) throw ConfigError("Gershgorin delta >= 1; the sandwich is void");
  const McEstimate mc =
      ordering_probability_mc(cov, spec, cfg.trials, cfg.seed, workers);
  const OrderingBounds b = ordering_bounds(spec, delta);
  const bool sandwich = mc.estimate >= b.lower - 3.0 * mc.std_error &&
                        mc.estimate <= b.upper + 3.0 * mc.std_error;

  // Peierls comparison over the same sites with the configured kernel.
  std::int64_t R = cfg.peierls_R;
  if (R <= 0) {
    R = 1;
    std::vector<Site> s = sites;
    std::sort(s.begin(), s.end(), [](const Site& a, const Site& c) {
      return a[1] != c[1] ? a[1] < c[1] : a[0] < c[0];
    });
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i][1] == s[i - 1][1]) R = std::max(R, s[i][0] - s[i - 1][0]);
    }
  }
  const PeierlsResult pr = peierls_estimate_mc(k, sites, R, cfg.trials, cfg.seed, workers);
  const bool peierls_ok = pr.mc.estimate <= pr.bound + 3.0 * pr.mc.std_error &&
                          pr.implication_violations == 0;

  const fs::path dir = prepare_out(cfg, manifest);
  auto out = open_out(dir / "ordering.csv");
  out << "case,n,delta,estimate,stderr,lower,upper,verdict,detail\n";
  std::ostringstream d1;
  d1 << (cfg.iid ? "identity covariance" : "kernel covariance") << "; ties " << mc.ties;
  out << "ordering," << cov.n << ',' << csv_number(delta) << ',' << csv_number(mc.estimate) << ','
      << csv_number(mc.std_error) << ',' << csv_number(b.lower) << ',' << csv_number(b.upper) << ','
      << (sandwich ? "PASS" : "FAIL") << ',' << csv_field(d1.str()) << '\n';
  std::ostringstream d2;
  d2 << "R=" << R << "; blocks " << pr.blocks.size() << "; implication violations "
     << pr.implication_violations << " of " << pr.implication_checked;
  if (!(pr.delta < 1.0)) d2 << "; delta >= 1 so the bound is void";
  out << "peierls," << sites.size() << ',' << csv_number(pr.delta) << ','
      << csv_number(pr.mc.estimate) << ',' << csv_number(pr.mc.std_error) << ",0,"
      << csv_number(pr.bound) << ',' << (peierls_ok ? "PASS" : "FAIL") << ','
      << csv_field(d2.str()) << '\n';
  log << "order: estimate " << mc.estimate << " in [" << b.lower << ", " << b.upper << "] "
      << (sandwich ? "PASS" : "FAIL") << "; peierls " << (peierls_ok ? "PASS" : "FAIL") << "\n";
  return exit_code::kOk;
}

void set_effective(CLI::App& app, const std::string& name, const std::string& value) {
  CLI::Option* opt = app.get_option(name);
  opt->clear();
  opt->add_result(value);
}

}  // namespace

const char* version() { return SHADOWPERC_VERSION; }

std::unique_ptr<CLI::App> build_app(RunConfig& cfg) {
  auto app = std::make_unique<CLI::App>("shadow percolation toolkit", "shadowperc");
  app->set_help_flag("--help", "print this help and exit");
  app->option_defaults()->always_capture_default();
  app->set_config("--config", "", "INI-style key=value file; flags override it");
  app->set_version_flag("--version", std::string(version()));
  CLI::App& a = *app;
  a.add_option("command,--command", cfg.command, "sample | shadow | scan | certify | order")
      ->check(CLI::IsMember({"sample", "shadow", "scan", "certify", "order"}));

  a.add_option("--kernel", cfg.kernel, "bf or a radial table file (r,value)")->group("Kernel");
  a.add_option("--kernel-beta", cfg.kernel_beta, "decay exponent for table kernels")->group("Kernel");
  a.add_option("--lambda1", cfg.lambda1, "field scaling f -> lambda1 f(lambda2 .)")->group("Kernel");
  a.add_option("--lambda2", cfg.lambda2, "spatial scaling")->group("Kernel");
  a.add_flag("--normalize", cfg.normalize, "rescale the kernel to unit variance")->group("Kernel");

  a.add_option("--h", cfg.h, "noise lattice spacing")->check(CLI::PositiveNumber)->group("Grid");
  a.add_option("--window", cfg.window, "x0,y0,x1,y1")->group("Grid");
  a.add_option("--pad", cfg.pad, "extra noise margin")->check(CLI::NonNegativeNumber)->group("Grid");
  a.add_option("--horizon", cfg.horizon, "shadow horizon R (inf allowed where meaningful)")->group("Grid");
  a.add_option("--horizon-factor", cfg.horizon_factor, "scan horizon R = factor * lambda")->group("Grid");
  a.add_option("--trunc", cfg.trunc, "kernel truncation radius (inf: none)")->group("Grid");
  a.add_option("--stride", cfg.stride, "output stride in noise cells (0: auto)")->group("Grid");
  a.add_option("--variant", cfg.variant, "discrete | continuous")
      ->check(CLI::IsMember({"discrete", "continuous"}))->group("Grid");

  a.add_option("--field", cfg.field, "input grid file for shadow")->group("Shadow");
  a.add_option("--gradient", cfg.gradient, "input gradient grid file")->group("Shadow");
  a.add_option("--ell", cfg.ell, "render level")->group("Shadow");
  a.add_flag("--csv", cfg.csv, "also write CSV grids")->group("Shadow");

  a.add_option("--ell-min", cfg.ell_min)->group("Scan");
  a.add_option("--ell-max", cfg.ell_max)->group("Scan");
  a.add_option("--ell-steps", cfg.ell_steps)->group("Scan");
  a.add_option("--lambdas", cfg.lambdas, "comma separated box sizes")->group("Scan");
  a.add_option("--budget", cfg.budget, "wall-clock budget in seconds")->group("Scan");

  a.add_option("--trials", cfg.trials, "Monte Carlo trials (0: command default)")->group("Run");
  a.add_option("--seed", cfg.seed)->group("Run");
  a.add_option("--stream", cfg.stream, "noise stream for sample and shadow")->group("Run");
  a.add_option("--workers", cfg.workers, "threads (0: available parallelism)")->group("Run");
  a.add_option("--out", cfg.out, "output directory")->group("Run");

  a.add_option("--d", cfg.d)->group("Certify");
  a.add_option("--lambda0", cfg.lambda0)->group("Certify");
  a.add_option("--mu", cfg.mu, "a,b,c: a, b, then c forever")->group("Certify");
  a.add_option("--sigma", cfg.sigma)->group("Certify");
  a.add_option("--levels", cfg.levels)->group("Certify");
  a.add_option("--log2-p0", cfg.log2_p0)->group("Certify");
  a.add_option("--epsilon", cfg.epsilon)->group("Certify");
  a.add_option("--scale-lambda", cfg.scale_lambda)->group("Certify");
  a.add_option("--scale-convention", cfg.scale_convention, "strict | nonstrict")->group("Certify");
  a.add_flag("--skip-bootstrap", cfg.skip_bootstrap)->group("Certify");
  a.add_option("--boot-a", cfg.boot_a)->group("Certify");
  a.add_option("--boot-b", cfg.boot_b)->group("Certify");
  a.add_option("--boot-lambda0", cfg.boot_lambda0)->group("Certify");
  a.add_option("--boot-ell", cfg.boot_ell)->group("Certify");
  a.add_option("--boot-ell-prime", cfg.boot_ell_prime)->group("Certify");
  a.add_option("--boot-u0", cfg.boot_u0)->group("Certify");
  a.add_option("--boot-C1", cfg.boot_C1)->group("Certify");
  a.add_option("--boot-c1", cfg.boot_c1)->group("Certify");
  a.add_option("--boot-levels", cfg.boot_levels)->group("Certify");

  a.add_option("--sites", cfg.sites, "CSV file of x,y sites")->group("Order");
  a.add_option("--row", cfg.row, "x coordinates on row 0")->group("Order");
  a.add_option("--perm", cfg.perm, "block permutation (rank 1 = largest)")->group("Order");
  a.add_flag("--iid", cfg.iid, "identity covariance")->group("Order");
  a.add_option("--peierls-R", cfg.peierls_R, "horizon of the Peierls row (0: largest gap)")->group("Order");
  return app;
}

Kernel make_kernel(const RunConfig& cfg) {
  Kernel k = cfg.kernel == "bf" ? Kernel::bargmann_fock()
                                : Kernel::load_table(cfg.kernel, cfg.kernel_beta);
  if (!(cfg.lambda1 > 0.0) || !(cfg.lambda2 > 0.0)) {
    throw ConfigError("--lambda1 and --lambda2 must be positive");
  }
  if (cfg.lambda1 != 1.0 || cfg.lambda2 != 1.0) k = rescale(k, cfg.lambda1, cfg.lambda2);
  if (cfg.normalize) k = normalize_variance(k);
  return k;
}

int run_command(const RunConfig& cfg, const std::string& manifest, std::ostream& log) {
  if (cfg.command == "sample") return cmd_sample(cfg, manifest, log);
  if (cfg.command == "shadow") return cmd_shadow(cfg, manifest, log);
  if (cfg.command == "scan") return cmd_scan(cfg, manifest, log);
  if (cfg.command == "certify") return cmd_certify(cfg, manifest, log);
  if (cfg.command == "order") return cmd_order(cfg, manifest, log);
  throw ConfigError("unknown command: " + cfg.command);
}

int run_cli(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
  RunConfig cfg;
  auto app = build_app(cfg);
  try {
    app->parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app->exit(e, log, err) == 0 ? exit_code::kOk : exit_code::kInvalidConfig;
  }
  try {
    if (cfg.command.empty()) throw ConfigError("a command is required");
    if (cfg.trials == 0) {
      cfg.trials = cfg.command == "order" ? 100000 : cfg.command == "scan" ? 100 : 1;
      set_effective(*app, "--trials", std::to_string(cfg.trials));
    }
    if (cfg.workers == 0) {
      // Results do not depend on the worker count; record what was used.
      cfg.workers = default_workers();
      set_effective(*app, "--workers", std::to_string(cfg.workers));
    }
    const std::string manifest = std::string("# shadowperc ") + version() + "\n" +
                                 app->config_to_str(true, false);
    return run_command(cfg, manifest, log);
  } catch (const ConfigError& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return exit_code::kInvalidConfig;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << "\n";
    return exit_code::kBudget;
  } catch (const IoError& e) {
    err << "i/o failure: " << e.what() << "\n";
    return exit_code::kFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::kInvalidConfig;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return exit_code::kFailure;
  }
}

}  // namespace shadowperc
