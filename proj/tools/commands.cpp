#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "entangle/boundary.hpp"
#include "entangle/oracle.hpp"
#include "entangle/state_file.hpp"

namespace entangle::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kManifestVersion = "entangle-manifest/1";
constexpr const char* kReportVersion = "entangle-report/1";
constexpr double kSimplexMargin = 1e-3;
constexpr double kBoundaryTol = 1e-6;
constexpr double kTraceDeltaTol = 1e-12;
constexpr double kConcurrenceTol = 1e-9;
constexpr double kMinSingular = 1e-8;

// Runs fn(0..n-1) on up to `jobs` threads. The first exception (lowest
// index) is rethrown after all workers finish.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty())
    out << text;
  else
    write_text(path, text);
}

json report_header(const char* command, const Common& c) {
  return {{"format_version", kReportVersion}, {"command", command}, {"seed", c.seed},
          {"tol", c.tol},  {"gap", c.gap}};
}

std::string real_field(double v) { return std::isfinite(v) ? format_real(v) : ""; }

struct ManifestEntry {
  std::size_t index = 0;
  std::string path;
  std::uint64_t seed = 0;
};

std::vector<ManifestEntry> manifest_entries(const json& j, const fs::path& dir) {
  if (!j.contains("states") || !j["states"].is_array())
    throw Error(ErrorCode::Format, "manifest has no states array");
  std::vector<ManifestEntry> out;
  for (const auto& s : j["states"]) {
    if (!s.is_object() || !s.contains("file") || !s["file"].is_string() || !s.contains("index") ||
        !s["index"].is_number_unsigned())
      throw Error(ErrorCode::Format, "malformed manifest entry");
    ManifestEntry e;
    e.index = s["index"].get<std::size_t>();
    e.path = (dir / s["file"].get<std::string>()).string();
    if (s.contains("seed") && s["seed"].is_number_unsigned()) e.seed = s["seed"].get<std::uint64_t>();
    out.push_back(e);
  }
  return out;
}

bool is_manifest(const json& j) {
  return j.is_object() && j.contains("format_version") && j["format_version"] == kManifestVersion;
}

// Loads every state named by the input (a single state file or a manifest).
// Any load error is a format error for the whole run.
std::vector<std::pair<ManifestEntry, StateFile>> load_inputs(const std::string& input) {
  const json j = parse_json(read_text(input));
  std::vector<std::pair<ManifestEntry, StateFile>> out;
  if (is_manifest(j)) {
    for (const auto& e : manifest_entries(j, fs::path(input).parent_path()))
      out.emplace_back(e, load_state(e.path));
  } else {
    ManifestEntry e;
    e.path = input;
    StateFile f = state_from_json(j);
    if (f.metadata.seed) e.seed = *f.metadata.seed;
    out.emplace_back(e, std::move(f));
  }
  return out;
}

// p uniform on {p_i in (m, 1/2 - m), p1 + p2 + p3 = 1/2}.
std::array<double, 3> sample_simplex(Rng& rng, double margin) {
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (;;) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    const std::array<double, 3> p{a, b - a, 0.5 - b};
    if (std::all_of(p.begin(), p.end(), [&](double v) { return v > margin && v < 0.5 - margin; }))
      return {p[0], p[1], 0.5 - p[0] - p[1]};
  }
}

// One or two vanishing weights at random positions; the rest uniform.
std::array<double, 3> sample_limit_pattern(Rng& rng, double margin) {
  std::uniform_int_distribution<int> pick(0, 2);
  const int zeros = 1 + pick(rng) % 2;
  const int first = pick(rng);
  std::array<double, 3> p{};
  if (zeros == 2) {
    p[static_cast<std::size_t>(first)] = 0.5;
    return p;
  }
  std::uniform_real_distribution<double> u(margin, 0.5 - margin);
  const double a = u(rng);
  p[static_cast<std::size_t>((first + 1) % 3)] = a;
  p[static_cast<std::size_t>((first + 2) % 3)] = 0.5 - a;
  return p;
}

double condition_number(const Mat2& f) {
  const Eigen::VectorXd s = singular_values(f);
  return s(0) / s(1);
}

}  // namespace

std::uint64_t case_seed(std::uint64_t seed, std::size_t index) {
  const auto lo = static_cast<std::uint32_t>(seed), hi = static_cast<std::uint32_t>(seed >> 32);
  const auto ilo = static_cast<std::uint32_t>(index), ihi = static_cast<std::uint32_t>(index >> 32);
  std::seed_seq seq{lo, hi, ilo, ihi};
  std::mt19937_64 rng(seq);
  return rng();
}

int cmd_gen(const Common& c, const GenOptions& o, std::ostream& out, std::ostream& err) {
  if (o.count < 1) {
    err << "gen: --count must be at least 1\n";
    return kUsage;
  }
  if (!(o.max_condition >= 1.0)) {
    err << "gen: --max-condition must be at least 1\n";
    return kUsage;
  }
  if (o.limit && !(*o.limit > 0.0 && *o.limit <= 1e-3)) {
    err << "gen: --limit must lie in (0, 1e-3]\n";
    return kUsage;
  }
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) {
    err << "gen: cannot create " << o.out_dir << ": " << ec.message() << "\n";
    return kUsage;
  }

  const auto n = static_cast<std::size_t>(o.count);
  std::vector<json> entries(n);
  parallel_for(n, c.jobs, [&](std::size_t i) {
    const std::uint64_t s = case_seed(c.seed, i);
    Rng rng(s);
    const Mat2 fa = random_filter(rng, o.max_condition);
    const Mat2 fb = random_filter(rng, o.max_condition);
    std::array<double, 3> p{};
    BoundaryState bs;
    if (o.limit) {
      p = sample_limit_pattern(rng, kSimplexMargin);
      bs = boundary_state_limit(fa, fb, p[0], p[1], p[2], *o.limit);
    } else {
      p = sample_simplex(rng, kSimplexMargin);
      bs = make_boundary_state(fa, fb, p[0], p[1], p[2]);
    }
    char name[32];
    std::snprintf(name, sizeof name, "state_%04zu.json", i);
    StateFile f;
    f.rho = bs.sigma;
    f.metadata.label = "boundary-" + std::to_string(i);
    f.metadata.seed = s;
    f.metadata.provenance = "gen seed=" + std::to_string(c.seed) + " index=" + std::to_string(i);
    save_state((fs::path(o.out_dir) / name).string(), f);
    const Real4 w = *bs.p;
    entries[i] = {{"index", i},
                  {"file", name},
                  {"seed", s},
                  {"p", {w(0), w(1), w(2), w(3)}},
                  {"condition_a", condition_number(fa)},
                  {"condition_b", condition_number(fb)},
                  {"concurrence", concurrence_signed(bs.sigma)}};
  });

  json manifest = {{"format_version", kManifestVersion},
                   {"seed", c.seed},
                   {"count", o.count},
                   {"max_condition", o.max_condition},
                   {"margin", kSimplexMargin},
                   {"limit", o.limit ? json(*o.limit) : json(nullptr)},
                   {"states", entries}};
  write_text((fs::path(o.out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
  out << "wrote " << o.count << " states to " << o.out_dir << "\n";
  return kOk;
}

int cmd_ray(const Common& c, const RayOptions& o, std::ostream& out, std::ostream& err) {
  StateFile f;
  BoundaryState bs;
  try {
    f = load_state(o.state_path);
    bs = boundary_from_density(f.rho, kBoundaryTol);
  } catch (const Error& e) {
    err << "ray: " << e.what() << "\n";
    return kUsage;
  }
  const NormalVector nv = normal_vector(bs);
  const double x_max = x_max_psd(bs, nv);
  std::vector<double> xs = o.x;
  for (double fr : o.fraction) xs.push_back(fr * x_max);
  if (xs.empty()) {
    err << "ray: give --x or --fraction\n";
    return kUsage;
  }

  std::vector<std::string> rows(xs.size());
  parallel_for(xs.size(), c.jobs, [&](std::size_t i) {
    const double x = xs[i];
    try {
      const RayPoint rp = entangled_ray(bs, nv, x);
      const auto res = extremal_residuals(rp.rho, bs);
      const double rmax = *std::max_element(res.begin(), res.end());
      rows[i] = format_real(x) + "," + format_real(rp.s_exact) + "," + format_real(rp.c_signed) + "," +
                format_real(rp.min_eig) + "," + format_real(rmax) + "," +
                (rmax <= c.tol ? "ok" : "residual");
    } catch (const NotPositiveError& e) {
      rows[i] = format_real(x) + ",,," + format_real(e.min_eigenvalue()) + ",,not_positive";
    }
  });
  std::string text = "x,s_exact,c_signed,min_eig,residual_max,status\n";
  for (const auto& r : rows) text += r + "\n";
  emit(o.out_csv, text, out);
  return kOk;
}

int cmd_verify(const Common& c, const VerifyOptions& o, std::ostream& out, std::ostream& err) {
  std::vector<std::pair<ManifestEntry, StateFile>> inputs;
  try {
    inputs = load_inputs(o.input);
  } catch (const Error& e) {
    err << "verify: " << e.what() << "\n";
    return kUsage;
  }
  std::vector<json> records(inputs.size());
  std::vector<char> passed(inputs.size(), 0);
  parallel_for(inputs.size(), c.jobs, [&](std::size_t i) {
    const auto& [entry, file] = inputs[i];
    json r = {{"index", entry.index}, {"file", entry.path}, {"seed", entry.seed}, {"tol", c.tol}};
    try {
      const BoundaryState bs = boundary_from_density(file.rho, kBoundaryTol);
      const NormalVector nv = normal_vector(bs);
      const double x_max = x_max_psd(bs, nv);
      const double x = 0.5 * x_max;
      const RayPoint rp = entangled_ray(bs, nv, x);
      const auto res = extremal_residuals(rp.rho, bs);
      const WRankReport wr = w_uniqueness_rank(bs);
      const double rmax = *std::max_element(res.begin(), res.end());
      const double tr_delta = std::abs(nv.delta.trace());
      const double c_sigma = concurrence_signed(bs.sigma);
      const bool ok = rmax <= c.tol && tr_delta <= kTraceDeltaTol && nv.delta_c > 0.0 &&
                      rp.c_signed > 0.0 && std::abs(c_sigma) <= kConcurrenceTol && wr.rank == 12 &&
                      wr.min_singular > kMinSingular;
      r["x_max"] = x_max;
      r["x"] = x;
      r["residuals"] = res;
      r["residual_max"] = rmax;
      r["trace_delta"] = tr_delta;
      r["delta_c"] = nv.delta_c;
      r["c_sigma"] = c_sigma;
      r["c_rho"] = rp.c_signed;
      r["w_rank"] = wr.rank;
      r["w_min_singular"] = wr.min_singular;
      r["pass"] = ok;
      passed[i] = ok;
    } catch (const Error& e) {
      r["error"] = e.what();
      r["pass"] = false;
    }
    records[i] = r;
  });

  std::size_t n_pass = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (passed[i])
      ++n_pass;
    else
      err << "verify: failed " << records[i].dump() << "\n";
  }
  json rep = report_header("verify", c);
  rep["records"] = records;
  rep["summary"] = {{"count", records.size()}, {"passed", n_pass}};
  emit(o.out_json, rep.dump(2) + "\n", out);
  return n_pass == records.size() ? kOk : kFailure;
}

int cmd_ree(const Common& c, const ReeOptions& o, std::ostream& out, std::ostream& err) {
  StateFile f;
  try {
    f = load_state(o.state_path);
  } catch (const Error& e) {
    err << "ree: " << e.what() << "\n";
    return kUsage;
  }
  OracleOptions opt;
  opt.gap_tol = c.gap;
  opt.seed = c.seed;
  opt.max_iter = o.max_iter;
  const OracleReport r = closest_separable(f.rho, opt);
  const double scale = o.bits ? 1.0 / std::log(2.0) : 1.0;

  StateFile star;
  star.rho = r.sigma_star;
  star.metadata.label = "closest-separable";
  star.metadata.seed = c.seed;
  star.metadata.provenance = "ree " + o.state_path;

  json rep = report_header("ree", c);
  rep["input"] = o.state_path;
  rep["units"] = o.bits ? "bits" : "nats";
  rep["e_r"] = r.e_r * scale;
  rep["duality_gap"] = r.duality_gap * scale;
  rep["iterations"] = r.iterations;
  rep["converged"] = r.converged;
  rep["regularized"] = r.regularized;
  rep["regularization_error"] = r.regularization_error * scale;
  rep["ensemble_size"] = r.ensemble.states.size();
  rep["sigma_star"] = state_to_json(star);
  emit(o.out_json, rep.dump(2) + "\n", out);
  if (!r.converged) {
    err << "ree: warning: iteration limit reached with gap " << r.duality_gap << "\n";
    if (o.strict) return kFailure;
  }
  return kOk;
}

int cmd_validate(const Common& c, const ValidateOptions& o, std::ostream& out, std::ostream& err) {
  if (!(o.fraction > 0.0 && o.fraction <= 0.9)) {
    err << "validate: --fraction must lie in (0, 0.9]\n";
    return kUsage;
  }
  std::vector<ManifestEntry> entries;
  std::vector<StateFile> states;
  try {
    const json j = parse_json(read_text(o.manifest));
    if (!is_manifest(j)) throw Error(ErrorCode::Format, "not a manifest: " + o.manifest);
    entries = manifest_entries(j, fs::path(o.manifest).parent_path());
    for (const auto& e : entries) states.push_back(load_state(e.path));
  } catch (const Error& e) {
    err << "validate: " << e.what() << "\n";
    return kUsage;
  }

  std::vector<json> records(entries.size());
  std::vector<char> passed(entries.size(), 0);
  parallel_for(entries.size(), c.jobs, [&](std::size_t i) {
    const std::uint64_t s = case_seed(c.seed, entries[i].index);
    json r = {{"index", entries[i].index}, {"file", entries[i].path}, {"seed", s},
              {"gap", c.gap},              {"x_fraction", o.fraction}};
    try {
      const BoundaryState bs = boundary_from_density(states[i].rho, kBoundaryTol);
      const NormalVector nv = normal_vector(bs);
      const double x = o.fraction * x_max_psd(bs, nv);
      const ValidationRecord v = validate_formula(bs, x, c.gap, s, o.max_iter);
      r["x"] = v.x;
      r["x_max"] = v.x_max;
      r["delta_c"] = nv.delta_c;
      r["s_exact"] = v.s_exact;
      r["e_r"] = v.e_r;
      r["duality_gap"] = v.duality_gap;
      r["trace_distance"] = v.trace_distance;
      r["entropy_error"] = v.entropy_error;
      r["quadratic_term"] = v.quadratic_term;
      r["quadratic_error"] = std::abs(v.e_r - v.quadratic_term);
      r["iterations"] = v.iterations;
      r["converged"] = v.converged;
      r["pass"] = v.pass;
      passed[i] = v.pass;
    } catch (const Error& e) {
      r["error"] = e.what();
      r["pass"] = false;
    }
    records[i] = r;
  });

  std::size_t n_pass = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (passed[i])
      ++n_pass;
    else
      err << "validate: failed " << records[i].dump() << "\n";
  }
  json rep = report_header("validate", c);
  rep["records"] = records;
  const double rate = records.empty() ? 0.0 : static_cast<double>(n_pass) / records.size();
  rep["summary"] = {{"count", records.size()}, {"passed", n_pass}, {"pass_rate", rate}};
  emit(o.out_json, rep.dump(2) + "\n", out);
  return n_pass == records.size() && !records.empty() ? kOk : kFailure;
}

namespace {

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Run seed");
  sub->add_option("--tol", c.tol, "Bound on the extremal-condition residuals")
      ->check(CLI::PositiveNumber);
  sub->add_option("--gap", c.gap, "Oracle duality-gap target (nats)")->check(CLI::PositiveNumber);
  sub->add_option("--jobs", c.jobs, "Worker threads (default: $ENTANGLE_BOUNDARY_JOBS or 1)")
      ->check(CLI::Range(1, 1024));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-qubit boundary states, their entangled rays and relative entropy of entanglement"};
  app.require_subcommand(1);

  Common common;
  if (const char* env = std::getenv("ENTANGLE_BOUNDARY_JOBS"); env && *env) {
    const char* end = env + std::strlen(env);
    int jobs = 0;
    const auto [ptr, ec] = std::from_chars(env, end, jobs);
    if (ec != std::errc{} || ptr != end || jobs < 1 || jobs > 1024) {
      err << "ENTANGLE_BOUNDARY_JOBS must be an integer in [1, 1024]\n";
      return kUsage;
    }
    common.jobs = jobs;
  }
  GenOptions gen;
  RayOptions ray;
  VerifyOptions verify;
  ReeOptions ree;
  ValidateOptions validate;

  auto* g = app.add_subcommand("gen", "Sample boundary states and write a manifest");
  add_common(g, common);
  g->add_option("--count", gen.count, "Number of states");
  g->add_option("--max-condition", gen.max_condition, "Largest filter condition number");
  g->add_option("--out", gen.out_dir, "Output directory")->required();
  g->add_option("--limit", gen.limit, "Rank-deficient limit states with this epsilon");

  auto* r = app.add_subcommand("ray", "Tabulate rho(x) = sigma + x delta as CSV");
  add_common(r, common);
  r->add_option("state", ray.state_path, "Boundary state file")->required();
  r->add_option("--x", ray.x, "Absolute x values")->delimiter(',');
  r->add_option("--fraction", ray.fraction, "x as fractions of x_max")->delimiter(',');
  r->add_option("--out", ray.out_csv, "CSV path (default stdout)");

  auto* v = app.add_subcommand("verify", "Check extremal conditions and the W rank");
  add_common(v, common);
  v->add_option("input", verify.input, "State file or manifest")->required();
  v->add_option("--out", verify.out_json, "Report path (default stdout)");

  auto* e = app.add_subcommand("ree", "Relative entropy of entanglement by the numerical oracle");
  add_common(e, common);
  e->add_option("state", ree.state_path, "State file")->required();
  e->add_option("--max-iter", ree.max_iter, "Oracle iteration limit")->check(CLI::PositiveNumber);
  e->add_flag("--bits", ree.bits, "Report in bits");
  e->add_flag("--strict", ree.strict, "Exit 1 when the iteration limit is reached");
  e->add_option("--out", ree.out_json, "Report path (default stdout)");

  auto* va = app.add_subcommand("validate", "Compare the oracle with the formula over a manifest");
  add_common(va, common);
  va->add_option("manifest", validate.manifest, "Manifest from gen")->required();
  va->add_option("--fraction", validate.fraction, "x as a fraction of x_max");
  va->add_option("--max-iter", validate.max_iter, "Oracle iteration limit")
      ->check(CLI::PositiveNumber);
  va->add_option("--out", validate.out_json, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) return cmd_gen(common, gen, out, err);
    if (*r) return cmd_ray(common, ray, out, err);
    if (*v) return cmd_verify(common, verify, out, err);
    if (*e) return cmd_ree(common, ree, out, err);
    if (*va) return cmd_validate(common, validate, out, err);
  } catch (const Error& ex) {
    err << ex.what() << "\n";
    const auto code = ex.code();
    return code == ErrorCode::Io || code == ErrorCode::Format ? kUsage : kFailure;
  } catch (const std::exception& ex) {
    err << ex.what() << "\n";
    return kFailure;
  }
  return kUsage;
}

}  // namespace entangle::cli
