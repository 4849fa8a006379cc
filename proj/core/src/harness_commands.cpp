#include <fstream>
#include <sstream>

#include "config_reader.hpp"
#include "qvest/estimators.hpp"
#include "qvest/field_io.hpp"
#include "qvest/fieldsim.hpp"
#include "qvest/harness.hpp"

namespace qvest::harness {

using detail::config_fail;
using detail::json;
using detail::ojson;
using detail::Reader;

namespace {

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return detail::parse_json_text(ss.str());
}

CovarianceModel read_model(Reader& top) {
  const json* j = top.child("model");
  if (!j) config_fail("", "missing required key 'model'");
  Reader r(*j, "model");
  const auto family = r.require<std::string>("family");
  CovarianceModel model;
  if (family == "matern") {
    MaternParams p;
    r.get("sigma", p.sigma);
    r.get("alpha", p.alpha);
    r.get("nu", p.nu);
    r.get("M", p.M);
    model = p;
  } else if (family == "gencov") {
    GenCovParams p;
    r.get("c1", p.c1);
    r.get("delta1", p.delta1);
    r.get("c2", p.c2);
    r.get("delta2", p.delta2);
    r.get("poly", p.poly);
    model = p;
  } else if (family == "powexp") {
    PowExpParams p;
    r.get("sigma", p.sigma);
    r.get("alpha", p.alpha);
    r.get("delta", p.delta);
    r.get("M", p.M);
    model = p;
  } else {
    config_fail("model.family", "expected matern, gencov or powexp");
  }
  r.finish();
  try {
    validate(model);
  } catch (const DomainError& e) {
    config_fail("model", e.what());
  }
  return model;
}

GridSpec read_grid(Reader& top) {
  const json* j = top.child("grid");
  if (!j) config_fail("", "missing required key 'grid'");
  Reader r(*j, "grid");
  GridSpec g;
  g.d = r.require<int>("d");
  g.n = r.require<std::int64_t>("n");
  if (r.has("points") && r.has("counts")) config_fail("grid", "give either points or counts");
  if (std::int64_t pts = 0; r.get("points", pts)) {
    g.counts.assign(static_cast<std::size_t>(std::max(g.d, 0)), pts);
  } else if (!r.get("counts", g.counts)) {
    config_fail("grid", "missing points or counts");
  }
  g.origin.assign(g.counts.size(), 0.0);
  r.get("origin", g.origin);
  r.finish();
  try {
    g.validate();
  } catch (const DomainError& e) {
    config_fail("grid", e.what());
  }
  return g;
}

SimMethod parse_method(const std::string& s) {
  if (s == "dense") return SimMethod::kDense;
  if (s == "circulant") return SimMethod::kCirculant;
  if (s == "scale_mixture") return SimMethod::kScaleMixture;
  config_fail("method", "expected dense, circulant or scale_mixture");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw Error("failed to write " + path.string());
}

}  // namespace

SimulateOutcome run_simulate(const std::filesystem::path& config, const std::filesystem::path& out,
                             std::optional<std::uint64_t> seed) {
  const json root = read_json_file(config);
  Reader top(root, "");
  SimConfig sc;
  const CovarianceModel model = read_model(top);
  sc.grid = read_grid(top);
  if (std::string m; top.get("method", m)) sc.method = parse_method(m);
  top.get("padding_factor", sc.padding_factor);
  top.get("eig_clip_tol", sc.eig_clip_tol);
  top.get("max_clipped_fraction", sc.max_clipped_fraction);
  top.get("seed", sc.master_seed);
  top.get("replicate_index", sc.replicate_index);
  top.finish();
  if (seed) sc.master_seed = *seed;
  try {
    sc.validate();
    if (auto d = model_dimension(model); d && *d != sc.grid.d) throw DomainError("model and grid dimensions differ");
  } catch (const DomainError& e) {
    config_fail("", e.what());
  }
  if (out.empty()) throw ConfigError("simulate needs an output path");

  SimDiagnostics diag;
  const GridField field = sample(model, sc, &diag);
  if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
  write_field(out, field);

  ojson j;
  j["version"] = version();
  j["field"] = out.filename().string();
  j["seed"] = sc.master_seed;
  j["replicate_index"] = sc.replicate_index;
  j["points"] = field.values.size();
  j["clipped_mass_fraction"] = diag.clipped_mass_fraction;
  j["negative_count"] = diag.negative_count;
  j["padding_used"] = diag.padding_used;
  j["torus"] = diag.torus;
  j["jitter"] = diag.jitter;
  SimulateOutcome o{out, j.dump(2)};
  write_text(std::filesystem::path(out.string() + ".json"), o.diagnostics_json + "\n");
  return o;
}

std::string run_estimate(const std::filesystem::path& config, const std::filesystem::path& out, int workers) {
  const json root = read_json_file(config);
  Reader top(root, "");
  const auto field_rel = top.require<std::string>("field");
  const auto kind = top.require<std::string>("estimator");
  std::filesystem::path field_path = field_rel;
  if (field_path.is_relative()) field_path = config.parent_path() / field_path;

  ojson j;
  j["version"] = version();
  j["estimator"] = kind;

  if (kind == "matern" || kind == "matern_alpha") {
    const double nu = top.require<double>("nu");
    std::optional<int> m;
    std::optional<IndexPair> pq;
    top.get("m", m);
    top.get("pq", pq);
    top.finish();
    const GridField field = read_field(field_path);
    const QSource src = QSource::from_field(field, workers);
    const auto dirs = DirectionSet::canonical(field.spec.d);
    const int order = m ? *m : (kind == "matern_alpha" ? (pq ? pq->p : select_pq(nu, field.spec.d).p)
                                                       : std::max(2, static_cast<int>(std::ceil(nu)) + 1));
    const auto rep = estimate_matern_any_d(src, nu, order, dirs);
    j["m"] = order;
    j["sigma2_alpha2nu"] = rep.sigma2_alpha2nu;
    j["M_hat"] = detail::matrix_json(rep.M_hat);
    j["clamped_diagonals"] = rep.diagnostics.clamped_diagonals;
    if (kind == "matern_alpha") {
      const auto a = estimate_alpha_highd(src, nu, rep, dirs, AlphaOptions{pq});
      j["pq"] = {a.pq.p, a.pq.q};
      j["alpha_hat"] = a.alpha_hat;
      j["sigma_hat"] = a.sigma_hat;
      j["clamped_alpha"] = a.diagnostics.clamped_alpha;
    }
  } else if (kind == "c1c2") {
    const double d1 = top.require<double>("delta1");
    const double d2 = top.require<double>("delta2");
    int p = 2;
    int q = 3;
    top.get("p", p);
    top.get("q", q);
    LatticeVector h;
    top.get("direction", h);
    top.finish();
    const GridField field = read_field(field_path);
    if (h.empty()) {
      h.assign(static_cast<std::size_t>(field.spec.d), 0);
      h[0] = 1;
    }
    const auto e = estimate_c1_c2(QSource::from_field(field, workers), d1, d2, p, q, h);
    j["p"] = p;
    j["q"] = q;
    j["direction"] = h;
    j["c1_hat"] = e.c1_hat;
    j["c2_hat"] = e.c2_hat;
    j["c1_corrected"] = e.c1_corrected;
  } else if (kind == "powexp") {
    const double delta = top.require<double>("delta");
    int p = 1;
    PowExpOptions opts;
    top.get("p", p);
    top.get("separate", opts.separate);
    top.get("q", opts.q);
    top.finish();
    const GridField field = read_field(field_path);
    const auto dirs = DirectionSet::canonical(field.spec.d);
    const auto e = estimate_powexp(QSource::from_field(field, workers), delta, p, dirs, opts);
    j["p"] = p;
    j["sigma2_alpha_delta"] = e.sigma2_alpha_delta;
    j["M_hat"] = detail::matrix_json(e.M_hat);
    j["first_stage"] = e.first_stage;
    if (e.pq_used) j["pq"] = {e.pq_used->p, e.pq_used->q};
    j["sigma_hat"] = e.sigma_hat ? ojson(*e.sigma_hat) : ojson();
    j["alpha_hat"] = e.alpha_hat ? ojson(*e.alpha_hat) : ojson();
  } else {
    config_fail("estimator", "expected matern, matern_alpha, c1c2 or powexp");
  }
  const std::string text = j.dump(2);
  if (!out.empty()) write_text(out, text + "\n");
  return text;
}

}  // namespace qvest::harness
