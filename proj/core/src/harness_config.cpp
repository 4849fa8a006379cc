#include <cmath>
#include <fstream>
#include <sstream>

#include "config_reader.hpp"
#include "qvest/covariance.hpp"
#include "qvest/fieldsim.hpp"
#include "qvest/harness.hpp"

namespace qvest::harness {

using detail::config_fail;
using detail::json;
using detail::ojson;
using detail::Reader;

const char* version() {
#ifdef QVEST_VERSION
  return QVEST_VERSION;
#else
  return "unknown";
#endif
}

const char* to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kTable1: return "table1";
    case ExperimentKind::kFig3: return "fig3";
    case ExperimentKind::kVarianceDecay: return "variance_decay";
    case ExperimentKind::kHighdAlpha: return "highd_alpha";
    case ExperimentKind::kPowexp: return "powexp";
    case ExperimentKind::kConstants: return "constants";
  }
  return "?";
}

const char* to_string(Scale scale) { return scale == Scale::kFull ? "full" : "desk"; }

namespace {

ExperimentKind parse_kind(const std::string& s) {
  for (auto k : {ExperimentKind::kTable1, ExperimentKind::kFig3, ExperimentKind::kVarianceDecay,
                 ExperimentKind::kHighdAlpha, ExperimentKind::kPowexp, ExperimentKind::kConstants}) {
    if (s == to_string(k)) return k;
  }
  config_fail("experiment", "unknown experiment kind '" + s + "'");
}

Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::kDesk;
  if (s == "full") return Scale::kFull;
  config_fail("scale", "expected 'desk' or 'full', got '" + s + "'");
}

Eigen::MatrixXd table1_m() {
  Eigen::MatrixXd M(2, 2);
  M << 1.2, 0.5, 0.0, 1.0 / 1.2;
  return M;
}

void read_table1(Reader& r, Table1Params& p) {
  r.get("sigma", p.sigma);
  r.get("alpha", p.alpha);
  r.get("nu", p.nu);
  r.get("M", p.M);
  r.get("n", p.n);
  r.get("points", p.points);
  r.get("orders", p.orders);
  r.get("exact", p.exact);
}

void read_fig3(Reader& r, Fig3Params& p) {
  r.get("c1", p.c1);
  r.get("c2", p.c2);
  r.get("delta1", p.delta1);
  r.get("delta2", p.delta2);
  r.get("poly1", p.poly1);
  r.get("poly2", p.poly2);
  r.get("p", p.p);
  r.get("q", p.q);
  r.get("points", p.points);
  r.get("direction", p.direction);
  r.get("padding_factor", p.padding_factor);
  r.get("max_clipped_fraction", p.max_clipped_fraction);
  r.get("bins", p.bins);
}

void read_variance_decay(Reader& r, VarianceDecayParams& p) {
  r.get("nu", p.nu);
  r.get("sigma", p.sigma);
  r.get("alpha", p.alpha);
  r.get("orders", p.orders);
  r.get("n_values", p.n_values);
}

void read_highd(Reader& r, HighdParams& p) {
  r.get("d", p.d);
  r.get("nu", p.nu);
  r.get("sigma", p.sigma);
  r.get("alpha", p.alpha);
  r.get("n_values", p.n_values);
  r.get("pq", p.pq);
  r.get("m", p.m);
}

void read_powexp(Reader& r, PowexpParams& p) {
  r.get("sigma", p.sigma);
  r.get("alpha", p.alpha);
  r.get("delta", p.delta);
  r.get("d", p.d);
  r.get("p", p.p);
  r.get("n_values", p.n_values);
  r.get("separate", p.separate);
  r.get("q", p.q);
  r.get("simulate", p.simulate);
  r.get("sim_d", p.sim_d);
  r.get("sim_n", p.sim_n);
  r.get("sim_points", p.sim_points);
}

template <class T, class Fn>
void read_list(Reader& r, const std::string& key, std::vector<T>& out, Fn&& read_one) {
  const json* j = r.child(key);
  if (!j) return;
  if (!j->is_array()) config_fail(r.sub(key), "expected an array");
  std::vector<T> v;
  for (std::size_t i = 0; i < j->size(); ++i) {
    Reader item((*j)[i], r.sub(key) + "[" + std::to_string(i) + "]");
    v.push_back(read_one(item));
    item.finish();
  }
  out = std::move(v);
}

void read_constants(Reader& r, ConstantsParams& p) {
  read_list(r, "ab", p.ab, [](Reader& it) {
    return ConstantsParams::AB{it.require<double>("nu"), it.require<int>("m")};
  });
  read_list(r, "cd", p.cd, [](Reader& it) {
    ConstantsParams::CD c{it.require<int>("p"), it.require<double>("delta")};
    it.get("h_norm", c.h_norm);
    return c;
  });
  read_list(r, "pq", p.pq, [](Reader& it) {
    return ConstantsParams::PQ{it.require<double>("nu"), it.require<int>("d")};
  });
}

void check(bool ok, const std::string& path, const std::string& msg) {
  if (!ok) config_fail(path, msg);
}

// Module-level validation errors become config errors.
template <class Fn>
void check_module(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    config_fail(path, e.what());
  }
}

}  // namespace

ExperimentConfig preset(ExperimentKind kind, Scale scale) {
  ExperimentConfig c;
  c.kind = kind;
  c.scale = scale;
  const bool full = scale == Scale::kFull;
  c.table1.M = table1_m();
  switch (kind) {
    case ExperimentKind::kTable1:
      c.replicates = 500;
      break;
    case ExperimentKind::kFig3:
      c.replicates = full ? 500 : 100;
      c.fig3.points = full ? 1000 : 256;
      break;
    case ExperimentKind::kVarianceDecay:
      c.replicates = 2000;
      break;
    case ExperimentKind::kHighdAlpha:
      c.replicates = full ? 500 : 100;
      break;
    case ExperimentKind::kPowexp:
      c.replicates = full ? 500 : 100;
      c.powexp.sim_n = full ? 256 : 64;
      c.powexp.sim_points = full ? 256 : 64;
      break;
    case ExperimentKind::kConstants:
      c.replicates = 1;
      c.constants.ab = {{0.5, 1}, {0.5, 2}, {0.5, 3}, {1.0, 2}, {1.75, 2}, {1.75, 3}, {1.75, 4}, {2.0, 4}};
      c.constants.cd = {{1, 0.3}, {2, 0.2}, {3, 0.2}, {2, 0.4}, {3, 0.4}, {2, 0.2, std::sqrt(2.0)}};
      c.constants.pq = {{0.5, 5}, {1.0, 5}, {1.75, 5}, {0.5, 6}};
      break;
  }
  return c;
}

ExperimentConfig parse_experiment_config(const std::string& json_text, const Overrides& overrides) {
  const json root = detail::parse_json_text(json_text);
  Reader top(root, "");
  const auto kind = parse_kind(top.require<std::string>("experiment"));
  Scale scale = Scale::kDesk;
  if (std::string s; top.get("scale", s)) scale = parse_scale(s);
  if (overrides.scale) scale = *overrides.scale;

  ExperimentConfig c = preset(kind, scale);
  top.get("seed", c.seed);
  top.get("replicates", c.replicates);
  top.get("workers", c.workers);
  if (std::string dir; top.get("output_dir", dir)) c.output_dir = dir;
  top.get("max_failure_fraction", c.max_failure_fraction);

  if (const json* params = top.child("params")) {
    Reader r(*params, "params");
    switch (kind) {
      case ExperimentKind::kTable1: read_table1(r, c.table1); break;
      case ExperimentKind::kFig3: read_fig3(r, c.fig3); break;
      case ExperimentKind::kVarianceDecay: read_variance_decay(r, c.variance_decay); break;
      case ExperimentKind::kHighdAlpha: read_highd(r, c.highd); break;
      case ExperimentKind::kPowexp: read_powexp(r, c.powexp); break;
      case ExperimentKind::kConstants: read_constants(r, c.constants); break;
    }
    r.finish();
  }
  top.finish();

  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.workers) c.workers = *overrides.workers;
  if (overrides.output_dir) c.output_dir = *overrides.output_dir;
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_experiment_config(ss.str(), overrides);
}

void ExperimentConfig::validate() const {
  check(replicates >= 1, "replicates", "must be at least 1");
  check(workers >= 1, "workers", "must be at least 1");
  check(max_failure_fraction >= 0.0 && max_failure_fraction < 1.0, "max_failure_fraction",
        "must lie in [0, 1)");

  switch (kind) {
    case ExperimentKind::kTable1: {
      const auto& p = table1;
      check_module("params", [&] { MaternParams{p.sigma, p.alpha, p.nu, p.M}.validate(); });
      check(p.M.rows() == 2, "params.M", "table1 is two-dimensional");
      check(p.n >= 1, "params.n", "must be positive");
      check(!p.orders.empty(), "params.orders", "must not be empty");
      int max_m = 0;
      for (int m : p.orders) {
        check(m >= 1 && m > p.nu, "params.orders", "every order must exceed nu");
        max_m = std::max(max_m, m);
      }
      check(p.points >= 2, "params.points", "must be at least 2");
      const auto side = static_cast<std::size_t>(p.points + max_m);
      check(p.exact || side * side <= kDenseLimit, "params.points",
            "dense simulation grid exceeds " + std::to_string(kDenseLimit) + " sites");
      break;
    }
    case ExperimentKind::kFig3: {
      const auto& p = fig3;
      check(p.c2 >= 0.0 && p.c1 > 0.0, "params", "c1 must be positive and c2 nonnegative");
      check(p.delta1 > 0.0 && p.delta1 < p.delta2 && p.delta2 < 2.0, "params",
            "need 0 < delta1 < delta2 < 2");
      check(p.poly1.size() == 2 && p.poly2.size() == 2, "params", "poly1 and poly2 hold two coefficients");
      check(p.p >= 1 && p.q > p.p, "params", "need 1 <= p < q");
      check(2 * p.p > p.delta2, "params.p", "increment order too small for delta2");
      check(p.points >= 2, "params.points", "must be at least 2");
      check(p.direction.size() == 2, "params.direction", "must have two components");
      check(p.direction[0] != 0 || p.direction[1] != 0, "params.direction", "must be nonzero");
      check(p.padding_factor >= 1.0, "params.padding_factor", "must be at least 1");
      check(p.max_clipped_fraction >= 0.0, "params.max_clipped_fraction", "must be nonnegative");
      check(p.bins >= 1, "params.bins", "must be positive");
      break;
    }
    case ExperimentKind::kVarianceDecay: {
      const auto& p = variance_decay;
      check_module("params", [&] {
        MaternParams{p.sigma, p.alpha, p.nu, Eigen::MatrixXd::Identity(1, 1)}.validate();
      });
      check(!p.orders.empty(), "params.orders", "must not be empty");
      for (int m : p.orders) check(m >= 1 && m > p.nu, "params.orders", "every order must exceed nu");
      std::vector<std::int64_t> ns = p.n_values;
      std::sort(ns.begin(), ns.end());
      ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
      check(ns.size() >= 2, "params.n_values", "a slope needs at least two distinct n");
      for (auto n : ns) check(n >= 2, "params.n_values", "every n must be at least 2");
      break;
    }
    case ExperimentKind::kHighdAlpha: {
      const auto& p = highd;
      check(p.d >= 1, "params.d", "must be positive");
      check_module("params", [&] {
        MaternParams{p.sigma, p.alpha, p.nu, Eigen::MatrixXd::Identity(p.d, p.d)}.validate();
      });
      IndexPair pq{0, 0};
      if (p.pq) {
        pq = *p.pq;
        check(pq.p > p.nu + 1.0 && pq.q > pq.p, "params.pq", "need nu + 1 < p < q");
      } else {
        check_module("params", [&] { pq = select_pq(p.nu, p.d); });
      }
      if (p.m) check(*p.m > p.nu, "params.m", "must exceed nu");
      check(!p.n_values.empty(), "params.n_values", "must not be empty");
      for (auto n : p.n_values) check(n >= 2, "params.n_values", "every n must be at least 2");
      break;
    }
    case ExperimentKind::kPowexp: {
      const auto& p = powexp;
      check(p.d >= 1 && p.sim_d >= 1, "params", "dimensions must be positive");
      check_module("params", [&] {
        PowExpParams m{p.sigma, p.alpha, p.delta, Eigen::MatrixXd::Identity(p.d, p.d)};
        m.validate();
        if (p.separate) m.validate_for_separation();
      });
      check(p.p >= 1 && 2 * p.p > p.delta, "params.p", "increment order too small for delta");
      if (p.separate) {
        check(2.0 * p.delta < p.d, "params", "separation needs 2 delta < d");
        check(p.p > 1.5 * p.delta, "params.p", "separation needs p > 1.5 delta");
      }
      if (p.q) check(*p.q > p.p, "params.q", "must exceed p");
      check(p.n_values.size() >= 2, "params.n_values", "an order needs at least two n");
      for (auto n : p.n_values) check(n >= 2, "params.n_values", "every n must be at least 2");
      if (p.simulate) {
        check(p.sim_n >= 2 && p.sim_points >= 2, "params", "sim_n and sim_points must be at least 2");
      }
      break;
    }
    case ExperimentKind::kConstants: {
      const auto& p = constants;
      for (const auto& ab : p.ab) check(ab.nu > 0.0 && ab.m >= 1, "params.ab", "need nu > 0 and m >= 1");
      for (const auto& cd : p.cd) {
        check(cd.p >= 1 && cd.delta > 0.0 && cd.delta < 2.0 && cd.h_norm > 0.0, "params.cd",
              "need p >= 1, 0 < delta < 2, h_norm > 0");
      }
      for (const auto& pq : p.pq) check(pq.nu > 0.0 && pq.d >= 1, "params.pq", "need nu > 0 and d >= 1");
      break;
    }
  }
}

std::string resolved_config_json(const ExperimentConfig& c) {
  ojson j;
  j["experiment"] = to_string(c.kind);
  j["scale"] = to_string(c.scale);
  j["seed"] = c.seed;
  j["replicates"] = c.replicates;
  j["max_failure_fraction"] = c.max_failure_fraction;
  ojson p;
  switch (c.kind) {
    case ExperimentKind::kTable1: {
      const auto& t = c.table1;
      p["sigma"] = t.sigma;
      p["alpha"] = t.alpha;
      p["nu"] = t.nu;
      p["M"] = detail::matrix_json(t.M);
      p["n"] = t.n;
      p["points"] = t.points;
      p["orders"] = t.orders;
      p["exact"] = t.exact;
      break;
    }
    case ExperimentKind::kFig3: {
      const auto& t = c.fig3;
      p["c1"] = t.c1;
      p["c2"] = t.c2;
      p["delta1"] = t.delta1;
      p["delta2"] = t.delta2;
      p["poly1"] = t.poly1;
      p["poly2"] = t.poly2;
      p["p"] = t.p;
      p["q"] = t.q;
      p["points"] = t.points;
      p["direction"] = t.direction;
      p["padding_factor"] = t.padding_factor;
      p["max_clipped_fraction"] = t.max_clipped_fraction;
      p["bins"] = t.bins;
      break;
    }
    case ExperimentKind::kVarianceDecay: {
      const auto& t = c.variance_decay;
      p["nu"] = t.nu;
      p["sigma"] = t.sigma;
      p["alpha"] = t.alpha;
      p["orders"] = t.orders;
      p["n_values"] = t.n_values;
      break;
    }
    case ExperimentKind::kHighdAlpha: {
      const auto& t = c.highd;
      p["d"] = t.d;
      p["nu"] = t.nu;
      p["sigma"] = t.sigma;
      p["alpha"] = t.alpha;
      p["n_values"] = t.n_values;
      p["pq"] = t.pq ? ojson::array({t.pq->p, t.pq->q}) : ojson();
      p["m"] = t.m ? ojson(*t.m) : ojson();
      break;
    }
    case ExperimentKind::kPowexp: {
      const auto& t = c.powexp;
      p["sigma"] = t.sigma;
      p["alpha"] = t.alpha;
      p["delta"] = t.delta;
      p["d"] = t.d;
      p["p"] = t.p;
      p["n_values"] = t.n_values;
      p["separate"] = t.separate;
      p["q"] = t.q ? ojson(*t.q) : ojson();
      p["simulate"] = t.simulate;
      p["sim_d"] = t.sim_d;
      p["sim_n"] = t.sim_n;
      p["sim_points"] = t.sim_points;
      break;
    }
    case ExperimentKind::kConstants: {
      const auto& t = c.constants;
      ojson ab = ojson::array();
      for (const auto& x : t.ab) ab.push_back({{"nu", x.nu}, {"m", x.m}});
      ojson cd = ojson::array();
      for (const auto& x : t.cd) cd.push_back({{"p", x.p}, {"delta", x.delta}, {"h_norm", x.h_norm}});
      ojson pq = ojson::array();
      for (const auto& x : t.pq) pq.push_back({{"nu", x.nu}, {"d", x.d}});
      p["ab"] = ab;
      p["cd"] = cd;
      p["pq"] = pq;
      break;
    }
  }
  j["params"] = p;
  return j.dump(2);
}

}  // namespace qvest::harness
