// gibbsflow: command-line driver for the gibbsflow library.
//
// Exit codes: 0 ok, 2 usage or configuration error, 3 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <gibbsflow/gibbsflow.hpp>

using namespace gibbsflow;
using json = nlohmann::ordered_json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "a:b:step" (inclusive) or "t1,t2,...". Every entry must be positive.
std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  auto num = [&](const std::string& tok) {
    std::size_t pos = 0;
    double v = 0;
    try {
      v = std::stod(tok, &pos);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + tok + "' in time grid");
    }
    if (pos != tok.size()) throw UsageError("bad number '" + tok + "' in time grid");
    return v;
  };
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw UsageError("time grid must be a:b:step");
    const double a = num(parts[0]), b = num(parts[1]), step = num(parts[2]);
    if (!(step > 0)) throw UsageError("time grid step must be positive");
    if (b >= a) {
      const auto n = static_cast<std::size_t>(std::floor((b - a) / step + 1e-9));
      for (std::size_t i = 0; i <= n; ++i) out.push_back(a + static_cast<double>(i) * step);
    }
  } else {
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');) {
      if (!p.empty()) out.push_back(num(p));
    }
  }
  if (out.empty()) throw UsageError("empty time grid");
  for (double t : out) {
    if (!(t > 0)) throw UsageError("time grid entries must be positive");
  }
  return out;
}

std::string git_blob_sha1(const std::string& content) {
  const std::string head = "blob " + std::to_string(content.size()) + '\0';
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, head.data(), head.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    hex += buf;
  }
  return hex;
}

void write_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + path);
  f << content;
}

// Writes to `path`, or stdout when empty or "-".
void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
  } else {
    write_file(path, content);
  }
}

// ---------------------------------------------------------------------------
// gap-scan configuration

class Schema {
 public:
  void fail(const std::string& where, const std::string& what) { errors_.push_back(where + ": " + what); }
  const std::vector<std::string>& errors() const { return errors_; }

  void only(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool ok = false;
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) fail(where + "." + it.key(), "unknown key");
    }
  }
  const json* object(const json& parent, const std::string& where, const char* key, bool required) {
    if (!parent.contains(key)) {
      if (required) fail(where + "." + key, "missing");
      return nullptr;
    }
    const json& v = parent.at(key);
    if (!v.is_object()) {
      fail(where + "." + key, "expected an object");
      return nullptr;
    }
    return &v;
  }
  double number(const json& parent, const std::string& where, const char* key, std::optional<double> fallback) {
    if (!parent.contains(key)) {
      if (!fallback) fail(where + "." + key, "missing");
      return fallback.value_or(0);
    }
    const json& v = parent.at(key);
    if (!v.is_number()) {
      fail(where + "." + key, "expected a number");
      return 0;
    }
    return v.get<double>();
  }
  long long integer(const json& parent, const std::string& where, const char* key, std::optional<long long> fallback,
                    long long lo) {
    if (!parent.contains(key)) {
      if (!fallback) fail(where + "." + key, "missing");
      return fallback.value_or(lo);
    }
    const json& v = parent.at(key);
    if (!v.is_number_integer()) {
      fail(where + "." + key, "expected an integer");
      return lo;
    }
    const auto x = v.get<long long>();
    if (x < lo) fail(where + "." + key, "must be >= " + std::to_string(lo));
    return x;
  }
  std::vector<double> numbers(const json& parent, const std::string& where, const char* key) {
    std::vector<double> out;
    const json& v = parent.at(key);
    if (!v.is_array() || v.empty()) {
      fail(where + "." + key, "expected a non-empty array of numbers");
      return out;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !(v[i].get<double>() > 0)) {
        fail(where + "." + key + "[" + std::to_string(i) + "]", "expected a positive number");
      } else {
        out.push_back(v[i].get<double>());
      }
    }
    return out;
  }

 private:
  std::vector<std::string> errors_;
};

struct GapScanConfig {
  double beta = 0, h = 0;
  int d = 2;
  double delta = 1;
  std::string grid_kind;  // t_grid, h_t_grid or compensation_multiples
  std::vector<double> grid;
  EtaSpec eta;
  std::vector<int> sides;
  double threshold = kCrossoverThreshold;
  MCParams mc;
  std::string csv = "gap_scan.csv", sidecar = "gap_scan.json";

  json to_json() const {
    json j;
    j["model"] = {{"beta", beta}, {"h", h}, {"d", d}};
    j["dynamics"] = {{"delta", delta}, {grid_kind, grid}};
    j["analysis"] = {{"eta", {{"kind", to_string(eta.kind)}, {"p", eta.p}, {"seed", eta.seed}}},
                     {"sides", sides},
                     {"threshold", threshold},
                     {"mc",
                      {{"sweeps", mc.sweeps},
                       {"burn_in", mc.burn_in},
                       {"replicas", mc.replicas},
                       {"thinning", mc.thinning},
                       {"random_scan", mc.random_scan}}}};
    j["seed"] = mc.seed;
    j["output"] = {{"csv", csv}, {"sidecar", sidecar}};
    return j;
  }
};

GapScanConfig parse_gap_scan(const json& root_in) {
  Schema s;
  GapScanConfig c;
  if (!root_in.is_object()) throw UsageError("config: expected a JSON object");
  // A sidecar carries its resolved config under "config".
  const json& root = root_in.contains("config") && root_in.at("config").is_object() ? root_in.at("config") : root_in;
  s.only(root, "config", {"model", "dynamics", "analysis", "seed", "output"});
  if (const json* m = s.object(root, "config", "model", true)) {
    s.only(*m, "model", {"beta", "h", "d"});
    c.beta = s.number(*m, "model", "beta", std::nullopt);
    c.h = s.number(*m, "model", "h", 0.0);
    c.d = static_cast<int>(s.integer(*m, "model", "d", 2, 1));
    if (c.d > 3) s.fail("model.d", "must be 1, 2 or 3");
  }
  if (const json* dy = s.object(root, "config", "dynamics", true)) {
    s.only(*dy, "dynamics", {"delta", "t_grid", "h_t_grid", "compensation_multiples"});
    c.delta = s.number(*dy, "dynamics", "delta", 1.0);
    if (!(c.delta > 0 && c.delta <= 1)) s.fail("dynamics.delta", "must lie in (0,1]");
    int given = 0;
    for (const char* k : {"t_grid", "h_t_grid", "compensation_multiples"}) {
      if (dy->contains(k)) {
        ++given;
        c.grid_kind = k;
        c.grid = s.numbers(*dy, "dynamics", k);
      }
    }
    if (given != 1) s.fail("dynamics", "exactly one of t_grid, h_t_grid, compensation_multiples is required");
  }
  if (const json* an = s.object(root, "config", "analysis", true)) {
    s.only(*an, "analysis", {"eta", "sides", "threshold", "mc"});
    if (const json* e = s.object(*an, "analysis", "eta", false)) {
      s.only(*e, "analysis.eta", {"kind", "p", "seed"});
      if (e->contains("kind")) {
        if (!e->at("kind").is_string()) {
          s.fail("analysis.eta.kind", "expected a string");
        } else {
          try {
            c.eta.kind = special_kind_from_string(e->at("kind").get<std::string>());
          } catch (const InvalidArgument& ex) {
            s.fail("analysis.eta.kind", ex.what());
          }
        }
      }
      c.eta.p = s.number(*e, "analysis.eta", "p", 0.0);
      if (!(c.eta.p >= 0 && c.eta.p <= 1)) s.fail("analysis.eta.p", "must lie in [0,1]");
      c.eta.seed = static_cast<std::uint64_t>(s.integer(*e, "analysis.eta", "seed", 0, 0));
    }
    if (!an->contains("sides")) {
      s.fail("analysis.sides", "missing");
    } else if (!an->at("sides").is_array() || an->at("sides").empty()) {
      s.fail("analysis.sides", "expected a non-empty array of integers");
    } else {
      for (std::size_t i = 0; i < an->at("sides").size(); ++i) {
        const json& v = an->at("sides")[i];
        if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > 4096) {
          s.fail("analysis.sides[" + std::to_string(i) + "]", "expected an integer in [1,4096]");
        } else {
          c.sides.push_back(v.get<int>());
        }
      }
    }
    c.threshold = s.number(*an, "analysis", "threshold", kCrossoverThreshold);
    if (const json* mc = s.object(*an, "analysis", "mc", false)) {
      s.only(*mc, "analysis.mc", {"sweeps", "burn_in", "replicas", "thinning", "random_scan"});
      c.mc.sweeps = static_cast<std::size_t>(s.integer(*mc, "analysis.mc", "sweeps", 1000, 1));
      c.mc.burn_in = static_cast<std::size_t>(s.integer(*mc, "analysis.mc", "burn_in", 100, 0));
      c.mc.replicas = static_cast<std::size_t>(s.integer(*mc, "analysis.mc", "replicas", 1, 1));
      c.mc.thinning = static_cast<std::size_t>(s.integer(*mc, "analysis.mc", "thinning", 1, 1));
      if (mc->contains("random_scan")) {
        if (!mc->at("random_scan").is_boolean()) {
          s.fail("analysis.mc.random_scan", "expected true or false");
        } else {
          c.mc.random_scan = mc->at("random_scan").get<bool>();
        }
      }
    }
  }
  c.mc.seed = static_cast<std::uint64_t>(s.integer(root, "config", "seed", 0, 0));
  if (const json* o = s.object(root, "config", "output", false)) {
    s.only(*o, "output", {"csv", "sidecar"});
    for (const char* k : {"csv", "sidecar"}) {
      if (!o->contains(k)) continue;
      if (!o->at(k).is_string() || o->at(k).get<std::string>().empty()) {
        s.fail(std::string("output.") + k, "expected a path");
      } else {
        (std::string(k) == "csv" ? c.csv : c.sidecar) = o->at(k).get<std::string>();
      }
    }
  }
  if (c.grid_kind == "compensation_multiples" && !(c.h > 0)) {
    s.fail("dynamics.compensation_multiples", "needs model.h > 0");
  }
  if (!s.errors().empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : s.errors()) msg += "\n  " + e;
    throw UsageError(msg);
  }
  return c;
}

int run_gap_scan(const std::string& path, const std::string& csv_override, const std::string& sidecar_override,
                 unsigned threads) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot read config " + path);
  json root;
  try {
    root = json::parse(f);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  GapScanConfig c = parse_gap_scan(root);
  if (!csv_override.empty()) c.csv = csv_override;
  if (!sidecar_override.empty()) c.sidecar = sidecar_override;
  c.mc.threads = threads;

  // Kernel times, increasing.
  std::vector<double> times;
  for (double g : c.grid) {
    if (c.grid_kind == "t_grid") times.push_back(g);
    if (c.grid_kind == "h_t_grid") times.push_back(compensation_time(g, c.delta));
    if (c.grid_kind == "compensation_multiples") times.push_back(g * compensation_time(c.h, c.delta));
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());

  const Interaction u_nu = ising_interaction(c.beta, 0.0, c.d);
  GapScanResult r = transition_scan(u_nu, c.h, c.delta, c.eta, times, c.d, c.sides, c.mc, c.threshold);

  std::ostringstream csv;
  write_gap_scan_csv(csv, r);
  write_file(c.csv, csv.str());

  json side;
  side["command"] = "gap-scan";
  side["config"] = c.to_json();
  json tl = json::array();
  for (double t : times) tl.push_back({{"t", t}, {"h12", fields(t, c.delta).h12}});
  side["times"] = tl;
  side["result"] = r.metadata;
  bool significant_any = false;
  for (const auto& row : r.rows) significant_any = significant_any || (row.method == "mc" && gap_significant(row, c.threshold));
  side["verdict"] = r.crossover ? "phase coexistence detected in the constrained system" : "no significant gap";
  if (c.d == 2 && c.h > 0) {
    side["evidence_only"] = true;
    side["note"] = "re-entrance with h > 0 is established for d >= 3; the d = 2 run is evidence only";
  } else {
    side["evidence_only"] = false;
  }
  const auto dob = dobrushin_evolved(u_nu, c.h, times.front(), c.delta);
  side["dobrushin"] = {{"norm", dob.norm}, {"satisfied", dob.satisfied}};
  side["csv"] = {{"path", c.csv}, {"git_blob_sha1", git_blob_sha1(csv.str())}};
  write_file(c.sidecar, side.dump(2) + "\n");
  std::cout << "wrote " << c.csv << " and " << c.sidecar << "\n";
  std::cout << "crossover " << (r.crossover ? fmt_num(*r.crossover) : std::string("none")) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string p; std::getline(ss, p, ',');) {
    try {
      std::size_t pos = 0;
      const long v = std::stol(p, &pos);
      if (pos != p.size() || v < 1) throw UsageError("");
      out.push_back(static_cast<int>(v));
    } catch (const std::exception&) {
      throw UsageError("bad integer list '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

struct ModelOpts {
  double beta = 0, h = 0;
  int d = 1, side = 4;
  bool torus = false;
  std::string init = "all-plus";
  std::optional<double> eps;

  void add(CLI::App* app, bool with_init) {
    app->add_option("--beta", beta, "coupling");
    app->add_option("--h", h, "homogeneous field");
    app->add_option("--d", d, "dimension")->check(CLI::Range(1, 3));
    app->add_option("--L", side, "box side")->check(CLI::Range(1, 4096));
    app->add_flag("--torus", torus, "periodic box");
    app->add_option("--eps", eps, "product dynamics with bias eps instead of Ising rates");
    if (with_init) app->add_option("--init", init, "initial configuration: all-plus, all-minus, alternating");
  }
  Box box() const { return Box::cube(d, side, torus ? Topology::torus : Topology::open); }
  RateSpec rates() const {
    Box b = box();
    if (eps) return RateSpec::product(b, *eps);
    return RateSpec::from_interaction(ising_interaction(beta, h, d), b);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gibbsflow: Gibbs measures under spin-flip dynamics"};
  app.set_help_flag("--help", "print help");  // -h is free for the field option
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: GIBBSFLOW_THREADS or all cores)");

  // fields
  auto* c_fields = app.add_subcommand("fields", "dynamical fields h1, h2, h12 on a time grid");
  std::string t_grid, out;
  double delta = 1.0;
  c_fields->add_option("--t-grid", t_grid, "a:b:step or t1,t2,...")->required();
  c_fields->add_option("--delta", delta, "bias parameter in (0,1]");
  c_fields->add_option("--out", out, "output CSV (default stdout)");

  // gap-scan
  auto* c_gap = app.add_subcommand("gap-scan", "plus/minus boundary gap of the constrained system");
  std::string config, csv_path, sidecar_path;
  c_gap->add_option("--config", config, "JSON configuration or sidecar")->required();
  c_gap->add_option("--csv", csv_path, "override output.csv");
  c_gap->add_option("--sidecar", sidecar_path, "override output.sidecar");

  // dobrushin
  auto* c_dob = app.add_subcommand("dobrushin", "Dobrushin norm of the Ising interaction");
  double beta = 0, h = 0;
  int d = 2;
  c_dob->add_option("--beta", beta)->required();
  c_dob->add_option("--h", h);
  c_dob->add_option("--d", d)->check(CLI::Range(1, 3));

  // t0-estimate
  auto* c_t0 = app.add_subcommand("t0-estimate", "small-time horizon of the cluster expansion");
  double mu_beta = 0, mu_h = 0, connectivity = 0;
  c_t0->add_option("--beta", beta)->required();
  c_t0->add_option("--h", h);
  c_t0->add_option("--d", d)->check(CLI::Range(1, 3));
  c_t0->add_option("--mu-beta", mu_beta, "coupling of the reversible measure");
  c_t0->add_option("--mu-h", mu_h, "field of the reversible measure");
  c_t0->add_option("--connectivity", connectivity, "growth constant a (default 2de)");
  c_t0->add_option("--t-grid", t_grid, "times for the per-t table");

  // rn-check
  auto* c_rn = app.add_subcommand("rn-check", "derivative of the evolved measure, three ways");
  ModelOpts rn_model;
  rn_model.add(c_rn, false);
  double t = 0.05;
  int k = 3;
  long site = -1;
  std::string continuity;
  c_rn->add_option("--t", t, "time");
  c_rn->add_option("--k", k, "cluster truncation")->check(CLI::Range(1, 6));
  c_rn->add_option("--site", site, "flipped site (default: centre)");
  c_rn->add_option("--continuity", continuity, "sides for the boundary-sensitivity probe");
  c_rn->add_option("--out", out, "per-state CSV");

  // pca-check
  auto* c_pca = app.add_subcommand("pca-check", "discrete-time approximation against exact evolution");
  std::string ns = "64,128,256";
  double pca_t = 1.0, pca_beta = 0.4, pca_h = 0.1;
  c_pca->add_option("--n", ns, "time steps per unit time");
  c_pca->add_option("--t", pca_t);
  c_pca->add_option("--beta", pca_beta, "Ising rates on a 2x2 box");
  c_pca->add_option("--h", pca_h);
  c_pca->add_option("--out", out);

  // evolve
  auto* c_ev = app.add_subcommand("evolve", "exact law at time t from a configuration or a Gibbs measure");
  ModelOpts ev_model;
  ev_model.add(c_ev, true);
  std::optional<double> nu_beta;
  double nu_h = 0;
  bool full_law = false;
  c_ev->add_option("--t", t)->required();
  c_ev->add_option("--nu-beta", nu_beta, "start from the Ising Gibbs measure with this coupling");
  c_ev->add_option("--nu-h", nu_h);
  c_ev->add_flag("--law", full_law, "print the whole law instead of marginals");
  c_ev->add_option("--out", out);

  // simulate
  auto* c_sim = app.add_subcommand("simulate", "exact trajectory (JSON lines of flip events)");
  ModelOpts sim_model;
  sim_model.add(c_sim, true);
  std::uint64_t seed = 0, stream = 0;
  c_sim->add_option("--t", t)->required();
  c_sim->add_option("--seed", seed);
  c_sim->add_option("--stream", stream);
  c_sim->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*c_fields) {
      const auto grid = parse_grid(t_grid);
      if (!(delta > 0 && delta <= 1)) throw UsageError("--delta must lie in (0,1]");
      std::ostringstream os;
      CsvWriter w(os);
      w.header({"t", "delta", "h1", "h2", "h12"});
      for (double tt : grid) {
        const auto f = fields(tt, delta);
        w.field(f.t).field(f.delta).field(f.h1).field(f.h2).field(f.h12);
        w.end();
      }
      emit(out, os.str());
    } else if (*c_gap) {
      return run_gap_scan(config, csv_path, sidecar_path, threads);
    } else if (*c_dob) {
      const auto r = dobrushin_norm(ising_interaction(beta, h, d));
      std::printf("norm %.3f %s\n", r.norm, r.satisfied ? "satisfied" : "not satisfied");
    } else if (*c_t0) {
      std::vector<double> grid;
      if (!t_grid.empty()) grid = parse_grid(t_grid);
      const auto ch = cluster_horizon(ising_interaction(beta, h, d), ising_interaction(mu_beta, mu_h, d), grid,
                                      connectivity);
      std::ostringstream os;
      CsvWriter w(os);
      w.header({"C", "C_bound", "C_enum", "connectivity", "t0"});
      w.field(ch.C).field(ch.C_bound).field(ch.C_enum).field(ch.connectivity).field(ch.t0);
      w.end();
      if (!grid.empty()) {
        os << "\n";
        w.header({"t", "eps_t", "alpha_t", "bound"});
        for (const auto& r : ch.per_t) {
          w.field(r.t).field(r.eps_t).field(r.alpha_t).field(r.bound);
          w.end();
        }
      }
      std::cout << os.str();
    } else if (*c_rn) {
      const RateSpec rates = rn_model.eps ? rn_model.rates() : RateSpec::product(rn_model.box(), 0.0);
      const Interaction u_nu = ising_interaction(rn_model.beta, rn_model.h, rn_model.d);
      const Site x = site < 0 ? rates.box().origin() : static_cast<Site>(site);
      const auto r = rn_derivative_check(u_nu, rates, t, x, k);
      std::cout << "max_ab " << fmt_num(r.max_ab) << "\n";
      std::cout << "max_ac " << fmt_num(r.max_ac) << "\n";
      std::cout << "max_bc " << fmt_num(r.max_bc) << "\n";
      if (!out.empty()) {
        std::ostringstream os;
        CsvWriter w(os);
        w.header({"state", "direct", "weighted", "cluster"});
        for (std::size_t s = 0; s < r.direct.size(); ++s) {
          w.field(s).field(r.direct[s]).field(r.weighted[s]).field(r.cluster.empty() ? kNaN : r.cluster[s]);
          w.end();
        }
        emit(out, os.str());
      }
      if (!continuity.empty()) {
        const auto rows = continuity_probe(u_nu, rn_model.eps.value_or(0.0), t, parse_int_list(continuity));
        std::ostringstream os;
        CsvWriter w(os);
        w.header({"L", "fixed_radius", "variation"});
        for (const auto& row : rows) {
          w.field(row.side).field(row.fixed_radius).field(row.variation);
          w.end();
        }
        std::cout << os.str();
      }
    } else if (*c_pca) {
      Box b({2, 2}, Topology::open);
      const RateSpec rates = RateSpec::from_interaction(ising_interaction(pca_beta, pca_h, 2), b);
      std::vector<double> p0(16, 0.0);
      p0[15] = 1;
      const auto exact = evolve_law(p0, rates, pca_t);
      const double limit = flip_probability(pca_t);
      std::ostringstream os;
      CsvWriter w(os);
      w.header({"n", "steps", "flip_prob", "flip_limit", "flip_err", "tv_4site"});
      for (int n : parse_int_list(ns)) {
        const double dn = n;
        const double fp = pca_flip_probability(dn, pca_t);
        const double tv = total_variation(PcaKernel(rates, dn).apply(p0, pca_steps(dn, pca_t)), exact);
        w.field(n).field(pca_steps(dn, pca_t)).field(fp).field(limit).field(std::abs(fp - limit)).field(tv);
        w.end();
      }
      emit(out, os.str());
    } else if (*c_ev) {
      const RateSpec rates = ev_model.rates();
      const Box b = ev_model.box();
      std::vector<double> law;
      if (nu_beta) {
        law = exact_measure(GibbsSpec{ising_interaction(*nu_beta, nu_h, ev_model.d), b}, kGeneratorCap).prob;
      } else {
        law.assign(std::size_t{1} << b.size(), 0.0);
        law.at(special_config(special_kind_from_string(ev_model.init), b).index()) = 1.0;
      }
      const auto pt = evolve_law(law, rates, t);
      std::ostringstream os;
      CsvWriter w(os);
      if (full_law) {
        w.header({"state", "prob"});
        for (std::size_t s = 0; s < pt.size(); ++s) {
          w.field(s).field(pt[s]);
          w.end();
        }
      } else {
        w.header({"site", "plus_prob"});
        for (Site x = 0; x < b.size(); ++x) {
          double p = 0;
          for (std::size_t s = 0; s < pt.size(); ++s) p += ((s >> x) & 1U) ? pt[s] : 0.0;
          w.field(x).field(p);
          w.end();
        }
      }
      emit(out, os.str());
    } else if (*c_sim) {
      const RateSpec rates = sim_model.rates();
      const Configuration init = special_config(special_kind_from_string(sim_model.init), sim_model.box());
      const auto tr = gillespie_simulate(init, rates, t, seed, stream);
      std::ostringstream os;
      tr.write_jsonl(os);
      emit(out, os.str());
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
