#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "experiment.hpp"
#include "fracinterp/errors.hpp"
#include "fracinterp/parallel.hpp"

namespace fracinterp::app {

namespace {

struct Globals {
  std::string out;
  std::uint64_t seed = 1;
  bool seed_given = false;
  int threads = 0;
  std::string format = "csv";
};

/// Writes to DIR/name when --out is set, otherwise to stdout.
void emit(const Globals& g, const std::string& name, const std::string& text, bool append = false) {
  if (g.out.empty()) {
    std::cout << text;
    return;
  }
  std::filesystem::create_directories(g.out);
  const auto path = std::filesystem::path(g.out) / name;
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw ValidationError("cannot write '" + path.string() + "'");
  os << text;
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path + "': " + e.what());
  }
}

SnowflakeRule parse_rule(const std::string& s) {
  if (s == "bump") return SnowflakeRule::bump;
  if (s == "straight") return SnowflakeRule::straight;
  throw ValidationError("snowflake: rule must be bump or straight, got '" + s + "'");
}

// --- domain --------------------------------------------------------------------

struct DomainArgs {
  std::string name;
  std::string plan;
};

void cmd_domain(const Globals& g, const DomainArgs& a) {
  DomainSpec spec;
  if (a.name == "snowflake") {
    const SnowflakePlan plan = a.plan.empty() ? default_snowflake_plan() : plan_from_json(read_json(a.plan));
    spec = DomainSpec{build_snowflake(plan).curve.polygon(), {}, {}};
  } else if (a.name == "square") {
    spec = unit_square();
  } else if (a.name == "slit") {
    spec = slit_domain();
  } else {
    spec = domain_from_json(read_json(a.name));
  }
  const Domain validated(spec);
  emit(g, "domain.json", domain_to_json(spec).dump(2) + "\n");
}

// --- snowflake -----------------------------------------------------------------

struct SnowflakeArgs {
  double p = 0.3;
  std::string rule = "bump";
  int generations = 4;
  std::string plan;
};

void cmd_snowflake(const Globals& g, const SnowflakeArgs& a) {
  const SnowflakePlan plan =
      a.plan.empty() ? uniform_plan(a.p, parse_rule(a.rule), a.generations) : plan_from_json(read_json(a.plan));
  validate_plan(plan);
  const Snowflake flake = build_snowflake(plan);
  const SnowflakeStats st = measure_polygon(flake.curve.polygon());
  nlohmann::json j;
  j["plan"] = plan_to_json(plan);
  j["stats"] = {{"segment_count", st.segment_count},
                {"perimeter", st.perimeter},
                {"min_segment_length", st.min_segment_length},
                {"area", polygon_signed_area(flake.curve.polygon())},
                {"tents", flake.tree.nodes.size()}};
  j["domain"] = domain_to_json(DomainSpec{flake.curve.polygon(), {}, {}});
  emit(g, "snowflake.json", j.dump(2) + "\n");
}

// --- mesh ----------------------------------------------------------------------

struct MeshArgs {
  std::string domain = "square";
  double ell = 0.25;
  std::string scheme = "auto";
};

void cmd_mesh(const Globals& g, const MeshArgs& a) {
  MeshScheme scheme = MeshScheme::automatic;
  if (a.scheme == "structured") scheme = MeshScheme::structured;
  else if (a.scheme == "delaunay") scheme = MeshScheme::delaunay;
  else if (a.scheme != "auto") throw ValidationError("mesh: scheme must be auto, structured or delaunay");
  const Mesh mesh = triangulate(load_model(a.domain)->domain(), a.ell, scheme);
  const MeshQuality q = mesh_quality(mesh);
  std::ostringstream os;
  write_mesh(os, mesh);
  emit(g, "mesh.txt", os.str());
  const nlohmann::json qj = {{"vertices", mesh.vertices.size()},
                             {"triangles", mesh.triangles.size()},
                             {"duplicates", mesh.duplicates.size()},
                             {"min_inradius_ratio", q.min_inradius_ratio},
                             {"max_circumradius_ratio", q.max_circumradius_ratio},
                             {"max_overlap", q.max_overlap}};
  if (g.out.empty())
    std::cerr << qj.dump() << "\n";
  else
    emit(g, "mesh_quality.json", qj.dump(2) + "\n");
}

// --- seminorm ------------------------------------------------------------------

struct SeminormArgs {
  std::string domain = "square";
  std::string fn;
  double s = 0.5;
  double p = 2.0;
  int levels = 4;
  int first_level = -1;
  bool oracle = false;
  std::uint64_t samples = 10'000'000;
};

void cmd_seminorm(const Globals& g, const SeminormArgs& a) {
  const Exponents e{a.s, a.p};
  e.validate();
  const auto model = load_model(a.domain);
  const FieldFn f = FieldFn::parse(a.fn);
  const int first = a.first_level >= 0 ? a.first_level : std::max(1, a.levels - 3);
  if (a.levels < first) throw ValidationError("seminorm: --levels must be >= --first-level");
  const CoverFn cover = level_cover(model);
  SeminormOptions opt;
  opt.threads = g.threads;
  const auto full = gagliardo_full(f, e, model->domain(), cover, first, a.levels, opt);
  const auto restricted = gagliardo_restricted(f, e, model->domain(), cover, first, a.levels, opt);

  struct Row {
    std::string op;
    int level;
    double value, error;
    bool diverging;
  };
  std::vector<Row> rows;
  for (int level = first; level <= a.levels; ++level) {
    const auto cells = cover(level);
    const bool last = level == a.levels;
    const std::size_t i = static_cast<std::size_t>(level - first);
    rows.push_back({"lp_norm", level, lp_norm(f, cells, e.p, 1), 0.0, false});
    rows.push_back({"w1p_norm", level, w1p_norm(f, cells, e.p, 1).norm, 0.0, false});
    auto sweep_row = [&](const char* op, const SeminormResult& r) {
      const double err = i > 0 ? std::abs(r.history[i] - r.history[i - 1]) : 0.0;
      rows.push_back({op, level, r.history[i], err, last && r.diverging});
    };
    sweep_row("gagliardo_full", full);
    sweep_row("gagliardo_restricted", restricted);
  }
  if (a.oracle) {
    const std::string tag = a.domain + "|" + a.fn + "|" + g17(e.s) + "|" + g17(e.p);
    for (bool res : {false, true}) {
      const McResult mc = mc_oracle(f, e, model->domain(), res, a.samples,
                                    substream(g.seed, tag + (res ? "|restricted" : "|full")), g.threads);
      const double v = std::pow(mc.estimate, 1.0 / e.p);
      const double se = mc.estimate > 0.0 ? mc.std_error * v / (e.p * mc.estimate) : 0.0;
      rows.push_back({res ? "mc_oracle_restricted" : "mc_oracle_full", a.levels, v, se, mc.unstable});
    }
  }

  std::ostringstream os;
  if (g.format == "json") {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : rows)
      j.push_back({{"op", r.op}, {"domain_id", a.domain}, {"fn_id", a.fn}, {"s", e.s}, {"p", e.p},
                   {"level", r.level}, {"value", r.value}, {"error_estimate", r.error},
                   {"diverging", r.diverging}});
    os << j.dump(2) << "\n";
    emit(g, "seminorm.json", os.str());
    return;
  }
  const bool header = g.out.empty() || !std::filesystem::exists(std::filesystem::path(g.out) / "results.csv");
  if (header) os << "op,domain_id,fn_id,s,p,level,value,error_estimate,diverging\n";
  for (const auto& r : rows)
    os << r.op << ',' << a.domain << ",\"" << a.fn << "\"," << g17(e.s) << ',' << g17(e.p) << ',' << r.level
       << ',' << g17(r.value) << ',' << g17(r.error) << ',' << (r.diverging ? "true" : "false") << '\n';
  emit(g, "results.csv", os.str(), true);
}

// --- kprofile ------------------------------------------------------------------

struct KProfileArgs {
  std::string domain = "square";
  std::string fn;
  double s = 0.5;
  double p = 2.0;
  int count = 6;
  double tau = 0.0;
  double ratio = 0.5;
  std::string method = "opt";
  double fe_refinement = 2.0;
};

void cmd_kprofile(const Globals& g, const KProfileArgs& a) {
  const auto model = load_model(a.domain);
  ScaleGrid grid = default_grid(*model, a.count);
  if (a.tau > 0.0) grid.tau = a.tau;
  grid.ratio = a.ratio;
  KMethod method = KMethod::opt;
  if (a.method == "constructive") method = KMethod::constructive;
  else if (a.method != "opt") throw ValidationError("kprofile: method must be opt or constructive");
  KOptions opt;
  opt.fe_refinement = a.fe_refinement;
  opt.threads = g.threads;
  const KProfile prof = interp_seminorm(FieldFn::parse(a.fn), {a.s, a.p}, grid, *model, method, opt);
  if (g.format == "json")
    emit(g, "kprofile.json", kprofile_to_json(prof).dump(2) + "\n");
  else
    emit(g, "kprofile.csv", kprofile_to_csv(prof));
}

// --- experiment ----------------------------------------------------------------

struct ExperimentArgs {
  std::string id;
  std::string config;
};

int cmd_experiment(const Globals& g, const ExperimentArgs& a) {
  ExperimentConfig cfg;
  if (!a.config.empty()) {
    nlohmann::json j = read_json(a.config);
    if (!a.id.empty() && !j.contains("experiment")) j["experiment"] = a.id;
    cfg = config_from_json(j);
  } else {
    if (a.id.empty()) throw ValidationError("experiment: give an id or --config");
    cfg = default_config(a.id);
  }
  if (g.seed_given || a.config.empty()) cfg.seed = g.seed;
  const Report rep = run_experiment(cfg, g.threads);
  const std::filesystem::path dir = g.out.empty() ? std::filesystem::path("results") / cfg.id : std::filesystem::path(g.out);
  write_report(rep, dir);
  std::cout << rep.summary.dump(2) << "\n";
  for (const auto& r : rep.records)
    if (!r.error.empty()) {
      std::cerr << "error: " << r.domain << " " << r.fn << ": " << r.error << "\n";
      return 3;
    }
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Fractional Sobolev seminorms and K-functionals on planar domains"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--out", g.out, "Output directory (stdout when omitted)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Seed for all random streams (overrides a config seed)");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);
  app.add_option("--format", g.format, "Tabular output format")->check(CLI::IsMember({"csv", "json"}));

  DomainArgs da;
  auto* dom = app.add_subcommand("domain", "Write a validated domain as JSON");
  dom->add_option("name", da.name, "square | slit | snowflake | domain JSON file")->required();
  dom->add_option("--plan", da.plan, "Snowflake plan JSON");

  SnowflakeArgs sa;
  auto* snow = app.add_subcommand("snowflake", "Build a snowflake polygon and report its statistics");
  snow->add_option("--p", sa.p, "Bump parameter in (1/4, 1/2)");
  snow->add_option("--rule", sa.rule, "bump | straight");
  snow->add_option("--generations", sa.generations, "Number of generations")->check(CLI::NonNegativeNumber);
  snow->add_option("--plan", sa.plan, "Plan JSON (overrides --p/--rule/--generations)");

  MeshArgs ma;
  auto* mesh = app.add_subcommand("mesh", "Triangulate a domain at scale ell");
  mesh->add_option("--domain", ma.domain, "Domain name or JSON file");
  mesh->add_option("--ell", ma.ell, "Mesh scale")->check(CLI::PositiveNumber);
  mesh->add_option("--scheme", ma.scheme, "auto | structured | delaunay");

  SeminormArgs na;
  auto* semi = app.add_subcommand("seminorm", "Norms and Gagliardo seminorms across refinement levels");
  semi->add_option("--domain", na.domain, "Domain name or JSON file");
  semi->add_option("--fn", na.fn, "Function id, e.g. \"linear 1 0 0\"")->required();
  semi->add_option("--s", na.s, "Smoothness in (0,1)");
  semi->add_option("--p", na.p, "Integrability >= 1");
  semi->add_option("--levels", na.levels, "Finest refinement level")->check(CLI::NonNegativeNumber);
  semi->add_option("--first-level", na.first_level, "Coarsest level (default levels-3)");
  semi->add_flag("--oracle", na.oracle, "Add Monte Carlo oracle rows");
  semi->add_option("--samples", na.samples, "Oracle sample count");

  KProfileArgs ka;
  auto* kp = app.add_subcommand("kprofile", "K-functional profile and interpolation seminorm");
  kp->add_option("--domain", ka.domain, "Domain name or JSON file");
  kp->add_option("--fn", ka.fn, "Function id")->required();
  kp->add_option("--s", ka.s, "Smoothness in (0,1)");
  kp->add_option("--p", ka.p, "Integrability > 1");
  kp->add_option("--count", ka.count, "Number of scales");
  kp->add_option("--tau", ka.tau, "Largest scale (default min(1/4, diam/8))");
  kp->add_option("--ratio", ka.ratio, "Geometric ratio of the scale grid");
  kp->add_option("--method", ka.method, "opt | constructive");
  kp->add_option("--fe-refinement", ka.fe_refinement, "FE element size is ell / this")->check(CLI::PositiveNumber);

  ExperimentArgs ea;
  auto* ex = app.add_subcommand("experiment", "Run a canonical experiment and write a report");
  ex->add_option("id", ea.id, "slit | lipschitz-equivalence | snowflake-equivalence | custom");
  ex->add_option("--config", ea.config, "Experiment configuration JSON");

  for (auto* sub : {dom, snow, mesh, semi, kp, ex}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    g.seed_given = seed_opt->count() > 0;
    if (g.threads > 0) set_default_threads(g.threads);
    if (*dom) cmd_domain(g, da);
    else if (*snow) cmd_snowflake(g, sa);
    else if (*mesh) cmd_mesh(g, ma);
    else if (*semi) cmd_seminorm(g, na);
    else if (*kp) cmd_kprofile(g, ka);
    else if (*ex) return cmd_experiment(g, ea);
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fracinterp::app
