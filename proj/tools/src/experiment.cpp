#include "experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "fracinterp/errors.hpp"
#include "fracinterp/parallel.hpp"
#include "svg.hpp"

#ifndef FRACINTERP_VERSION
#define FRACINTERP_VERSION "unknown"
#endif

namespace fracinterp::app {

namespace {

const std::set<std::string> kExperimentIds = {"slit", "lipschitz-equivalence", "snowflake-equivalence",
                                              "custom"};

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("'" + path.string() + "': " + e.what());
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double relative_change(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

}  // namespace

SnowflakePlan default_snowflake_plan() { return uniform_plan(0.3, SnowflakeRule::bump, 4); }

std::shared_ptr<const DomainModel> load_model(const std::string& name) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<const DomainModel>> cache;
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(name); it != cache.end()) return it->second;
  }
  std::shared_ptr<const DomainModel> model;
  if (name == "square") {
    model = polygon_model(Domain(unit_square()), name);
  } else if (name == "slit") {
    model = polygon_model(Domain(slit_domain()), name);
  } else if (name == "snowflake") {
    model = snowflake_model(default_snowflake_plan(), name);
  } else if (name.rfind("snowflake:", 0) == 0) {
    model = snowflake_model(plan_from_json(read_json_file(name.substr(10))), name);
  } else if (std::filesystem::exists(name)) {
    model = polygon_model(Domain(domain_from_json(read_json_file(name))), name);
  } else {
    throw ValidationError("unknown domain '" + name +
                          "' (expected square, slit, snowflake, snowflake:<plan.json> or a domain JSON file)");
  }
  std::lock_guard lock(mu);
  cache.emplace(name, model);
  return model;
}

CoverFn level_cover(std::shared_ptr<const DomainModel> model) {
  return [model = std::move(model)](int level) { return model->cover(std::ldexp(1.0, -level)); };
}

std::uint64_t substream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
  return splitmix64(seed ^ splitmix64(h));
}

std::vector<std::string> smooth_suite() {
  return {"const 2",
          "linear 1 0 0",
          "linear 0.5 -1 0.2",
          "bump 0.5 0.5 0.35",
          "bump 0.3 0.7 0.25",
          "hat 0.5 0.5 0.25",
          "expr sin(3*x)*cos(2*y)",
          "expr exp(-2*((x-0.4)^2+(y-0.6)^2))"};
}

// --- configuration --------------------------------------------------------------

std::vector<std::string> ExperimentConfig::functions_for(const std::string& domain) const {
  std::vector<std::string> out;
  if (auto it = functions.find("*"); it != functions.end()) out = it->second;
  if (auto it = functions.find(domain); it != functions.end())
    out.insert(out.end(), it->second.begin(), it->second.end());
  return out;
}

void ExperimentConfig::validate() const {
  if (!kExperimentIds.count(id)) throw ValidationError("experiment: unknown id '" + id + "'");
  if (domains.empty()) throw ValidationError("experiment: no domains");
  for (const auto& d : domains) {
    load_model(d);
    const auto fns = functions_for(d);
    if (fns.empty()) throw ValidationError("experiment: suite empty for domain '" + d + "'");
    for (const auto& f : fns) FieldFn::parse(f);
  }
  if (exponents.empty()) throw ValidationError("experiment: no exponent pairs");
  for (const auto& e : exponents) {
    e.validate();
    if (interp && !(e.p > 1.0)) throw ValidationError("experiment: K profiles need p > 1");
  }
  if (first_level < 0 || last_level - first_level + 1 < 3)
    throw ValidationError("experiment: at least three refinement levels are required");
  if (grid_count < 4) throw ValidationError("experiment: grid count must be at least 4");
  if (!(grid_ratio > 0.0 && grid_ratio < 1.0)) throw ValidationError("experiment: grid ratio must lie in (0,1)");
  if (oracle_samples != 0 && oracle_samples < 10000)
    throw ValidationError("experiment: oracle_samples must be 0 or at least 10000");
}

ExperimentConfig default_config(const std::string& id) {
  ExperimentConfig c;
  c.id = id;
  if (id == "slit") {
    c.domains = {"slit"};
    c.functions = {{"slit", {"slit_angle"}}};
    c.exponents = {{0.8, 1.5}};
    c.first_level = 3;
    c.last_level = 6;
    c.extra_count = 2;
  } else if (id == "lipschitz-equivalence") {
    c.domains = {"square"};
    c.functions = {{"*", smooth_suite()}};
    for (double p : {1.5, 2.0, 3.0})
      for (double s : {0.3, 0.5, 0.7}) c.exponents.push_back({s, p});
    c.interp = false;
  } else if (id == "snowflake-equivalence") {
    c.domains = {"snowflake"};
    c.functions = {{"*", smooth_suite()}};
    c.exponents = {{0.3, 2.0}, {0.5, 2.0}, {0.8, 1.5}};
    c.full = false;
  } else if (id == "custom") {
    c.domains = {"square", "slit", "snowflake"};
    c.functions = {{"*", smooth_suite()}, {"slit", {"slit_angle"}}};
    c.exponents = {{0.3, 2.0}, {0.5, 2.0}, {0.8, 1.5}};
    c.full = false;
  } else {
    throw ValidationError("experiment: unknown id '" + id +
                          "' (expected slit, lipschitz-equivalence, snowflake-equivalence or custom)");
  }
  return c;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  static const std::set<std::string> known = {"experiment", "domains", "functions", "exponents", "levels",
                                              "full", "interp", "grid", "extra_count", "oracle_samples",
                                              "seed", "seminorm", "k"};
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ValidationError("config: unknown key '" + key + "'");
  if (!j.contains("experiment") || !j["experiment"].is_string())
    throw ValidationError("config: field 'experiment' must be a string");
  ExperimentConfig c = default_config(j["experiment"].get<std::string>());
  try {
    if (j.contains("domains")) c.domains = j["domains"].get<std::vector<std::string>>();
    if (j.contains("functions")) {
      const auto& f = j["functions"];
      c.functions.clear();
      if (f.is_array())
        c.functions["*"] = f.get<std::vector<std::string>>();
      else
        c.functions = f.get<std::map<std::string, std::vector<std::string>>>();
    }
    if (j.contains("exponents")) {
      c.exponents.clear();
      for (const auto& e : j["exponents"]) {
        if (e.is_array() && e.size() == 2)
          c.exponents.push_back({e[0].get<double>(), e[1].get<double>()});
        else
          c.exponents.push_back({e.at("s").get<double>(), e.at("p").get<double>()});
      }
    }
    if (j.contains("levels")) {
      c.first_level = j["levels"].value("first", c.first_level);
      c.last_level = j["levels"].value("last", c.last_level);
    }
    c.full = j.value("full", c.full);
    c.interp = j.value("interp", c.interp);
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      c.grid_count = g.value("count", c.grid_count);
      c.grid_ratio = g.value("ratio", c.grid_ratio);
      if (g.contains("tau")) c.tau = g["tau"].get<double>();
    }
    c.extra_count = j.value("extra_count", c.extra_count);
    c.oracle_samples = j.value("oracle_samples", c.oracle_samples);
    c.seed = j.value("seed", c.seed);
    if (j.contains("seminorm")) {
      const auto& s = j["seminorm"];
      c.seminorm.angular_sectors = s.value("angular_sectors", c.seminorm.angular_sectors);
      c.seminorm.angular_order = s.value("angular_order", c.seminorm.angular_order);
      c.seminorm.radial_order = s.value("radial_order", c.seminorm.radial_order);
      c.seminorm.radial_panels = s.value("radial_panels", c.seminorm.radial_panels);
      c.seminorm.outer_subdivision = s.value("outer_subdivision", c.seminorm.outer_subdivision);
    }
    if (j.contains("k")) {
      const auto& k = j["k"];
      c.k.fe_refinement = k.value("fe_refinement", c.k.fe_refinement);
      c.k.max_fe_triangles = k.value("max_fe_triangles", c.k.max_fe_triangles);
      c.k.irls_tolerance = k.value("irls_tolerance", c.k.irls_tolerance);
      c.k.irls_max_iterations = k.value("irls_max_iterations", c.k.irls_max_iterations);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = c.id;
  j["domains"] = c.domains;
  j["functions"] = c.functions;
  j["exponents"] = nlohmann::json::array();
  for (const auto& e : c.exponents) j["exponents"].push_back({e.s, e.p});
  j["levels"] = {{"first", c.first_level}, {"last", c.last_level}};
  j["full"] = c.full;
  j["interp"] = c.interp;
  j["grid"] = {{"count", c.grid_count}, {"ratio", c.grid_ratio}};
  if (c.tau) j["grid"]["tau"] = *c.tau;
  j["extra_count"] = c.extra_count;
  j["oracle_samples"] = c.oracle_samples;
  j["seed"] = c.seed;
  j["seminorm"] = {{"angular_sectors", c.seminorm.angular_sectors},
                   {"angular_order", c.seminorm.angular_order},
                   {"radial_order", c.seminorm.radial_order},
                   {"radial_panels", c.seminorm.radial_panels},
                   {"outer_subdivision", c.seminorm.outer_subdivision}};
  j["k"] = {{"fe_refinement", c.k.fe_refinement},
            {"max_fe_triangles", c.k.max_fe_triangles},
            {"irls_tolerance", c.k.irls_tolerance},
            {"irls_max_iterations", c.k.irls_max_iterations}};
  return j;
}

nlohmann::json environment_stamp() {
  return {{"version", FRACINTERP_VERSION}, {"compiler", __VERSION__}, {"cplusplus", __cplusplus}};
}

// --- running ----------------------------------------------------------------------

namespace {

void run_task(const ExperimentConfig& cfg, const std::string& domain_name, const std::string& fn_id,
              int threads, std::vector<CaseRecord>& out) {
  const auto& exps = cfg.exponents;
  out.assign(exps.size(), CaseRecord{});
  for (std::size_t k = 0; k < exps.size(); ++k) {
    out[k].domain = domain_name;
    out[k].fn = fn_id;
    out[k].exponents = exps[k];
  }
  try {
    const auto model = load_model(domain_name);
    const Domain& domain = model->domain();
    const FieldFn f = FieldFn::parse(fn_id);
    const CoverFn cover = level_cover(model);
    SeminormOptions sopt = cfg.seminorm;
    sopt.threads = threads;
    KOptions kopt = cfg.k;
    kopt.threads = threads;

    const auto restricted = gagliardo_sweep(f, exps, domain, cover, cfg.first_level, cfg.last_level, true, sopt);
    std::vector<SeminormResult> full;
    if (cfg.full) full = gagliardo_sweep(f, exps, domain, cover, cfg.first_level, cfg.last_level, false, sopt);
    const auto cells = cover(cfg.last_level);

    std::map<double, KProfile> base, extended;
    if (cfg.interp) {
      for (const auto& e : exps) {
        if (base.count(e.p)) continue;
        ScaleGrid grid = default_grid(*model, cfg.grid_count);
        grid.ratio = cfg.grid_ratio;
        if (cfg.tau) grid.tau = *cfg.tau;
        base.emplace(e.p, interp_seminorm(f, e, grid, *model, KMethod::opt, kopt));
        if (cfg.extra_count > 0) {
          grid.count += cfg.extra_count;
          extended.emplace(e.p, interp_seminorm(f, e, grid, *model, KMethod::opt, kopt));
        }
      }
    }

    for (std::size_t k = 0; k < exps.size(); ++k) {
      const Exponents& e = exps[k];
      CaseRecord& r = out[k];
      r.restricted_history = restricted[k].history;
      r.restricted_diverging = restricted[k].diverging;
      const auto& rh = r.restricted_history;
      r.restricted_change = rh.size() > 1 ? relative_change(rh[rh.size() - 1], rh[rh.size() - 2]) : 0.0;
      r.lp = lp_norm(f, cells, e.p, 1);
      const double rv = rh.back();
      if (cfg.full) {
        r.full_history = full[k].history;
        r.full_diverging = full[k].diverging;
        r.full_over_restricted = rv > 0.0 ? r.full_history.back() / rv : (r.full_history.back() > 0.0 ? INFINITY : 1.0);
      }
      if (cfg.interp) {
        KProfile prof = with_smoothness(base.at(e.p), e.s);
        if (cfg.extra_count > 0) {
          r.interp_extended = with_smoothness(extended.at(e.p), e.s).interp_opt;
          r.interp_change = relative_change(prof.interp_opt, *r.interp_extended);
        } else {
          const std::size_t n = prof.scales.size() - 1;
          const double shorter = interp_from_k(std::span(prof.scales).first(n), std::span(prof.k_opt).first(n),
                                               e, prof.grid.ratio, prof.tail_bound);
          r.interp_change = relative_change(prof.interp_opt, shorter);
        }
        r.interp_stable = r.interp_change <= 0.1;
        for (std::size_t i = 0; i < prof.scales.size(); ++i)
          if (!(prof.k_opt[i] <= std::min(prof.f_lp, prof.k_constructive[i]))) r.chain_holds = false;
        const double lhs_den = r.lp + prof.interp_opt;
        r.c_interp_to_restricted = lhs_den > 0.0 ? rv / lhs_den : 0.0;
        const double rhs_den = r.lp + rv;
        r.c_restricted_to_interp = rhs_den > 0.0 ? prof.interp_constructive / rhs_den : 0.0;
        r.profile = std::move(prof);
      }
      if (cfg.oracle_samples > 0) {
        const std::string tag = domain_name + "|" + fn_id + "|" + g17(e.s) + "|" + g17(e.p);
        r.oracle_restricted =
            mc_oracle(f, e, domain, true, cfg.oracle_samples, substream(cfg.seed, tag + "|restricted"), threads);
        if (cfg.full)
          r.oracle_full =
              mc_oracle(f, e, domain, false, cfg.oracle_samples, substream(cfg.seed, tag + "|full"), threads);
      }
    }
  } catch (const std::exception& e) {
    for (auto& r : out) r.error = e.what();
  }
}

}  // namespace

Report run_experiment(const ExperimentConfig& config, int threads) {
  config.validate();
  std::vector<std::pair<std::string, std::string>> tasks;
  for (const auto& d : config.domains)
    for (const auto& f : config.functions_for(d)) tasks.emplace_back(d, f);

  const int workers = threads > 0 ? threads : default_threads();
  const int inner = tasks.size() > 1 && workers > 1 ? 1 : workers;
  std::vector<std::vector<CaseRecord>> per_task(tasks.size());
  parallel_for(tasks.size(), [&](std::size_t t) {
    run_task(config, tasks[t].first, tasks[t].second, inner, per_task[t]);
  }, tasks.size() > 1 ? workers : 1);

  Report rep;
  rep.config = config;
  for (auto& v : per_task)
    for (auto& r : v) rep.records.push_back(std::move(r));

  auto& s = rep.summary;
  int failed = 0, conflict = 0;
  bool chain = true;
  double c1 = 0.0, c2 = 0.0, fr_min = INFINITY, fr_max = 0.0, z_max = 0.0;
  for (const auto& r : rep.records) {
    if (!r.error.empty()) {
      ++failed;
      continue;
    }
    if (r.profile) {
      c1 = std::max(c1, r.c_interp_to_restricted);
      c2 = std::max(c2, r.c_restricted_to_interp);
      chain = chain && r.chain_holds;
      if (r.restricted_diverging && r.interp_stable) ++conflict;
    }
    if (config.full && r.restricted_history.back() > 0.0) {
      fr_min = std::min(fr_min, r.full_over_restricted);
      fr_max = std::max(fr_max, r.full_over_restricted);
    }
    auto z = [](const std::optional<McResult>& mc, const std::vector<double>& hist, double p) {
      if (!mc || mc->std_error <= 0.0 || hist.empty()) return 0.0;
      return std::abs(std::pow(hist.back(), p) - mc->estimate) / mc->std_error;
    };
    z_max = std::max({z_max, z(r.oracle_full, r.full_history, r.exponents.p),
                      z(r.oracle_restricted, r.restricted_history, r.exponents.p)});
  }
  s["records"] = rep.records.size();
  s["failed"] = failed;
  if (config.interp) {
    s["constant_interp_to_restricted"] = c1;
    s["constant_restricted_to_interp"] = c2;
    s["chain_holds"] = chain;
    s["restricted_diverging_while_interp_stable"] = conflict;
  }
  if (config.full && std::isfinite(fr_min)) {
    s["full_over_restricted_min"] = fr_min;
    s["full_over_restricted_max"] = fr_max;
    if (config.id == "lipschitz-equivalence") s["lipschitz_ratio_in_range"] = fr_min >= 1.0 && fr_max <= 50.0;
  }
  if (config.oracle_samples > 0) s["oracle_max_z"] = z_max;
  if (config.id == "slit" && !rep.records.empty() && rep.records.front().error.empty()) {
    const auto& r = rep.records.front();
    s["flags"] = {{"full", r.full_diverging ? "diverging" : "not-diverging"},
                  {"restricted", !r.restricted_diverging && r.restricted_change <= 0.1 ? "stable" : "unstable"},
                  {"interp", r.interp_stable ? "stable" : "unstable"}};
  }
  return rep;
}

// --- output -----------------------------------------------------------------------

nlohmann::json Report::to_json() const {
  nlohmann::json j;
  j["environment"] = environment_stamp();
  j["experiment"] = config.id;
  j["config"] = config_to_json(config);
  j["summary"] = summary;
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json x;
    x["domain"] = r.domain;
    x["fn"] = r.fn;
    x["s"] = r.exponents.s;
    x["p"] = r.exponents.p;
    if (!r.error.empty()) {
      x["error"] = r.error;
      j["records"].push_back(x);
      continue;
    }
    x["restricted_history"] = r.restricted_history;
    x["restricted_diverging"] = r.restricted_diverging;
    x["restricted_change"] = r.restricted_change;
    if (config.full) {
      x["full_history"] = r.full_history;
      x["full_diverging"] = r.full_diverging;
      x["full_over_restricted"] = r.full_over_restricted;
    }
    x["lp_norm"] = r.lp;
    if (r.profile) {
      x["interp_opt"] = r.profile->interp_opt;
      x["interp_constructive"] = r.profile->interp_constructive;
      x["interp_change"] = r.interp_change;
      x["interp_stable"] = r.interp_stable;
      if (r.interp_extended) x["interp_opt_extended"] = *r.interp_extended;
      x["chain_holds"] = r.chain_holds;
      x["constant_interp_to_restricted"] = r.c_interp_to_restricted;
      x["constant_restricted_to_interp"] = r.c_restricted_to_interp;
      x["profile"] = kprofile_to_json(*r.profile);
    }
    auto mc = [](const McResult& m) {
      return nlohmann::json{{"estimate", m.estimate}, {"std_error", m.std_error}, {"unstable", m.unstable},
                            {"samples", m.samples}};
    };
    if (r.oracle_full) x["oracle_full"] = mc(*r.oracle_full);
    if (r.oracle_restricted) x["oracle_restricted"] = mc(*r.oracle_restricted);
    j["records"].push_back(x);
  }
  return j;
}

std::string Report::to_csv() const {
  std::ostringstream os;
  os << "op,domain_id,fn_id,s,p,level,value,error_estimate,diverging\n";
  auto row = [&](const CaseRecord& r, const char* op, int level, double value, double err, bool div) {
    os << op << ',' << r.domain << ",\"" << r.fn << "\"," << g17(r.exponents.s) << ',' << g17(r.exponents.p) << ','
       << level << ',' << g17(value) << ',' << g17(err) << ',' << (div ? "true" : "false") << '\n';
  };
  auto sweep = [&](const CaseRecord& r, const char* op, const std::vector<double>& h, bool div) {
    for (std::size_t i = 0; i < h.size(); ++i)
      row(r, op, config.first_level + static_cast<int>(i), h[i], i > 0 ? std::abs(h[i] - h[i - 1]) : 0.0,
          i + 1 == h.size() && div);
  };
  for (const auto& r : records) {
    if (!r.error.empty()) continue;
    if (config.full) sweep(r, "gagliardo_full", r.full_history, r.full_diverging);
    sweep(r, "gagliardo_restricted", r.restricted_history, r.restricted_diverging);
    row(r, "lp_norm", config.last_level, r.lp, 0.0, false);
    if (r.profile)
      row(r, "interp_seminorm", r.profile->grid.count, r.profile->interp_opt,
          r.interp_change * r.profile->interp_opt, !r.interp_stable);
    const double p = r.exponents.p;
    auto mc_row = [&](const char* op, const McResult& m) {
      const double v = std::pow(m.estimate, 1.0 / p);
      const double se = m.estimate > 0.0 ? m.std_error * v / (p * m.estimate) : 0.0;
      row(r, op, config.last_level, v, se, m.unstable);
    };
    if (r.oracle_full) mc_row("mc_oracle_full", *r.oracle_full);
    if (r.oracle_restricted) mc_row("mc_oracle_restricted", *r.oracle_restricted);
  }
  return os.str();
}

void write_report(const Report& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + (dir / name).string() + "'");
    out << text;
  };
  write("report.json", report.to_json().dump(2) + "\n");
  write("results.csv", report.to_csv());

  std::vector<Series> levels, kcurves;
  for (const auto& r : report.records) {
    if (!r.error.empty()) continue;
    const std::string label = r.domain + " " + r.fn + " s=" + g17(r.exponents.s) + " p=" + g17(r.exponents.p);
    auto lv = [&](const std::vector<double>& h) {
      std::vector<double> x;
      for (std::size_t i = 0; i < h.size(); ++i) x.push_back(report.config.first_level + static_cast<double>(i));
      return x;
    };
    if (report.config.full) levels.push_back({label + " full", lv(r.full_history), r.full_history});
    levels.push_back({label + " restricted", lv(r.restricted_history), r.restricted_history});
    if (r.profile) {
      Series s{label, r.profile->scales, {}};
      for (std::size_t i = 0; i < s.x.size(); ++i)
        s.y.push_back(std::pow(s.x[i], -r.exponents.s) * r.profile->k_opt[i]);
      kcurves.push_back(std::move(s));
    }
  }
  write("seminorm_levels.svg",
        line_plot_svg({"Seminorm versus refinement level", "level", "seminorm", false, true}, levels));
  if (!kcurves.empty())
    write("k_profiles.svg", line_plot_svg({"Scaled K-functional", "ell", "ell^-s K(ell)", true, true}, kcurves));
}

}  // namespace fracinterp::app
