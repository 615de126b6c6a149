#include "gcwave/runner.hpp"

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "gcwave/escape.hpp"
#include "gcwave/flow.hpp"
#include "gcwave/report.hpp"
#include "gcwave/solver.hpp"

namespace gcwave {

namespace {

using nlohmann::json;

// All doubles pass through fmt_double so payloads are byte-stable; nlohmann
// would serialize shortest-round-trip anyway but we keep one choke point.
json jnum(double v) { return json::parse(fmt_double(v), nullptr, true); }

json jvec(const Vec3& v) { return json::array({jnum(v[0]), jnum(v[1]), jnum(v[2])}); }

struct RunContext {
  const ScenarioConfig& cfg;
  RunOptions opt;
  std::string out_dir;
  MetricModel metric;
  double R0 = 0.0;
  AFEstimate af;
};

double flow_R(const RunContext& ctx) {
  return ctx.cfg.flow.R > 0.0 ? std::max(ctx.cfg.flow.R, ctx.R0) : ctx.R0;
}

ClassifyParams classify_params(const RunContext& ctx) {
  ClassifyParams p;
  p.R = flow_R(ctx);
  p.delta = ctx.cfg.flow.delta_frac * p.R;
  p.t_max = ctx.cfg.flow.t_max;
  p.direction = RayDirection::both;
  p.flow.rtol = ctx.cfg.flow.rtol;
  p.flow.atol = ctx.cfg.flow.atol;
  p.a_threshold = ctx.cfg.flow.a_threshold_frac * ctx.metric.damping_profile().max_value();
  return p;
}

std::string ray_csv(const GccReport& rep) {
  std::ostringstream out;
  out << "seed_index,branch,x0,x1,x2,xi0,xi1,xi2,verdict,escape_param,horizon,min_radius,"
         "max_radius,drift,permanence_ok,max_damping,first_hit_s,hit_damping\n";
  for (const auto& r : rep.rays) {
    out << r.seed_index << ',' << branch_name(r.branch) << ',' << fmt_double(r.seed.x[0]) << ','
        << fmt_double(r.seed.x[1]) << ',' << fmt_double(r.seed.x[2]) << ','
        << fmt_double(r.seed.xi[0]) << ',' << fmt_double(r.seed.xi[1]) << ','
        << fmt_double(r.seed.xi[2]) << ',' << verdict_name(r.ray.verdict) << ','
        << fmt_double(r.ray.escape_param) << ',' << fmt_double(r.ray.horizon) << ','
        << fmt_double(r.ray.min_radius) << ',' << fmt_double(r.ray.max_radius) << ','
        << fmt_double(r.ray.conserved_drift) << ',' << (r.ray.permanence_ok ? 1 : 0) << ','
        << fmt_double(r.ray.max_damping) << ',' << fmt_double(r.ray.first_hit_s) << ','
        << (r.ray.hit_damping ? 1 : 0) << '\n';
  }
  return out.str();
}

json gcc_aggregate(const GccReport& rep) {
  json j;
  j["n_rays"] = rep.rays.size();
  j["n_trapped"] = rep.n_trapped;
  j["n_escaped"] = rep.n_escaped;
  j["n_undetermined"] = rep.n_undetermined;
  j["n_semi_bounded"] = rep.n_semi_bounded;
  j["n_trapped_hit"] = rep.n_trapped_hit;
  j["n_semi_hit"] = rep.n_semi_hit;
  j["trapped_fraction_hit"] = jnum(rep.trapped_fraction_hit);
  j["a_threshold"] = jnum(rep.a_threshold);
  return j;
}

GccReport run_ensemble(const RunContext& ctx) {
  const double R = flow_R(ctx);
  const auto seeds_p = gcc_seed_set(ctx.metric, Branch::plus, R, ctx.cfg.flow.seeds_per_sign,
                                    ctx.cfg.flow.targeted_per_sign, ctx.cfg.rng_seed);
  const auto seeds_m = gcc_seed_set(ctx.metric, Branch::minus, R, ctx.cfg.flow.seeds_per_sign,
                                    ctx.cfg.flow.targeted_per_sign, ctx.cfg.rng_seed);
  return check_gcc(ctx.metric, seeds_p, seeds_m, classify_params(ctx), ctx.opt.threads);
}

json af_json(const AFEstimate& af) {
  json j;
  j["R0"] = jnum(af.R0);
  j["j0"] = af.j0;
  j["threshold"] = jnum(af.threshold);
  j["delta"] = jnum(af.delta);
  j["c_total"] = jnum(af.c_total);
  json measured = json::array(), cseq = json::array();
  for (double v : af.measured) measured.push_back(jnum(v));
  for (double v : af.c_seq) cseq.push_back(jnum(v));
  j["measured"] = measured;
  j["c_seq"] = cseq;
  return j;
}

int run_rays(RunContext& ctx) {
  const GccReport rep = run_ensemble(ctx);
  write_text_file(ctx.out_dir + "/rays.csv", ray_csv(rep));
  json j;
  j["R"] = jnum(flow_R(ctx));
  j["metric"] = ctx.metric.name();
  j["af"] = af_json(ctx.af);
  j["aggregate"] = gcc_aggregate(rep);
  write_text_file(ctx.out_dir + "/rays.json", j.dump(2) + "\n");
  return kExitOk;
}

int run_gcc(RunContext& ctx) {
  const GccReport rep = run_ensemble(ctx);
  write_text_file(ctx.out_dir + "/gcc_rays.csv", ray_csv(rep));
  json j;
  j["R"] = jnum(flow_R(ctx));
  j["metric"] = ctx.metric.name();
  j["aggregate"] = gcc_aggregate(rep);
  write_text_file(ctx.out_dir + "/gcc.json", j.dump(2) + "\n");
  return kExitOk;
}

// Detected-trapped cover candidates for the escape construction.
std::vector<PhasePoint> trapped_candidates(const RunContext& ctx, Branch br, int want) {
  const double R = flow_R(ctx);
  auto seeds = gcc_seed_set(ctx.metric, br, R, 0, 4 * want, ctx.cfg.rng_seed + 101);
  ClassifyParams p = classify_params(ctx);
  std::vector<PhasePoint> trapped;
  for (const auto& s : seeds) {
    if (static_cast<int>(trapped.size()) >= want) break;
    const RayClass rc = classify_ray(ctx.metric, br, s, p);
    if (rc.verdict == RayVerdict::trapped) trapped.push_back(s);
  }
  return trapped;
}

int run_escape(RunContext& ctx) {
  const double R = flow_R(ctx);
  const BScaleBounds bscale = estimate_b_scale(ctx.metric, 2.0 * R);

  const auto trapped_p = trapped_candidates(ctx, Branch::plus, ctx.cfg.escape.trapped_seeds);
  const auto trapped_m = trapped_candidates(ctx, Branch::minus, ctx.cfg.escape.trapped_seeds);

  TuneGrids grids;
  grids.lambda = ctx.cfg.escape.lambda;
  grids.sigma = ctx.cfg.escape.sigma;
  grids.gamma = ctx.cfg.escape.gamma;
  grids.epsilon_start = ctx.cfg.escape.epsilon_start;
  grids.tune_points = ctx.cfg.escape.tune_points;
  grids.final_points = ctx.cfg.escape.points;
  grids.n_tau = ctx.cfg.escape.n_tau;

  EscapeOptions eopt;
  eopt.cover_radius = ctx.cfg.escape.cover_radius;
  eopt.fd_step = ctx.cfg.escape.fd_step;
  eopt.flow.rtol = ctx.cfg.flow.rtol;
  eopt.flow.atol = ctx.cfg.flow.atol;
  eopt.cover_horizon = ctx.cfg.flow.t_max;
  eopt.a_threshold = ctx.cfg.flow.a_threshold_frac * ctx.metric.damping_profile().max_value();

  const TuneResult result =
      tune_escape(ctx.metric, ctx.af, bscale, R, trapped_p, trapped_m, grids,
                  ctx.cfg.escape.c_target, ctx.cfg.rng_seed, eopt, ctx.opt.threads);

  json j;
  j["metric"] = ctx.metric.name();
  j["R"] = jnum(R);
  j["b_scale"] = {{"c_b", jnum(bscale.c_b)}, {"C_b", jnum(bscale.C_b)}};
  j["af"] = af_json(ctx.af);
  j["found"] = result.found;
  j["params"] = {{"lambda", jnum(result.params.lambda)},
                 {"sigma", jnum(result.params.sigma)},
                 {"gamma", jnum(result.params.gamma)},
                 {"epsilon", jnum(result.params.epsilon)}};
  const PositivityReport& rep = result.report;
  j["report"] = {{"pass", rep.pass},
                 {"c0", jnum(rep.c0)},
                 {"min_value", jnum(rep.min_value)},
                 {"char_min", jnum(rep.char_min)},
                 {"frac_below_c0", jnum(rep.frac_below_c0)},
                 {"frac_below_target", jnum(rep.frac_below_target)},
                 {"n_samples", rep.n_samples},
                 {"n_char", rep.n_char},
                 {"n_points_active", rep.n_points_active},
                 {"n_points_inactive", rep.n_points_inactive},
                 {"n_points_mixed", rep.n_points_mixed},
                 {"correction_valid_all", rep.correction_valid_all},
                 {"n_correction_failures", rep.n_correction_failures}};
  json worst = json::array();
  for (const auto& w : rep.worst)
    worst.push_back({{"value", jnum(w.value)},
                     {"tau", jnum(w.tau)},
                     {"x", jvec(w.x)},
                     {"xi", jvec(w.xi)},
                     {"char_set", w.char_set}});
  j["worst"] = worst;
  json hist = json::array();
  for (const auto& h : result.history)
    hist.push_back({{"lambda", jnum(h.params.lambda)},
                    {"sigma", jnum(h.params.sigma)},
                    {"gamma", jnum(h.params.gamma)},
                    {"epsilon", jnum(h.params.epsilon)},
                    {"c0", jnum(h.c0)},
                    {"passed", h.passed}});
  j["history"] = hist;
  write_text_file(ctx.out_dir + "/escape.json", j.dump(2) + "\n");

  // Cover data for reproducibility.
  json cover = json::object();
  if (result.assembly.has_value()) {
    for (Branch br : {Branch::plus, Branch::minus}) {
      json elems = json::array();
      const auto& cov = result.assembly->cover(br);
      for (const auto& e : cov.elems)
        elems.push_back({{"x", jvec(e.seed.x)},
                         {"xi", jvec(e.seed.xi)},
                         {"s_hit", jnum(e.s_hit)},
                         {"alpha", jnum(e.alpha)},
                         {"weight_C", jnum(e.weight_C)},
                         {"chi_inner", jnum(e.chi_inner)},
                         {"chi_outer", jnum(e.chi_outer)}});
      cover[br == Branch::plus ? "plus" : "minus"] = {{"elements", elems},
                                                      {"C_pm", jnum(cov.C_pm)},
                                                      {"s_max", jnum(cov.s_max)}};
    }
    const QInPart& qi = result.assembly->q_in_part();
    cover["q_in"] = {{"R", jnum(qi.R)},
                     {"xi_lo", jnum(qi.xi_lo)},
                     {"xi_hi", jnum(qi.xi_hi)},
                     {"delta_w", jnum(qi.delta_w)},
                     {"excl_active", qi.excl_active},
                     {"excl_r_lo", jnum(qi.excl_r_lo)},
                     {"excl_r_hi", jnum(qi.excl_r_hi)},
                     {"transit_bound", jnum(qi.transit_bound)}};
  }
  write_text_file(ctx.out_dir + "/escape_cover.json", cover.dump(2) + "\n");
  return result.found ? kExitOk : kExitVerification;
}

WaveData make_wave_data(const RunContext& ctx) {
  const DataSpec& spec = ctx.cfg.solver.data;
  double r_star = 0.0;
  if (spec.center_auto || (spec.type == "ring" && spec.ring_radius <= 0.0)) {
    const double R = flow_R(ctx);
    const auto orbits = circular_orbit_radii(ctx.metric, 0.05 * R, 2.0 * R, 4096);
    for (const auto& orb : orbits)
      if (orb.stable) {
        r_star = orb.radius;
        break;
      }
  }
  if (spec.type == "ring") {
    const double rr = spec.ring_radius > 0.0 ? spec.ring_radius : (r_star > 0.0 ? r_star : 2.0);
    const double b = b_pm(ctx.metric, {{rr, 0.0, 0.0}, {0.0, 1.0, 0.0}}, Branch::plus);
    const double omega = spec.ell * b / rr;
    return ring_data(rr, spec.ell, spec.ring_width, spec.amplitude, omega);
  }
  Vec3 center = spec.center;
  if (spec.center_auto && r_star > 0.0) center = Vec3{r_star, 0.0, 0.0};
  WaveData data;
  data.u0 = bump_data(center, spec.radius, spec.amplitude);
  data.v0 = nullptr;
  return data;
}

json energy_trace_json(const WaveHistory& hist) {
  json arr = json::array();
  for (const auto& s : hist.energy_trace)
    arr.push_back({{"t", jnum(s.t)},
                   {"energy", jnum(s.energy)},
                   {"grad_norm_sq", jnum(s.grad_norm_sq)},
                   {"damping_power", jnum(s.damping_power)},
                   {"sponge_power", jnum(s.sponge_power)},
                   {"forcing_power", jnum(s.forcing_power)},
                   {"support_radius", jnum(s.support_radius)}});
  return arr;
}

int run_wave(RunContext& ctx) {
  EvolveOptions eopt;
  eopt.t_checkpoints = {ctx.cfg.solver.t_final};
  eopt.n_threads = ctx.opt.threads;
  eopt.store_stride = ctx.cfg.solver.store_history ? ctx.cfg.solver.store_stride : 0;

  const WaveData data = make_wave_data(ctx);
  const WaveHistory hist =
      evolve(ctx.metric, ctx.cfg.solver.grid, data, nullptr, ctx.cfg.solver.t_final, eopt);
  const LEReport rep = le_norms(hist, 0);

  json j;
  j["metric"] = ctx.metric.name();
  j["grid"] = {{"n", hist.grid.n},
               {"extent", jnum(hist.grid.extent)},
               {"dt", jnum(hist.grid.dt)},
               {"snapshot_dt", jnum(hist.grid.snapshot_dt)}};
  j["data_grad_norm"] = jnum(hist.data_grad_norm);
  j["dissipation_residual"] = jnum(rep.dissipation_residual);
  json per = json::array();
  for (double v : rep.per_annulus) per.push_back(jnum(v));
  j["le_report"] = {{"T", jnum(rep.T)},
                    {"per_annulus", per},
                    {"le", jnum(rep.le)},
                    {"le1", jnum(rep.le1)},
                    {"le_star_f", jnum(rep.le_star_f)},
                    {"sup_grad_norm", jnum(rep.sup_grad_norm)},
                    {"j_domain", rep.j_domain}};
  j["energy_trace"] = energy_trace_json(hist);
  write_text_file(ctx.out_dir + "/wave.json", j.dump(2) + "\n");

  if (ctx.cfg.solver.store_history) {
    write_history_binary(hist, ctx.out_dir + "/history.bin");
    json side;
    side["format"] = "gcwave-history-v1";
    side["layout"] =
        "little-endian float64: n, L, dt, count, times[count], then per snapshot u[n^3] v[n^3]";
    side["n"] = hist.grid.n;
    side["L"] = jnum(hist.grid.extent);
    side["dt"] = jnum(hist.grid.dt);
    side["count"] = hist.stored.size();
    write_text_file(ctx.out_dir + "/history.json", side.dump(2) + "\n");
  }
  return kExitOk;
}

int run_led(RunContext& ctx) {
  std::vector<LedCaseSpec> cases = ctx.cfg.led.cases;
  if (cases.empty()) {
    MetricSpec flat;
    flat.name = "minkowski";
    cases.push_back({"flat", flat, DampingSpec{}});
    cases.push_back({"damped", ctx.cfg.metric, ctx.cfg.damping});
    cases.push_back({"undamped", ctx.cfg.metric, DampingSpec{}});
  }

  const WaveData data = make_wave_data(ctx);
  std::vector<std::vector<LedRow>> tables;
  for (const auto& cs : cases) {
    const MetricModel m = build_metric(cs.metric, cs.damping);
    tables.push_back(
        led_experiment(m, ctx.cfg.solver.grid, data, nullptr, ctx.cfg.led.t_list, ctx.opt.threads));
  }

  std::ostringstream csv;
  csv << "T";
  for (const auto& cs : cases)
    csv << ",numerator_" << cs.label << ",denominator_" << cs.label << ",rho_" << cs.label
        << ",energy_" << cs.label;
  csv << "\n";
  for (size_t r = 0; r < tables.front().size(); ++r) {
    csv << fmt_double(tables.front()[r].T);
    for (const auto& tab : tables)
      csv << ',' << fmt_double(tab[r].numerator) << ',' << fmt_double(tab[r].denominator) << ','
          << fmt_double(tab[r].rho) << ',' << fmt_double(tab[r].energy_at_T);
    csv << "\n";
  }
  write_text_file(ctx.out_dir + "/led.csv", csv.str());

  json j;
  j["t_list"] = ctx.cfg.led.t_list;
  json jc = json::array();
  for (size_t i = 0; i < cases.size(); ++i) {
    json rows = json::array();
    for (const auto& row : tables[i])
      rows.push_back({{"T", jnum(row.T)},
                      {"numerator", jnum(row.numerator)},
                      {"denominator", jnum(row.denominator)},
                      {"rho", jnum(row.rho)},
                      {"energy", jnum(row.energy_at_T)}});
    jc.push_back({{"label", cases[i].label}, {"rows", rows}});
  }
  j["cases"] = jc;
  write_text_file(ctx.out_dir + "/led.json", j.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int run_subcommand(const std::string& cmd, const ScenarioConfig& cfg, const RunOptions& opt) {
  const auto t_start = std::chrono::steady_clock::now();

  const std::string out_dir = opt.output_dir.empty() ? cfg.output_dir : opt.output_dir;
  std::filesystem::create_directories(out_dir);

  int code = kExitOk;
  try {
    RunContext ctx{cfg, opt, out_dir, build_metric(cfg.metric, cfg.damping), 0.0, AFEstimate{}};

    AFOptions afo;
    afo.threshold = cfg.af.threshold;
    afo.delta = cfg.af.delta;
    ctx.af = estimate_af(ctx.metric, cfg.af.j_max, cfg.af.samples_per_annulus, afo);
    ctx.R0 = ctx.af.R0;

    if (cmd == "rays") {
      code = run_rays(ctx);
    } else if (cmd == "gcc") {
      code = run_gcc(ctx);
    } else if (cmd == "escape") {
      code = run_escape(ctx);
    } else if (cmd == "wave") {
      code = run_wave(ctx);
    } else if (cmd == "led") {
      code = run_led(ctx);
    } else if (cmd == "all") {
      code = run_rays(ctx);
      if (code == kExitOk) code = run_gcc(ctx);
      if (code == kExitOk) code = run_escape(ctx);
      if (code == kExitOk) code = run_wave(ctx);
      if (code == kExitOk) code = run_led(ctx);
    } else {
      std::cerr << "unknown subcommand '" << cmd << "'\n";
      return kExitConfig;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    json err{{"error", "config"}, {"message", e.what()}};
    write_text_file(out_dir + "/error.json", err.dump(2) + "\n");
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    json err{{"error", "numerical"}, {"message", e.what()}};
    write_text_file(out_dir + "/error.json", err.dump(2) + "\n");
    return kExitNumerical;
  }

  const auto t_end = std::chrono::steady_clock::now();
  json manifest;
  manifest["subcommand"] = cmd;
  manifest["config_hash"] = fnv1a_hex(canonical_config(cfg));
  manifest["version"] = "0.1.0";
  manifest["threads"] = opt.threads;
  manifest["wall_seconds"] = jnum(std::chrono::duration<double>(t_end - t_start).count());
  write_text_file(out_dir + "/manifest_" + cmd + ".json", manifest.dump(2) + "\n");
  if (!opt.quiet) std::cout << cmd << ": exit " << code << ", artifacts in " << out_dir << "\n";
  return code;
}

}  // namespace gcwave
