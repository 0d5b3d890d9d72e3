#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "delaypmp/commensurate.hpp"
#include "delaypmp/ddesim.hpp"
#include "delaypmp/errors.hpp"
#include "delaypmp/io.hpp"
#include "delaypmp/pmpcheck.hpp"
#include "delaypmp/solver.hpp"

namespace delaypmp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string spec;
  std::string out = ".";
  double step = 1e-3;
  std::uint64_t seed = 0;
  std::vector<std::string> tol;
};

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

std::map<std::string, double> tolerances(const ProblemSpec& spec, const std::vector<std::string>& overrides) {
  auto t = spec.tolerances;
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw SpecError("--tol", "expected KEY=VAL, got '" + kv + "'");
    try {
      t[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
    } catch (const std::exception&) {
      throw SpecError("--tol", "bad value in '" + kv + "'");
    }
  }
  return t;
}

double parse_ratio(const std::string& s) {
  std::size_t used = 0;
  const auto slash = s.find('/');
  try {
    if (slash == std::string::npos) {
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    }
    const double a = std::stod(s.substr(0, slash), &used);
    if (used != slash) throw std::invalid_argument(s);
    const std::string rest = s.substr(slash + 1);
    const double b = std::stod(rest, &used);
    if (used != rest.size() || b == 0.0) throw std::invalid_argument(s);
    return a / b;
  } catch (const std::exception&) {
    throw SpecError("--delays", "cannot read '" + s + "'");
  }
}

Interval parse_bracket(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw SpecError("--bracket", "expected LO,HI");
  const Interval iv{parse_ratio(s.substr(0, comma)), parse_ratio(s.substr(comma + 1))};
  if (!(iv.hi > iv.lo)) throw SpecError("--bracket", "expected LO < HI");
  return iv;
}

int cmd_simulate(const Common& c) {
  const ProblemSpec spec = io::load_problem(c.spec);
  if (spec.freeTime) throw SpecError("T", "simulate needs a fixed end time");
  const Vec u0 = spec.initialControl.size() ? spec.initialControl : Vec(Vec::Zero(spec.m));
  const Trajectory u = project_onto(spec.U, Trajectory::constant(spec.S, spec.T, u0, Interp::PiecewiseConstantLeft));
  fs::create_directories(c.out);
  const SimReport rep = simulate(spec, u, spec.initialData, spec.x0, c.step);
  io::write_trajectory_csv(fs::path(c.out) / "x.csv", rep.trajectory, "x");
  json j = io::to_json(rep);
  j["T"] = spec.T;
  j["step"] = c.step;
  write_json(fs::path(c.out) / "sim_report.json", j);
  const auto tol = tolerances(spec, c.tol);
  const auto it = tol.find("defect");
  const bool ok = rep.converged && (it == tol.end() || rep.defect <= it->second);
  return ok ? Ok : ThresholdsMissed;
}

struct SolveFlags {
  int intervals = 100;
  int maxIter = 500;
  double gradTol = 1e-8;
  double timeTol = 1e-4;
  std::string bracket;
  bool stacked = false;
};

int cmd_solve(const Common& c, const SolveFlags& s) {
  const ProblemSpec spec = io::load_problem(c.spec);
  SolveOptions opt;
  opt.controlIntervals = s.intervals;
  opt.step = c.step;
  opt.seed = c.seed;
  opt.maxOuterIter = s.maxIter;
  opt.gradTol = s.gradTol;
  opt.timeSearch.tol = s.timeTol;
  if (!s.bracket.empty()) opt.timeSearch.bracket = parse_bracket(s.bracket);
  const auto tol = tolerances(spec, c.tol);

  fs::create_directories(c.out);
  const SolveResult r = s.stacked ? solve_stacked(reduce(spec), opt) : solve(spec, opt);
  io::write_process(c.out, r.process);
  io::write_multipliers_csv(fs::path(c.out) / "multipliers.csv", r.multipliers);
  write_json(fs::path(c.out) / "summary.json", io::solve_summary(r));
  return r.audit && audit_passes(*r.audit, tol) ? Ok : ThresholdsMissed;
}

struct CheckFlags {
  std::string process;
  std::string multipliers;
  double lambda = 1.0;
};

int cmd_check(const Common& c, const CheckFlags& k) {
  ProblemSpec spec = io::load_problem(c.spec);
  const Process proc = io::read_process(k.process, spec);
  spec.T = proc.T;
  const std::string mpath = k.multipliers.empty() ? (fs::path(k.process) / "multipliers.csv").string() : k.multipliers;
  const MultiplierSet mult = io::read_multipliers_csv(mpath, k.lambda);
  AuditOptions ao;
  ao.seed = c.seed;
  const AuditReport rep = full_audit(spec, proc, mult, ao);
  fs::create_directories(c.out);
  write_json(fs::path(c.out) / "audit.json", io::to_json(rep));
  return audit_passes(rep, tolerances(spec, c.tol)) ? Ok : ThresholdsMissed;
}

int cmd_reduce(const Common& c) {
  const json doc = io::read_json(c.spec);
  const ProblemSpec spec = io::parse_problem(doc);
  const StackedProblem sp = reduce(spec);
  fs::create_directories(c.out);
  write_json(fs::path(c.out) / "stacked.json", io::stacked_document(doc, sp));
  std::cout << "base_step=" << sp.baseStep << " stack_count=" << sp.stackCount << " n=" << sp.stacked.n
            << " m=" << sp.stacked.m << "\n";
  return Ok;
}

int cmd_approx(const std::string& delays, double eps, long nmax) {
  std::vector<double> hs;
  std::size_t pos = 0;
  while (pos <= delays.size()) {
    const auto comma = std::min(delays.find(',', pos), delays.size());
    const std::string item = delays.substr(pos, comma - pos);
    if (!item.empty()) hs.push_back(parse_ratio(item));
    pos = comma + 1;
  }
  if (hs.empty()) throw SpecError("--delays", "no delays given");
  const RationalApprox ra = simultaneous_rational_approx(hs, eps, nmax);
  std::cout << "n=" << ra.n << "\nerrors=";
  for (std::size_t i = 0; i < ra.errors.size(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", ra.errors[i]);
    std::cout << (i ? "," : "") << buf;
  }
  std::cout << "\n";
  return Ok;
}

void add_common(CLI::App* sub, Common& c, bool withOut = true) {
  sub->add_option("--spec", c.spec, "problem spec (JSON)")->required()->check(CLI::ExistingFile);
  if (withOut) sub->add_option("--out", c.out, "output directory");
  sub->add_option("--step", c.step, "integration step")->check(CLI::PositiveNumber);
  sub->add_option("--seed", c.seed, "seed for the audit candidate battery");
  sub->add_option("--tol", c.tol, "threshold override KEY=VAL (repeatable)");
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Optimal control with state and control delays"};
  app.require_subcommand(1);

  Common common;
  SolveFlags sf;
  CheckFlags cf;
  std::string delays;
  double eps = 1e-6;
  long nmax = 1000000;

  auto* sim = app.add_subcommand("simulate", "integrate the delay equation with the problem's constant control");
  add_common(sim, common);

  auto* sol = app.add_subcommand("solve", "projected-gradient solve followed by an audit");
  add_common(sol, common);
  sol->add_option("--intervals", sf.intervals, "control mesh intervals")->check(CLI::PositiveNumber);
  sol->add_option("--max-iter", sf.maxIter, "outer iterations")->check(CLI::NonNegativeNumber);
  sol->add_option("--grad-tol", sf.gradTol, "projected-gradient stopping tolerance");
  sol->add_option("--time-tol", sf.timeTol, "end-time search tolerance");
  sol->add_option("--bracket", sf.bracket, "end-time bracket LO,HI");
  sol->add_flag("--stacked", sf.stacked, "solve through the commensurate reduction");

  auto* chk = app.add_subcommand("check", "audit a process against a multiplier set");
  add_common(chk, common);
  chk->add_option("--process", cf.process, "directory with x.csv, u.csv, dx.csv, du.csv")->required();
  chk->add_option("--multipliers", cf.multipliers, "multiplier CSV (default: <process>/multipliers.csv)");
  chk->add_option("--lambda", cf.lambda, "cost multiplier")->check(CLI::NonNegativeNumber);

  auto* red = app.add_subcommand("reduce", "write the stacked delay-free spec");
  add_common(red, common);

  auto* apx = app.add_subcommand("approx", "smallest common denominator approximating the delays");
  apx->add_option("--delays", delays, "comma separated, fractions allowed (1/3,1/7)")->required();
  apx->add_option("--eps", eps, "tolerance")->check(CLI::PositiveNumber);
  apx->add_option("--nmax", nmax, "largest denominator")->check(CLI::PositiveNumber);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : BadInput;
  }

  try {
    if (*sim) return cmd_simulate(common);
    if (*sol) return cmd_solve(common, sf);
    if (*chk) return cmd_check(common, cf);
    if (*red) return cmd_reduce(common);
    return cmd_approx(delays, eps, nmax);
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return BadInput;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return BadInput;
  } catch (const Unsupported& e) {
    std::cerr << "error: " << e.what() << "\n";
    return BadInput;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return NumericalFailure;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return BadInput;
  }
}

}  // namespace delaypmp::cli
