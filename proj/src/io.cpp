#include "delaypmp/io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "delaypmp/catalog.hpp"
#include "delaypmp/errors.hpp"

namespace delaypmp::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw SpecError(path + key, "missing");
  return j.at(key);
}

double number(const json& j, const std::string& field) {
  if (!j.is_number()) throw SpecError(field, "expected a number");
  return j.get<double>();
}

int integer(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw SpecError(field, "expected an integer");
  return j.get<int>();
}

Vec vector_of(const json& j, const std::string& field, int expected = -1) {
  Vec v;
  if (j.is_number()) {
    v = Vec::Constant(1, j.get<double>());
  } else if (j.is_array()) {
    v.resize(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], field);
  } else {
    throw SpecError(field, "expected a vector");
  }
  if (expected >= 0 && v.size() != expected)
    throw SpecError(field, "expected length " + std::to_string(expected) + ", got " + std::to_string(v.size()));
  return v;
}

Mat matrix_of(const json& j, const std::string& field, int rows, int cols) {
  if (j.is_number() && rows == 1 && cols == 1) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || static_cast<int>(j.size()) != rows) throw SpecError(field, "expected " + std::to_string(rows) + " rows");
  Mat M(rows, cols);
  for (int r = 0; r < rows; ++r) M.row(r) = vector_of(j[static_cast<std::size_t>(r)], field, cols).transpose();
  return M;
}

std::vector<Mat> matrices_of(const json& parent, const std::string& key, const std::string& field, int rows,
                             int cols, int slots) {
  std::vector<Mat> out;
  if (!parent.contains(key)) return out;
  const json& j = parent.at(key);
  if (!j.is_array() || static_cast<int>(j.size()) > slots)
    throw SpecError(field + "." + key, "expected at most one matrix per delay slot");
  for (std::size_t k = 0; k < j.size(); ++k) {
    if (j[k].is_null())
      out.push_back(Mat());
    else
      out.push_back(matrix_of(j[k], field + "." + key + "[" + std::to_string(k) + "]", rows, cols));
  }
  return out;
}

std::vector<Vec> vectors_of(const json& parent, const std::string& key, const std::string& field, int len, int slots) {
  std::vector<Vec> out;
  if (!parent.contains(key)) return out;
  const json& j = parent.at(key);
  if (!j.is_array() || static_cast<int>(j.size()) > slots)
    throw SpecError(field + "." + key, "expected at most one vector per delay slot");
  for (std::size_t k = 0; k < j.size(); ++k)
    out.push_back(j[k].is_null() ? Vec() : vector_of(j[k], field + "." + key + "[" + std::to_string(k) + "]", len));
  return out;
}

bool any_nonzero_after_first(const std::vector<Mat>& ms) {
  for (std::size_t k = 1; k < ms.size(); ++k)
    if (ms[k].size() > 0 && ms[k].cwiseAbs().maxCoeff() > 0.0) return true;
  return false;
}
bool any_nonzero_after_first(const std::vector<Vec>& vs) {
  for (std::size_t k = 1; k < vs.size(); ++k)
    if (vs[k].size() > 0 && vs[k].cwiseAbs().maxCoeff() > 0.0) return true;
  return false;
}

ControlSet parse_set(const json& j, const std::string& field, int dim) {
  const std::string type = require(j, "type", field + ".").get<std::string>();
  if (type == "box") {
    auto bound = [&](const char* key, double fill) {
      if (!j.contains(key)) return Vec(Vec::Constant(dim, fill));
      const json& b = j.at(key);
      Vec v(dim);
      const json arr = b.is_array() ? b : json::array({b});
      if (static_cast<int>(arr.size()) != dim) throw SpecError(field + "." + key, "expected length " + std::to_string(dim));
      for (int i = 0; i < dim; ++i) {
        const json& e = arr[static_cast<std::size_t>(i)];
        v(i) = e.is_null() ? fill : number(e, field + "." + key);
      }
      return v;
    };
    const Vec lo = bound("lo", -std::numeric_limits<double>::infinity());
    const Vec hi = bound("hi", std::numeric_limits<double>::infinity());
    try {
      return ControlSet::box(lo, hi);
    } catch (const InvalidArgument& e) {
      throw SpecError(field, e.what());
    }
  }
  if (type == "finite") {
    const json& pts = require(j, "points", field + ".");
    if (!pts.is_array() || pts.empty()) throw SpecError(field + ".points", "expected a non-empty list");
    std::vector<Vec> out;
    for (const auto& p : pts) out.push_back(vector_of(p, field + ".points", dim));
    return ControlSet::finite(std::move(out));
  }
  if (type == "fixed") return ControlSet::fixed(vector_of(require(j, "point", field + "."), field + ".point", dim));
  throw SpecError(field + ".type", "unknown set type '" + type + "'");
}

SetSchedule parse_schedule(const json& j, const std::string& field, int dim) {
  if (j.is_object() && j.value("type", "") == "schedule") {
    const json& starts = require(j, "starts", field + ".");
    const json& sets = require(j, "sets", field + ".");
    if (!starts.is_array() || !sets.is_array() || starts.size() != sets.size() || starts.empty())
      throw SpecError(field, "starts and sets must be non-empty lists of equal length");
    std::vector<double> st;
    std::vector<ControlSet> cs;
    for (std::size_t i = 0; i < starts.size(); ++i) {
      st.push_back(i == 0 ? -std::numeric_limits<double>::infinity() : number(starts[i], field + ".starts"));
      cs.push_back(parse_set(sets[i], field + ".sets[" + std::to_string(i) + "]", dim));
    }
    try {
      return SetSchedule(std::move(st), std::move(cs));
    } catch (const InvalidArgument& e) {
      throw SpecError(field, e.what());
    }
  }
  return SetSchedule(parse_set(j, field, dim));
}

struct Running {
  RunningCost L;
  bool delayedControls = false;
};

Running parse_running(const json& j, const std::string& field, int n, int m, int slots) {
  const std::string type = j.is_null() ? "zero" : require(j, "type", field + ".").get<std::string>();
  if (type == "zero") return {catalog::zero_running(), false};
  if (type == "quadratic") {
    catalog::QuadraticRunningTerms t;
    t.Q = matrices_of(j, "Q", field, n, n, slots);
    t.R = matrices_of(j, "R", field, m, m, slots);
    t.q = vectors_of(j, "q", field, n, slots);
    t.r = vectors_of(j, "r", field, m, slots);
    t.c = j.contains("c") ? number(j.at("c"), field + ".c") : 0.0;
    const bool delayed = any_nonzero_after_first(t.R) || any_nonzero_after_first(t.r);
    return {catalog::quadratic_running(std::move(t), n, m, slots), delayed};
  }
  throw SpecError(field + ".type", "unknown running cost '" + type + "'");
}

EndpointCost parse_endpoint(const json& j, const std::string& field, int n) {
  const std::string type = j.is_null() ? "zero" : require(j, "type", field + ".").get<std::string>();
  catalog::QuadraticEndpointTerms t;
  if (type == "quadratic") {
    if (j.contains("QS")) t.QS = matrix_of(j.at("QS"), field + ".QS", n, n);
    if (j.contains("QT")) t.QT = matrix_of(j.at("QT"), field + ".QT", n, n);
    if (j.contains("cS")) t.cS = vector_of(j.at("cS"), field + ".cS", n);
    if (j.contains("cT")) t.cT = vector_of(j.at("cT"), field + ".cT", n);
    if (j.contains("time_linear")) t.timeLinear = number(j.at("time_linear"), field + ".time_linear");
    if (j.contains("time_weight")) t.timeWeight = number(j.at("time_weight"), field + ".time_weight");
    if (j.contains("time_target")) t.timeTarget = number(j.at("time_target"), field + ".time_target");
  } else if (type != "zero") {
    throw SpecError(field + ".type", "unknown endpoint cost '" + type + "'");
  }
  return catalog::quadratic_endpoint(std::move(t), n);
}

InitialCost parse_initial(const json& j, const std::string& field, int n, int m) {
  const std::string type = j.is_null() ? "zero" : require(j, "type", field + ".").get<std::string>();
  if (type == "zero") return catalog::zero_initial();
  if (type == "quadratic")
    return catalog::quadratic_initial(
        j.contains("Wx") ? matrix_of(j.at("Wx"), field + ".Wx", n, n) : Mat(Mat::Zero(n, n)),
        j.contains("Wu") ? matrix_of(j.at("Wu"), field + ".Wu", m, m) : Mat(Mat::Zero(m, m)));
  if (type == "abs") return catalog::abs_initial(number(require(j, "w", field + "."), field + ".w"));
  throw SpecError(field + ".type", "unknown initial cost '" + type + "'");
}

EndpointConstraint parse_constraint(const json& j, const std::string& field, int n, const Vec& x0) {
  const std::string type = j.is_null() ? "fixed_initial" : require(j, "type", field + ".").get<std::string>();
  if (type == "free") return EndpointConstraint::free(n);
  if (type == "fixed_initial")
    return EndpointConstraint::fixedInitial(j.is_object() && j.contains("x0") ? vector_of(j.at("x0"), field + ".x0", n) : x0);
  if (type == "fixed_both")
    return EndpointConstraint::fixedBoth(j.contains("x0") ? vector_of(j.at("x0"), field + ".x0", n) : x0,
                                         vector_of(require(j, "xT", field + "."), field + ".xT", n));
  try {
    if (type == "box")
      return EndpointConstraint::box(vector_of(require(j, "lo", field + "."), field + ".lo", 2 * n),
                                     vector_of(require(j, "hi", field + "."), field + ".hi", 2 * n));
    if (type == "affine") {
      const json& A = require(j, "A", field + ".");
      if (!A.is_array() || A.empty()) throw SpecError(field + ".A", "expected a non-empty matrix");
      return EndpointConstraint::affine(matrix_of(A, field + ".A", static_cast<int>(A.size()), 2 * n),
                                        vector_of(require(j, "b", field + "."), field + ".b", static_cast<int>(A.size())));
    }
  } catch (const InvalidArgument& e) {
    throw SpecError(field, e.what());
  }
  throw SpecError(field + ".type", "unknown constraint '" + type + "'");
}

Interval interval_of(const json& j, const std::string& field) {
  const Vec v = vector_of(j, field, 2);
  if (!(v(1) > v(0))) throw SpecError(field, "expected lo < hi");
  return {v(0), v(1)};
}

}  // namespace

ProblemSpec parse_problem(const json& doc) {
  if (!doc.is_object()) throw SpecError("<root>", "expected a JSON object");
  if (doc.contains("stacked_of")) return reduce(parse_problem(doc.at("stacked_of"))).stacked;

  ProblemSpec spec;
  spec.name = doc.value("name", std::string("problem"));
  spec.S = doc.contains("S") ? number(doc.at("S"), "S") : 0.0;

  const json& delays = require(doc, "delays", "");
  if (!delays.is_array() || delays.empty()) throw SpecError("delays", "expected a non-empty list");
  std::vector<double> dl;
  for (const auto& d : delays) dl.push_back(number(d, "delays"));
  try {
    spec.delays = DelayGrid(dl);
  } catch (const InvalidArgument& e) {
    throw SpecError("delays", e.what());
  }
  const int slots = spec.delays.count();
  spec.n = integer(require(doc, "n", ""), "n");
  spec.m = integer(require(doc, "m", ""), "m");
  if (spec.n < 1) throw SpecError("n", "must be >= 1");
  if (spec.m < 1) throw SpecError("m", "must be >= 1");
  const int n = spec.n, m = spec.m;

  if (doc.contains("T_bounds")) spec.timeBounds = interval_of(doc.at("T_bounds"), "T_bounds");
  if (doc.contains("T_bracket")) spec.timeBracket = interval_of(doc.at("T_bracket"), "T_bracket");
  const json& T = require(doc, "T", "");
  if (T.is_string()) {
    if (T.get<std::string>() != "free") throw SpecError("T", "expected a number or \"free\"");
    spec.freeTime = true;
    if (doc.contains("T_guess"))
      spec.T = number(doc.at("T_guess"), "T_guess");
    else if (spec.timeBracket)
      spec.T = 0.5 * (spec.timeBracket->lo + spec.timeBracket->hi);
    else if (std::isfinite(spec.timeBounds.lo) && std::isfinite(spec.timeBounds.hi))
      spec.T = 0.5 * (spec.timeBounds.lo + spec.timeBounds.hi);
    else
      throw SpecError("T_bracket", "free end time needs T_bracket or finite T_bounds");
  } else {
    spec.T = number(T, "T");
  }

  spec.x0 = doc.contains("x0") ? vector_of(doc.at("x0"), "x0", n) : Vec::Zero(n);

  const json& dyn = require(doc, "dynamics", "");
  const std::string dtype = require(dyn, "type", "dynamics.").get<std::string>();
  bool delayedControls = false;
  std::vector<Mat> Alist;
  json running = doc.value("running_cost", json());
  json endpoint = doc.value("endpoint_cost", json());
  if (dtype == "linear_delay" || dtype == "lq_delay") {
    Alist = matrices_of(dyn, "A", "dynamics", n, n, slots);
    if (Alist.empty() || Alist[0].size() == 0) Alist.insert(Alist.begin(), Mat::Zero(n, n));
    std::vector<Mat> Blist = matrices_of(dyn, "B", "dynamics", n, m, slots);
    if (Blist.empty()) Blist.push_back(Mat::Zero(n, m));
    if (Blist[0].size() == 0) Blist[0] = Mat::Zero(n, m);
    const Vec c = dyn.contains("c") ? vector_of(dyn.at("c"), "dynamics.c", n) : Vec::Zero(n);
    delayedControls = any_nonzero_after_first(Blist);
    try {
      spec.f = catalog::linear_delay(Alist, Blist, slots, c);
    } catch (const InvalidArgument& e) {
      throw SpecError("dynamics", e.what());
    }
    const double lip = catalog::linear_lipschitz(Alist);
    spec.lipschitz = [lip](double) { return lip; };
    if (dtype == "lq_delay") {
      if (running.is_null()) {
        running = json{{"type", "quadratic"}};
        for (const char* key : {"Q", "R", "q", "r"})
          if (dyn.contains(key)) running[key] = dyn.at(key);
        if (!running.contains("R")) {
          json I = json::array();
          for (int i = 0; i < m; ++i) {
            json row = json::array();
            for (int k = 0; k < m; ++k) row.push_back(i == k ? 1.0 : 0.0);
            I.push_back(row);
          }
          running["R"] = json::array({I});
        }
      }
      if (endpoint.is_null()) {
        endpoint = json{{"type", "quadratic"}};
        for (const char* key : {"QT", "cT", "QS", "cS", "time_linear", "time_weight", "time_target"})
          if (dyn.contains(key)) endpoint[key] = dyn.at(key);
      }
    }
  } else if (dtype == "scalar_logistic_delay") {
    if (n != 1 || m != 1) throw SpecError("dynamics", "scalar_logistic_delay needs n = m = 1");
    std::vector<double> b;
    if (dyn.contains("b")) {
      const Vec bv = vector_of(dyn.at("b"), "dynamics.b");
      b.assign(bv.data(), bv.data() + bv.size());
    }
    for (std::size_t k = 1; k < b.size(); ++k) delayedControls = delayedControls || b[k] != 0.0;
    try {
      spec.f = catalog::scalar_logistic_delay(number(require(dyn, "r", "dynamics."), "dynamics.r"),
                                              number(require(dyn, "K", "dynamics."), "dynamics.K"),
                                              dyn.contains("delay_slot") ? integer(dyn.at("delay_slot"), "dynamics.delay_slot") : slots - 1,
                                              b, slots);
    } catch (const InvalidArgument& e) {
      throw SpecError("dynamics", e.what());
    }
  } else {
    throw SpecError("dynamics.type", "unknown dynamics '" + dtype + "'");
  }
  if (doc.contains("lipschitz")) {
    const double lip = number(doc.at("lipschitz"), "lipschitz");
    spec.lipschitz = [lip](double) { return lip; };
  }

  const Running run = parse_running(running, "running_cost", n, m, slots);
  spec.L = run.L;
  spec.usesDelayedControls = delayedControls || run.delayedControls;
  spec.g = parse_endpoint(endpoint, "endpoint_cost", n);
  spec.Lambda = parse_initial(doc.value("initial_cost", json()), "initial_cost", n, m);
  spec.U = parse_schedule(require(doc, "control_set", ""), "control_set", m);
  if (doc.contains("data_set") && !doc.at("data_set").is_null())
    spec.D = parse_schedule(doc.at("data_set"), "data_set", n + m);
  spec.C = parse_constraint(doc.value("constraint", json()), "constraint", n, spec.x0);
  if (spec.C.kind() == EndpointConstraint::Kind::FixedInitial || spec.C.kind() == EndpointConstraint::Kind::FixedBoth)
    spec.x0 = spec.C.anchorS();

  Vec dx = Vec::Zero(n), du = Vec::Zero(m);
  if (doc.contains("initial_data")) {
    const json& d = doc.at("initial_data");
    if (d.contains("dx")) dx = vector_of(d.at("dx"), "initial_data.dx", n);
    if (d.contains("du")) du = vector_of(d.at("du"), "initial_data.du", m);
  }
  if (doc.contains("control")) spec.initialControl = vector_of(doc.at("control"), "control", m);
  if (doc.contains("tolerances")) {
    const json& t = doc.at("tolerances");
    if (!t.is_object()) throw SpecError("tolerances", "expected an object");
    for (auto it = t.begin(); it != t.end(); ++it) spec.tolerances[it.key()] = number(it.value(), "tolerances." + it.key());
  }
  if (spec.freeTime && spec.usesDelayedControls && spec.delays.N() > 0)
    throw SpecError("dynamics", "free end-time problems may not have control delays");
  if (!spec.freeTime && !(spec.T > spec.S)) throw SpecError("T", "must exceed S");
  spec.initialData = constant_initial_data(spec, dx, du);
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw SpecError("<root>", e.what());
  }
  return spec;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SpecError("<file>", "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SpecError("<file>", std::string("invalid JSON: ") + e.what());
  }
}

ProblemSpec load_problem(const fs::path& path) {
  try {
    return parse_problem(read_json(path));
  } catch (const json::exception& e) {
    throw SpecError("<root>", e.what());
  }
}

json stacked_document(const json& original, const StackedProblem& sp) {
  json out;
  out["name"] = sp.stacked.name;
  out["stacked_of"] = original;
  out["S"] = 0.0;
  out["T"] = sp.baseStep;
  out["delays"] = json::array({0.0});
  out["n"] = sp.stacked.n;
  out["m"] = sp.stacked.m;
  out["dynamics"] = {{"type", "stacked"},
                     {"base_step", sp.baseStep},
                     {"stack_count", sp.stackCount},
                     {"multiples", sp.multiples},
                     {"initial_cost", sp.initialCost}};
  return out;
}

// ----------------------------------------------------------------------- CSV

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::vector<double>> read_rows(const fs::path& path, std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InvalidArgument(path.string() + ": empty file");
  header.clear();
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InvalidArgument(path.string() + ": bad number '" + cell + "'");
      }
    }
    if (row.size() != header.size()) throw InvalidArgument(path.string() + ": ragged row");
    rows.push_back(std::move(row));
  }
  return rows;
}

Trajectory from_rows(const std::vector<std::vector<double>>& rows, std::size_t cols, Interp interp,
                     const std::string& what) {
  if (rows.empty()) throw InvalidArgument(what + ": no samples");
  std::vector<double> times;
  Mat vals(static_cast<Eigen::Index>(cols), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    times.push_back(rows[i][0]);
    for (std::size_t c = 0; c < cols; ++c)
      vals(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = rows[i][c + 1];
  }
  return Trajectory(std::move(times), std::move(vals), interp);
}

}  // namespace

void write_trajectory_csv(const fs::path& path, const Trajectory& tr, const std::string& prefix) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "t";
  for (int i = 0; i < tr.dim(); ++i) out << "," << prefix << i + 1;
  out << "\n";
  for (int i = 0; i < tr.size(); ++i) {
    out << fmt(tr.time(i));
    for (int r = 0; r < tr.dim(); ++r) out << "," << fmt(tr.values()(r, i));
    out << "\n";
  }
}

Trajectory read_trajectory_csv(const fs::path& path, Interp interp) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  if (header.size() < 2 || header[0] != "t") throw InvalidArgument(path.string() + ": expected header t,...");
  return from_rows(rows, header.size() - 1, interp, path.string());
}

void write_process(const fs::path& dir, const Process& proc) {
  fs::create_directories(dir);
  write_trajectory_csv(dir / "x.csv", proc.x, "x");
  write_trajectory_csv(dir / "u.csv", proc.u, "u");
  write_trajectory_csv(dir / "dx.csv", proc.d.dx, "dx");
  write_trajectory_csv(dir / "du.csv", proc.d.du, "du");
}

Process read_process(const fs::path& dir, const ProblemSpec& spec) {
  Process p;
  p.x = read_trajectory_csv(dir / "x.csv", Interp::Linear);
  p.u = read_trajectory_csv(dir / "u.csv", Interp::PiecewiseConstantLeft);
  p.d.dx = read_trajectory_csv(dir / "dx.csv", Interp::PiecewiseConstantLeft);
  p.d.du = read_trajectory_csv(dir / "du.csv", Interp::PiecewiseConstantLeft);
  if (p.x.dim() != spec.n || p.u.dim() != spec.m || p.d.dx.dim() != spec.n || p.d.du.dim() != spec.m)
    throw InvalidArgument("process files do not match the problem dimensions");
  p.T = p.x.end();
  ProblemSpec atT = spec;
  atT.T = p.T;
  p.cost = total_cost(atT, p);
  return p;
}

void write_multipliers_csv(const fs::path& path, const MultiplierSet& mult) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  const int n = mult.p.dim();
  out << "t";
  for (int i = 0; i < n; ++i) out << ",p" << i + 1;
  out << ",k\n";
  auto block = [&](const Trajectory& tr, int k) {
    for (int i = 0; i < tr.size(); ++i) {
      out << fmt(tr.time(i));
      for (int r = 0; r < n; ++r) out << "," << fmt(tr.values()(r, i));
      out << "," << k << "\n";
    }
  };
  for (std::size_t k = 0; k < mult.components.size(); ++k) block(mult.components[k], static_cast<int>(k));
  block(mult.p, -1);
}

MultiplierSet read_multipliers_csv(const fs::path& path, double lambda) {
  std::vector<std::string> header;
  const auto rows = read_rows(path, header);
  if (header.size() < 3 || header.front() != "t" || header.back() != "k")
    throw InvalidArgument(path.string() + ": expected header t,p1..pn,k");
  const std::size_t n = header.size() - 2;
  std::map<int, std::vector<std::vector<double>>> blocks;
  for (const auto& r : rows) blocks[static_cast<int>(r.back())].push_back(r);
  if (!blocks.count(-1)) throw InvalidArgument(path.string() + ": missing the k = -1 block");
  MultiplierSet m;
  m.lambda = lambda;
  m.p = from_rows(blocks.at(-1), n, Interp::Linear, path.string());
  for (int k = 0; blocks.count(k); ++k) m.components.push_back(from_rows(blocks.at(k), n, Interp::Linear, path.string()));
  return m;
}

// ---------------------------------------------------------------------- JSON

json to_json(const AuditReport& r) {
  json j;
  j["pointwiseResidual"] = r.pointwiseResidual;
  j["integralResidual"] = r.integralResidual;
  j["adjointDefect"] = r.adjointDefect;
  j["transversalityResidual"] = r.transversalityResidual;
  j["nontrivialityMargin"] = r.nontrivialityMargin;
  j["freeTimeResidual"] = r.freeTimeResidual ? json(*r.freeTimeResidual) : json();
  json worst = json::array();
  for (const auto& [t, v] : r.perTimeWorst) worst.push_back({{"t", t}, {"residual", v}});
  j["perTimeWorst"] = worst;
  j["approximateMax"] = r.approximateMax;
  if (r.xiInterval) j["xiInterval"] = {r.xiInterval->lo, r.xiInterval->hi};
  if (r.twoSidedResidual) j["twoSidedResidual"] = *r.twoSidedResidual;
  return j;
}

json to_json(const SimReport& r) {
  json j;
  j["defect"] = r.defect;
  j["picardIterations"] = r.picardIterations;
  j["certifiedBound"] = std::isfinite(r.certifiedBound) ? json(r.certifiedBound) : json("inf");
  j["converged"] = r.converged;
  j["aligned"] = r.aligned;
  j["samples"] = r.trajectory.size();
  return j;
}

json solve_summary(const SolveResult& r) {
  json j;
  j["cost"] = r.process.cost;
  j["T"] = r.process.T;
  j["iterations"] = r.iterations;
  j["grad_norm"] = r.gradNorm;
  j["converged"] = r.converged;
  j["message"] = r.message;
  j["audit"] = r.audit ? to_json(*r.audit) : json();
  j["lambda"] = r.multipliers.lambda;
  if (!r.probes.empty()) {
    json pr = json::array();
    for (const auto& p : r.probes)
      pr.push_back({{"T", p.T}, {"cost", p.cost}, {"eq6Residual", std::isfinite(p.eq6Residual) ? json(p.eq6Residual) : json()}});
    j["probes"] = pr;
  }
  j["files"] = {{"x", "x.csv"}, {"u", "u.csv"}, {"dx", "dx.csv"}, {"du", "du.csv"}, {"multipliers", "multipliers.csv"}};
  return j;
}

}  // namespace delaypmp::io
