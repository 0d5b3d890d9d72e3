#pragma once

#include <filesystem>
#include <string>

#include "delaypmp/commensurate.hpp"
#include "delaypmp/ddesim.hpp"
#include "delaypmp/model.hpp"
#include "delaypmp/pmpcheck.hpp"
#include "delaypmp/solver.hpp"
#include "json.hpp"

namespace delaypmp::io {

/// Build a problem from a spec document. Throws SpecError naming the field.
ProblemSpec parse_problem(const nlohmann::json& doc);
nlohmann::json read_json(const std::filesystem::path& path);
ProblemSpec load_problem(const std::filesystem::path& path);

/// Spec document of the reduced problem: the original document under
/// `stacked_of` plus the stacked dimensions.
nlohmann::json stacked_document(const nlohmann::json& original, const StackedProblem& sp);

/// CSV with header `t,<prefix>1..<prefix>d`, values printed with %.17g.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& tr, const std::string& prefix);
Trajectory read_trajectory_csv(const std::filesystem::path& path, Interp interp);

/// x.csv, u.csv, dx.csv, du.csv in `dir`.
void write_process(const std::filesystem::path& dir, const Process& proc);
/// Reads the files written by write_process; T is the last state time and the
/// cost is recomputed.
Process read_process(const std::filesystem::path& dir, const ProblemSpec& spec);

/// Header `t,p1..pn,k`: one block per component k, then k = -1 for p.
void write_multipliers_csv(const std::filesystem::path& path, const MultiplierSet& mult);
MultiplierSet read_multipliers_csv(const std::filesystem::path& path, double lambda);

nlohmann::json to_json(const AuditReport& report);
nlohmann::json to_json(const SimReport& report);
nlohmann::json solve_summary(const SolveResult& result);

}  // namespace delaypmp::io
