// dmpc: offline synthesis, single solves, closed-loop runs, soundness checks
// and feasibility sweeps for distributed MPC with adaptive terminal sets.
//
// Exit codes: 0 completed (infeasible OCPs included), 1 usage or I/O error,
// 2 offline synthesis infeasible, 3 numerical failure.

#include <dmpc/dmpc.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace dmpc;

namespace {

enum Exit
{
  Ok            = 0,
  UsageOrIo     = 1,
  OfflineFailed = 2,
  Numerical     = 3,
};

class OfflineInfeasible : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct Common
{
  std::string scenario;
  std::string ingredients;
  std::string scheme{"rlxd"};
  std::string mode{"central"};
  std::string x0;
  std::string out;
  std::string trace_admm;
  Index horizon{0};
  std::uint64_t seed{0};
};

Vector parse_vector(const std::string & text)
{
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) { throw std::invalid_argument(item); }
    } catch (const std::exception &) {
      throw ValidationError("cannot parse '" + item + "' as a number");
    }
  }
  if (vals.empty()) { throw ValidationError("empty vector"); }
  return Eigen::Map<Vector>(vals.data(), static_cast<Index>(vals.size()));
}

Scenario scenario_of(const Common & c)
{
  if (c.scenario.empty()) { return Scenario{scenarios::coupled_pair(), 2, std::nullopt}; }
  return load_scenario(c.scenario);
}

Vector initial_state(const Common & c, const Scenario & sc)
{
  if (!c.x0.empty()) {
    Vector x = parse_vector(c.x0);
    if (x.size() != sc.system.maps.state_dim()) {
      throw ValidationError("--x0 has " + std::to_string(x.size()) + " entries, the system has "
                            + std::to_string(sc.system.maps.state_dim()) + " states");
    }
    return x;
  }
  if (sc.x0) { return *sc.x0; }
  throw ValidationError("no initial state: pass --x0 or put 'x0' in the scenario");
}

Index horizon_of(const Common & c, const Scenario & sc) { return c.horizon > 0 ? c.horizon : sc.horizon; }

/// Loads the ingredients file when given, otherwise synthesizes them.
TerminalIngredients ingredients_of(const Common & c, const Scenario & sc)
{
  if (!c.ingredients.empty()) { return ingredients_from_json(io::read_file(c.ingredients), sc.system); }
  const SynthesisResult r = synthesize(sc.system);
  if (r.status == conic::SolveStatus::Infeasible) { throw OfflineInfeasible("offline synthesis is infeasible"); }
  if (!r.ingredients) { throw NumericalError("offline synthesis failed numerically"); }
  return *r.ingredients;
}

struct TraceFile
{
  std::ofstream stream;

  MessageSink sink()
  {
    if (!stream.is_open()) { return {}; }
    return [this](const AdmmMessage & m) {
      json j{{"iteration", m.iteration},
             {"kind", m.kind == AdmmMessage::Kind::Copy ? "copy" : "consensus"},
             {"sender", m.sender + 1},
             {"receiver", m.receiver + 1},
             {"block", m.block + 1},
             {"values", io::from_vector(m.values)}};
      stream << j.dump() << "\n";
    };
  }
};

ControllerOptions controller(const Common & c, TraceFile & trace)
{
  ControllerOptions opt;
  opt.mode = parse_mode(c.mode);
  if (!c.trace_admm.empty()) {
    trace.stream.open(c.trace_admm);
    if (!trace.stream) { throw IoError("cannot write '" + c.trace_admm + "'"); }
    opt.admm_trace = trace.sink();
  }
  return opt;
}

void write_or_print(const std::string & path, const std::string & text)
{
  if (path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(path);
  if (!out) { throw IoError("cannot write '" + path + "'"); }
  out << text;
}

int cmd_synth(const Common & c, bool force)
{
  if (c.out.empty()) { throw ValidationError("synth needs --out"); }
  if (std::filesystem::exists(c.out) && !force) {
    throw IoError("'" + c.out + "' exists; pass --force to overwrite");
  }
  const Scenario sc      = scenario_of(c);
  const SynthesisResult r = synthesize(sc.system);
  if (!r.ingredients) {
    std::cerr << "offline synthesis: " << status_tag(r.status) << "\n";
    return r.status == conic::SolveStatus::Infeasible ? OfflineFailed : Numerical;
  }
  io::write_file(c.out, ingredients_to_json(*r.ingredients));
  std::cout << std::setprecision(6);
  for (std::size_t i = 0; i < r.ingredients->P.size(); ++i) {
    std::cout << "P" << i + 1 << " eigenvalues: " << Eigen::SelfAdjointEigenSolver<Matrix>(r.ingredients->P[i]).eigenvalues().transpose()
              << "\n";
  }
  std::cout << "Lyapunov decrease: max eigenvalue " << r.report.max_eigenvalue << ", spectral radius "
            << r.report.spectral_radius << (r.report.pass ? " (pass)" : " (FAIL)") << "\n";
  return Ok;
}

int cmd_solve(const Common & c)
{
  const Scenario sc = scenario_of(c);
  const auto ti     = ingredients_of(c, sc);
  const Vector x0   = initial_state(c, sc);
  const Scheme s    = parse_scheme(c.scheme);
  TraceFile trace;
  const auto opt        = controller(c, trace);
  const OcpSolution sol = solve_once(s, x0, horizon_of(c, sc), ti, sc.system, opt);
  std::cout << to_string(s) << " (" << to_string(opt.mode) << ") " << status_tag(sol.status);
  if (sol.feasible()) { std::cout << std::fixed << std::setprecision(6) << "  J = " << sol.J; }
  std::cout << "\n";
  if (!c.out.empty()) { io::write_file(c.out, solution_to_json(sol, &ti)); }
  return sol.status == conic::SolveStatus::NumericalFailure ? Numerical : Ok;
}

int cmd_simulate(const Common & c, Index steps)
{
  const Scenario sc = scenario_of(c);
  const auto ti     = ingredients_of(c, sc);
  TraceFile trace;
  const auto opt     = controller(c, trace);
  const SimTrace run = dmpc::run(parse_scheme(c.scheme), initial_state(c, sc), horizon_of(c, sc), steps, ti, sc.system, opt);
  std::ostringstream csv;
  write_csv(csv, run, sc.system);
  write_or_print(c.out, csv.str());
  std::cerr << to_string(run.scheme) << ": " << run.steps.size() << " steps, " << run.infeasible_steps()
            << " without a solution, |x(end)| = " << run.final_state.norm() << ", accumulated cost " << run.stage_cost
            << "\n";
  return Ok;
}

int cmd_verify(const Common & c, Index samples, double inflate)
{
  if (samples < 1) { throw ValidationError("--samples must be positive"); }
  if (inflate < 0.0) { throw ValidationError("--inflate must be nonnegative"); }
  const Scenario sc = scenario_of(c);
  const auto ti     = ingredients_of(c, sc);
  const Scheme s    = parse_scheme(c.scheme);
  TraceFile trace;
  const OcpSolution sol = solve_once(s, initial_state(c, sc), horizon_of(c, sc), ti, sc.system, controller(c, trace));
  std::cout << to_string(s) << " " << status_tag(sol.status) << "\n";
  if (!sol.feasible()) { return sol.status == conic::SolveStatus::NumericalFailure ? Numerical : Ok; }
  std::vector<TerminalSet> sets = sol.sets;
  for (auto & set : sets) { set.a *= inflate; }
  const SoundnessReport rep = sample_soundness(sc.system, ti, sets, samples, c.seed);
  std::cout << "samples " << rep.samples << "  invariance " << rep.invariance_violations << "  state "
            << rep.state_violations << "  input " << rep.input_violations << "  worst excess " << std::setprecision(6)
            << rep.worst_excess << "\n";
  return Ok;
}

int cmd_sweep(const Common & c, const std::string & grid, unsigned jobs)
{
  const Scenario sc = scenario_of(c);
  const auto ti     = ingredients_of(c, sc);
  const Vector g    = parse_vector(grid);
  if (g.size() != 3 || g(2) < 1 || g(2) != std::floor(g(2))) {
    throw ValidationError("--grid expects lo,hi,points");
  }
  const auto points = box_grid(sc.system.maps.state_dim(), g(0), g(1), static_cast<Index>(g(2)));
  TraceFile trace;
  ControllerOptions opt = controller(c, trace);
  const FeasibilityMap map =
      feasibility_sweep(parse_scheme(c.scheme), points, horizon_of(c, sc), ti, sc.system, opt, jobs);
  std::ostringstream csv;
  write_csv(csv, map);
  write_or_print(c.out, csv.str());
  std::cerr << to_string(map.scheme) << ": " << map.feasible() << " of " << map.points.size() << " feasible, "
            << map.count(conic::SolveStatus::NumericalFailure) << " numerical failures\n";
  return Ok;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Distributed MPC with adaptive ellipsoidal terminal sets"};
  app.require_subcommand(1);
  Common c;
  bool force      = false;
  Index steps     = 30;
  Index samples   = 10000;
  double inflate  = 1.0;
  std::string grid{"-1,1,21"};
  unsigned jobs = 1;

  auto common = [&](CLI::App * sub, bool online) {
    sub->add_option("--scenario", c.scenario, "scenario JSON (built-in two-subsystem example when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", c.out, "output file");
    if (!online) { return; }
    sub->add_option("--ingredients", c.ingredients, "terminal ingredients JSON (synthesized when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("--scheme", c.scheme, "adap, asym or rlxd")->capture_default_str();
    sub->add_option("--mode", c.mode, "central or admm")->capture_default_str();
    sub->add_option("--horizon", c.horizon, "prediction horizon (scenario value when omitted)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--x0", c.x0, "initial state a,b,...");
    sub->add_option("--trace-admm", c.trace_admm, "write ADMM messages as newline-delimited JSON");
    sub->add_option("--seed", c.seed, "sampling seed")->capture_default_str();
  };

  auto * synth = app.add_subcommand("synth", "offline synthesis of P_i and K_Ni");
  common(synth, false);
  synth->add_flag("--force", force, "overwrite an existing output file");
  auto * solve = app.add_subcommand("solve", "solve one OCP and print J");
  common(solve, true);
  auto * simulate = app.add_subcommand("simulate", "closed-loop run, CSV trace");
  common(simulate, true);
  simulate->add_option("--steps", steps, "number of closed-loop steps")->capture_default_str()->check(CLI::PositiveNumber);
  auto * verify = app.add_subcommand("verify", "Monte-Carlo soundness of the returned terminal sets");
  common(verify, true);
  verify->add_option("--samples", samples, "points per check")->capture_default_str();
  verify->add_option("--inflate", inflate, "scale every a_i before sampling")->capture_default_str();
  auto * sweep = app.add_subcommand("sweep", "feasibility over a grid of initial states, CSV");
  common(sweep, true);
  sweep->add_option("--grid", grid, "lo,hi,points per axis")->capture_default_str();
  sweep->add_option("--jobs", jobs, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? Ok : UsageOrIo;
  }

  try {
    if (!*synth) {
      parse_scheme(c.scheme);
      parse_mode(c.mode);
    }
    if (*synth) { return cmd_synth(c, force); }
    if (*solve) { return cmd_solve(c); }
    if (*simulate) { return cmd_simulate(c, steps); }
    if (*verify) { return cmd_verify(c, samples, inflate); }
    if (*sweep) { return cmd_sweep(c, grid, jobs); }
  } catch (const OfflineInfeasible & e) {
    std::cerr << e.what() << "\n";
    return OfflineFailed;
  } catch (const NumericalError & e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return Numerical;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << "\n";
    return UsageOrIo;
  }
  return UsageOrIo;
}
