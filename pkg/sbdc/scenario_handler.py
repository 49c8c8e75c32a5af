"""
Pipeline handling for scenario runs: analysis, simulation, certification and
the embedded benchmark reproduction.
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from sbdc import __version__
from sbdc.benchmark import benchmark_scenarios, emit_scenarios
from sbdc.dynamics_sim import simulate_ct, simulate_dt, simulate_san
from sbdc.errors import ValidationError
from sbdc.plotting import plot_trajectory
from sbdc.robustness_analysis import analyze, effective_resistance_multi, epsilon_star
from sbdc.scenario import RunRecord, load_scenario, scenario_hash
from utils.config import output_root
from utils.files import atomic_write_json, fmt_number, round_floats
from utils.logger import logger as shared_logger

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FAILED = 2


class ScenarioHandler:
    """
    Handler for running scenario pipelines and persisting their outputs.
    """
    def __init__(self, out_dir=None, logger=None):
        """Initialize the handler; ``out_dir`` is the command-line override."""
        self.out_dir = out_dir
        self.logger = logger if logger is not None else shared_logger

        # Command name -> pipeline
        self.command_mapping = {
            "analyze": self.run_analyze,
            "certify": self.run_certify,
            "simulate": self.run_simulate,
            "reproduce": self.run_reproduce,
        }

        # Callbacks
        self.on_report_written = None
        self.on_trajectory_written = None

    def execute(self, command, **kwargs):
        """Dispatch a command to its pipeline and return the exit code."""
        if command not in self.command_mapping:
            self.logger.log(f"Unknown command: {command}", "ERROR")
            return EXIT_ERROR
        return self.command_mapping[command](**kwargs)

    def output_dir(self, scenario=None):
        scenario_dir = scenario.output_dir if scenario is not None else None
        return Path(output_root(self.out_dir, scenario_dir))

    # Analysis

    def build_report(self, scenario, seed=None):
        """Full robustness report for a scenario with an attack."""
        attack = scenario.attack.build(scenario.graph, seed=seed)
        if attack is None:
            raise ValidationError("attack", "analysis needs an attack")
        return analyze(scenario.graph, scenario.coding, scenario.codeword(), attack, epsilon=scenario.epsilon)

    def requested_verdicts(self, scenario, report):
        """Verdicts of the certificates the scenario asks for; one the report lacks counts as failed."""
        verdicts = {}
        for name in scenario.certificates:
            if name not in report.verdicts:
                self.logger.log(f"{scenario.name}: {name} could not be evaluated", "WARNING")
            verdicts[name] = report.verdicts.get(name, False)
        return verdicts

    def run_analyze(self, scenario_path, verdicts_only=False):
        """Write the JSON report of a scenario; exit 2 when a requested certificate fails."""
        started = time.perf_counter()
        scenario = load_scenario(scenario_path)
        report = self.build_report(scenario)
        verdicts = self.requested_verdicts(scenario, report)

        record = RunRecord(
            scenario_hash=scenario_hash(scenario),
            version=__version__,
            report=None if verdicts_only else report.to_dict(),
            verdicts=verdicts,
            wall_clock=time.perf_counter() - started,
        )
        suffix = "verdicts" if verdicts_only else "report"
        path = atomic_write_json(self.output_dir(scenario) / f"{scenario.name}.{suffix}.json", record.to_dict())

        for name, passed in verdicts.items():
            self.logger.log(f"{scenario.name}: {name} {'pass' if passed else 'FAIL'}", "CERT")
        print(f"rho_ct       {fmt_number(report.rho_ct)}")
        print(f"attack norm  {fmt_number(report.attack_norm)}")
        print(f"gap          {fmt_number(report.gap)}")
        print(f"epsilon*     {fmt_number(report.epsilon_star)}")
        for name, passed in verdicts.items():
            print(f"{name:<20} {'pass' if passed else 'FAIL'}")

        if self.on_report_written:
            self.on_report_written(path)
        return EXIT_OK if all(verdicts.values()) else EXIT_FAILED

    def run_certify(self, scenario_path):
        return self.run_analyze(scenario_path, verdicts_only=True)

    # Simulation

    def simulate(self, scenario, seed=None):
        """Run the scenario's dynamics; ``seed`` overrides random x0 and random attacks."""
        if scenario.simulation is None:
            raise ValidationError("simulation", "required for simulate")
        spec = scenario.simulation
        g = scenario.graph
        attack = scenario.attack.build(g, seed=seed)
        x0 = spec.initial_state(g.n, seed=seed)
        theta = scenario.codeword()

        if scenario.san is not None:
            return simulate_san(
                g, scenario.coding, theta, attack, scenario.san, x0, spec.mode,
                horizon=spec.horizon, dt=spec.dt, steps=spec.steps, epsilon=spec.epsilon,
                settings=spec.settings,
            )
        if spec.mode == "ct":
            return simulate_ct(g, scenario.coding, theta, attack, x0, spec.horizon, spec.dt, spec.settings)
        return simulate_dt(g, scenario.coding, theta, attack, x0, spec.steps, spec.epsilon, spec.settings)

    def write_trajectory(self, traj, directory, name, plot=False):
        directory = Path(directory)
        csv_path = directory / f"{name}.csv"
        traj.write(csv_path, directory / f"{name}.verdict.json")
        if plot:
            plot_trajectory(traj, directory / f"{name}.svg", title=f"{name}: {traj.verdict.value}")
        if self.on_trajectory_written:
            self.on_trajectory_written(csv_path)
        return csv_path

    def run_simulate(self, scenario_path, plot=False, seed=None):
        """Simulate, write CSV + verdict sidecar (+ SVG); exit 2 if an expected verdict is missed."""
        scenario = load_scenario(scenario_path)
        traj = self.simulate(scenario, seed=seed)
        self.write_trajectory(traj, self.output_dir(scenario), scenario.name, plot=plot)

        sidecar = traj.sidecar()
        self.logger.log(f"{scenario.name}: {sidecar['verdict']} ({traj.mode})", "SIM")
        print(f"verdict      {sidecar['verdict']}")
        if sidecar["limit"] is not None:
            print(f"limit        {round_floats(sidecar['limit'])}")
        if sidecar["escape_time"] is not None:
            print(f"escape time  {fmt_number(sidecar['escape_time'])}")

        if scenario.expected is not None and scenario.expected != sidecar["verdict"]:
            self.logger.log(f"{scenario.name}: expected {scenario.expected}", "WARNING")
            return EXIT_FAILED
        return EXIT_OK

    # Benchmark

    def run_cell(self, cell, scenario, directory):
        """Simulate one benchmark cell and attach its step-size guidance."""
        traj = self.simulate(scenario)
        self.write_trajectory(traj, directory, cell.name)
        profile = effective_resistance_multi(scenario.graph, scenario.attack.edges)
        guidance = epsilon_star(scenario.graph, profile)
        epsilon = scenario.epsilon
        row = {
            "cell": cell.name,
            "gain": cell.gain,
            "attack": f"E{cell.variant}",
            "mode": cell.mode,
            "expected": cell.expected,
            "verdict": traj.verdict.value,
            "limit": traj.sidecar()["limit"],
            "epsilon": epsilon,
            "epsilon_star": guidance.epsilon_star,
            "epsilon_above_guidance": epsilon is not None and epsilon > guidance.epsilon_star,
        }
        row["match"] = row["verdict"] == row["expected"]
        self.logger.log(f"{cell.name}: {row['verdict']} (expected {cell.expected})", "SIM")
        return row

    def run_reproduce(self, as_json=False, epsilon=None, emit_dir=None, jobs=1):
        """Run the benchmark grid and compare every verdict with the expected one."""
        if emit_dir is not None:
            for path in emit_scenarios(emit_dir, epsilon):
                self.logger.log(f"Wrote {path}", "INFO")

        directory = self.output_dir() / "reproduce"
        cells = benchmark_scenarios(epsilon)
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                rows = list(pool.map(lambda item: self.run_cell(item[0], item[1], directory), cells))
        else:
            rows = [self.run_cell(cell, scenario, directory) for cell, scenario in cells]

        summary = {"version": __version__, "rows": rows, "all_match": all(r["match"] for r in rows)}
        atomic_write_json(directory / "summary.json", summary)
        if as_json:
            print(json.dumps(round_floats(summary), indent=2, sort_keys=True))
        else:
            self.print_table(rows)
        return EXIT_OK if summary["all_match"] else EXIT_FAILED

    def print_table(self, rows):
        header = f"{'cell':<10} {'mode':<4} {'expected':<10} {'verdict':<10} {'limit':<16} {'match':<5} note"
        print(header)
        print("-" * len(header))
        for r in rows:
            limit = "-" if r["limit"] is None else fmt_number(r["limit"])
            note = ""
            if r["epsilon_above_guidance"]:
                note = f"epsilon {fmt_number(r['epsilon'])} > epsilon* {fmt_number(r['epsilon_star'])}"
            print(f"{r['cell']:<10} {r['mode']:<4} {r['expected']:<10} {r['verdict']:<10} "
                  f"{limit:<16} {'yes' if r['match'] else 'NO':<5} {note}")
