#!/usr/bin/env python3
"""
Runtime Benchmarking Suite
==========================

Times the runtime-bounded acceptance runs and the kernels behind them:
- Brownian three-way comparison (bound 60 s)
- Density-matrix path integral on 64-point grids (bound 120 s)
- Quasi-Langevin semiclassical check at 10^6 trajectories (bound 10 min)
- Throughput of the Airy proposal sampler and worker scaling
"""

import dataclasses
import os
import statistics
import sys
import tempfile
import time
from pathlib import Path

# Add the parent directory to the Python path to import quasilangevin
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from quasilangevin.config import parse_config  # noqa: E402
from quasilangevin.core import RngStream  # noqa: E402
from quasilangevin.experiments import run_experiment  # noqa: E402
from quasilangevin.functionals import airy_proposal  # noqa: E402

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


class PerformanceBenchmark:
    """Wall-clock timings against the acceptance bounds."""

    def __init__(self, iterations=1):
        self.iterations = iterations
        self.workdir = Path(tempfile.mkdtemp(prefix="quasi-langevin-bench-"))
        self.results = {}

    def measure_time(self, func, *args, **kwargs):
        """Median and spread of wall-clock seconds over the iterations."""
        times = []
        for _ in range(self.iterations):
            start = time.perf_counter()
            func(*args, **kwargs)
            times.append(time.perf_counter() - start)
        return {
            "median": statistics.median(times),
            "min": min(times),
            "max": max(times),
        }

    def _config(self, name, **ensemble):
        cfg = parse_config((CONFIG_DIR / name).read_text(encoding="utf-8"))
        if ensemble:
            cfg = dataclasses.replace(cfg, ensemble=dataclasses.replace(cfg.ensemble, **ensemble))
        return cfg

    def test_acceptance_runtimes(self):
        """Runs with a runtime bound in the acceptance criteria."""
        print("*** ACCEPTANCE RUNTIMES ***")
        print("=" * 50)
        print()
        print("| Run | Median (s) | Bound (s) | Status |")
        print("|-----|------------|-----------|--------|")
        runs = [
            ("brownian-triple", self._config("brownian_triple.json"), 60.0),
            ("quantum-reference", self._config("quantum_reference.json"), 120.0),
            ("quasi-langevin 10^6", self._config("quasi_langevin.json", n_traj=1_000_000, workers=4), 600.0),
        ]
        for name, cfg, bound in runs:
            timing = self.measure_time(run_experiment, cfg, self.workdir / cfg.experiment)
            status = "OK" if timing["median"] < bound else "SLOW"
            self.results[name] = timing["median"]
            print(f"| {name} | {timing['median']:10.2f} | {bound:9.0f} | {status} |")
        print()

    def test_proposal_throughput(self):
        """Airy proposal draws per second."""
        print("*** AIRY PROPOSAL THROUGHPUT ***")
        print("=" * 50)
        print()
        table = airy_proposal(20.0, 10.0)
        gen = RngStream(0).generator(0)
        for size in (10_000, 100_000, 1_000_000):
            timing = self.measure_time(table.sample, gen, size)
            print(f"{size:>9d} draws: {timing['median'] * 1e3:8.2f} ms ({size / timing['median']:.3g} draws/s)")
        print()

    def test_worker_scaling(self):
        """Quasi-Langevin wall time by worker count; output is identical for each."""
        print("*** WORKER SCALING ***")
        print("=" * 50)
        print()
        reports = set()
        for workers in (1, 2, 4):
            cfg = self._config("quasi_langevin.json", workers=workers)
            start = time.perf_counter()
            result = run_experiment(cfg, self.workdir / f"workers-{workers}")
            elapsed = time.perf_counter() - start
            reports.add((self.workdir / f"workers-{workers}" / "signed_ensemble.csv").read_bytes())
            print(f"workers={workers}: {elapsed:.2f} s, mean sign {result.summary['mean_sign']:.4g}")
        print(f"Identical ensembles across worker counts: {'yes' if len(reports) == 1 else 'no'}")
        print()

    def run_all_benchmarks(self):
        """Run the complete benchmark suite."""
        print("*** RUNTIME BENCHMARK SUITE ***")
        print("=" * 60)
        print(f"Iterations per run: {self.iterations}")
        print(f"Python version: {sys.version}")
        print()

        self.test_proposal_throughput()
        self.test_worker_scaling()
        self.test_acceptance_runtimes()

        print("*** BENCHMARK SUMMARY ***")
        print("=" * 50)
        for name, seconds in self.results.items():
            print(f"- {name}: {seconds:.2f} s")
        print()


if __name__ == "__main__":
    print("Starting runtime benchmark...")
    print()

    benchmark = PerformanceBenchmark(iterations=1)
    benchmark.run_all_benchmarks()
