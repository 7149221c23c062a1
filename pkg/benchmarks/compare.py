#!/usr/bin/env python3
"""
Desk-scale comparison of Adam, Adam with EMA and PADAM on every problem.

Run: python benchmarks/compare.py [--quick]
"""

import argparse
import time

import padambench

OPTIMIZERS = ["adam", "adam_ema", "padam3", "padam10"]


def timed_run(preset: str, optimizer: str, **overrides) -> tuple[padambench.ExperimentResult, float]:
    """Run one preset and return the result with its wall time in seconds."""
    config = padambench.resolve_config({"preset": preset, "optimizer": optimizer, **overrides})
    start = time.perf_counter()
    result = padambench.run_experiment(config)
    return result, time.perf_counter() - start


def format_result(name: str, final: float | None, raw: float | None, diverged: int, seconds: float) -> str:
    """Format benchmark result as a table row."""
    final_text = "diverged" if final is None else f"{final:.4e}"
    raw_text = "" if raw is None else f"{raw:.4e}"
    return f"| {name:<10} | {final_text:>10} | {raw_text:>10} | {diverged:>8} | {seconds:>8.1f} |"


def run_benchmarks(quick: bool = False):
    """Run all desk presets and print one table per problem."""
    overrides = {"steps": 2000, "seeds": 2} if quick else {}

    print("=" * 62)
    print("PADAM DESK BENCHMARK")
    print("=" * 62)
    print()

    for problem in padambench.problem_names():
        preset = f"{problem}-desk"
        print(f"Preset: {preset}")
        print("-" * 62)
        print("| Optimizer  |      Final |   Raw Adam | Diverged | Time (s) |")
        print("|------------|------------|------------|----------|----------|")

        for optimizer in OPTIMIZERS:
            result, seconds = timed_run(preset, optimizer, **overrides)
            aggregate = result.aggregate
            print(
                format_result(
                    optimizer,
                    aggregate["final_mean_error"],
                    aggregate.get("raw_final_mean_error"),
                    aggregate["diverged_seed_count"],
                    seconds,
                )
            )
            if aggregate.get("raw_final_mean_error") and aggregate["final_mean_error"]:
                ratio = aggregate["raw_final_mean_error"] / aggregate["final_mean_error"]
                print(f"|   gain vs raw Adam: {ratio:.2f}x")
        print()


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    parser.add_argument("--quick", action="store_true", help="2000 steps and 2 seeds per run")
    run_benchmarks(parser.parse_args().quick)
