# SPDX-License-Identifier: MIT
# SPDX-FileCopyrightText: 2025 qal-sim contributors

#!/usr/bin/env python3
"""
Command-line experiment runner.

Usage:
  qal train    --recipe toy --out runs/toy
  qal tradeoff --recipe fashion-mnist-10q --betas 0,1,2,5,10,20
  qal spectrum --config configs/fashion-mnist-10q.yaml
  qal noise    --recipe fashion-mnist-5q-noise --rates 0,0.005
  qal reuse    --recipe fashion-mnist-10q --tau 0.15
  qal verify   all --seed 7

Every run writes config.json (the resolved configuration, seed included), its CSV/JSON
results and manifest.json into the output directory.

Exit codes: 0 success, 1 runtime or numeric failure (including failed checks),
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import math
from dataclasses import replace
from typing import Sequence

import numpy as np
from rich.console import Console
from rich.table import Table

from .artifacts import RunArtifacts, persist
from .config import ConfigError, ExperimentConfig, load_config
from .datasets import (
    LabeledDataset,
    gen_aubry_andre_dataset,
    gen_cluster_ising_dataset,
    gen_synthetic,
    load_image_dataset,
    split,
)
from .encoding import (
    DEFAULT_HAMILTONIAN_TIME,
    DEFAULT_STATE_TIME,
    ClassicalEncoder,
    ClassicalEncoderConfig,
    Encoder,
    HamiltonianEncoder,
    LabelScheme,
    StateEncoder,
    suggest_qubits,
)
from .evaluation import (
    eigenbasis_failure_table,
    ensemble_accuracy,
    evaluate,
    failure_probabilities,
    k_accuracy,
    k_label,
    report_from_failures,
    reusability_run,
)
from .hamiltonians import average_hamiltonian, random_k_local, spectrum
from .noise import NoiseModel, train_noisy
from .quantum import DensityState, PureState
from .runtime import configure_logging, default_threads, parallel_map, spawn_generators
from .trainer import (
    InitPolicy,
    TrainConfig,
    TrainMode,
    initial_state,
    oracle_state,
    predicted_tradeoff,
    train,
)
from .verify import SUITES, run_suite

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


# ---------------------------------------------------------------------------
# experiment assembly
# ---------------------------------------------------------------------------

class Experiment:
    """Datasets, encoder and label scheme built from one resolved configuration."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.threads = cfg.threads or default_threads()
        self.data_rng, self.encoder_rng, self.aux_rng = spawn_generators(cfg.seed, 3)
        self.train_set, self.test_set = self._datasets()
        self.encoder = self._encoder()
        self.scheme = LabelScheme(
            self.train_set.k_classes, self.encoder.n_qubits, cfg.encoder.label_qubits
        )
        log.info(
            "%s: %d train / %d test samples, %d qubits",
            cfg.recipe, len(self.train_set), len(self.test_set), self.encoder.n_qubits,
        )

    def _datasets(self) -> tuple[LabeledDataset, LabeledDataset]:
        d = self.cfg.dataset
        total = d.n_train + d.n_test
        if d.name in ("fashion-mnist", "mnist"):
            common = dict(side=d.side, classes=d.classes, angle_range=d.angle_range)
            return (
                load_image_dataset(d.name, "train", limit=d.n_train, **common),
                load_image_dataset(d.name, "test", limit=d.n_test, **common),
            )
        if d.name == "aubry-andre":
            data = gen_aubry_andre_dataset(total, self.data_rng, d.n_qubits, d.g, d.v_range)
        elif d.name == "cluster-ising":
            mapper = lambda fn, items: parallel_map(fn, items, self.threads)  # noqa: E731
            data = gen_cluster_ising_dataset(total, self.data_rng, d.n_qubits, d.h_range, mapper)
        else:
            data = gen_synthetic(total, d.data_dim, self.data_rng, d.k_classes, d.spread)
        return split(data, d.n_test, self.cfg.seed)

    def _encoder(self) -> Encoder:
        e = self.cfg.encoder
        if e.kind == "classical":
            dim = self.train_set.data_dim
            return ClassicalEncoder(ClassicalEncoderConfig(e.n_qubits or suggest_qubits(dim), dim))
        n = e.n_qubits or self.cfg.dataset.n_qubits
        if e.kind == "hamiltonian":
            t = DEFAULT_HAMILTONIAN_TIME if e.t is None else e.t
            return HamiltonianEncoder(n, t, e.cache_size)
        data_qubits = self.cfg.dataset.n_qubits
        global_h = random_k_local(n + data_qubits, e.global_terms, e.global_k, self.encoder_rng)
        t = DEFAULT_STATE_TIME if e.t is None else e.t
        return StateEncoder(global_h, n, t, e.cache_size)

    def train_config(self, **changes) -> TrainConfig:
        t = self.cfg.train
        base = TrainConfig(
            mode=TrainMode(t.mode),
            eta=t.eta,
            steps=t.steps,
            seed=self.cfg.seed,
            init=InitPolicy(t.init),
            loss_threshold=t.loss_threshold,
            continue_on_reject=t.continue_on_reject,
            max_attempts=t.max_attempts,
        )
        return replace(base, **changes) if changes else base

    def h_s(self):
        return average_hamiltonian(self.train_set, self.encoder, self.scheme)

    def failures(self, state, samples) -> np.ndarray:
        return failure_probabilities(state, samples, self.encoder, self.scheme, self.threads)


def _k_columns(ks: Sequence[float]) -> list[str]:
    return [f"k_acc@{k_label(k)}" for k in ks]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train(cfg: ExperimentConfig, console: Console) -> int:
    exp = Experiment(cfg)
    config = exp.train_config()
    ks = cfg.eval.ks
    h_s = exp.h_s() if config.mode is TrainMode.ORACLE else None
    rho0 = initial_state(config, exp.encoder.n_qubits, np.random.default_rng(config.seed))
    rows: list[tuple] = []
    acceptance = [1.0]

    def curve_row(step: int, state) -> None:
        rep = report_from_failures(
            exp.failures(state, exp.train_set), exp.failures(state, exp.test_set), ks
        )
        rows.append((
            step, rep.train_loss, rep.train_accuracy, rep.accuracy,
            *(rep.k_accuracy[k_label(k)] for k in ks), acceptance[0],
        ))
        log.info("step %d: train acc %.4f, test acc %.4f", step, rep.train_accuracy, rep.accuracy)

    def on_step(rec, state) -> None:
        acceptance[0] *= rec.success_prob
        if rec.step % cfg.eval.interval and rec.step != config.steps:
            return
        if state is None:
            state = oracle_state(h_s, rho0, rec.beta)
        curve_row(rec.step, state)

    curve_row(0, rho0)
    trace = train(exp.train_set, exp.encoder, exp.scheme, config, h_s=h_s, on_step=on_step)
    if trace.stopped_early and rows[-1][0] != trace.records[-1].step:
        curve_row(trace.records[-1].step, trace.final_state)
    report = evaluate(
        trace.final_state, exp.train_set, exp.test_set, exp.encoder, exp.scheme,
        ks=ks, delta=cfg.eval.delta, threads=exp.threads,
    )
    header = ("step", "train_loss", "train_acc", "test_acc", *_k_columns(ks),
              "success_prob_estimate")
    summaries = {}
    if cfg.majority.copies:
        summaries["ensemble"] = _ensemble(exp, config, cfg.majority.copies,
                                          cfg.majority.shared_sequence, h_s)
    persist(
        RunArtifacts(cfg.to_dict(), trace=trace, report=report,
                     tables={"curve": (header, rows)}, summaries=summaries),
        cfg.out_dir,
    )
    table = Table(title=f"train: {cfg.recipe}")
    table.add_column("metric")
    table.add_column("value", justify="right")
    table.add_row("steps", str(len(trace.records)))
    table.add_row("train accuracy", f"{report.train_accuracy:.4f}")
    table.add_row("test accuracy", f"{report.accuracy:.4f}")
    for k, v in report.k_accuracy.items():
        table.add_row(f"test K={k}", f"{v:.4f}")
    table.add_row("acceptance estimate", f"{trace.acceptance_estimate:.4g}")
    if "ensemble" in summaries:
        table.add_row("ensemble accuracy", f"{summaries['ensemble']['accuracy']:.4f}")
    console.print(table)
    return EXIT_OK


def _ensemble(exp: Experiment, config: TrainConfig, copies: int, shared: bool, h_s=None) -> dict:
    """Majority vote over independently trained copies (or copies sharing one datum sequence)."""
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(config.seed).spawn(copies)]

    def run(seed: int) -> np.ndarray:
        if shared:
            init = PureState.haar_random(exp.encoder.n_qubits, np.random.default_rng(seed))
            cfg_k = replace(config, init=InitPolicy.EXPLICIT, initial_state=init)
        else:
            cfg_k = replace(config, seed=seed)
        trace = train(exp.train_set, exp.encoder, exp.scheme, cfg_k, h_s=h_s)
        return exp.failures(trace.final_state, exp.test_set)

    h = np.vstack(parallel_map(run, seeds, exp.threads))
    per_sample = [ensemble_accuracy(h[:, j]) for j in range(h.shape[1])]
    return {"copies": copies, "shared_sequence": shared, "accuracy": float(np.mean(per_sample))}


def cmd_tradeoff(cfg: ExperimentConfig, console: Console, betas: Sequence[float]) -> int:
    exp = Experiment(cfg)
    ks = cfg.eval.ks
    h_s = exp.h_s()
    header = ("initial_state", "beta", "success_prob", "conditional_loss", "test_acc",
              *_k_columns(ks))
    rows: list[tuple] = []
    if cfg.tradeoff.pure:
        psi0 = PureState.haar_random(exp.encoder.n_qubits, exp.aux_rng)
        for point in predicted_tradeoff(h_s, psi0, betas):
            h_test = exp.failures(oracle_state(h_s, psi0, point.beta), exp.test_set)
            rows.append(_tradeoff_row("pure", point, h_test, ks))
    if cfg.tradeoff.mixed:
        rho0 = DensityState.maximally_mixed(exp.encoder.n_qubits)
        evals, vecs = h_s.eigh
        table = eigenbasis_failure_table(vecs, exp.test_set, exp.encoder, exp.scheme, exp.threads)
        for point in predicted_tradeoff(h_s, rho0, betas):
            w = np.exp(-2.0 * point.beta * (evals - evals[0]))
            rows.append(_tradeoff_row("mixed", point, table @ (w / w.sum()), ks))
    persist(RunArtifacts(cfg.to_dict(), tables={"tradeoff": (header, rows)}), cfg.out_dir)
    out = Table(title=f"tradeoff: {cfg.recipe}")
    for col in header:
        out.add_column(col, justify="right")
    for row in rows:
        out.add_row(row[0], *(f"{v:.4g}" for v in row[1:]))
    console.print(out)
    return EXIT_OK


def _tradeoff_row(kind: str, point, h_test: np.ndarray, ks: Sequence[float]) -> tuple:
    h_test = np.clip(h_test, 0.0, 1.0)
    return (kind, point.beta, point.success_prob, point.loss, 1.0 - float(np.mean(h_test)),
            *(float(np.mean(k_accuracy(h_test, k))) for k in ks))


def cmd_spectrum(cfg: ExperimentConfig, console: Console) -> int:
    exp = Experiment(cfg)
    report = spectrum(exp.h_s(), np.linspace(0.0, 1.0, cfg.spectrum.grid_points))
    persist(RunArtifacts(cfg.to_dict(), spectrum=report), cfg.out_dir)
    table = Table(title=f"spectrum: {cfg.recipe}")
    table.add_column("metric")
    table.add_column("value", justify="right")
    table.add_row("dimension", str(report.eigenvalues.size))
    table.add_row("ground energy", f"{report.ground_energy:.6f}")
    table.add_row("gap", f"{report.gap:.6f}")
    table.add_row("ground degeneracy", str(report.ground_degeneracy))
    for e in (0.1, 0.25, 0.5):
        table.add_row(f"fraction E <= {e:g}", f"{report.fraction_below(e):.4f}")
    console.print(table)
    return EXIT_OK


def cmd_noise(cfg: ExperimentConfig, console: Console, rates: Sequence[float]) -> int:
    exp = Experiment(cfg)
    eta, steps, interval = cfg.train.eta, cfg.train.steps, cfg.eval.interval
    header = ("p2", "step", "train_acc")
    tables: dict = {}
    final: list[tuple[float, float]] = []
    for p2 in rates:
        model = NoiseModel(p2, p2 * cfg.noise.p1_ratio, cfg.noise.convention)
        rng = np.random.default_rng(cfg.seed)
        psi0 = PureState.haar_random(exp.encoder.n_qubits, rng)
        rows = [(p2, 0, 1.0 - float(np.mean(exp.failures(psi0, exp.train_set))))]

        def on_step(rec, rho, rows=rows, p2=p2) -> None:
            if rec.step % interval == 0 or rec.step == steps:
                acc = 1.0 - float(np.mean(exp.failures(rho, exp.train_set)))
                rows.append((p2, rec.step, acc))
                log.info("p2=%g step %d: train acc %.4f", p2, rec.step, acc)

        train_noisy(exp.train_set, exp.encoder, exp.scheme, eta, steps, model, rng,
                    initial=psi0, on_step=on_step)
        tables[f"noise_{p2:g}"] = (header, rows)
        final.append((p2, rows[-1][2]))
    persist(RunArtifacts(cfg.to_dict(), tables=tables), cfg.out_dir)
    table = Table(title=f"noise: {cfg.recipe}")
    table.add_column("p2", justify="right")
    table.add_column("final train accuracy", justify="right")
    for p2, acc in final:
        table.add_row(f"{p2:g}", f"{acc:.4f}")
    console.print(table)
    return EXIT_OK


def cmd_reuse(cfg: ExperimentConfig, console: Console, tau: float) -> int:
    exp = Experiment(cfg)
    config = exp.train_config(mode=TrainMode.EXACT)
    events = reusability_run(
        exp.train_set, exp.test_set, exp.encoder, exp.scheme, config,
        tau, cfg.reuse.predictions, exp.aux_rng,
    )
    header = ("event", "step", "sample_id", "label", "predicted", "correct",
              "loss_before", "loss_after", "fidelity", "recovery_steps")
    rows = [(i, e.step, e.sample_id, e.label, e.predicted, e.correct, e.loss_before,
             e.loss_after, e.fidelity, e.recovery_steps) for i, e in enumerate(events)]
    summary = {"tau": tau, "events": len(events)}
    for kind, flag in (("correct", True), ("wrong", False)):
        rec = [e.recovery_steps for e in events
               if e.correct is flag and e.recovery_steps is not None]
        summary[f"{kind}_predictions"] = sum(e.correct is flag for e in events)
        summary[f"median_recovery_{kind}"] = float(np.median(rec)) if rec else None
    persist(RunArtifacts(cfg.to_dict(), tables={"reuse": (header, rows)},
                         summaries={"reuse": summary}), cfg.out_dir)
    table = Table(title=f"reuse: {cfg.recipe} (tau={tau:g})")
    table.add_column("metric")
    table.add_column("value", justify="right")
    for key, value in summary.items():
        table.add_row(key, "-" if value is None else f"{value:g}")
    console.print(table)
    return EXIT_OK


def cmd_verify(suite: str, seed: int, quick: bool, out: str | None, console: Console) -> int:
    checks = run_suite(suite, seed, quick)
    table = Table(title=f"verify: {suite}")
    for col in ("suite", "check", "measured", "bound", "result"):
        table.add_column(col, justify="right" if col in ("measured", "bound") else "left")
    for c in checks:
        verdict = "[green]pass[/green]" if c.passed else "[red]FAIL[/red]"
        table.add_row(c.suite, c.name, f"{c.measured:.4g}", f"{c.bound:.4g}", verdict)
    console.print(table)
    if out:
        header = ("suite", "check", "measured", "bound", "passed")
        config = {"command": "verify", "suite": suite, "seed": seed, "quick": quick}
        persist(RunArtifacts(config, tables={"checks": (header, [tuple(c) for c in checks])}), out)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILURE


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values or any(math.isnan(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML or JSON experiment config")
    common.add_argument("--recipe", default=None, help="Named recipe (default: toy)")
    common.add_argument("--seed", type=int, default=None, help="Override the config seed")
    common.add_argument("--out", default=None, help="Output directory (default: recipe's)")
    common.add_argument("--threads", type=int, default=None, help="Worker threads (0 = all)")
    common.add_argument("--quiet", action="store_true", help="Only warnings and errors")
    common.add_argument("--verbose", action="store_true", help="Per-step debug logging")

    ap = argparse.ArgumentParser(
        prog="qal",
        description="Quantum automated learning simulator and experiment runner",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Usage:")[1].split("Every run")[0].rstrip(),
    )
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="Train and evaluate; accuracy-vs-step curve")
    p = sub.add_parser("tradeoff", parents=[common], help="Oracle accuracy vs success probability")
    p.add_argument("--betas", type=_float_list, default=None, help="Comma-separated beta grid")
    sub.add_parser("spectrum", parents=[common], help="Spectrum and heavy tail of H_S")
    p = sub.add_parser("noise", parents=[common], help="Depolarizing-noise training sweep")
    p.add_argument("--rates", type=_float_list, default=None, help="Comma-separated p2 values")
    p = sub.add_parser("reuse", parents=[common], help="State reusability protocol")
    p.add_argument("--tau", type=float, default=None, help="Training-loss threshold")
    p = sub.add_parser("verify", parents=[common], help="Numerical bound verification suites")
    p.add_argument("suite", choices=[*SUITES, "all"], help="Suite to run")
    p.add_argument("--quick", action="store_true", help="Smaller draw counts")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    console = Console()
    configure_logging(verbose=args.verbose, quiet=args.quiet)
    try:
        if args.command == "verify":
            return cmd_verify(args.suite, args.seed or 0, args.quick, args.out, console)
        overrides = {"seed": args.seed, "out_dir": args.out, "threads": args.threads}
        cfg = load_config(args.config, args.recipe, overrides)
        if args.command == "train":
            return cmd_train(cfg, console)
        if args.command == "tradeoff":
            return cmd_tradeoff(cfg, console, args.betas or cfg.tradeoff.betas)
        if args.command == "spectrum":
            return cmd_spectrum(cfg, console)
        if args.command == "noise":
            return cmd_noise(cfg, console, args.rates or cfg.noise.rates)
        return cmd_reuse(cfg, console, cfg.reuse.tau if args.tau is None else args.tau)
    except ConfigError as e:
        console.print(f"[red]config error:[/red] {e}")
        return EXIT_USAGE
    except (ValueError, ArithmeticError, OSError) as e:
        log.error("%s failed: %s", args.command, e)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
