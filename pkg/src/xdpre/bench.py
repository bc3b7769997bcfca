"""Timed game runs over attribute sets, messages and trial counts.

Each cell (attribute set, message, trial count) is measured ``samples``
times. One sample is a full game of ``trial_count`` rounds, and each round
runs setup, one oracle key generation, encryption, challenge construction
and the guess. The recorded figure is the mean wall time per round in
milliseconds. Rounds of different cells are interleaved so that they all
run under the same machine conditions.
"""

from __future__ import annotations

import csv
import gc
import hashlib
import io
import platform
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import InvalidParameter, XdpreError
from .groups import Backend, DebugBackend
from .indcpa import GameConfig, iter_rounds

A1 = ("Doctor", "Professor", "Researcher")
A2 = ("Doctor", "Student", "Professor", "Researcher")
MESSAGES = ("OISP Symposium", "The 9th Student Conference")
TIMING_SCOPE = "mean ms per round: setup + keygen + encrypt + challenge + guess"


@dataclass(frozen=True)
class BenchConfig:
    attribute_sets: dict[str, tuple[str, ...]] = field(default_factory=lambda: {"A1": A1, "A2": A2})
    messages: tuple[str, ...] = MESSAGES
    trial_counts: tuple[int, ...] = (1000, 1500, 2000)
    samples: int = 10
    seed: int = 0
    backend: Backend = field(default_factory=DebugBackend)
    strategy: str = "random-guess"

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidParameter("samples must be >= 1")
        if not self.trial_counts or min(self.trial_counts) < 1:
            raise InvalidParameter("trial_counts must be a nonempty list of positive integers")
        if not self.attribute_sets or not self.messages:
            raise InvalidParameter("need at least one attribute set and one message")


@dataclass(frozen=True)
class BenchCell:
    attribute_set: str
    message: str
    trials: int
    sample_ms: tuple[float, ...] = ()
    sample_win_rates: tuple[float, ...] = ()
    error: Optional[str] = None

    @property
    def mean_ms(self) -> float:
        return round(statistics.fmean(self.sample_ms), 4)

    @property
    def median_ms(self) -> float:
        return statistics.median(self.sample_ms)

    @property
    def win_rate_pct(self) -> float:
        return round(100 * statistics.fmean(self.sample_win_rates), 2)


@dataclass
class BenchReport:
    config: BenchConfig
    cells: list[BenchCell]
    environment: dict[str, str]

    def cell(self, attribute_set: str, message: str, trials: int) -> BenchCell:
        for c in self.cells:
            if (c.attribute_set, c.message, c.trials) == (attribute_set, message, trials):
                return c
        raise KeyError((attribute_set, message, trials))


def challenge_pair(message: str) -> tuple[bytes, bytes]:
    """The cell message and an equal-length companion (its bytes reversed)."""
    m0 = message.encode()
    m1 = m0[::-1]
    if m1 == m0:
        m1 = m0[:-1] + bytes([m0[-1] ^ 1])
    return m0, m1


def policy_for(attrs) -> str:
    return attrs[0] if len(attrs) == 1 else "(" + " AND ".join(attrs) + ")"


def sample_seed(seed: int, set_name: str, message: str, trials: int, sample: int) -> int:
    digest = hashlib.sha256(f"{seed}/{set_name}/{message}/{trials}/{sample}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def game_config(config: BenchConfig, set_name: str, message: str, trials: int, sample: int) -> GameConfig:
    m0, m1 = challenge_pair(message)
    return GameConfig(
        trials=trials,
        policy=policy_for(config.attribute_sets[set_name]),
        m0=m0,
        m1=m1,
        strategy=config.strategy,
        seed=sample_seed(config.seed, set_name, message, trials, sample),
        backend=config.backend,
    )


def run_suite(config: BenchConfig, clock: Callable[[], float] = time.perf_counter) -> BenchReport:
    """Within each sample all cells advance in lockstep, one timed round at a
    time, so bursts of machine load hit every cell alike. The cyclic garbage
    collector is paused while timing, as ``timeit`` does."""
    keys = [(s, m, t) for m in config.messages for t in config.trial_counts for s in config.attribute_sets]
    times: dict = {key: [] for key in keys}
    rates: dict = {key: [] for key in keys}
    errors: dict = {}
    gc_was_enabled = gc.isenabled()
    try:
        for k in range(config.samples):
            running = {}
            for key in keys:
                if key not in errors:
                    game = game_config(config, *key, k)
                    running[key] = [game, iter_rounds(game), 0, 0.0]  # config, rounds, wins, seconds
            gc.collect()
            gc.disable()
            while running:
                for key in list(running):
                    state = running[key]
                    try:
                        start = clock()
                        rnd = next(state[1], None)
                        stop = clock()
                    except XdpreError as exc:
                        errors[key] = f"{type(exc).__name__}: {exc}"
                        del running[key]
                        continue
                    if rnd is None:
                        trials = state[0].trials
                        times[key].append(state[3] * 1000 / trials)
                        rates[key].append(state[2] / trials)
                        del running[key]
                    else:
                        state[2] += rnd.win
                        state[3] += stop - start
            if gc_was_enabled:
                gc.enable()
    finally:
        if gc_was_enabled:
            gc.enable()
    cells = [
        BenchCell(s, m, t, error=errors[(s, m, t)]) if (s, m, t) in errors
        else BenchCell(s, m, t, tuple(times[(s, m, t)]), tuple(rates[(s, m, t)]))
        for s, m, t in keys
    ]
    env = {"hostname": platform.node(), "backend": config.backend.name, "timing": TIMING_SCOPE}
    return BenchReport(config, cells, env)


def _cell_text(cell: BenchCell) -> str:
    if cell.error:
        return f"error ({cell.error.split(':')[0]})"
    return f"{cell.mean_ms:.4f} {cell.win_rate_pct:.2f}%"


def emit_table(report: BenchReport, fmt: str = "markdown") -> bytes:
    cfg = report.config
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["attribute_set", "message", "trials", "mean_ms", "median_ms", "win_rate_pct", "error"])
        for c in report.cells:
            if c.error:
                w.writerow([c.attribute_set, c.message, c.trials, "", "", "", c.error])
            else:
                w.writerow([c.attribute_set, c.message, c.trials, f"{c.mean_ms:.4f}",
                            f"{round(c.median_ms, 4):.4f}", f"{c.win_rate_pct:.2f}", ""])
        return buf.getvalue().encode()
    if fmt != "markdown":
        raise InvalidParameter(f"unknown format {fmt!r}")
    columns = [(s, m) for m in cfg.messages for s in cfg.attribute_sets]
    lines = [
        f"backend: {report.environment['backend']}; {report.environment['timing']}; "
        f"{cfg.samples} samples per cell",
        "",
        "| Number of trials | " + " | ".join(f"{s} / {m}" for s, m in columns) + " |",
        "|---|" + "---|" * len(columns),
    ]
    for trials in cfg.trial_counts:
        row = [_cell_text(report.cell(s, m, trials)) for s, m in columns]
        lines.append(f"| {trials} | " + " | ".join(row) + " |")
    return ("\n".join(lines) + "\n").encode()
