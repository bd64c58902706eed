"""Parsing, synthesis and summary statistics for CI test histories.

Three sources of histories are supported:

* the canonical CSV format (``cycle_id,test_id,verdict,duration_s``),
* arbitrary delimited files described by a :class:`ColumnMapping` (presets
  for the public ABB and Google datasets ship under ``testprio/presets``),
* a seeded synthetic generator useful for benchmarks and fixtures.
"""

from __future__ import annotations

import csv
import io
import logging
import sys
from array import array
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from . import config as cfgmod
from .domain import Cycle, TestHistory, validate_history
from .errors import (
    ConfigError,
    InvalidSpec,
    MalformedRow,
    MappingMismatch,
    UnknownVerdictToken,
)

logger = logging.getLogger(__name__)

CANONICAL_HEADER = ("cycle_id", "test_id", "verdict", "duration_s")

# Verdict roles a source token can map to.  Drop removes the row entirely:
# coercing inconclusive runs to a pass would silently dilute failure rates.
_ROLES = ("pass", "fail", "drop")


@dataclass(frozen=True)
class ColumnMapping:
    """Declarative description of an external results file.

    ``cycle_col`` etc. name header columns when ``has_header`` is true,
    otherwise they are 0-based column indices.  ``verdict_map`` sends every
    source token to one of ``pass|fail|drop``.  ``duration_unit_s`` converts
    recorded durations to seconds; ``clamp_min_duration_s`` (optional) lifts
    zero/negative durations up to a floor so files with truncated timings
    still satisfy the strictly-positive-duration invariant.
    """

    cycle_col: str
    test_col: str
    verdict_col: str
    duration_col: str
    verdict_map: dict[str, str]
    delimiter: str = ","
    duration_unit_s: float = 1.0
    has_header: bool = True
    clamp_min_duration_s: float | None = None

    def __post_init__(self) -> None:
        for token, role in self.verdict_map.items():
            if role not in _ROLES:
                raise ConfigError(
                    f"verdict_map.{token}: role must be one of {_ROLES}, got {role!r}"
                )
        if not self.verdict_map:
            raise ConfigError("verdict_map must declare at least one token")

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "ColumnMapping":
        clamp = cfg.get("clamp_min_duration_s")
        return cls(
            cycle_col=cfg.get("cycle_col", ""),
            test_col=cfg.get("test_col", ""),
            verdict_col=cfg.get("verdict_col", ""),
            duration_col=cfg.get("duration_col", ""),
            verdict_map={k: v.lower() for k, v in cfgmod.subkeys(cfg, "verdict_map").items()},
            delimiter=cfg.get("delimiter", ","),
            duration_unit_s=cfgmod.get_float(cfg, "duration_unit_s", 1.0),
            has_header=cfgmod.get_bool(cfg, "has_header", True),
            clamp_min_duration_s=float(clamp) if clamp is not None else None,
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "ColumnMapping":
        mapping = cls.from_config(cfgmod.load_config(path))
        missing = [
            name
            for name, val in (
                ("cycle_col", mapping.cycle_col),
                ("test_col", mapping.test_col),
                ("verdict_col", mapping.verdict_col),
                ("duration_col", mapping.duration_col),
            )
            if not val
        ]
        if missing:
            raise ConfigError(f"{path}: missing required keys: {', '.join(missing)}")
        return mapping


def preset_mapping_path(name: str) -> Path:
    """Path of a bundled mapping preset (``abb`` or ``google``)."""
    path = Path(__file__).parent / "presets" / f"{name}.map"
    if not path.exists():
        raise ConfigError(f"no bundled mapping preset named {name!r}")
    return path


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic history generator.

    A seeded subset of tests is failure-prone (each test independently with
    probability ``base_failure_prob``).  Prone tests follow a two-state
    pass/fail Markov chain: P(fail | failed previous cycle) = ``persistence``
    and P(fail | passed previous cycle) = ``flip_prob``; setting the two
    equal yields independent per-cycle failures.  Healthy tests pass except
    for rare sporadic failures at ``noise_failure_prob`` per cycle.
    Durations are drawn uniformly in ``[duration_min_s, duration_max_s]``
    once per test and stay fixed.  If ``regime_shift_cycle`` is set, the
    failure roles (prone flags and current chain states) rotate across test
    ids by ``n_tests // 2`` at that cycle, so previously failing tests go
    quiet and a fresh set takes over - old history becomes misleading.
    ``regime_shift_period`` instead rotates the roles every that many
    cycles, modeling a codebase whose hot spots keep moving.
    """

    n_tests: int
    n_cycles: int
    base_failure_prob: float
    persistence: float = 0.9
    flip_prob: float = 0.05
    duration_min_s: float = 0.5
    duration_max_s: float = 2.0
    regime_shift_cycle: int | None = None
    regime_shift_period: int | None = None
    noise_failure_prob: float = 0.0

    def __post_init__(self) -> None:
        if self.n_tests <= 0 or self.n_cycles <= 0:
            raise InvalidSpec("n_tests and n_cycles must be positive")
        for name in ("base_failure_prob", "persistence", "flip_prob",
                     "noise_failure_prob"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise InvalidSpec(f"{name} must be in [0, 1], got {p}")
        if not (0.0 < self.duration_min_s <= self.duration_max_s):
            raise InvalidSpec("durations must satisfy 0 < min <= max")
        if self.regime_shift_cycle is not None and not (
            0 < self.regime_shift_cycle < self.n_cycles
        ):
            raise InvalidSpec("regime_shift_cycle must lie strictly inside the history")
        if self.regime_shift_period is not None and self.regime_shift_period <= 0:
            raise InvalidSpec("regime_shift_period must be positive")

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "SyntheticSpec":
        shift = cfg.get("regime_shift_cycle")
        return cls(
            n_tests=cfgmod.get_int(cfg, "n_tests"),
            n_cycles=cfgmod.get_int(cfg, "n_cycles"),
            base_failure_prob=cfgmod.get_float(cfg, "base_failure_prob"),
            persistence=cfgmod.get_float(cfg, "persistence", 0.9),
            flip_prob=cfgmod.get_float(cfg, "flip_prob", 0.05),
            duration_min_s=cfgmod.get_float(cfg, "duration_min_s", 0.5),
            duration_max_s=cfgmod.get_float(cfg, "duration_max_s", 2.0),
            regime_shift_cycle=int(shift) if shift is not None else None,
            regime_shift_period=(
                int(cfg["regime_shift_period"]) if "regime_shift_period" in cfg else None
            ),
            noise_failure_prob=cfgmod.get_float(cfg, "noise_failure_prob", 0.0),
        )


@dataclass(frozen=True)
class DatasetStats:
    n_tests: int
    n_executions: int
    n_cycles: int
    failed_execution_fraction: float

    def as_dict(self) -> dict:
        return {
            "n_tests": self.n_tests,
            "n_executions": self.n_executions,
            "n_cycles": self.n_cycles,
            "failed_execution_fraction": self.failed_execution_fraction,
        }


def _as_text(stream: bytes | str | IO) -> IO[str]:
    if isinstance(stream, bytes):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8")


class _CycleBuilder:
    """Accumulates rows into flat columns, then groups them into cycles.

    Flat ``array`` storage keeps multi-million-row datasets at a few hundred
    megabytes; grouping happens once at the end via a stable sort on the
    cycle id column (row order within a cycle is preserved).
    """

    def __init__(self, keep_last_duplicate: bool = False):
        self._cycle_ids = array("q")
        self._failed = array("b")
        self._durations = array("d")
        self._test_ids: list[str] = []
        self.keep_last_duplicate = keep_last_duplicate
        self.duplicates = 0

    def add(self, cycle_id: int, test_id: str, failed: bool, duration_s: float) -> None:
        self._cycle_ids.append(cycle_id)
        self._failed.append(failed)
        self._durations.append(duration_s)
        self._test_ids.append(test_id)

    def build(self) -> list[Cycle]:
        cids = np.asarray(self._cycle_ids, dtype=np.int64)
        failed = np.asarray(self._failed, dtype=bool)
        durations = np.asarray(self._durations, dtype=np.float64)
        if len(cids) == 0:
            return []
        order = np.argsort(cids, kind="stable")
        sorted_cids = cids[order]
        starts = np.flatnonzero(np.diff(sorted_cids)) + 1
        bounds = np.concatenate(([0], starts, [len(cids)]))

        cycles = []
        for k in range(len(bounds) - 1):
            rows = order[bounds[k] : bounds[k + 1]]
            cid = int(sorted_cids[bounds[k]])
            if self.keep_last_duplicate:
                last: dict[str, int] = {}
                for r in rows:
                    tid = self._test_ids[r]
                    if tid in last:
                        self.duplicates += 1
                    last[tid] = int(r)  # insertion order keeps first position
                keep = np.fromiter(last.values(), dtype=np.int64, count=len(last))
                ids = tuple(last.keys())
                cycles.append(Cycle(cid, ids, failed[keep], durations[keep]))
            else:
                ids = tuple(self._test_ids[r] for r in rows)
                cycles.append(Cycle(cid, ids, failed[rows], durations[rows]))
        return cycles


def parse_canonical(stream: bytes | str | IO) -> TestHistory:
    """Parse the canonical CSV format into a validated history.

    Header must be exactly ``cycle_id,test_id,verdict,duration_s``; verdict
    tokens are ``pass``/``fail`` (case-insensitive).
    """
    text = _as_text(stream)
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise MalformedRow(1, "empty input") from None
    if tuple(h.strip() for h in header) != CANONICAL_HEADER:
        raise MalformedRow(1, f"expected header {','.join(CANONICAL_HEADER)}")

    builder = _CycleBuilder(keep_last_duplicate=False)
    for line_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4:
            raise MalformedRow(line_no, f"expected 4 fields, got {len(row)}")
        cid_s, test_id, verdict_s, dur_s = row
        try:
            cid = int(cid_s)
        except ValueError:
            raise MalformedRow(line_no, f"bad cycle_id {cid_s!r}") from None
        token = verdict_s.strip().lower()
        if token == "fail":
            failed = True
        elif token == "pass":
            failed = False
        else:
            raise UnknownVerdictToken(line_no, verdict_s.strip())
        try:
            duration = float(dur_s)
        except ValueError:
            raise MalformedRow(line_no, f"bad duration {dur_s!r}") from None
        builder.add(cid, sys.intern(test_id), failed, duration)

    return validate_history(builder.build())


def parse_external(stream: bytes | str | IO, mapping: ColumnMapping) -> TestHistory:
    """Parse an external results file driven by a :class:`ColumnMapping`.

    Rows whose verdict token maps to ``drop`` are excluded.  Duplicate
    (cycle, test) rows keep the last occurrence; the count is logged.
    """
    text = _as_text(stream)
    reader = csv.reader(text, delimiter=mapping.delimiter)

    if mapping.has_header:
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedRow(1, "empty input") from None
        positions = {}
        for role, col in (
            ("cycle", mapping.cycle_col),
            ("test", mapping.test_col),
            ("verdict", mapping.verdict_col),
            ("duration", mapping.duration_col),
        ):
            if col not in header:
                raise MappingMismatch(
                    f"mapped {role} column {col!r} not found in header {header}"
                )
            positions[role] = header.index(col)
        first_row = 2
    else:
        try:
            positions = {
                "cycle": int(mapping.cycle_col),
                "test": int(mapping.test_col),
                "verdict": int(mapping.verdict_col),
                "duration": int(mapping.duration_col),
            }
        except ValueError as exc:
            raise MappingMismatch(
                "columns must be integer indices when has_header is false"
            ) from exc
        first_row = 1

    needed = max(positions.values()) + 1
    builder = _CycleBuilder(keep_last_duplicate=True)
    for line_no, row in enumerate(reader, start=first_row):
        if not row:
            continue
        if len(row) < needed:
            raise MalformedRow(line_no, f"expected >= {needed} fields, got {len(row)}")
        token = row[positions["verdict"]].strip()
        role = mapping.verdict_map.get(token)
        if role is None:
            raise UnknownVerdictToken(line_no, token)
        if role == "drop":
            continue
        try:
            cid = int(row[positions["cycle"]])
        except ValueError:
            raise MalformedRow(line_no, f"bad cycle id {row[positions['cycle']]!r}") from None
        try:
            duration = float(row[positions["duration"]]) * mapping.duration_unit_s
        except ValueError:
            raise MalformedRow(
                line_no, f"bad duration {row[positions['duration']]!r}"
            ) from None
        if mapping.clamp_min_duration_s is not None:
            duration = max(duration, mapping.clamp_min_duration_s)
        builder.add(cid, sys.intern(row[positions["test"]]), role == "fail", duration)

    cycles = builder.build()
    if builder.duplicates:
        logger.warning("kept last occurrence of %d duplicate (cycle, test) rows",
                       builder.duplicates)
    return validate_history(cycles)


def generate_synthetic(spec: SyntheticSpec, seed: int) -> TestHistory:
    """Deterministic synthetic history: a pure function of ``(spec, seed)``.

    Draw order (fixed so results never shift between runs): per-test
    durations, then prone roles, then the initial chain state, then one
    uniform per test per cycle.
    """
    rng = np.random.default_rng(seed)
    n, m = spec.n_tests, spec.n_cycles
    test_ids = tuple(f"T{i:04d}" for i in range(n))

    durations = rng.uniform(spec.duration_min_s, spec.duration_max_s, size=n)
    prone = rng.random(n) < spec.base_failure_prob

    # Start prone chains at their stationary fail probability so short
    # histories are not biased toward an all-pass prefix.
    denom = spec.flip_prob + (1.0 - spec.persistence)
    p0 = spec.flip_prob / denom if denom > 0 else 1.0
    failing = prone & (rng.random(n) < p0)

    cycles = []
    for c in range(m):
        shifts_now = (
            spec.regime_shift_cycle is not None and c == spec.regime_shift_cycle
        ) or (
            spec.regime_shift_period is not None
            and c > 0 and c % spec.regime_shift_period == 0
        )
        if shifts_now:
            shift = n // 2
            prone = np.roll(prone, shift)
            failing = np.roll(failing, shift)
        u = rng.random(n)
        p_fail = np.where(
            prone,
            np.where(failing, spec.persistence, spec.flip_prob),
            spec.noise_failure_prob,
        )
        failing = u < p_fail
        cycles.append(Cycle(c, test_ids, failing.copy(), durations.copy()))

    return validate_history(cycles)


def dataset_stats(h: TestHistory) -> DatasetStats:
    n_exec = 0
    n_fail = 0
    for c in h.cycles:
        n_exec += len(c)
        n_fail += int(c.failed.sum())
    return DatasetStats(
        n_tests=h.n_tests,
        n_executions=n_exec,
        n_cycles=h.n_cycles,
        failed_execution_fraction=(n_fail / n_exec) if n_exec else 0.0,
    )
