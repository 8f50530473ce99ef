"""Scenario grids, manifests, result records and resumable execution.

A results directory holds one ``scn_<id>.csv`` record per finished
scenario plus ``manifest.csv``. A scenario is done exactly when its record
exists and validates, so any process (or external scheduler shard) can
resume from whatever is on disk.
"""

from __future__ import annotations

import csv
import io
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .core import METHODS, PATHS, Method, PathWeights, PowerResult, Scenario, total_effect
from .power import run_scenario

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.csv"
MERGED_NAME = "results.csv"
FAILURE_LOG = "failures.log"
MANIFEST_HEADER = ["scenario_id", "a", "b", "c_prime", "n", "status"]
RESULT_HEADER = [
    "scenario_id", "a", "b", "c_prime", "n", "c_total", "B", "R", "alpha",
    "master_seed", "method", "path", "repeats_completed", "significant_count",
    "power", "degenerate_resamples",
]


class ConfigInvalid(ValueError):
    pass


class ConfigMismatch(ValueError):
    """A result record disagrees with the manifest it is checked against."""


class InvalidRecord(ValueError):
    pass


def _dec(value, key: str) -> Decimal:
    try:
        d = Decimal(str(value).strip())
    except InvalidOperation:
        raise ConfigInvalid(f"{key}: not a number: {value!r}") from None
    if not d.is_finite():
        raise ConfigInvalid(f"{key}: must be finite")
    return d


@dataclass(frozen=True)
class GridConfig:
    """Ranges for each grid axis plus the simulation controls.

    Range bounds are kept as decimals so grid points are exact multiples of
    the step and survive a round trip through text unchanged.
    """

    a: Tuple[Decimal, Decimal, Decimal] = (Decimal("-0.5"), Decimal("0.5"), Decimal("0.1"))
    b: Tuple[Decimal, Decimal, Decimal] = (Decimal("-0.5"), Decimal("0.5"), Decimal("0.1"))
    c_prime: Tuple[Decimal, Decimal, Decimal] = (Decimal("-0.5"), Decimal("0.5"), Decimal("0.1"))
    n: Tuple[int, int, int] = (10, 200, 10)
    B: int = 1000
    R: int = 1000
    alpha: float = 0.05
    master_seed: int = 0
    methods: Tuple[Method, ...] = METHODS

    def __post_init__(self):
        for key in ("a", "b", "c_prime", "n"):
            lo, hi, step = getattr(self, key)
            if step <= 0:
                raise ConfigInvalid(f"{key}_step must be positive")
            if lo > hi:
                raise ConfigInvalid(f"{key}_min exceeds {key}_max")
        if self.n[0] < 4:
            raise ConfigInvalid("n_min must be at least 4")
        if self.B < 1 or self.R < 1:
            raise ConfigInvalid("B and R must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigInvalid("alpha must lie in (0, 1)")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigInvalid("master_seed must be a 64-bit unsigned integer")
        if not self.methods:
            raise ConfigInvalid("methods must name at least one interval method")
        # canonical order keeps record layout independent of how methods were listed
        methods = tuple(m for m in METHODS if m in set(Method(x) for x in self.methods))
        object.__setattr__(self, "methods", methods)

    @staticmethod
    def axis_values(lo, hi, step) -> list:
        count = int((hi - lo) // step) + 1
        return [lo + k * step for k in range(count)]

    def values(self, key: str) -> list:
        lo, hi, step = getattr(self, key)
        vals = self.axis_values(lo, hi, step)
        if key == "n":
            return [int(v) for v in vals]
        return [float(v) for v in vals]

    @property
    def n_scenarios(self) -> int:
        total = 1
        for key in ("n", "a", "b", "c_prime"):
            total *= len(self.values(key))
        return total

    def to_text(self) -> str:
        lines = []
        for key in ("a", "b", "c_prime", "n"):
            lo, hi, step = getattr(self, key)
            lines += [f"{key}_min={lo}", f"{key}_max={hi}", f"{key}_step={step}"]
        lines += [
            f"B={self.B}",
            f"R={self.R}",
            f"alpha={self.alpha!r}",
            f"master_seed={self.master_seed}",
            "methods=" + ",".join(m.value for m in self.methods),
        ]
        return "\n".join(lines) + "\n"


def parse_config(text: str) -> GridConfig:
    """Parse flat ``key=value`` text. Blank lines and ``#`` comments are skipped.

    Keys left out fall back to the defaults of :class:`GridConfig`.
    """
    raw: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        raw[key] = value

    base = GridConfig()
    kwargs = {}
    for axis in ("a", "b", "c_prime", "n"):
        parts = list(getattr(base, axis))
        for i, suffix in enumerate(("min", "max", "step")):
            key = f"{axis}_{suffix}"
            if key in raw:
                parts[i] = _dec(raw.pop(key), key)
        if axis == "n":
            if any(p != p.to_integral_value() for p in map(Decimal, parts)):
                raise ConfigInvalid("n range values must be integers")
            parts = [int(p) for p in parts]
        kwargs[axis] = tuple(parts)
    try:
        for key, conv in (("B", int), ("R", int), ("alpha", float), ("master_seed", int)):
            if key in raw:
                kwargs[key] = conv(raw.pop(key))
        if "methods" in raw:
            names = [s.strip().upper() for s in raw.pop("methods").split(",") if s.strip()]
            kwargs["methods"] = tuple(Method(s) for s in names)
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from None
    if raw:
        raise ConfigInvalid(f"unknown config keys: {sorted(raw)}")
    return GridConfig(**kwargs)


def load_config(path) -> GridConfig:
    return parse_config(Path(path).read_text())


@dataclass
class ManifestRow:
    scenario_id: int
    weights: PathWeights
    n: int
    status: str = "pending"


@dataclass
class Manifest:
    config: GridConfig
    rows: List[ManifestRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def __getitem__(self, scenario_id: int) -> ManifestRow:
        row = self.rows[scenario_id]
        if row.scenario_id != scenario_id:
            raise KeyError(scenario_id)
        return row

    def scenario(self, scenario_id: int) -> Scenario:
        row = self[scenario_id]
        cfg = self.config
        return Scenario(
            id=row.scenario_id,
            weights=row.weights,
            n=row.n,
            resamples=cfg.B,
            repeats=cfg.R,
            alpha=cfg.alpha,
            master_seed=cfg.master_seed,
            methods=cfg.methods,
        )

    def find(self, a: float, b: float, c_prime: float, n: int) -> int:
        for row in self.rows:
            w = row.weights
            if (w.a, w.b, w.c_prime, row.n) == (a, b, c_prime, n):
                return row.scenario_id
        raise KeyError((a, b, c_prime, n))

    def pending(self) -> List[int]:
        return [r.scenario_id for r in self.rows if r.status != "done"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for r in self.rows:
            w = r.weights
            writer.writerow([r.scenario_id, repr(w.a), repr(w.b), repr(w.c_prime), r.n, r.status])
        return buf.getvalue()

    def write(self, path) -> None:
        atomic_write(Path(path), self.to_csv())


def build_grid(cfg: GridConfig) -> Manifest:
    """Cartesian grid, row-major over (n, a, b, c_prime), ids from 0."""
    m = Manifest(cfg)
    sid = 0
    for n in cfg.values("n"):
        for a in cfg.values("a"):
            for b in cfg.values("b"):
                for c in cfg.values("c_prime"):
                    m.rows.append(ManifestRow(sid, PathWeights(a, b, c), n))
                    sid += 1
    return m


def atomic_write(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` so readers see either nothing or all of it."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def result_path(results_dir, scenario_id: int) -> Path:
    return Path(results_dir) / f"scn_{scenario_id}.csv"


def format_record(s: Scenario, result: PowerResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_HEADER)
    w = s.weights
    for method in s.methods:
        for path in PATHS:
            writer.writerow([
                s.id, repr(w.a), repr(w.b), repr(w.c_prime), s.n, repr(total_effect(w)),
                s.resamples, s.repeats, repr(s.alpha), s.master_seed,
                method.value, path, result.repeats_completed,
                result.significant_count[(method, path)],
                repr(result.power(method, path)), result.degenerate_resample_count,
            ])
    return buf.getvalue()


def write_record(results_dir, s: Scenario, result: PowerResult) -> Path:
    path = result_path(results_dir, s.id)
    atomic_write(path, format_record(s, result))
    return path


def read_record(path, scenario_id: Optional[int] = None) -> List[dict]:
    """Parse and schema-check one result record.

    Raises :class:`InvalidRecord` for anything malformed. Parameter agreement
    with a manifest is checked separately by :func:`check_record`.
    """
    try:
        text = Path(path).read_text()
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidRecord(str(exc)) from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header != RESULT_HEADER:
        raise InvalidRecord(f"{path}: bad header")
    rows = []
    seen = set()
    for raw in reader:
        if len(raw) != len(RESULT_HEADER):
            raise InvalidRecord(f"{path}: wrong field count")
        rec = dict(zip(RESULT_HEADER, raw))
        try:
            for key in ("scenario_id", "n", "B", "R", "master_seed", "repeats_completed",
                        "significant_count", "degenerate_resamples"):
                rec[key] = int(rec[key])
            for key in ("a", "b", "c_prime", "c_total", "alpha", "power"):
                rec[key] = float(rec[key])
            rec["method"] = Method(rec["method"])
        except ValueError as exc:
            raise InvalidRecord(f"{path}: {exc}") from None
        if rec["path"] not in PATHS:
            raise InvalidRecord(f"{path}: unknown path {rec['path']!r}")
        key = (rec["method"], rec["path"])
        if key in seen:
            raise InvalidRecord(f"{path}: duplicate row {key}")
        seen.add(key)
        done, hits = rec["repeats_completed"], rec["significant_count"]
        if not 0 <= hits <= done <= rec["R"]:
            raise InvalidRecord(f"{path}: inconsistent counts")
        if rec["power"] != (hits / done if done else 0.0):
            raise InvalidRecord(f"{path}: power disagrees with counts")
        rows.append(rec)
    if not rows:
        raise InvalidRecord(f"{path}: no rows")
    methods = {r["method"] for r in rows}
    if len(rows) != len(methods) * len(PATHS):
        raise InvalidRecord(f"{path}: incomplete method x path table")
    ids = {r["scenario_id"] for r in rows}
    if len(ids) != 1 or (scenario_id is not None and ids != {scenario_id}):
        raise InvalidRecord(f"{path}: scenario id mismatch")
    return rows


def check_record(rows: Sequence[dict], m: Manifest) -> None:
    """Raise :class:`ConfigMismatch` if a valid record disagrees with ``m``."""
    cfg = m.config
    sid = rows[0]["scenario_id"]
    if sid >= len(m.rows):
        raise ConfigMismatch(f"scenario {sid} is not in the manifest")
    mrow = m[sid]
    want = {
        "a": mrow.weights.a, "b": mrow.weights.b, "c_prime": mrow.weights.c_prime,
        "n": mrow.n, "B": cfg.B, "R": cfg.R, "alpha": cfg.alpha,
        "master_seed": cfg.master_seed,
    }
    for rec in rows:
        for key, value in want.items():
            if rec[key] != value:
                raise ConfigMismatch(
                    f"scenario {sid}: record has {key}={rec[key]!r}, manifest expects {value!r}"
                )
    if {r["method"] for r in rows} != set(cfg.methods):
        raise ConfigMismatch(f"scenario {sid}: record methods differ from config")


def scan_results(results_dir, m: Manifest) -> List[int]:
    """Refresh manifest status from disk and return the pending ids."""
    for row in m.rows:
        path = result_path(results_dir, row.scenario_id)
        if not path.exists():
            row.status = "pending"
            continue
        try:
            rows = read_record(path, row.scenario_id)
        except InvalidRecord as exc:
            log.warning("treating invalid record as missing: %s", exc)
            row.status = "pending"
            continue
        check_record(rows, m)
        row.status = "done"
    return m.pending()


@dataclass
class ExecutionReport:
    completed: List[int] = field(default_factory=list)
    failed: Dict[int, str] = field(default_factory=dict)
    targeted: List[int] = field(default_factory=list)
    skipped_by_cap: List[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failed and not self.skipped_by_cap


def _run_and_write(s: Scenario, results_dir: str) -> Tuple[int, Optional[str]]:
    try:
        result = run_scenario(s)
    except Exception as exc:  # recorded by the caller; one failure must not stop the sweep
        return s.id, f"{type(exc).__name__}: {exc}"
    write_record(results_dir, s, result)
    return s.id, None


def parse_shard(text: str) -> Tuple[int, int]:
    try:
        k, K = (int(v) for v in text.split("/"))
    except ValueError:
        raise ConfigInvalid(f"shard must look like k/K, got {text!r}") from None
    if not (K >= 1 and 0 <= k < K):
        raise ConfigInvalid("shard needs 0 <= k < K")
    return k, K


def execute(
    m: Manifest,
    results_dir,
    shard: Tuple[int, int] = (0, 1),
    workers: int = 1,
    cap: Optional[int] = None,
    ids: Optional[Iterable[int]] = None,
    manifest_path=None,
) -> ExecutionReport:
    """Run pending scenarios of shard ``k/K``.

    At most ``workers`` scenarios run at once and at most ``cap`` are
    started. Each scenario writes its own record atomically; this process
    alone updates the manifest file afterwards.
    """
    k, K = shard
    if not (K >= 1 and 0 <= k < K):
        raise ConfigInvalid("shard needs 0 <= k < K")
    if workers < 1:
        raise ConfigInvalid("workers must be positive")
    results_dir = Path(results_dir)
    results_dir.mkdir(parents=True, exist_ok=True)
    wanted = set(ids) if ids is not None else None
    targeted = [
        sid for sid in m.pending()
        if sid % K == k and (wanted is None or sid in wanted)
    ]
    report = ExecutionReport(targeted=targeted)
    batch = targeted if cap is None else targeted[:cap]
    report.skipped_by_cap = targeted[len(batch):]

    def finish(sid: int, error: Optional[str]) -> None:
        if error is None:
            m[sid].status = "done"
            report.completed.append(sid)
            log.info("scenario %d done", sid)
            if manifest_path is not None:
                m.write(manifest_path)
        else:
            report.failed[sid] = error
            log.error("scenario %d failed: %s", sid, error)
            with open(results_dir / FAILURE_LOG, "a") as fh:
                fh.write(f"{sid}\t{error}\n")

    scenarios = [m.scenario(sid) for sid in batch]
    if workers == 1:
        for s in scenarios:
            finish(*_run_and_write(s, str(results_dir)))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_and_write, s, str(results_dir)) for s in scenarios]
            for fut in as_completed(futures):
                finish(*fut.result())
    report.completed.sort()
    return report


def resume(
    results_dir,
    m: Manifest,
    shard: Tuple[int, int] = (0, 1),
    workers: int = 1,
    cap: Optional[int] = None,
    manifest_path=None,
) -> ExecutionReport:
    scan_results(results_dir, m)
    if manifest_path is not None:
        m.write(manifest_path)
    return execute(m, results_dir, shard, workers, cap, manifest_path=manifest_path)


def _record_paths(results_dir) -> List[Tuple[int, Path]]:
    out = []
    for path in Path(results_dir).glob("scn_*.csv"):
        stem = path.stem[len("scn_"):]
        if stem.isdigit():
            out.append((int(stem), path))
    return sorted(out)


def merge_results(results_dir, out_path, m: Optional[Manifest] = None) -> int:
    """Concatenate every valid record, ordered by scenario id, into one CSV.

    Returns the number of scenarios merged.
    """
    found = []
    for sid, path in _record_paths(results_dir):
        try:
            rows = read_record(path, sid)
        except InvalidRecord as exc:
            log.warning("skipping invalid record: %s", exc)
            continue
        if m is not None:
            check_record(rows, m)
        found.append(sid)
    parts = [",".join(RESULT_HEADER) + "\n"]
    for sid in found:
        body = result_path(results_dir, sid).read_text().split("\n", 1)[1]
        parts.append(body)
    atomic_write(Path(out_path), "".join(parts))
    return len(found)


def load_results(path) -> List[dict]:
    """Load a merged ``results.csv`` (or a directory of records) as typed rows."""
    path = Path(path)
    if path.is_dir():
        merged = path / MERGED_NAME
        if merged.exists():
            return load_results(merged)
        rows = []
        for sid, rec in _record_paths(path):
            try:
                rows.extend(read_record(rec, sid))
            except InvalidRecord as exc:
                log.warning("skipping invalid record: %s", exc)
        return rows
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_HEADER:
            raise InvalidRecord(f"{path}: bad header")
        for rec in reader:
            for key in ("scenario_id", "n", "B", "R", "master_seed", "repeats_completed",
                        "significant_count", "degenerate_resamples"):
                rec[key] = int(rec[key])
            for key in ("a", "b", "c_prime", "c_total", "alpha", "power"):
                rec[key] = float(rec[key])
            rec["method"] = Method(rec["method"])
            rows.append(rec)
    return rows
