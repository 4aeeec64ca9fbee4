"""Seeded experiments, theorem diagnostics and result persistence.

A run is a pure function of its :class:`ExperimentConfig`. Per-replica seeds
are derived from the master seed and the replica index, aggregation folds
replicas in index order, and the run id is a hash of the configuration and
the package version, so repeated runs write byte-identical files.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import __version__
from .errors import (
    ConfigError,
    DubucViolated,
    InsufficientSamples,
    InvalidOption,
    MissingInverseMoment,
)
from .laws import (
    ExpansionConstants,
    OffspringLaw,
    ResistanceLaw,
    dubuc_condition,
    expansion_constants,
    offspring_from_dict,
    resistance_from_dict,
    w_second_moment,
)
from .oracles import (
    effective_resistance_laplacian,
    random_walk_conductance,
    series_parallel_reduce,
)
from .pool import (
    c0_consistency,
    estimate_c0,
    expansion_offset,
    fit_log_correction,
    lambda_rescaled_trajectory,
    moment_trajectory,
)
from .rng import derive_py
from .tree import (
    DEFAULT_NODE_BUDGET,
    TreeBatch,
    export_tree,
    sample_batch,
    tree_seeds,
)

Z95 = 1.959963984540054
MIN_DIAGNOSTIC_TREES = 300
MODES = ("tree", "pool", "oracle", "lambda")
CSV_COLUMNS = ("run_id", "mode", "n", "observable", "statistic", "value")

# ---------------------------------------------------------------------------
# configuration

_SCHEMA: dict[str, Any] = {
    "name": str,
    "mode": str,
    "seed": int,
    "offspring": dict,
    "resistance": dict,
    "tree": {
        "depths": list,
        "trees": int,
        "fluct_truncation": int,
        "node_budget": float,
        "inverse_w": {"depth": int, "trees": int},
        "variance_band": list,
    },
    "pool": {
        "size": int,
        "replicates": int,
        "n_max": int,
        "lambda": float,
        "c0_cutoff": int,
        "fit": list,
        "consistency": list,
        "budget": float,
    },
    "oracle": {"trees": int, "max_depth": int, "walk_trees": int, "walk_trials": int},
    "output": {"dir": str},
}


def _check_section(data: Mapping, schema: Mapping, path: str) -> None:
    for key, value in data.items():
        where = f"{path}.{key}" if path else key
        if key not in schema:
            raise ConfigError(f"unknown config field {where!r}")
        kind = schema[key]
        if isinstance(kind, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config field {where!r} must be an object")
            _check_section(value, kind, where)
        elif value is None:
            continue
        elif kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config field {where!r} must be a number")
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config field {where!r} must be an integer")
        elif not isinstance(value, kind):
            raise ConfigError(f"config field {where!r} must be of type {kind.__name__}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; see ``docs/config.md`` for the schema."""

    data: dict

    def __post_init__(self):
        d = self.data
        _check_section(d, _SCHEMA, "")
        if "seed" not in d:
            raise ConfigError("config field 'seed' is required (no wall-clock seeding)")
        if d["seed"] < 0 or d["seed"] >= 2**64:
            raise ConfigError("config field 'seed' must be an unsigned 64-bit integer")
        if d.get("mode", "tree") not in MODES:
            raise ConfigError(f"config field 'mode' must be one of {MODES}")
        for key in ("offspring", "resistance"):
            if key not in d:
                raise ConfigError(f"config field {key!r} is required")
        # build the laws eagerly so that errors surface at load time
        self.offspring
        self.resistance
        self._check_counts()

    def _check_counts(self) -> None:
        mode = self.mode
        if mode == "tree":
            t = self.section("tree")
            depths = t.get("depths")
            if not depths or any(not isinstance(n, int) or n < 1 for n in depths):
                raise ConfigError("config field 'tree.depths' must be a nonempty list of positive integers")
            if t.get("trees", 0) < 1:
                raise ConfigError("config field 'tree.trees' must be positive")
        elif mode in ("pool", "lambda"):
            p = self.section("pool")
            for key in ("size", "replicates", "n_max"):
                if not p.get(key) or p[key] < 1:
                    raise ConfigError(f"config field 'pool.{key}' must be positive")
            if mode == "lambda" and p.get("lambda") is None:
                raise ConfigError("config field 'pool.lambda' is required in lambda mode")
        elif mode == "oracle":
            o = self.section("oracle")
            for key in ("trees", "max_depth"):
                if not o.get(key) or o[key] < 1:
                    raise ConfigError(f"config field 'oracle.{key}' must be positive")

    @classmethod
    def from_json(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parse JSON text; dotted ``overrides`` are applied before validation."""
        return cls(_apply_overrides(parse_config_json(text), overrides))

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        return cls(_apply_overrides(read_config_data(path), overrides))

    def with_overrides(self, **overrides) -> "ExperimentConfig":
        """Copy with dotted-path overrides, e.g. ``{"pool.size": 1000}``."""
        return ExperimentConfig(_apply_overrides(self.data, overrides))

    @property
    def mode(self) -> str:
        return self.data.get("mode", "tree")

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def offspring(self) -> OffspringLaw:
        return offspring_from_dict(self.data["offspring"])

    @property
    def resistance(self) -> ResistanceLaw:
        return resistance_from_dict(self.data["resistance"])

    def section(self, name: str) -> dict:
        return dict(self.data.get(name) or {})

    @property
    def output_dir(self) -> Path:
        return Path(self.section("output").get("dir", "out"))

    def canonical(self) -> str:
        """Canonical JSON of everything that affects results (output paths excluded)."""
        data = {k: v for k, v in self.data.items() if k != "output"}
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    @property
    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    @property
    def run_id(self) -> str:
        return hashlib.sha256(f"{self.canonical()}|{__version__}".encode()).hexdigest()[:16]


def _apply_overrides(data: Mapping, overrides: Mapping) -> dict:
    data = copy.deepcopy(dict(data))
    for dotted, value in overrides.items():
        if value is None:
            continue
        *head, last = dotted.split(".")
        node = data
        for part in head:
            node = node.setdefault(part, {})
        node[last] = value
    return data


def parse_config_json(text: str) -> dict:
    """Decode a config object, reporting the line and column of syntax errors."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def read_config_data(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_json(text)


def load_laws(path) -> tuple[OffspringLaw, ResistanceLaw]:
    """Read only the law pair of a config file, without mode-specific checks."""
    data = read_config_data(path)
    _check_section(data, _SCHEMA, "")
    for key in ("offspring", "resistance"):
        if key not in data:
            raise ConfigError(f"config field {key!r} is required")
    return offspring_from_dict(data["offspring"]), resistance_from_dict(data["resistance"])


# ---------------------------------------------------------------------------
# results


def _plain(value):
    """Convert numpy scalars and arrays to JSON-ready Python values (NaN -> None)."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def summarize(values) -> dict:
    """Mean, variance, standard error and normal 95% interval of a sample."""
    v = np.asarray(values, dtype=np.float64)
    k = v.size
    mean = float(v.mean()) if k else math.nan
    var = float(v.var(ddof=1)) if k > 1 else math.nan
    se = math.sqrt(var / k) if k > 1 else math.nan
    return {
        "mean": mean,
        "variance": var,
        "se": se,
        "ci95_lo": mean - Z95 * se,
        "ci95_hi": mean + Z95 * se,
        "count": k,
    }


@dataclass
class ResultRecord:
    """Everything a run produced.

    ``table`` holds ``(n, observable, statistic, value)`` rows; ``n`` is None
    for run-level quantities. ``derived`` carries structured diagnostics.
    """

    run_id: str
    mode: str
    config: dict
    provenance: dict
    table: list = field(default_factory=list)
    derived: dict = field(default_factory=dict)

    def add(self, n, observable: str, statistic: str, value) -> None:
        self.table.append((None if n is None else int(n), observable, statistic, _plain(value)))

    def add_summary(self, n, observable: str, values) -> dict:
        s = summarize(values)
        for key, val in s.items():
            self.add(n, observable, key, val)
        return s

    def value(self, n, observable: str, statistic: str):
        for row in self.table:
            if row[0] == n and row[1] == observable and row[2] == statistic:
                return row[3]
        raise KeyError((n, observable, statistic))

    def series(self, observable: str, statistic: str) -> tuple[np.ndarray, np.ndarray]:
        rows = [(r[0], r[3]) for r in self.table if r[1] == observable and r[2] == statistic and r[0] is not None]
        n = np.array([r[0] for r in rows], dtype=np.int64)
        v = np.array([np.nan if r[1] is None else r[1] for r in rows], dtype=np.float64)
        return n, v

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "mode": self.mode,
            "provenance": _plain(self.provenance),
            "config": _plain(self.config),
            "table": [
                {"n": n, "observable": o, "statistic": s, "value": _plain(v)} for n, o, s, v in self.table
            ],
            "derived": _plain(self.derived),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, d: Mapping) -> "ResultRecord":
        table = [(r["n"], r["observable"], r["statistic"], r["value"]) for r in d["table"]]
        return cls(d["run_id"], d["mode"], d["config"], d["provenance"], table, d.get("derived", {}))

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        return cls.from_dict(json.loads(text))

    def csv_rows(self) -> list[tuple]:
        rows = [(self.run_id, self.mode, n, o, s, v) for n, o, s, v in self.table]
        for path, v in _flatten(self.derived):
            observable, _, statistic = path.rpartition(".")
            rows.append((self.run_id, self.mode, None, observable or statistic, statistic, v))
        return rows

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.csv_rows():
            w.writerow([_csv_cell(c) for c in row])
        return buf.getvalue()


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, (list, tuple, np.ndarray)):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value)) if math.isfinite(value) else ""
    return str(value)


def write_result(record: ResultRecord, config: ExperimentConfig, out_dir=None) -> Path:
    """Write ``config.json``, ``result.json`` and ``result.csv`` under ``out_dir/run_id``.

    An existing run directory is only accepted if its files are identical to
    the ones being written; results are never silently replaced.
    """
    base = Path(out_dir) if out_dir is not None else config.output_dir
    target = base / record.run_id
    target.mkdir(parents=True, exist_ok=True)
    files = {
        "config.json": json.dumps(config.data, indent=1, sort_keys=True) + "\n",
        "result.json": record.to_json(),
        "result.csv": record.to_csv(),
    }
    for name, text in files.items():
        path = target / name
        if path.exists():
            if path.read_text() != text:
                raise ConfigError(f"{path} exists with different content; refusing to overwrite")
            continue
        path.write_text(text)
    return target


def load_result(path) -> ResultRecord:
    path = Path(path)
    if path.is_dir():
        path = path / "result.json"
    return ResultRecord.from_json(path.read_text())


# ---------------------------------------------------------------------------
# diagnostics


def _normalized(batch: TreeBatch) -> np.ndarray:
    """Plug-in ``{C_n} = C_n / mean(C_n)`` over the batch."""
    return batch.c_n / batch.c_n.mean()


def theorem1_diagnostic(batches: Sequence[TreeBatch], min_trees: int = MIN_DIAGNOSTIC_TREES) -> list[dict]:
    """Mean absolute deviation and correlation between ``{C_n}`` and ``W_hat`` per depth.

    Raises
    ------
    InsufficientSamples
        If a depth has fewer than ``min_trees`` trees.
    """
    out = []
    for b in sorted(batches, key=lambda b: b.depth):
        if len(b) < min_trees:
            raise InsufficientSamples(f"depth {b.depth}: {len(b)} trees, need {min_trees}")
        norm = _normalized(b)
        w = b.w_hat
        degenerate = bool(np.ptp(norm) <= 1e-12 or np.ptp(w) <= 1e-12)
        corr = math.nan if degenerate else float(np.corrcoef(norm, w)[0, 1])
        out.append(
            {
                "n": b.depth,
                "mad": float(np.mean(np.abs(norm - w))),
                "corr": corr,
                "degenerate": degenerate,
                "trees": len(b),
            }
        )
    return out


@dataclass(frozen=True)
class InverseWEstimate:
    value: float
    se: float
    depth: int
    trees: int
    note: str = (
        "W_K = E[W | F_K], so by Jensen 1/W_K underestimates E[1/W]; "
        "1/W can have infinite variance, so se is indicative only"
    )


def estimate_inverse_w(off: OffspringLaw, depth: int, trees: int, seed: int) -> InverseWEstimate:
    """Estimate ``E[1/W]`` by the mean of ``m**K / #T_K`` over independent trees.

    Only generation sizes are simulated: the next size is a multinomial split
    of the current one over the offspring support.

    Raises
    ------
    DubucViolated
        If ``p1 * m >= 1``, where ``E[1/W]`` is infinite.
    """
    if not dubuc_condition(off):
        raise DubucViolated(f"p1*m = {off.p1 * off.m:.6g} >= 1, so E[1/W] is infinite")
    if depth < 15:
        raise InvalidOption("estimate_inverse_w needs depth K >= 15")
    if trees < 2:
        raise InvalidOption("estimate_inverse_w needs at least 2 trees")
    if off.is_deterministic:
        return InverseWEstimate(1.0, 0.0, int(depth), int(trees))
    rng = np.random.default_rng([int(seed) & (2**64 - 1), 0x1E])
    support = np.asarray(off.support, dtype=np.int64)
    probs = np.asarray(off.probs)
    z = np.ones(trees, dtype=np.int64)
    for _ in range(depth):
        z = rng.multinomial(z, probs) @ support
    inv = off.m**depth / z.astype(np.float64)
    return InverseWEstimate(float(inv.mean()), float(inv.std(ddof=1) / math.sqrt(trees)), int(depth), int(trees))


def _resistance_rows(batches: Sequence[TreeBatch], consts: ExpansionConstants, inv_w: InverseWEstimate) -> list[dict]:
    target = consts.c1 * inv_w.value
    rows = []
    for b in sorted(batches, key=lambda b: b.depth):
        n = b.depth
        s = summarize(b.r_n / n)
        rows.append(
            {
                "n": n,
                "mean": s["mean"],
                "se": s["se"],
                "ci95_lo": s["ci95_lo"],
                "ci95_hi": s["ci95_hi"],
                "target": target,
                "gap": abs(s["mean"] - target) / target,
                "predicted_bias": consts.c4 * math.log(n) / (consts.c1 * n),
            }
        )
    return rows


def resistance_limit_check(
    off: OffspringLaw,
    res: ResistanceLaw,
    depths: Sequence[int],
    trees: int,
    seed: int,
    inverse_w_depth: int = 25,
    inverse_w_trees: int = 20_000,
    node_budget: float = DEFAULT_NODE_BUDGET,
) -> dict:
    """Compare ``R_n / n`` with its limit ``c1 E[1/W]`` at each depth.

    Returns the target, the inverse-moment estimate and one row per depth
    with the sample mean, its interval, the relative gap and the finite-n
    bias scale ``c4 log n / (c1 n)``.
    """
    if not dubuc_condition(off):
        raise DubucViolated(f"p1*m = {off.p1 * off.m:.6g} >= 1, so E[1/W] is infinite")
    consts = expansion_constants(off, res)
    inv_w = estimate_inverse_w(off, inverse_w_depth, inverse_w_trees, seed)
    seeds = tree_seeds(seed, trees)
    batches = [sample_batch(off, res, n, seeds, node_budget=node_budget) for n in depths]
    return {
        "inverse_w": inv_w.__dict__,
        "target": consts.c1 * inv_w.value,
        "rows": _resistance_rows(batches, consts, inv_w),
    }


def theorem4_variance_check(
    batch: TreeBatch,
    min_trees: int = MIN_DIAGNOSTIC_TREES,
    band: tuple[float, float] = (0.6, 1.67),
) -> dict:
    """Compare ``n Y_n = n ({C_n} - W_hat)`` with the truncated fluctuation series.

    Checks that the mean of ``n Y_n`` is within 3 standard errors of 0 and
    that ``var(n Y_n) / var(series)`` lies in ``band``. Because ``{C_n}`` is
    normalized by the sample mean, the mean of ``n Y_n`` equals
    ``n (1 - mean W_hat)``; its delta-method standard error
    ``n sd(W_hat) / sqrt(T)`` is reported as ``se``. The spread of ``n Y_n``
    alone, which ignores the normalizer, is kept as ``se_fixed_normalizer``.
    """
    if batch.fluct_series is None:
        raise InvalidOption("batch was sampled without a fluctuation truncation")
    if len(batch) < min_trees:
        raise InsufficientSamples(f"{len(batch)} trees, need {min_trees}")
    n = batch.depth
    ny = n * (_normalized(batch) - batch.w_hat)
    series = batch.fluct_series
    s = summarize(ny)
    var_ny = s["variance"]
    var_series = float(series.var(ddof=1))
    degenerate = var_series <= 1e-300 and var_ny <= 1e-24
    ratio = math.nan if degenerate or var_series == 0 else var_ny / var_series
    # with the plug-in normalizer the mean of n Y_n is n (1 - mean W_hat), so
    # its standard error is carried by W_hat, not by the spread of n Y_n
    se = n * float(batch.w_hat.std(ddof=1)) / math.sqrt(len(batch))
    mean_ok = abs(s["mean"]) <= 3 * se if se > 0 else abs(s["mean"]) <= 1e-9
    return {
        "n": n,
        "mean": s["mean"],
        "se": se,
        "se_fixed_normalizer": s["se"],
        "mean_ok": bool(mean_ok),
        "var_ny": var_ny,
        "var_series": var_series,
        "ratio": ratio,
        "ratio_ok": bool(degenerate or band[0] <= ratio <= band[1]),
        "band": list(band),
        "series_mean": float(series.mean()),
        "series_se": float(series.std(ddof=1) / math.sqrt(len(series))),
        "corr": math.nan if degenerate else float(np.corrcoef(ny, series)[0, 1]),
        "degenerate": bool(degenerate),
    }


# ---------------------------------------------------------------------------
# runners


def _provenance(config: ExperimentConfig) -> dict:
    return {"config_hash": config.config_hash, "seed": config.seed, "code_version": __version__}


def _new_record(config: ExperimentConfig) -> ResultRecord:
    return ResultRecord(config.run_id, config.mode, copy.deepcopy(config.data), _provenance(config))


def _run_tree(config: ExperimentConfig, rec: ResultRecord) -> None:
    off, res = config.offspring, config.resistance
    t = config.section("tree")
    depths = sorted(set(t["depths"]))
    trees = int(t["trees"])
    L = t.get("fluct_truncation")
    budget = float(t.get("node_budget") or DEFAULT_NODE_BUDGET)
    consts = expansion_constants(off, res)
    seeds = tree_seeds(config.seed, trees)
    batches = []
    for n in depths:
        use_L = L if (L is not None and L < n) else None
        b = sample_batch(off, res, n, seeds, use_L, consts.c1 if use_L else None, budget)
        batches.append(b)
        rec.add_summary(n, "c_n", b.c_n)
        rec.add_summary(n, "w_hat", b.w_hat)
        rec.add_summary(n, "pop_n", b.pop_n.astype(np.float64))
        rec.add_summary(n, "r_n", b.r_n)
        rec.add_summary(n, "r_n_over_n", b.r_n / n)
        rec.add_summary(n, "thomson_upper", b.thomson_upper)
        rec.add_summary(n, "nash_williams_lower", b.nash_williams_lower)
        norm = _normalized(b)
        rec.add_summary(n, "normalized_c", norm)
        rec.add_summary(n, "y_n", norm - b.w_hat)
        rec.add(n, "n_x_hat", "value", n * float(b.c_n.mean()))
        rec.add(n, "normalized_c", "mean_minus_one", float(norm.mean()) - 1.0)
        w = summarize(b.w_hat)
        rec.add(n, "w_hat", "z_vs_one", (w["mean"] - 1.0) / w["se"] if w["se"] > 0 else 0.0)
        r = b.r_n
        slack = 1e-12 * r
        rec.add(n, "sandwich", "violations", int(np.sum((b.nash_williams_lower > r + slack) | (r > b.thomson_upper + slack))))
        if use_L:
            rec.add_summary(n, "n_y_n", n * (norm - b.w_hat))
            rec.add_summary(n, "fluct_series", b.fluct_series)

    rec.derived["constants"] = consts.to_dict()
    if trees >= MIN_DIAGNOSTIC_TREES:
        rec.derived["theorem1"] = theorem1_diagnostic(batches)
        band = tuple(t.get("variance_band") or (0.6, 1.67))
        rec.derived["theorem4"] = [theorem4_variance_check(b, band=band) for b in batches if b.fluct_series is not None]
    iw = t.get("inverse_w")
    if iw and dubuc_condition(off):
        inv_w = estimate_inverse_w(off, int(iw.get("depth", 25)), int(iw.get("trees", 20_000)), config.seed)
        rec.derived["inverse_w"] = dict(inv_w.__dict__)
        rec.derived["resistance_limit"] = _resistance_rows(batches, consts, inv_w)


def _pool_core(config: ExperimentConfig):
    off, res = config.offspring, config.resistance
    p = config.section("pool")
    kwargs = {}
    if p.get("budget") is not None:
        kwargs["budget"] = float(p["budget"])
    lam = p.get("lambda")
    traj = moment_trajectory(
        off, res, int(p["size"]), int(p["replicates"]), int(p["n_max"]),
        None if lam is None else float(lam), config.seed, **kwargs,
    )
    return off, res, p, traj


def _add_trajectory(rec: ResultRecord, traj) -> None:
    n = traj.steps
    x, xs = traj.x, traj.x_se
    for i, k in enumerate(n):
        rec.add(k, "x", "mean", x[i])
        rec.add(k, "x", "se", xs[i])
        rec.add(k, "y", "mean", traj.y[i])
        rec.add(k, "y", "se", traj.y_se[i])
        rec.add(k, "z", "mean", traj.z[i])
        rec.add(k, "z", "se", traj.z_se[i])
        rec.add(k, "n_x", "mean", k * x[i])
        rec.add(k, "n_x", "se", k * xs[i])


def _run_pool(config: ExperimentConfig, rec: ResultRecord) -> None:
    off, res, p, traj = _pool_core(config)
    _add_trajectory(rec, traj)
    n = traj.steps.astype(np.float64)
    x, xs = traj.x, traj.x_se
    d: dict[str, Any] = {"lambda": traj.lam, "size": traj.size, "replicates": traj.replicates}
    try:
        consts = expansion_constants(off, res)
    except Exception:  # noqa: BLE001 - constants are optional for the trajectory itself
        consts = None
    if traj.lam != off.m:
        rec.derived["pool"] = d
        return
    if consts is not None:
        d["constants"] = consts.to_dict()
        d["inv_c1"] = 1.0 / consts.c1
        d["log_slope_target"] = consts.log_slope
        d["n_x_final"] = float(n[-1] * x[-1])
        d["n_x_final_rel_gap"] = float(abs(n[-1] * x[-1] * consts.c1 - 1.0))
        ratio_y = traj.y / x**2
        ratio_z = traj.z / x**3
        d["y_over_x2_final"] = float(ratio_y[-1])
        d["y_over_x2_target"] = consts.a1 / (1.0 - 1.0 / off.m)
        d["z_over_x3_final"] = float(ratio_z[-1])
        d["z_over_x3_target"] = consts.c2
    if math.isfinite(res.inv_mean):
        # upper bound x_n <= E[1/xi] / n, in standard errors
        excess = x - res.inv_mean / n
        slack = 1e-12 * x
        with np.errstate(divide="ignore", invalid="ignore"):
            zscore = np.where(xs > 0, excess / xs, np.where(excess > slack, np.inf, 0.0))
        d["upper_bound_max_z"] = float(np.max(zscore))
        d["upper_bound_violations"] = int(np.sum(excess > 5 * xs + slack))
    d["decreasing"] = bool(np.all(np.diff(x) <= 5 * np.sqrt(xs[1:] ** 2 + xs[:-1] ** 2) + 1e-12 * x[1:]))
    d["min_n_x"] = float(np.min(n * x))
    rec.derived["pool"] = d

    if consts is None:
        return
    cutoff = p.get("c0_cutoff")
    if cutoff is not None:
        try:
            c0 = estimate_c0(traj, consts, int(cutoff))
        except MissingInverseMoment as exc:
            rec.derived["c0"] = {"error": str(exc)}
        else:
            c0d = {"value": c0.value, "se": c0.se, "cutoff": c0.cutoff, "offset": expansion_offset(c0, consts)}
            cons = p.get("consistency")
            if cons:
                chk = c0_consistency(traj, consts, c0, int(cons[0]), int(cons[1]))
                c0d["consistency_max_ratio"] = chk["max_ratio"]
                c0d["consistency_range"] = [int(cons[0]), int(cons[1])]
            rec.derived["c0"] = c0d
    fit = p.get("fit")
    if fit:
        f = fit_log_correction(traj, consts, int(fit[0]), int(fit[1]))
        rec.derived["fit"] = {
            "slope": f.slope,
            "intercept": f.intercept,
            "slope_se": f.slope_se,
            "slope_ci": list(f.slope_ci),
            "n_lo": f.n_lo,
            "n_hi": f.n_hi,
            "noise_dominates": f.noise_dominates,
            "chi2_dof": f.chi2_dof,
            "target": consts.log_slope,
        }


def _run_lambda(config: ExperimentConfig, rec: ResultRecord) -> None:
    off, res, p, traj = _pool_core(config)
    _add_trajectory(rec, traj)
    lr = lambda_rescaled_trajectory(traj)
    for k, v, s in zip(lr.n, lr.values, lr.se):
        rec.add(k, "rescaled_x", "mean", v)
        rec.add(k, "rescaled_x", "se", s)
    rec.derived["lambda"] = {
        "lambda": traj.lam,
        "m": off.m,
        "limit": lr.limit,
        "ratio_deviation": lr.ratio_deviation,
        "monotone": lr.monotone,
        "inv_mean": res.inv_mean,
        "below_inv_mean": bool(0 < lr.limit < res.inv_mean),
    }


def _run_oracle(config: ExperimentConfig, rec: ResultRecord) -> None:
    off, res = config.offspring, config.resistance
    o = config.section("oracle")
    trees, max_depth = int(o["trees"]), int(o["max_depth"])
    walk_trees = int(o.get("walk_trees", 0) or 0)
    walk_trials = int(o.get("walk_trials", 100_000) or 100_000)
    seeds = tree_seeds(config.seed, trees)
    per_depth: dict[int, list] = {}
    walks = []
    for i, s in enumerate(seeds):
        n = 1 + i % max_depth
        tree = export_tree(off, res, n, int(s))
        net = tree.to_network()
        c_rec = float(sample_batch(off, res, n, np.array([s], dtype=np.uint64)).c_n[0])
        c_lap = 1.0 / effective_resistance_laplacian(net)
        c_sp = 1.0 / series_parallel_reduce(net)
        diffs = (abs(c_rec - c_lap) / c_lap, abs(c_sp - c_lap) / c_lap, abs(c_rec - c_sp) / c_sp)
        per_depth.setdefault(n, []).append(diffs)
        if i < walk_trees:
            w = random_walk_conductance(net, walk_trials, derive_py(config.seed, 0xA1, i))
            walks.append({"tree": i, "n": n, "estimate": w.conductance, "se": w.se, "exact": c_lap,
                          "z": (w.conductance - c_lap) / w.se if w.se > 0 else 0.0})
    worst = 0.0
    for n in sorted(per_depth):
        arr = np.array(per_depth[n])
        rec.add(n, "rel_diff_recursion_laplacian", "max", arr[:, 0].max())
        rec.add(n, "rel_diff_reduction_laplacian", "max", arr[:, 1].max())
        rec.add(n, "rel_diff_recursion_reduction", "max", arr[:, 2].max())
        rec.add(n, "trees", "count", arr.shape[0])
        worst = max(worst, float(arr.max()))
    rec.derived["oracle"] = {
        "trees": trees,
        "max_rel_diff": worst,
        "walks": walks,
        "max_abs_walk_z": max((abs(w["z"]) for w in walks), default=0.0),
    }


_RUNNERS = {"tree": _run_tree, "pool": _run_pool, "oracle": _run_oracle, "lambda": _run_lambda}


def run_experiment(config: ExperimentConfig | Mapping, write: bool = False, out_dir=None) -> ResultRecord:
    """Run one experiment; optionally persist it under ``out_dir/run_id``."""
    if not isinstance(config, ExperimentConfig):
        config = ExperimentConfig(dict(config))
    rec = _new_record(config)
    _RUNNERS[config.mode](config, rec)
    if write:
        write_result(rec, config, out_dir)
    return rec


def constants_table(off: OffspringLaw, res: ResistanceLaw) -> dict:
    """All analytic quantities for a law pair, as printed by ``gw-electric constants``."""
    out: dict[str, Any] = {
        "m": off.m,
        "p1": off.p1,
        "p1_m": off.p1 * off.m,
        "dubuc": dubuc_condition(off),
        "b1": res.b1,
        "b2": res.b2,
        "b3": res.b3,
        "inv_mean": res.inv_mean,
        "w_second_moment": w_second_moment(off),
    }
    try:
        consts = expansion_constants(off, res)
    except Exception as exc:  # noqa: BLE001
        out["constants_error"] = str(exc)
        return out
    out.update(consts.to_dict())
    out["log_slope"] = consts.log_slope
    if off.is_deterministic:
        out["deterministic_check"] = {
            "c2_minus_1": consts.c2 - 1.0,
            "c3": consts.c3,
            "c4_minus_b1_plus_b2_over_b1": consts.c4 - (res.b1 - res.b2 / res.b1),
        }
    return out
