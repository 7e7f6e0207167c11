"""Disorder averaging over the (L, eps, F) grid, with checkpointed sweeps.

Every realization draws its disorder from a seed derived from
``(master_seed, L, eps, F, realization index)``, so a grid point can be
recomputed in isolation and results do not depend on how work is scheduled.
"""

import csv
import hashlib
import json
import logging
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .entanglement import half_chain_entropy
from .errors import ConfigError, ParameterError, StarkMBLError
from .fock import enumerate_basis
from .model import LatticeParams, build_hamiltonian, sample_disorder
from .spectra import gap_ratios, solve_window

log = logging.getLogger(__name__)

CSV_FIELDS = (
    "L",
    "eps",
    "F",
    "mean_r",
    "stderr_r",
    "mean_S",
    "var_S",
    "n_realizations",
    "n_eigenpairs",
    "dropped_ratios",
    "master_seed",
)

DEFAULT_SAMPLES = {10: 400, 12: 200, 14: 100}
DEFAULT_F_GRID = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.5]
DEFAULT_EPS_GRID = [round(0.15 + 0.05 * i, 2) for i in range(15)]


class RealizationError(StarkMBLError):
    """A single disorder realization failed; the grid point is aborted."""


def _grid_key(x: float) -> int:
    return int(round(float(x) * 1_000_000))


def realization_seed(master_seed: int, L: int, eps: float, F: float, index: int) -> int:
    """Stable 64-bit seed for one realization at one grid point."""
    ss = np.random.SeedSequence(
        int(master_seed), spawn_key=(int(L), _grid_key(eps), _grid_key(F), int(index))
    )
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(eq=False)
class EnsembleRecord:
    L: int
    eps: float
    F: float
    mean_r: float
    stderr_r: float
    mean_S: float
    var_S: float
    n_realizations: int
    n_eigenpairs: int
    dropped_ratios: int
    master_seed: int
    per_realization_r: np.ndarray = field(default=None, repr=False)
    per_realization_S: np.ndarray = field(default=None, repr=False)

    def row(self) -> list[str]:
        out = []
        for name in CSV_FIELDS:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, (float, np.floating)) else str(int(v)))
        return out

    def to_dict(self) -> dict:
        d = {name: getattr(self, name) for name in CSV_FIELDS}
        for name in ("per_realization_r", "per_realization_S"):
            v = getattr(self, name)
            d[name] = None if v is None else [float(x) for x in v]
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for name in ("per_realization_r", "per_realization_S"):
            if d.get(name) is not None:
                d[name] = np.asarray(d[name], dtype=float)
        return cls(**d)

    def same_as(self, other) -> bool:
        """Exact equality of all serialized fields (NaN compares equal to NaN)."""
        return self.row() == other.row()


def _realization(task):
    params, eps, k, seed, method = task
    basis = enumerate_basis(params.L, params.N)
    H = build_hamiltonian(params, sample_disorder(params.W, params.L, seed), basis)
    window = solve_window(H, eps, k, want_vectors=True, method=method)
    ratios = gap_ratios(window.eigenvalues)
    S = half_chain_entropy(window.eigenvectors, basis)
    return ratios.r_values, np.atleast_1d(S), ratios.dropped


def _run_task(i, task):
    try:
        return _realization(task)
    except Exception as err:  # noqa: BLE001 - re-raised with the realization index
        msg = f"realization {i} (seed {task[3]}) failed: {err}"
        if isinstance(err, StarkMBLError):
            raise type(err)(msg) from err
        raise RealizationError(msg) from err


def _run_indexed(args):
    return _run_task(*args)


def _init_worker():
    threadpool_limits(1)


def make_executor(workers: int):
    """Process pool whose workers run single-threaded BLAS, or None for inline work."""
    if workers <= 1:
        return None
    return ProcessPoolExecutor(max_workers=workers, initializer=_init_worker)


def run_point(
    params: LatticeParams,
    eps: float,
    n_samples: int,
    seed: int,
    *,
    k: int = 50,
    method: str = "auto",
    executor=None,
) -> EnsembleRecord:
    """Disorder-averaged ``<r>``, ``<S>`` and ``sigma^2`` at one ``(L, eps, F)`` point.

    Ratios and entropies are pooled over all window eigenpairs of all
    realizations. ``stderr_r`` is the standard error of the per-realization
    mean ratio. ``seed`` is the master seed of the sweep.
    """
    if n_samples < 1:
        raise ParameterError(f"need at least one realization, got {n_samples}")
    if k < 3:
        raise ParameterError(f"window size must be >= 3, got {k}")
    tasks = [
        (i, (params, eps, k, realization_seed(seed, params.L, eps, params.F, i), method))
        for i in range(n_samples)
    ]
    if executor is None:
        with threadpool_limits(1):
            results = [_run_task(i, t) for i, t in tasks]
    else:
        chunk = max(1, n_samples // (4 * (executor._max_workers or 1)))
        results = list(executor.map(_run_indexed, tasks, chunksize=chunk))

    r_all = np.concatenate([r for r, _, _ in results])
    S_all = np.concatenate([s for _, s, _ in results])
    per_r = np.array([np.mean(r) if len(r) else np.nan for r, _, _ in results])
    per_S = np.array([np.mean(s) for _, s, _ in results])
    dropped = int(sum(d for _, _, d in results))

    mean_r = float(np.mean(r_all)) if len(r_all) else float("nan")
    stderr_r = float(np.std(per_r, ddof=1) / np.sqrt(n_samples)) if n_samples > 1 else float("nan")
    mean_S = float(np.mean(S_all))
    var_S = float(np.mean((S_all - mean_S) ** 2))
    if not 0.35 <= mean_r <= 0.55:
        warnings.warn(
            f"<r> = {mean_r:.4f} at L={params.L}, eps={eps}, F={params.F} is outside [0.35, 0.55]",
            RuntimeWarning,
            stacklevel=2,
        )
    return EnsembleRecord(
        L=params.L,
        eps=float(eps),
        F=float(params.F),
        mean_r=mean_r,
        stderr_r=stderr_r,
        mean_S=mean_S,
        var_S=var_S,
        n_realizations=n_samples,
        n_eigenpairs=n_samples * k,
        dropped_ratios=dropped,
        master_seed=int(seed),
        per_realization_r=per_r,
        per_realization_S=per_S,
    )


@dataclass
class SweepConfig:
    """Grid and ensemble settings of a sweep; ``samples`` maps L to realization count."""

    L: list
    F: list
    eps: list
    W: float = 0.5
    J: float = 1.0
    U: float = 1.0
    samples: dict = field(default_factory=dict)
    master_seed: int = 2020
    k_window: int = 50
    output: str = "results/sweep.csv"
    solver: str = "auto"

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("L", "F", "eps"):
            grid = getattr(self, name)
            if not isinstance(grid, (list, tuple)) or not grid:
                raise ConfigError(f"config field {name!r}: must be a nonempty list")
        try:
            self.L = sorted(int(x) for x in self.L)
            self.F = sorted(float(x) for x in self.F)
            self.eps = sorted(float(x) for x in self.eps)
            self.samples = {int(k): int(v) for k, v in dict(self.samples).items()}
        except (TypeError, ValueError) as err:
            raise ConfigError(f"config field has a non-numeric entry: {err}") from err
        if any(L < 2 or L % 2 for L in self.L):
            raise ConfigError("config field 'L': sizes must be even and >= 2")
        if any(F < 0 for F in self.F):
            raise ConfigError("config field 'F': field strengths must be >= 0")
        if any(not 0.0 <= e <= 1.0 for e in self.eps):
            raise ConfigError("config field 'eps': energy densities must lie in [0, 1]")
        if any(not 0.15 - 1e-12 <= e <= 0.85 + 1e-12 for e in self.eps):
            log.warning("energy densities outside [0.15, 0.85] sample sparse spectral tails")
        for name in ("W", "J", "U"):
            try:
                setattr(self, name, float(getattr(self, name)))
            except (TypeError, ValueError) as err:
                raise ConfigError(f"config field {name!r}: {err}") from err
        if self.W < 0:
            raise ConfigError("config field 'W': must be >= 0")
        missing = [L for L in self.L if L not in self.samples]
        if missing:
            raise ConfigError(f"config field 'samples': no sample count for L={missing}")
        if any(self.samples[L] < 1 for L in self.L):
            raise ConfigError("config field 'samples': counts must be >= 1")
        if int(self.k_window) < 3:
            raise ConfigError("config field 'k_window': must be >= 3")
        self.k_window = int(self.k_window)
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("config field 'master_seed': must be a non-negative integer")
        if self.solver not in ("auto", "dense", "shift-invert"):
            raise ConfigError("config field 'solver': expected auto, dense or shift-invert")

    @classmethod
    def default(cls, **overrides):
        base = dict(
            L=[10, 12, 14],
            F=list(DEFAULT_F_GRID),
            eps=list(DEFAULT_EPS_GRID),
            samples=dict(DEFAULT_SAMPLES),
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, d: dict):
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"config field {unknown[0]!r}: unknown field")
        for name in ("L", "F", "eps"):
            if name not in d:
                raise ConfigError(f"config field {name!r}: missing")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file {path}: invalid JSON ({err})") from err
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["samples"] = {str(k): v for k, v in sorted(self.samples.items())}
        return d

    def physics_dict(self) -> dict:
        """Everything that determines the numbers in the results table."""
        d = self.to_dict()
        d.pop("output")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.physics_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def grid(self):
        return [(L, e, F) for L in self.L for e in self.eps for F in self.F]

    def params(self, L, F) -> LatticeParams:
        return LatticeParams(L=L, J=self.J, U=self.U, F=F, W=self.W)


def _point_fingerprint(config: SweepConfig, L, eps, F) -> str:
    blob = json.dumps(
        dict(
            L=L, eps=eps, F=F, W=config.W, J=config.J, U=config.U,
            n=config.samples[L], seed=config.master_seed, k=config.k_window,
            solver=config.solver,
        ),
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def output_paths(output) -> dict:
    out = Path(output)
    stem = out.with_suffix("")
    return {
        "csv": out,
        "meta": stem.with_name(stem.name + ".meta.json"),
        "checkpoints": stem.with_name(stem.name + ".checkpoints"),
    }


def _check_writable(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        probe = path.parent / f".{path.name}.probe"
        probe.write_text("")
        probe.unlink()
    except OSError as err:
        raise OSError(f"output path {path} is not writable: {err}") from err


def _write_json_atomic(path: Path, obj):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)


def write_results(records, path, config_hash: str = ""):
    """Write records sorted by ``(L, eps, F)`` to CSV with a provenance comment line."""
    recs = sorted(records, key=lambda r: (r.L, r.eps, r.F))
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(f"# starkmbl results; config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in recs:
            w.writerow(r.row())
    os.replace(tmp, path)


def read_results(path) -> list[EnsembleRecord]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    missing = set(CSV_FIELDS) - set(reader.fieldnames or ())
    if missing:
        raise ParameterError(f"results file {path} lacks columns {sorted(missing)}")
    out = []
    for row in reader:
        out.append(
            EnsembleRecord(
                L=int(row["L"]),
                eps=float(row["eps"]),
                F=float(row["F"]),
                mean_r=float(row["mean_r"]),
                stderr_r=float(row["stderr_r"]),
                mean_S=float(row["mean_S"]),
                var_S=float(row["var_S"]),
                n_realizations=int(row["n_realizations"]),
                n_eigenpairs=int(row["n_eigenpairs"]),
                dropped_ratios=int(row["dropped_ratios"]),
                master_seed=int(row["master_seed"]),
            )
        )
    return out


def run_sweep(config: SweepConfig, workers: int = 1, resume: bool = True, progress=None):
    """Compute every grid point of ``config`` and write the results table.

    Each finished point is checkpointed; with ``resume`` a matching checkpoint
    is loaded instead of recomputed. ``progress(done, total, record)`` is
    called after each point. Returns the records sorted by ``(L, eps, F)``.
    """
    paths = output_paths(config.output)
    _check_writable(paths["csv"])
    ckdir = paths["checkpoints"]
    ckdir.mkdir(parents=True, exist_ok=True)
    chash = config.config_hash()
    _write_json_atomic(
        paths["meta"], {"config": config.to_dict(), "config_hash": chash, "version": __version__}
    )

    grid = config.grid()
    records = []
    executor = make_executor(workers)
    try:
        for n, (L, eps, F) in enumerate(grid, 1):
            fp = _point_fingerprint(config, L, eps, F)
            ck = ckdir / f"L{L}_eps{_grid_key(eps)}_F{_grid_key(F)}.json"
            rec = None
            if resume and ck.exists():
                try:
                    data = json.loads(ck.read_text())
                    if data.get("fingerprint") == fp:
                        rec = EnsembleRecord.from_dict(data["record"])
                except (ValueError, KeyError, TypeError):
                    log.warning("ignoring unreadable checkpoint %s", ck)
            if rec is None:
                log.info("point L=%d eps=%g F=%g (%d/%d)", L, eps, F, n, len(grid))
                rec = run_point(
                    config.params(L, F),
                    eps,
                    config.samples[L],
                    config.master_seed,
                    k=config.k_window,
                    method=config.solver,
                    executor=executor,
                )
                _write_json_atomic(ck, {"fingerprint": fp, "record": rec.to_dict()})
            records.append(rec)
            if progress is not None:
                progress(n, len(grid), rec)
    finally:
        if executor is not None:
            executor.shutdown()

    records.sort(key=lambda r: (r.L, r.eps, r.F))
    write_results(records, paths["csv"], chash)
    return records
