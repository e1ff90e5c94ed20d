"""Benchmark runs: configuration, reference solutions and error measurement."""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .integrator import InternalInstabilityError, integrate_controlled, integrate_fixed
from .problems import AdvDiff1D, Brusselator2D, Grid1D, Grid2D
from .splitting import builtin_scheme, integrate_split_controlled, integrate_split_fixed
from .table import default_table

PROBLEMS = ("advdiff1d", "brusselator")
MODES = ("fixed", "controlled")
LARGE_ERROR = 0.1
CACHE_ENV = "RKG_CACHE_DIR"
REFERENCE_TOL = 1e-10


class ConfigError(ValueError):
    pass


@dataclass
class BenchConfig:
    problem: str = "brusselator"
    order: int = 2
    mode: str = "controlled"
    atol: float = 1e-3
    rtol: float | None = None
    step: float | None = None
    substeps: int | None = None
    nu_index: int | None = None
    mu: float = 0.1
    grid: int = 200
    t_end: float = 1.0
    t0: float = 0.0
    seed: int = 0

    def resolved(self):
        """Validated copy with defaults filled in."""
        cfg = BenchConfig(**asdict(self))
        if cfg.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {cfg.problem!r}")
        if cfg.mode not in MODES:
            raise ConfigError(f"unknown mode {cfg.mode!r}")
        if cfg.order not in (1, 2, 4, 6):
            raise ConfigError(f"order must be 1, 2, 4 or 6, got {cfg.order}")
        if cfg.problem == "brusselator" and cfg.order == 1:
            raise ConfigError("the Brusselator benchmark runs at orders 2, 4 and 6")
        if cfg.rtol is None:
            cfg.rtol = cfg.atol
        if cfg.atol <= 0 or cfg.rtol <= 0:
            raise ConfigError("tolerances must be positive")
        if cfg.mode == "fixed" and cfg.step is None:
            if cfg.substeps is None:
                raise ConfigError("fixed mode needs --step or --m")
        if cfg.step is not None and cfg.step <= 0:
            raise ConfigError("step must be positive")
        if cfg.grid < 4:
            raise ConfigError("grid must have at least 4 cells")
        if cfg.t_end < cfg.t0:
            raise ConfigError("t_end must not precede t0")
        if cfg.substeps is not None and cfg.mode != "fixed":
            raise ConfigError("--m only applies in fixed mode")
        return cfg


@dataclass
class BenchRow:
    err_l2: float
    err_linf: float
    f_accepted: int
    f_rejected: int
    steps: int
    rejected_steps: int
    m_max: int
    flag: str
    runtime: float
    reaction_evals: int = 0
    imag_residue: float = 0.0

    @property
    def f_count(self):
        return self.f_accepted + self.f_rejected


def error_norms(w, ref):
    diff = np.asarray(w) - np.asarray(ref)
    return float(np.sqrt(np.mean(diff**2))), float(np.max(np.abs(diff)))


def make_problem(cfg):
    if cfg.problem == "advdiff1d":
        return AdvDiff1D(Grid1D(-20.0, 20.0, 40.0 / cfg.grid), a=0.2, d=1.0)
    return Brusselator2D(Grid2D(cfg.grid), mu=cfg.mu)


def advdiff_reference(problem, w0, t0, t_end):
    """Semi-discrete solution exp(J t) applied to the affine system, via expm."""
    jac, c = problem.matrix()
    n = len(w0)
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = jac
    aug[:n, n] = c
    state = np.append(w0, 1.0)
    return (expm(aug * (t_end - t0)) @ state)[:n]


def _cache_dir():
    path = Path(os.environ.get(CACHE_ENV, Path.home() / ".cache" / "rkg"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def brusselator_reference(problem, t_end, tol=REFERENCE_TOL, cache=True):
    """Same-mesh reference from a tight-tolerance DOP853 solve, cached on disk.

    Unsplit FRKG above second order is only second-order accurate on the
    nonlinear reaction terms, so the reference does not come from FRKG.
    """
    key = json.dumps({"n": problem.grid.n, "mu": problem.mu, "t_end": t_end, "tol": tol, "v": 2}, sort_keys=True)
    path = _cache_dir() / f"brusselator_ref_{hashlib.sha1(key.encode()).hexdigest()[:16]}.npy"
    if cache and path.is_file():
        return np.load(path)
    sol = solve_ivp(lambda t, y: problem.rhs(y), (0.0, t_end), problem.initial(), method="DOP853", rtol=tol, atol=tol)
    if not sol.success:
        raise RuntimeError(f"reference solve failed: {sol.message}")
    w = sol.y[:, -1]
    if cache:
        np.save(path, w)
    return w


def _tables_for(cfg):
    orders = {cfg.order, 1 if cfg.order <= 2 else 2}
    return default_table(sorted(orders))


def run_bench(cfg, table=None, reference=None, measure_error=True):
    """Run one benchmark row; returns (BenchRow, final state).

    With ``measure_error=False`` no reference is computed and errors are NaN.
    """
    cfg = cfg.resolved()
    table = table or _tables_for(cfg)
    problem = make_problem(cfg)
    split = cfg.problem == "brusselator" and cfg.order >= 4
    if cfg.problem == "advdiff1d":
        w0 = problem.initial(cfg.t0)
    else:
        w0 = problem.initial()
    method = None
    step = cfg.step
    if cfg.substeps is not None:
        method = (cfg.substeps, cfg.nu_index if cfg.nu_index is not None else 1)
        if step is None:
            entry = table.get(cfg.order, *method)
            step = entry.extent / problem.stiffness().lam_max
    start = time.perf_counter()
    flag = "ok"
    try:
        if split:
            scheme = builtin_scheme(cfg.order)
            if cfg.mode == "fixed":
                res = integrate_split_fixed(problem.split(), w0, cfg.t_end, step, scheme, table, t0=cfg.t0)
            else:
                res = integrate_split_controlled(
                    problem.split(), w0, cfg.t_end, scheme, table, cfg.atol, cfg.rtol, t0=cfg.t0
                )
        elif cfg.mode == "fixed":
            res = integrate_fixed(problem.system(), w0, cfg.t_end, step, table, cfg.order, t0=cfg.t0, method=method)
        else:
            res = integrate_controlled(problem.system(), w0, cfg.t_end, table, cfg.order, cfg.atol, cfg.rtol, t0=cfg.t0)
    except (InternalInstabilityError, FloatingPointError):
        row = BenchRow(math.inf, math.inf, 0, 0, 0, 0, 0, "unstable", time.perf_counter() - start)
        return row, None
    runtime = time.perf_counter() - start
    if not measure_error:
        reference = np.full_like(res.w, np.nan)
    elif reference is None:
        if cfg.problem == "advdiff1d":
            reference = advdiff_reference(problem, w0, cfg.t0, cfg.t_end)
        else:
            reference = brusselator_reference(problem, cfg.t_end)
    l2, linf = error_norms(res.w, reference)
    if not np.all(np.isfinite(res.w)):
        flag = "unstable"
    elif l2 > LARGE_ERROR:
        flag = "large_error"
    row = BenchRow(
        err_l2=l2,
        err_linf=linf,
        f_accepted=res.f_accepted,
        f_rejected=res.f_rejected,
        steps=res.steps,
        rejected_steps=res.rejected_steps,
        m_max=res.max_substeps,
        flag=flag,
        runtime=runtime,
        reaction_evals=getattr(res, "reaction_evals", 0),
        imag_residue=res.max_imag_residue,
    )
    return row, res.w


def fit_slope(x, y):
    """Least-squares slope of log y against log x."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
