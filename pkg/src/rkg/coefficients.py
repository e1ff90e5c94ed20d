"""Factorized RKG stages: complex Euler step fractions and their ordering.

Each root zeta_l of G gives one forward Euler stage of size a_l T with

    a_l = (2 / beta) / (1 - zeta_l),

so that prod_l (1 + a_l z) = R(z).  The product is order independent, but the
partial products are not: a bad ordering lets intermediate stages amplify
rounding errors by many orders of magnitude.  ``order_stages`` applies the
greedy swap ordering and certifies the realized amplification factor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from .gegenbauer import DEFAULT_DIGITS
from .roots import RootFindingError, rkg_roots

AMPLIFICATION_FACTOR = 10
MAX_RANGE_REDUCTIONS = 100
RANGE_REDUCTION_STEP = 1e-3


class OrderingError(RuntimeError):
    pass


@dataclass
class StageSchedule:
    order: int
    substeps: int
    nu: float
    beta: float
    stages: np.ndarray
    amplification: float
    range_reduction: int = 0
    exact_stages: tuple | None = field(default=None, repr=False)

    @property
    def degree(self):
        return len(self.stages)

    @property
    def extent(self):
        """Real-axis extent over which the amplification bound is certified."""
        return self.beta * (1 - RANGE_REDUCTION_STEP * self.range_reduction)


def stages_from_roots(poly, dps=None, max_doublings=2):
    """Unordered stage fractions a_l (mpmath complex), conjugate-paired.

    A failed or inconsistent root solve (stages not summing to one) is
    retried at doubled precision from a slightly larger seed circle.
    """
    dps = dps or poly.dps or DEFAULT_DIGITS
    for attempt in range(max_doublings + 1):
        work = dps * 2**attempt
        try:
            roots = rkg_roots(poly, work, radius=1.05 + 0.05 * attempt)
            with mp.workdps(work):
                scale = 2 / mp.mpf(poly.beta)
                stages = [scale / (1 - z) for z in roots]
                if abs(mp.fsum(stages) - 1) > mp.mpf(10) ** (-(dps // 2)):
                    raise RootFindingError("stage fractions do not sum to one")
            with mp.workdps(dps):
                return [+a for a in stages]
        except RootFindingError:
            if attempt == max_doublings:
                raise


def amplification(stages, j, k, x):
    """Q_{j,k}(x) = prod_{l=j..k} |1 + a_l x| with 1-based inclusive indices."""
    a = np.asarray(stages, dtype=complex)[j - 1 : k]
    x = np.asarray(x, dtype=float)
    return np.prod(np.abs(1 + np.multiply.outer(x, a)), axis=-1)


def _log_factors(a, x):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(1 + np.outer(a, x)))


def certify_amplification(stages, extent, samples=None):
    """max over windows j <= k and uniform x in [-extent, 0] of Q_{j,k}(x).

    Evaluated in log space with a maximum-subarray sweep per sample point,
    at 10 L points unless ``samples`` is given.
    """
    a = np.asarray(stages, dtype=complex)
    samples = samples or AMPLIFICATION_FACTOR * len(a)
    x = np.linspace(-float(extent), 0.0, samples)
    lv = _log_factors(a, x)
    best = np.full(samples, -np.inf)
    run = np.full(samples, -np.inf)
    for row in lv:
        run = np.maximum(run + row, row)
        np.maximum(best, run, out=best)
    return float(np.exp(best.max()))


# short alias matching the symbol Q
certify_Q = certify_amplification


def _greedy_pass(a, x):
    """One sweep of pairwise swaps over positions l = 1..L.

    For each l the candidates m >= l are swapped into position l in turn, and
    a swap is kept only if it gives a strictly smaller
    || max(prod_{j<=l} v_j, prod_{j>l} v_j) ||_1 over the sample points.
    """
    n = len(a)
    lv_all = _log_factors(a, x)
    perm = np.arange(n)
    log_prefix = np.zeros(len(x))
    for l in range(n):
        rest = perm[l:]
        lv = lv_all[rest]
        # product of the remaining factors with each candidate left out
        csum = np.cumsum(lv, axis=0)
        left = np.vstack([np.zeros((1, len(x))), csum[:-1]])
        with np.errstate(invalid="ignore"):
            right = csum[-1] - csum
            right[~np.isfinite(right)] = -np.inf
            excluded = left + right
        excluded = np.where(np.isnan(excluded), -np.inf, excluded)
        pair = np.maximum(log_prefix + lv, excluded)
        peak = pair.max(axis=1, keepdims=True)
        with np.errstate(invalid="ignore"):
            objective = peak[:, 0] + np.log(np.exp(pair - peak).sum(axis=1))
        # literal swap / revert sequence; positions > m are still untouched
        best = objective[0]
        for m in range(1, len(rest)):
            if objective[m] < best:
                best = objective[m]
                perm[l], perm[l + m] = perm[l + m], perm[l]
                objective[0], objective[m] = objective[m], objective[0]
        log_prefix = log_prefix + lv_all[perm[l]]
    return perm


def order_stages(stages, beta, seed=0, max_reductions=MAX_RANGE_REDUCTIONS):
    """Order stages for internal stability.

    Returns the permutation applied to ``stages``, the certified
    amplification factor Q and the accepted range reduction count n.
    """
    a = np.asarray([complex(s) for s in stages])
    n_stages = len(a)
    limit = AMPLIFICATION_FACTOR * n_stages**2
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_stages)
    beta = float(beta)
    for n in range(1, max_reductions + 1):
        extent = (1 - RANGE_REDUCTION_STEP * n) * beta
        x = np.linspace(-extent, 0.0, n_stages)
        perm = perm[_greedy_pass(a[perm], x)]
        q = certify_amplification(a[perm], extent)
        if q < limit:
            return perm, q, n
    raise OrderingError(f"amplification bound {limit} not met after {max_reductions} range reductions")


def build_schedule(poly, seed=0, dps=None):
    """Roots -> stages -> ordered StageSchedule for a constructed polynomial."""
    exact = stages_from_roots(poly, dps)
    perm, q, n = order_stages(exact, poly.beta, seed=seed)
    ordered = [exact[i] for i in perm]
    return StageSchedule(
        order=poly.order,
        substeps=poly.substeps,
        nu=float(poly.nu),
        beta=float(poly.beta),
        stages=np.array([complex(s) for s in ordered]),
        amplification=q,
        range_reduction=n,
        exact_stages=tuple(ordered),
    )
