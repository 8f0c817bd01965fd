"""Masking thresholds and the adaptive-amplification problem.

The objective being minimized over the scalar gain `lam` is

    f(lam) = alpha * lam * sum(S)  +  sum over core cells of max(T - lam*S, 0)

i.e. a global loudness penalty plus the unmet-threshold deficit on the
high-energy core. f is convex piecewise-linear, so a breakpoint walk gives
the exact optimum and serves as oracle for the iterative solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .specimage import BinaryMask
from .spectral import (
    AMP_FLOOR,
    MEL_BANDS,
    STFT_BINS,
    SpectralConfig,
    SpectrogramGrid,
    mel_filter,
)

DEFAULT_SMR_DB = 21.0
DEFAULT_ALPHA = 0.14
DEFAULT_LAMBDA_BOUNDS = (0.0, 100.0)


@dataclass(frozen=True)
class MaskingThresholds:
    """Per-cell linear amplitude the music must reach to mask the noise."""

    values: SpectrogramGrid
    smr_db: float = DEFAULT_SMR_DB

    def __post_init__(self) -> None:
        if self.values.axis_kind != MEL_BANDS:
            raise ValueError("thresholds live on mel bands")


@dataclass(frozen=True)
class AmplificationProblem:
    music: SpectrogramGrid
    thresholds: MaskingThresholds
    core: BinaryMask
    alpha: float = DEFAULT_ALPHA
    lambda_bounds: tuple = DEFAULT_LAMBDA_BOUNDS

    def __post_init__(self) -> None:
        if self.music.shape != self.thresholds.values.shape:
            raise ValueError("music and threshold grids must match in shape")
        if self.music.shape != self.core.cells.shape:
            raise ValueError("music grid and core mask must match in shape")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        lo, hi = self.lambda_bounds
        if not 0 <= lo < hi:
            raise ValueError(f"invalid lambda bounds {self.lambda_bounds}")


@dataclass(frozen=True)
class AmplificationSolution:
    lambda_star: float
    objective_value: float
    iterations: int
    solver: str
    coverage: float
    unmaskable_count: int


def masking_thresholds(
    noise_stft: SpectrogramGrid,
    smr_db: float = DEFAULT_SMR_DB,
    cfg: SpectralConfig | None = None,
    path: str = "literal",
) -> MaskingThresholds:
    """Mel-domain masking thresholds: the noise level raised by the
    signal-to-mask ratio.

    `path="literal"` exponentiates (20*log10(S) + smr)/20 cell by cell before
    mel filtering; `path="scaled"` uses the algebraically equal form
    10^(smr/20) * Mel(S). Both clamp at the amplitude floor.
    """
    if cfg is None:
        cfg = noise_stft.config
    if noise_stft.axis_kind != STFT_BINS:
        raise ValueError("masking_thresholds expects an stft-bins grid")
    if not 0 <= smr_db <= 40:
        raise ValueError(f"smr_db must be in [0, 40], got {smr_db}")
    clamped = np.maximum(noise_stft.values, AMP_FLOOR)
    if path == "literal":
        raised = np.power(10.0, (20.0 * np.log10(clamped) + smr_db) / 20.0)
        values = mel_filter(SpectrogramGrid(raised, STFT_BINS, cfg), cfg)
    elif path == "scaled":
        scale = 10.0 ** (smr_db / 20.0)
        mel = mel_filter(SpectrogramGrid(clamped, STFT_BINS, cfg), cfg)
        values = SpectrogramGrid(scale * mel.values, MEL_BANDS, cfg)
    else:
        raise ValueError(f"path must be 'literal' or 'scaled', got {path!r}")
    return MaskingThresholds(values, smr_db)


def _core_vectors(problem: AmplificationProblem):
    core = problem.core.cells == 1
    s = problem.music.values
    t = problem.thresholds.values.values
    return s[core], t[core], float(s.sum())


def objective(problem: AmplificationProblem, lam: float) -> float:
    """Evaluate f(lam) exactly (fixed summation order)."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    s_core, t_core, total_s = _core_vectors(problem)
    value = problem.alpha * lam * total_s + np.maximum(t_core - lam * s_core, 0.0).sum()
    return float(value)


def subgradient(problem: AmplificationProblem, lam: float) -> float:
    """A subgradient of f at lam: alpha*sum(S) minus the music mass still
    below threshold (T > lam*S)."""
    s_core, t_core, total_s = _core_vectors(problem)
    return float(problem.alpha * total_s - s_core[t_core > lam * s_core].sum())


def coverage(
    music: SpectrogramGrid, thresholds: MaskingThresholds, core: BinaryMask, lam: float
) -> float:
    """Fraction of core cells where lam * S_music >= T."""
    if music.shape != thresholds.values.shape or music.shape != core.cells.shape:
        raise ValueError("dimension mismatch")
    mask = core.cells == 1
    n = int(mask.sum())
    if n == 0:
        return 1.0
    s = music.values[mask]
    t = thresholds.values.values[mask]
    return float(np.count_nonzero(lam * s >= t)) / n


def residual_deficit(
    music: SpectrogramGrid, thresholds: MaskingThresholds, core: BinaryMask, lam: float
) -> float:
    """Sum over core cells of max(T - lam*S, 0)."""
    mask = core.cells == 1
    s = music.values[mask]
    t = thresholds.values.values[mask]
    return float(np.maximum(t - lam * s, 0.0).sum())


def amplify(music: SpectrogramGrid, lam: float) -> SpectrogramGrid:
    """Elementwise scalar gain."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    return SpectrogramGrid(music.values * lam, music.axis_kind, music.config)


def _unmaskable(problem: AmplificationProblem) -> int:
    core = problem.core.cells == 1
    return int(np.count_nonzero(problem.music.values[core] == 0.0))


def _finish(problem: AmplificationProblem, lam: float, iters: int, solver: str):
    value = objective(problem, lam)
    if not np.isfinite(value):
        raise SolverError(f"non-finite objective {value} at lambda={lam}")
    cov = coverage(problem.music, problem.thresholds, problem.core, lam)
    return AmplificationSolution(
        lambda_star=float(lam),
        objective_value=value,
        iterations=iters,
        solver=solver,
        coverage=cov,
        unmaskable_count=_unmaskable(problem),
    )


def solve_subgradient(
    problem: AmplificationProblem,
    init: float = 1.0,
    lr: float = 0.1,
    max_iters: int = 2000,
    tol: float = 1e-6,
) -> AmplificationSolution:
    """Projected subgradient descent with lr/sqrt(iter) steps.

    f is piecewise linear, so raw diminishing steps stall at an accuracy
    proportional to the final step size. Every evaluated sign of the
    subgradient tightens a bracket around the minimizer (a subgradient >= 0
    means the optimum lies left of the iterate, < 0 right of it); once the
    descent steps fall below `tol` the remaining bracket is bisected, still
    driven purely by subgradient signs, until its width is below `tol`.
    """
    lo_bound, hi_bound = problem.lambda_bounds
    if not lo_bound <= init <= hi_bound:
        raise ValueError(f"init {init} outside bounds {problem.lambda_bounds}")
    s_core, t_core, total_s = _core_vectors(problem)
    pos = s_core > 0
    s_pos, t_pos = s_core[pos], t_core[pos]

    def grad(lam: float) -> float:
        return float(problem.alpha * total_s - s_pos[t_pos > lam * s_pos].sum())

    iters = 2
    if grad(lo_bound) >= 0.0:
        return _finish(problem, lo_bound, 1, "subgradient")
    if grad(hi_bound) <= 0.0:
        return _finish(problem, hi_bound, iters, "subgradient")

    lo, hi = lo_bound, hi_bound  # invariant: grad(lo) < 0 < grad(hi)
    lam = float(init)
    descent_budget = max(max_iters - 64, 0)  # leave room for the bisection tail
    for k in range(1, max_iters + 1):
        if iters >= descent_budget or hi - lo <= tol:
            break
        iters += 1
        g = grad(lam)
        if g == 0.0:
            return _finish(problem, lam, iters, "subgradient")
        if g > 0:
            hi = min(hi, lam)
        else:
            lo = max(lo, lam)
        new = min(max(lam - (lr / np.sqrt(k)) * g, lo), hi)
        if abs(new - lam) < tol:
            break
        lam = new

    while hi - lo > tol and iters < max_iters:
        iters += 1
        mid = 0.5 * (lo + hi)
        g = grad(mid)
        if g == 0.0:
            return _finish(problem, mid, iters, "subgradient")
        if g > 0:
            hi = mid
        else:
            lo = mid
    return _finish(problem, 0.5 * (lo + hi), iters, "subgradient")


def solve_breakpoint(problem: AmplificationProblem) -> AmplificationSolution:
    """Exact minimizer via the sorted breakpoints lam_k = T_k / S_k.

    Walks the breakpoints in ascending order and returns the first one where
    the right-hand slope alpha*sum(S) - sum(still-unmasked S) turns
    nonnegative; 0 if the initial slope is already nonnegative, the upper
    bound if the slope never turns inside the bounds.
    """
    lo_bound, hi_bound = problem.lambda_bounds
    s_core, t_core, total_s = _core_vectors(problem)
    pos = s_core > 0
    s_pos, t_pos = s_core[pos], t_core[pos]
    ratios = t_pos / s_pos
    order = np.argsort(ratios, kind="stable")
    r_sorted = ratios[order]
    s_sorted = s_pos[order]
    linear = problem.alpha * total_s

    # slope for lam just above r_sorted[i]: linear - (mass with ratio > r_sorted[i])
    unmasked_at_zero = float(s_pos[ratios > 0].sum())
    if linear - unmasked_at_zero >= 0:
        lam = lo_bound
        return _finish(problem, lam, 0, "breakpoint")

    removed = np.cumsum(s_sorted)
    total_pos = float(s_pos.sum())
    n = r_sorted.size
    is_group_end = np.ones(n, dtype=bool)
    if n > 1:
        is_group_end[:-1] = r_sorted[1:] != r_sorted[:-1]
    slopes_after = linear - (total_pos - removed)
    candidates = np.flatnonzero(is_group_end & (slopes_after >= 0))
    if candidates.size == 0:
        lam = hi_bound  # slope stays negative: minimizer sits at the bound
    else:
        lam = float(r_sorted[candidates[0]])
        lam = min(max(lam, lo_bound), hi_bound)
    return _finish(problem, lam, int(np.count_nonzero(is_group_end)), "breakpoint")
