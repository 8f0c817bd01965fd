import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noiseblend.masking import (
    MaskingThresholds,
    amplify,
    coverage,
    masking_thresholds,
    objective,
    residual_deficit,
    solve_breakpoint,
    solve_subgradient,
    subgradient,
)
from noiseblend.spectral import (
    AMP_FLOOR,
    MEL_BANDS,
    STFT_BINS,
    SpectrogramGrid,
    mel_filter,
)

from conftest import cfg_for, mel_grid, problem_from_arrays, random_problem


def single_cell_problem(alpha, bounds=(0.0, 100.0)):
    """One core cell with T=10, S=2; total music mass 100."""
    s = np.zeros((2, 2))
    s[0, 0] = 2.0
    s[0, 1] = 98.0
    t = np.zeros((2, 2))
    t[0, 0] = 10.0
    core = np.zeros((2, 2), dtype=np.uint8)
    core[0, 0] = 1
    return problem_from_arrays(s, t, core, alpha, bounds)


def grid_search_objective(problem, points=10001):
    """Dumb dense evaluation of the objective over the lambda range."""
    lo, hi = problem.lambda_bounds
    lams = np.linspace(lo, hi, points)
    core = problem.core.cells == 1
    s = problem.music.values[core]
    t = problem.thresholds.values.values[core]
    total = problem.music.values.sum()
    deficits = np.maximum(t[None, :] - lams[:, None] * s[None, :], 0.0).sum(axis=1)
    return lams, problem.alpha * lams * total + deficits


class TestThresholds:
    def test_literal_equals_scaled_above_floor(self):
        cfg = cfg_for(16, 8)
        rng = np.random.default_rng(0)
        for _ in range(10):
            base = rng.uniform(1e-3, 1.0, (cfg.n_bins, cfg.n_frames))
            grid = SpectrogramGrid(base, STFT_BINS, cfg)
            lit = masking_thresholds(grid, 21.0, cfg, path="literal").values.values
            sca = masking_thresholds(grid, 21.0, cfg, path="scaled").values.values
            denom = np.maximum(np.abs(sca), 1e-30)
            assert (np.abs(lit - sca) / denom).max() <= 1e-9

    def test_all_below_floor_clamps(self):
        cfg = cfg_for(8, 4)
        zero = SpectrogramGrid(np.zeros((cfg.n_bins, cfg.n_frames)), STFT_BINS, cfg)
        out = masking_thresholds(zero, 21.0, cfg)
        floor_grid = SpectrogramGrid(
            np.full((cfg.n_bins, cfg.n_frames), AMP_FLOOR), STFT_BINS, cfg
        )
        expected = 10 ** (21 / 20) * mel_filter(floor_grid, cfg).values
        np.testing.assert_allclose(out.values.values, expected, rtol=1e-12)

    def test_smr_scale_factor_on_unit_cell(self):
        raised = 10 ** ((20 * np.log10(1.0) + 21) / 20)
        assert raised == pytest.approx(11.2202, abs=1e-4)

    def test_smr_range_validated(self):
        cfg = cfg_for(4, 4)
        grid = SpectrogramGrid(np.ones((cfg.n_bins, cfg.n_frames)), STFT_BINS, cfg)
        with pytest.raises(ValueError):
            masking_thresholds(grid, 55.0, cfg)

    def test_requires_stft_grid(self):
        cfg = cfg_for(4, 4)
        mel = SpectrogramGrid(np.ones((4, 4)), MEL_BANDS, cfg)
        with pytest.raises(ValueError):
            masking_thresholds(mel, 21.0, cfg)


class TestObjective:
    def test_hand_evaluated_piecewise_form(self):
        p = single_cell_problem(0.01)
        assert objective(p, 5.0) == pytest.approx(5.0, abs=1e-12)
        assert objective(p, 0.0) == pytest.approx(10.0, abs=1e-12)
        assert objective(p, 2.0) == pytest.approx(2.0 + 6.0, abs=1e-12)

    def test_at_zero_equals_core_threshold_sum(self):
        p = random_problem(4, alpha=0.14, max_side=24)
        core = p.core.cells == 1
        expected = p.thresholds.values.values[core].sum()
        assert objective(p, 0.0) == pytest.approx(expected, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 50.0), st.floats(0.0, 50.0))
    def test_convexity(self, seed, a, b):
        p = random_problem(seed % 50, alpha=0.14, max_side=16)
        mid = objective(p, (a + b) / 2)
        assert mid <= (objective(p, a) + objective(p, b)) / 2 + 1e-9


class TestSubgradientSolver:
    def test_single_cell_minimizer(self):
        sol = solve_subgradient(single_cell_problem(0.01))
        assert sol.lambda_star == pytest.approx(5.0, abs=1e-3)
        assert sol.solver == "subgradient"

    def test_positive_initial_slope_gives_zero(self):
        sol = solve_subgradient(single_cell_problem(0.05))
        assert sol.lambda_star == pytest.approx(0.0, abs=1e-3)

    def test_vanishing_alpha_reaches_max_ratio(self):
        rng = np.random.default_rng(7)
        s = rng.uniform(0.1, 1.0, (16, 16))
        t = rng.uniform(0.0, 5.0, (16, 16))
        core = (rng.uniform(size=(16, 16)) < 0.25).astype(np.uint8)
        p = problem_from_arrays(s, t, core, 1e-9, bounds=(0.0, 1000.0))
        sol = solve_subgradient(p)
        expected = (t[core == 1] / s[core == 1]).max()
        assert sol.lambda_star == pytest.approx(expected, rel=1e-3)

    def test_matches_breakpoint_objective(self):
        for seed in range(20):
            for alpha in (0.01, 0.14, 1.0):
                p = random_problem(seed, alpha, max_side=32)
                sg = solve_subgradient(p)
                bp = solve_breakpoint(p)
                rel = abs(sg.objective_value - bp.objective_value) / max(
                    1.0, abs(bp.objective_value)
                )
                assert rel <= 1e-4

    def test_init_outside_bounds_rejected(self):
        with pytest.raises(ValueError):
            solve_subgradient(single_cell_problem(0.01), init=500.0)

    def test_respects_lower_bound(self):
        sol = solve_subgradient(single_cell_problem(0.05, bounds=(1.0, 100.0)))
        assert sol.lambda_star == 1.0


class TestBreakpointSolver:
    def test_single_cell_exact(self):
        sol = solve_breakpoint(single_cell_problem(0.01))
        assert sol.lambda_star == 5.0
        assert sol.solver == "breakpoint"

    def test_silent_core_gives_zero(self):
        s = np.zeros((4, 4))
        s[3, 3] = 50.0  # music mass outside the core
        t = np.full((4, 4), 2.0)
        core = np.zeros((4, 4), dtype=np.uint8)
        core[:2, :2] = 1
        sol = solve_breakpoint(problem_from_arrays(s, t, core, 0.14))
        assert sol.lambda_star == 0.0
        assert sol.unmaskable_count == 4

    def test_never_beaten_by_grid_search(self):
        for seed in range(30):
            for alpha in (0.01, 0.14, 1.0):
                p = random_problem(seed + 100, alpha, max_side=32)
                sol = solve_breakpoint(p)
                _, f = grid_search_objective(p, points=4001)
                assert sol.objective_value <= f.min() * (1 + 1e-9) + 1e-9

    def test_huge_alpha_gives_zero(self):
        p = random_problem(3, alpha=1e9)
        assert solve_breakpoint(p).lambda_star == 0.0

    def test_scale_invariance(self):
        for seed in range(10):
            p = random_problem(seed, alpha=0.14, max_side=16)
            scale = 7.3
            scaled = problem_from_arrays(
                p.music.values * scale,
                p.thresholds.values.values * scale,
                p.core.cells,
                p.alpha,
            )
            a = solve_breakpoint(p).lambda_star
            b = solve_breakpoint(scaled).lambda_star
            assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


class TestAmplifyAndCoverage:
    def test_amplify_identity_and_zero(self):
        g = mel_grid(np.random.default_rng(0).uniform(0, 1, (8, 8)))
        np.testing.assert_array_equal(amplify(g, 1.0).values, g.values)
        assert np.all(amplify(g, 0.0).values == 0.0)

    def test_amplify_composes_multiplicatively(self):
        g = mel_grid(np.random.default_rng(1).uniform(0, 1, (8, 8)))
        ab = amplify(amplify(g, 2.5), 0.3)
        direct = amplify(g, 0.75)
        assert np.max(np.abs(ab.values - direct.values)) <= 1e-12

    def test_amplify_rejects_negative(self):
        with pytest.raises(ValueError):
            amplify(mel_grid(np.zeros((2, 2))), -1.0)

    def test_zero_gain_zero_coverage(self):
        rng = np.random.default_rng(9)
        s = rng.uniform(0.0, 1.0, (8, 8))
        t = rng.uniform(0.1, 4.0, (8, 8))  # strictly positive thresholds
        core = (rng.uniform(size=(8, 8)) < 0.3).astype(np.uint8)
        p = problem_from_arrays(s, t, core, 0.14)
        assert coverage(p.music, p.thresholds, p.core, 0.0) == 0.0

    def test_full_coverage_at_max_ratio(self):
        rng = np.random.default_rng(2)
        s = rng.uniform(0.1, 1.0, (12, 12))
        t = rng.uniform(0.0, 4.0, (12, 12))
        core = (rng.uniform(size=(12, 12)) < 0.3).astype(np.uint8)
        p = problem_from_arrays(s, t, core, 0.14)
        lam = (t[core == 1] / s[core == 1]).max()
        assert coverage(p.music, p.thresholds, p.core, lam) == 1.0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 49), st.floats(0, 40), st.floats(0, 40))
    def test_coverage_monotone(self, seed, a, b):
        p = random_problem(seed, alpha=0.14, max_side=16)
        lo, hi = sorted((a, b))
        assert coverage(p.music, p.thresholds, p.core, lo) <= coverage(
            p.music, p.thresholds, p.core, hi
        )

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 49), st.floats(0, 40), st.floats(0, 40))
    def test_deficit_monotone_nonincreasing(self, seed, a, b):
        p = random_problem(seed, alpha=0.14, max_side=16)
        lo, hi = sorted((a, b))
        d_lo = residual_deficit(p.music, p.thresholds, p.core, lo)
        d_hi = residual_deficit(p.music, p.thresholds, p.core, hi)
        assert d_hi <= d_lo + 1e-12


class TestSolutionMetadata:
    def test_solution_reports_coverage_at_lambda_star(self):
        p = random_problem(12, alpha=0.01, max_side=24)
        sol = solve_breakpoint(p)
        assert sol.coverage == pytest.approx(
            coverage(p.music, p.thresholds, p.core, sol.lambda_star)
        )

    def test_subgradient_sign_structure(self):
        p = single_cell_problem(0.01)
        assert subgradient(p, 0.0) < 0
        assert subgradient(p, 6.0) > 0

    def test_thresholds_type_checks_axis(self):
        cfg = cfg_for(4, 4)
        stft = SpectrogramGrid(np.ones((cfg.n_bins, cfg.n_frames)), STFT_BINS, cfg)
        with pytest.raises(ValueError):
            MaskingThresholds(stft)
