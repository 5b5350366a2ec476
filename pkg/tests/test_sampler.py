import math

import numpy as np
import pytest

from randstep import (
    build_grid,
    centred_gaussian,
    exact_flow,
    exact_method,
    exact_states,
    flow_lipschitz,
    heat_1d,
    implicit_euler,
    measure_truncation_constant,
    run_deterministic,
    run_ensemble,
    run_randomised,
    scalar_linear,
    trajectory_stream,
    two_stage,
)

HEUN = (0.5, 0.5, 1.0, 1.0)


class TestDeterministic:
    def test_implicit_euler_closed_form(self):
        problem = scalar_linear(-1.0)
        grid = build_grid(1.0, 10)
        trajectory = run_deterministic(problem, implicit_euler(), grid, np.array([1.0]))
        assert trajectory.states[-1, 0] == pytest.approx((1.0 / 1.1) ** 10, rel=1e-14)
        assert trajectory.states[-1, 0] == pytest.approx(0.385543, abs=1e-6)
        assert trajectory.errors[-1, 0] == pytest.approx(math.exp(-1.0) - (1.0 / 1.1) ** 10, rel=1e-12)
        assert trajectory.errors[-1, 0] == pytest.approx(-0.017664, abs=1e-6)

    def test_exact_method_zero_errors(self):
        problem = heat_1d(6)
        grid = build_grid(1.0, 13, 1.4)
        theta = np.arange(1.0, 7.0) ** -2
        trajectory = run_deterministic(problem, exact_method(), grid, theta)
        assert np.max(np.abs(trajectory.errors)) <= 1e-14

    def test_zero_solution(self):
        problem = heat_1d(4)
        grid = build_grid(1.0, 8)
        trajectory = run_deterministic(problem, implicit_euler(), grid, np.zeros(4))
        assert np.all(trajectory.states == 0.0)
        assert np.all(trajectory.errors == 0.0)

    def test_mesh_exceeding_h_star(self):
        with pytest.raises(ValueError):
            run_deterministic(
                scalar_linear(-1.0), implicit_euler(h_star=0.05), build_grid(1.0, 10),
                np.array([1.0]),
            )


class TestExactStates:
    def test_against_direct_flow(self):
        problem = heat_1d(5, alpha=(1.0, 0.5))
        grid = build_grid(1.0, 9, 1.6)
        theta = np.linspace(1.0, 0.2, 5)
        states = exact_states(problem, grid, theta)
        for k, t in enumerate(grid.points):
            direct = exact_flow(problem, float(t), 0.0, theta)
            assert np.allclose(states[k], direct, rtol=1e-11, atol=1e-14)


class TestRandomised:
    def test_zero_amplitude_reduces_to_deterministic(self):
        problem = scalar_linear(-1.0)
        grid = build_grid(1.0, 10)
        method = implicit_euler()
        det = run_deterministic(problem, method, grid, np.array([1.0]))
        noise = centred_gaussian(1, c_xi=0.0)
        rand = run_randomised(problem, method, noise, grid, np.array([1.0]), trajectory_stream(1, 0))
        assert np.array_equal(det.states, rand.states)
        assert np.array_equal(det.errors, rand.errors)

    def test_single_step_exact_method_error_is_noise(self):
        problem = heat_1d(3)
        grid = build_grid(0.5, 1)
        noise = centred_gaussian(3, p=1.0)
        trajectory = run_randomised(
            problem, exact_method(), noise, grid, np.ones(3), trajectory_stream(2, 0)
        )
        assert np.allclose(trajectory.errors[1], -trajectory.noise[0], atol=1e-15)
        assert np.all(trajectory.errors[0] == 0.0)

    def test_fixed_seed_bitwise_identical(self):
        problem = scalar_linear(1.0)
        grid = build_grid(1.0, 16)
        method = two_stage(*HEUN)
        noise = centred_gaussian(1, p=1.0)
        a = run_randomised(problem, method, noise, grid, np.array([1.0]), trajectory_stream(7, 3))
        b = run_randomised(problem, method, noise, grid, np.array([1.0]), trajectory_stream(7, 3))
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.noise, b.noise)

    def test_perturbed_initial_state(self):
        problem = heat_1d(2)
        grid = build_grid(1.0, 4)
        noise = centred_gaussian(2, p=1.0)
        trajectory = run_randomised(
            problem, exact_method(), noise, grid, np.ones(2), trajectory_stream(11, 0),
            perturb_initial=True,
        )
        assert np.linalg.norm(trajectory.errors[0]) > 0.0


class TestEnsemble:
    def test_m1_equals_single_run(self):
        problem = scalar_linear(-1.0)
        grid = build_grid(1.0, 8)
        method = implicit_euler()
        noise = centred_gaussian(1, p=1.0)
        ensemble = run_ensemble(problem, method, noise, grid, np.array([1.0]), 1, 99)
        single = run_randomised(
            problem, method, noise, grid, np.array([1.0]), trajectory_stream(99, 0)
        )
        assert np.array_equal(ensemble.states[0], single.states)

    def test_worker_counts_agree(self):
        problem = heat_1d(4)
        grid = build_grid(1.0, 6)
        method = implicit_euler()
        noise = centred_gaussian(4, p=1.0)
        theta = np.ones(4)
        one = run_ensemble(problem, method, noise, grid, theta, 10, 5, workers=1)
        many = run_ensemble(problem, method, noise, grid, theta, 10, 5, workers=3)
        assert np.array_equal(one.states, many.states)
        assert np.array_equal(one.errors, many.errors)
        assert one.fingerprint == many.fingerprint

    def test_zero_amplitude_trajectories_identical(self):
        problem = heat_1d(2)
        grid = build_grid(1.0, 5)
        noise = centred_gaussian(2, c_xi=0.0)
        ensemble = run_ensemble(problem, implicit_euler(), noise, grid, np.ones(2), 4, 0)
        for i in range(1, 4):
            assert np.array_equal(ensemble.states[i], ensemble.states[0])

    def test_rejects_empty_ensemble(self):
        with pytest.raises(ValueError):
            run_ensemble(
                heat_1d(2), implicit_euler(), centred_gaussian(2), build_grid(1.0, 4),
                np.ones(2), 0, 1,
            )

    def test_trajectory_view(self):
        problem = scalar_linear(-0.5)
        grid = build_grid(1.0, 6)
        noise = centred_gaussian(1, p=1.0)
        ensemble = run_ensemble(problem, implicit_euler(), noise, grid, np.array([1.0]), 3, 21)
        view = ensemble.trajectory(2)
        assert np.array_equal(view.states, ensemble.states[2])
        assert np.array_equal(view.noise, ensemble.noise[2])

    def test_summary_serialisable(self):
        import json

        problem = scalar_linear(-0.5)
        grid = build_grid(1.0, 6)
        noise = centred_gaussian(1, p=1.0)
        ensemble = run_ensemble(problem, implicit_euler(), noise, grid, np.array([1.0]), 3, 21)
        summary = ensemble.summary_dict(include_step_norms=True)
        encoded = json.dumps(summary)
        decoded = json.loads(encoded)
        assert decoded["size"] == 3
        assert len(decoded["max_errors"]) == 3
        assert len(decoded["step_error_norms"][0]) == grid.num_steps + 1
        assert decoded["max_errors"][1] == pytest.approx(
            float(ensemble.error_h_norms()[1].max())
        )


class TestPathwiseGronwallDominance:
    def test_every_trajectory_below_pathwise_bound(self):
        # max_k |e_k| <= (|e_0| + C h^q T + sum_k |xi_k|) e^(L_phi T)
        # with per-run recorded defect and noise-norm constants
        problem = scalar_linear(1.0)
        h_star = 0.25
        method = two_stage(*HEUN, h_star=h_star)
        grid = build_grid(1.0, 8)
        noise = centred_gaussian(1, p=1.0, c_xi=1.0)
        q = method.order
        l_phi = flow_lipschitz(problem, h_star)
        ensemble = run_ensemble(
            problem, method, noise, grid, np.array([1.0]), 200, 31, record_defects=True
        )
        horizon = grid.horizon
        h = grid.mesh
        for i in range(ensemble.size):
            trajectory = ensemble.trajectory(i)
            c_run = float(np.max(trajectory.defects / grid.steps ** (q + 1.0)))
            noise_sum = float(np.sum(np.linalg.norm(trajectory.noise, axis=1)))
            bound = (0.0 + c_run * h**q * horizon + noise_sum) * math.exp(l_phi * horizon)
            realised = float(trajectory.error_h_norms().max())
            assert realised <= bound * (1 + 1e-12)


class TestDiffusionScalingDemonstration:
    def test_sde_like_noise_runs_without_convergence(self):
        # p = -1/2 gives per-step noise of std ~ sqrt(h): the trajectory
        # error does not vanish with the mesh (demonstration mode only)
        problem = scalar_linear(-1.0)
        noise = centred_gaussian(1, p=-0.5, c_xi=1.0)
        levels = []
        for n in (16, 256):
            grid = build_grid(1.0, n)
            ensemble = run_ensemble(problem, implicit_euler(), noise, grid, np.array([1.0]), 200, 3)
            norms = ensemble.error_h_norms()
            levels.append(float(np.mean(norms.max(axis=1))))
        assert levels[1] > 0.3 * levels[0]  # no decay remotely like h^p, p > 0


class TestTruncationConstant:
    def test_exact_method_has_zero_defect(self):
        problem = heat_1d(3)
        grid = build_grid(1.0, 6)
        assert measure_truncation_constant(problem, exact_method(), grid, np.ones(3), 1.0) == 0.0

    def test_implicit_euler_scalar_defect_scale(self):
        # one-step defect of implicit Euler on u' = -u is ~ h^2/2 at state 1
        problem = scalar_linear(-1.0)
        grid = build_grid(0.5, 64)
        c = measure_truncation_constant(problem, implicit_euler(), grid, np.array([1.0]))
        assert c == pytest.approx(0.5, rel=0.05)
