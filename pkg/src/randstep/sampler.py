"""Deterministic and randomised one-step recursions and Monte Carlo ensembles.

The randomised recursion perturbs each step of the underlying method:

    U_(k+1) = psi(h_k, t_k, U_k) + xi_k(h_k),        U_0 = theta,

and the error sequence is measured against the exact flow,

    e_k = u(t_k) - U_k,
    e_(k+1) = phi(h_k, t_k, u(t_k)) - psi(h_k, t_k, U_k) - xi_k(h_k).

The exact states u(t_k) are computed once per grid from the flow oracle
and shared by every trajectory.  Ensembles derive one child stream per
trajectory from (master_seed, trajectory_index), so results are
bit-identical for any worker count; trajectories are reduced in index
order.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .grids import TimeGrid
from .integrators import MethodConfig, step
from .problems import Problem, exact_flow
from .randomisation import NoiseModel, noise_path

__all__ = [
    "Trajectory",
    "Ensemble",
    "exact_states",
    "trajectory_stream",
    "run_deterministic",
    "run_randomised",
    "run_ensemble",
    "measure_truncation_constant",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States U_0..U_N, errors e_k = u(t_k) - U_k, and optional records.

    noise holds the drawn perturbations xi_k (shape (N, J)); defects the
    one-step method defects |phi(h_k, t_k, U_k) - psi(h_k, t_k, U_k)|_H
    along the realised path (shape (N,)).
    """

    grid: TimeGrid
    states: np.ndarray
    errors: np.ndarray
    noise: np.ndarray | None = None
    defects: np.ndarray | None = None

    def error_h_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.errors * self.errors, axis=-1))


@dataclass(frozen=True, eq=False)
class Ensemble:
    """M trajectories stored as stacked arrays (leading axis = trajectory)."""

    grid: TimeGrid
    states: np.ndarray
    errors: np.ndarray
    master_seed: int
    fingerprint: str
    noise: np.ndarray | None = None
    defects: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.states.shape[0]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(
            self.grid,
            self.states[i],
            self.errors[i],
            None if self.noise is None else self.noise[i],
            None if self.defects is None else self.defects[i],
        )

    def error_h_norms(self) -> np.ndarray:
        """Per-trajectory, per-step |e_k|_H, shape (M, N + 1)."""
        return np.sqrt(np.sum(self.errors * self.errors, axis=-1))

    def summary_dict(self, include_step_norms: bool = False) -> dict:
        """JSON-serialisable summary: per-trajectory max error, optionally
        the full per-step error norms."""
        norms = self.error_h_norms()
        out = {
            "size": int(self.size),
            "master_seed": int(self.master_seed),
            "fingerprint": self.fingerprint,
            "mesh": self.grid.mesh,
            "max_errors": [float(v) for v in norms.max(axis=1)],
        }
        if include_step_norms:
            out["step_error_norms"] = [[float(v) for v in row] for row in norms]
        return out


def exact_states(problem: Problem, grid: TimeGrid, theta: np.ndarray) -> np.ndarray:
    """u(t_k) along the grid from the exact-flow oracle, shape (N + 1, J)."""
    theta = np.asarray(theta, dtype=float)
    out = np.empty((grid.num_steps + 1, theta.size))
    out[0] = theta
    for k in range(grid.num_steps):
        out[k + 1] = exact_flow(problem, float(grid.steps[k]), float(grid.points[k]), out[k])
    return out


def trajectory_stream(master_seed: int, index: int) -> np.random.Generator:
    """Child stream for one trajectory, independent of worker placement."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def _check_mesh(method: MethodConfig, grid: TimeGrid) -> None:
    if grid.mesh > method.h_star:
        raise ValueError(f"grid mesh {grid.mesh} exceeds the method's h* = {method.h_star}")


def _advance_block(
    problem: Problem,
    method: MethodConfig,
    grid: TimeGrid,
    exact: np.ndarray,
    u0: np.ndarray,
    noise_block: np.ndarray | None,
    record_defects: bool,
):
    """Run the recursion for a block of trajectories, states shape (B, J).

    All operations are elementwise per trajectory (plus mode-axis norms),
    so splitting a block changes nothing in the computed floats.
    """
    n = grid.num_steps
    b = u0.shape[0]
    states = np.empty((b, n + 1, u0.shape[1]))
    states[:, 0] = u0
    defects = np.empty((b, n)) if record_defects else None
    u = u0
    for k in range(n):
        h = float(grid.steps[k])
        t = float(grid.points[k])
        v = step(method, problem, h, t, u)
        if record_defects:
            gap = exact_flow(problem, h, t, u) - v
            defects[:, k] = np.sqrt(np.sum(gap * gap, axis=-1))
        if noise_block is not None:
            v = v + noise_block[:, k]
        states[:, k + 1] = v
        u = v
    errors = exact[None, :, :] - states
    return states, errors, defects


def run_deterministic(
    problem: Problem,
    method: MethodConfig,
    grid: TimeGrid,
    theta: np.ndarray,
    record_defects: bool = False,
) -> Trajectory:
    """Noise-free recursion u_(k+1) = psi(h_k, t_k, u_k)."""
    _check_mesh(method, grid)
    theta = np.asarray(theta, dtype=float)
    exact = exact_states(problem, grid, theta)
    states, errors, defects = _advance_block(
        problem, method, grid, exact, theta[None, :], None, record_defects
    )
    return Trajectory(grid, states[0], errors[0], None, None if defects is None else defects[0])


def _draw_noise(
    noise: NoiseModel,
    stream: np.random.Generator,
    grid: TimeGrid,
    perturb_initial: bool,
) -> tuple[np.ndarray | None, np.ndarray]:
    """All randomness of one trajectory, in a fixed consumption order."""
    init = None
    if perturb_initial:
        init = noise_path(noise, stream, grid.steps[:1])[0]
    return init, noise_path(noise, stream, grid.steps)


def run_randomised(
    problem: Problem,
    method: MethodConfig,
    noise: NoiseModel,
    grid: TimeGrid,
    theta: np.ndarray,
    stream: np.random.Generator,
    record_defects: bool = False,
    perturb_initial: bool = False,
) -> Trajectory:
    """Randomised recursion U_(k+1) = psi(h_k, t_k, U_k) + xi_k(h_k)."""
    _check_mesh(method, grid)
    theta = np.asarray(theta, dtype=float)
    exact = exact_states(problem, grid, theta)
    init, path = _draw_noise(noise, stream, grid, perturb_initial)
    u0 = theta if init is None else theta + init
    states, errors, defects = _advance_block(
        problem, method, grid, exact, u0[None, :], path[None, :, :], record_defects
    )
    return Trajectory(grid, states[0], errors[0], path, None if defects is None else defects[0])


def _run_chunk(args):
    (problem, method, noise, grid, theta, exact, indices, master_seed,
     record_defects, perturb_initial) = args
    paths = np.empty((len(indices), grid.num_steps, theta.size))
    u0 = np.empty((len(indices), theta.size))
    for row, i in enumerate(indices):
        stream = trajectory_stream(master_seed, i)
        init, paths[row] = _draw_noise(noise, stream, grid, perturb_initial)
        u0[row] = theta if init is None else theta + init
    states, errors, defects = _advance_block(
        problem, method, grid, exact, u0, paths, record_defects
    )
    return states, errors, paths, defects


def _fingerprint(*parts) -> str:
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            digest.update(np.ascontiguousarray(part).tobytes())
        else:
            digest.update(repr(part).encode())
        digest.update(b"|")
    return digest.hexdigest()


def run_ensemble(
    problem: Problem,
    method: MethodConfig,
    noise: NoiseModel,
    grid: TimeGrid,
    theta: np.ndarray,
    m: int,
    master_seed: int,
    workers: int = 1,
    record_defects: bool = False,
    perturb_initial: bool = False,
    fingerprint: str | None = None,
) -> Ensemble:
    """M independent randomised trajectories with per-trajectory substreams."""
    if m < 1:
        raise ValueError(f"ensemble size must be >= 1, got {m}")
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    _check_mesh(method, grid)
    theta = np.asarray(theta, dtype=float)
    exact = exact_states(problem, grid, theta)
    chunks = [idx for idx in np.array_split(np.arange(m), min(workers, m)) if idx.size]
    jobs = [
        (problem, method, noise, grid, theta, exact, idx, master_seed,
         record_defects, perturb_initial)
        for idx in chunks
    ]
    if workers == 1 or len(jobs) == 1:
        results = [_run_chunk(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chunk, jobs))
    states = np.concatenate([r[0] for r in results])
    errors = np.concatenate([r[1] for r in results])
    paths = np.concatenate([r[2] for r in results])
    defects = np.concatenate([r[3] for r in results]) if record_defects else None
    if fingerprint is None:
        fingerprint = _fingerprint(problem, method, noise, grid.points, theta, m, master_seed)
    return Ensemble(grid, states, errors, master_seed, fingerprint, paths, defects)


def measure_truncation_constant(
    problem: Problem,
    method: MethodConfig,
    grid: TimeGrid,
    theta: np.ndarray,
    order: float | None = None,
) -> float:
    """Largest one-step defect ratio |phi - psi|_H / h^(q+1) along the
    exact solution states, an empirical stand-in for the truncation
    constant of the method on this problem."""
    q = method.order if order is None else order
    exact = exact_states(problem, grid, theta)
    worst = 0.0
    for k in range(grid.num_steps):
        h = float(grid.steps[k])
        t = float(grid.points[k])
        gap = exact[k + 1] - step(method, problem, h, t, exact[k])
        defect = float(np.linalg.norm(gap))
        if defect > 0.0:
            worst = max(worst, defect / h ** (q + 1.0))
    return worst
