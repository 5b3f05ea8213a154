"""One-step integrators for linear-gradient DAE systems.

All schemes advance ``A z' = f(z)`` by solving a nonlinear system with a
damped Newton iteration (forward-difference Jacobian by default):

* ``implicit_euler_step``   - ``A (z1 - z0) = dt f(z1)``; conserves any
  linear invariant whose gradient avoids the null space of ``A``.
* ``dg_step``               - discrete-gradient scheme
  ``A (z1 - z0) = dt Sbar gbar(z1, z0)`` for a selectable discrete
  gradient and structure-matrix average.
* ``index1_dg_step``        - the interior-division scheme for index-1
  systems, augmented with a redundant null-space force ``B c`` and the
  explicit constraint block ``B^T S(z1) grad V(z1) = 0``, which lands
  every step on the constraint manifold while conserving ``V``.
* ``gonzalez_constrained_step`` - discrete-gradient scheme for canonical
  systems with holonomic constraints, enforcing ``g(q1) + g(q0) = 0``.

``integrate`` drives any of them, records per-step diagnostics, and
returns the partial trajectory inside a :class:`StepFailure` if a step
fails mid-run.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field as dc_field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import (
    FallbackCompromisedConservation,
    NoConvergence,
    SingularJacobian,
    StepFailure,
    UnderdeterminedSystem,
)
from .gradients import (
    DiscreteGradientKind,
    ScalarField,
    discrete_gradient_info,
    midpoint_gradient,
)
from .model import ConstrainedHamiltonian, LinearGradientDAE

__all__ = [
    "NewtonConfig",
    "NewtonResult",
    "newton_solve",
    "StepResult",
    "implicit_euler_step",
    "dg_step",
    "index1_dg_step",
    "gonzalez_constrained_step",
    "project_to_constraint",
    "StepRecord",
    "Trajectory",
    "integrate",
    "SCHEMES",
]

SCHEMES = (
    "implicit-euler",
    "dg-avf",
    "dg-midpoint",
    "dg-proper",
    "dg-index1",
    "gonzalez",
)

_MAX_HALVINGS = 20


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rules and Jacobian policy for the Newton iteration."""

    residual_tol: float = 1e-12
    step_tol: float = 1e-14
    max_iters: int = 50
    jacobian: str = "forward_difference"  # or "analytic"
    fd_step: float | None = None

    def __post_init__(self):
        if self.residual_tol <= 0 or self.step_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.jacobian not in ("forward_difference", "analytic"):
            raise ValueError(f"unknown jacobian policy {self.jacobian!r}")


class NewtonResult(NamedTuple):
    w: np.ndarray
    iters: int
    residual_norm: float


def _fd_jacobian(residual, w, r0, h):
    J = np.empty((r0.shape[0], w.shape[0]))
    for j in range(w.shape[0]):
        wj = w.copy()
        wj[j] += h
        J[:, j] = (np.asarray(residual(wj), dtype=float) - r0) / h
    return J


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    w0,
    cfg: NewtonConfig = NewtonConfig(),
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
) -> NewtonResult:
    """Damped Newton iteration on ``residual(w) = 0``.

    Success means ``||residual||_inf <= cfg.residual_tol``.  Full steps
    that increase the residual norm are halved up to 20 times; if no
    halving helps, or ``max_iters`` is exhausted, or the step stagnates
    below ``step_tol`` without meeting the tolerance, raises
    :class:`NoConvergence`.  A Jacobian that cannot be solved raises
    :class:`SingularJacobian`.
    """
    w = np.asarray(w0, dtype=float).copy()
    r = np.asarray(residual(w), dtype=float)
    rnorm = float(np.max(np.abs(r))) if r.size else 0.0
    if rnorm <= cfg.residual_tol:
        return NewtonResult(w, 0, rnorm)
    use_analytic = cfg.jacobian == "analytic" and jacobian is not None
    for it in range(1, cfg.max_iters + 1):
        if use_analytic:
            J = np.asarray(jacobian(w), dtype=float)
        else:
            h = cfg.fd_step or np.sqrt(np.finfo(float).eps) * (1.0 + float(np.max(np.abs(w))))
            J = _fd_jacobian(residual, w, r, h)
        try:
            delta = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(f"iteration {it}: {exc}") from exc
        scale = 1.0
        for _ in range(_MAX_HALVINGS + 1):
            w_new = w + scale * delta
            r_new = np.asarray(residual(w_new), dtype=float)
            rnorm_new = float(np.max(np.abs(r_new)))
            if rnorm_new <= cfg.residual_tol or rnorm_new < rnorm:
                break
            scale *= 0.5
        else:
            raise NoConvergence(it, rnorm, "damping failed to reduce the residual")
        step_size = scale * float(np.max(np.abs(delta)))
        w, r, rnorm = w_new, r_new, rnorm_new
        if rnorm <= cfg.residual_tol:
            return NewtonResult(w, it, rnorm)
        if step_size <= cfg.step_tol * (1.0 + float(np.max(np.abs(w)))):
            raise NoConvergence(it, rnorm, "step stagnated below step_tol")
    raise NoConvergence(cfg.max_iters, rnorm)


class StepResult(NamedTuple):
    """New state plus solver diagnostics; ``c`` is empty unless the scheme
    carries a redundant null-space force."""

    state: np.ndarray
    c: np.ndarray
    newton_iters: int
    newton_residual: float
    fallback_used: bool


def implicit_euler_step(dae, z, dt: float, cfg: NewtonConfig = NewtonConfig()) -> StepResult:
    """One step of ``A (z1 - z0) / dt = f(z1)``.

    For uniform index-1 systems the result satisfies the implicit
    constraint to solver tolerance, because the constraint equations are a
    fixed linear combination of the residual rows.
    """
    z = np.asarray(z, dtype=float)
    A = dae.A

    def residual(zp):
        return A @ (zp - z) / dt - np.asarray(dae.f(zp), dtype=float)

    jac = None
    f_jacobian = getattr(dae, "f_jacobian", None)
    if f_jacobian is not None and cfg.jacobian == "analytic":
        jac = lambda zp: A / dt - np.asarray(f_jacobian(zp), dtype=float)
    sol = newton_solve(residual, z, cfg, jacobian=jac)
    return StepResult(sol.w, np.zeros(0), sol.iters, sol.residual_norm, False)


def _averaged_S(dae: LinearGradientDAE, z, zp, mode: str):
    if mode == "average":
        return 0.5 * (dae.S(zp) + dae.S(z))
    if mode == "left":
        return dae.S(z)
    raise ValueError(f"unknown structure-matrix average {mode!r}")


def dg_step(
    dae: LinearGradientDAE,
    kind: DiscreteGradientKind,
    z,
    dt: float,
    cfg: NewtonConfig = NewtonConfig(),
    s_average: str = "average",
) -> StepResult:
    """One step of ``A (z1 - z0) / dt = Sbar(z1, z0) gbar(z1, z0)``.

    ``Sbar`` averages the structure matrix between the endpoints (or uses
    the left endpoint).  If ``A`` is singular and the Newton Jacobian
    comes out singular, the step raises :class:`UnderdeterminedSystem`:
    the scheme leaves null-space components free and the index-1 scheme
    should be used instead.
    """
    z = np.asarray(z, dtype=float)
    A = dae.A
    V = dae.V

    def residual(zp):
        gbar, _ = discrete_gradient_info(kind, V, zp, z)
        return A @ (zp - z) / dt - _averaged_S(dae, z, zp, s_average) @ gbar

    try:
        sol = newton_solve(residual, z, cfg)
    except SingularJacobian as exc:
        if dae.subspaces.nullity > 0:
            raise UnderdeterminedSystem(
                "singular Jacobian with singular mass matrix: the scheme does not "
                "determine the null-space components; use the index-1 scheme"
            ) from exc
        raise
    _, fallback = discrete_gradient_info(kind, V, sol.w, z)
    return StepResult(sol.w, np.zeros(0), sol.iters, sol.residual_norm, fallback)


def index1_dg_step(
    dae: LinearGradientDAE,
    z,
    dt: float,
    cfg: NewtonConfig = NewtonConfig(),
    s_average: str = "average",
    kind: DiscreteGradientKind | None = None,
) -> StepResult:
    """Interior-division scheme for index-1 systems, with redundancy.

    Solves, for ``(z1, c)`` with ``c`` of length ``nullity(A)``,

        A (z1 - z0) / dt = Sbar gbar_P(z1, z0) + B c ,
        B^T S(z1) grad V(z1) = 0 ,

    where ``B`` spans the orthogonal complement of ``range(A)`` and
    ``gbar_P`` is the interior-division gradient.  The extra block makes
    the step land exactly on the constraint manifold; the redundant force
    ``c`` is zero in exact arithmetic, and its computed size is a solver
    diagnostic.  A midpoint fallback inside the final gradient evaluation
    is reported via the result flag and a
    :class:`FallbackCompromisedConservation` warning.
    """
    z = np.asarray(z, dtype=float)
    if kind is None:
        kind = DiscreteGradientKind("proper")
    elif kind.variant != "proper":
        raise ValueError("the index-1 scheme is defined for the interior-division gradient")
    A = dae.A
    V = dae.V
    B = dae.subspaces.range_perp_basis
    d = dae.dim
    ell = B.shape[1]

    def constraint_block(zp):
        return B.T @ (dae.S(zp) @ np.asarray(V.gradient(zp), dtype=float))

    def residual(w):
        zp, c = w[:d], w[d:]
        gbar, _ = discrete_gradient_info(kind, V, zp, z)
        dyn = A @ (zp - z) / dt - _averaged_S(dae, z, zp, s_average) @ gbar - B @ c
        return np.concatenate([dyn, constraint_block(zp)])

    w0 = np.concatenate([z, np.zeros(ell)])
    sol = newton_solve(residual, w0, cfg)
    z_new, c = sol.w[:d], sol.w[d:]
    _, fallback = discrete_gradient_info(kind, V, z_new, z)
    if fallback:
        warnings.warn(
            "interior-division gradient fell back to the midpoint form; "
            "exact conservation is compromised for this step",
            FallbackCompromisedConservation,
            stacklevel=2,
        )
    return StepResult(z_new, c, sol.iters, sol.residual_norm, fallback)


def gonzalez_constrained_step(
    system: ConstrainedHamiltonian,
    z,
    dt: float,
    cfg: NewtonConfig = NewtonConfig(),
) -> StepResult:
    """Discrete-gradient step for a constrained canonical system.

    With state ``(q, p, lam)`` and the midpoint discrete gradient
    ``(gbar_q, gbar_p)`` of the Hamiltonian over the ``(q, p)`` pair,
    solves

        (q1 - q0) / dt = gbar_p ,
        (p1 - p0) / dt = -gbar_q - Jbar_g^T (lam1 + lam0) / 2 ,
        g(q1) + g(q0) = 0 ,

    where row ``j`` of ``Jbar_g`` is the midpoint discrete gradient of the
    ``j``-th constraint over ``(q1, q0)``.  Conserves the Hamiltonian and
    flips the sign of any initial constraint violation (so consistent
    initial data stays on the constraint manifold).
    """
    z = np.asarray(z, dtype=float)
    n, h = system.n, system.h
    q0, p0, lam0 = z[:n], z[n : 2 * n], z[2 * n :]
    H = system.hamiltonian
    g0 = system.constraint_values(q0)

    def residual(w):
        q1, p1, lam1 = w[:n], w[n : 2 * n], w[2 * n :]
        gbar = midpoint_gradient(H, np.concatenate([q1, p1]), np.concatenate([q0, p0]))
        lam_mid = 0.5 * (lam1 + lam0)
        force = np.zeros(n)
        for j, g in enumerate(system.constraints):
            force += lam_mid[j] * midpoint_gradient(g, q1, q0)
        return np.concatenate(
            [
                (q1 - q0) / dt - gbar[n:],
                (p1 - p0) / dt + gbar[:n] + force,
                0.5 * (system.constraint_values(q1) + g0),
            ]
        )

    sol = newton_solve(residual, z, cfg)
    return StepResult(sol.w, np.zeros(0), sol.iters, sol.residual_norm, False)


def project_to_constraint(dae, z0, cfg: NewtonConfig = NewtonConfig()) -> np.ndarray:
    """Correct a state onto the implicit-constraint manifold.

    The correction is restricted to the null-space directions of the mass
    matrix (``z0 + E s`` with ``E`` the orthonormal null basis), which
    leaves the determined components of the state untouched; the shift
    ``s`` solves ``B^T f(z0 + E s) = 0`` by Newton iteration.  States
    already on the manifold come back unchanged.
    """
    z0 = np.asarray(z0, dtype=float)
    E = dae.subspaces.null_basis
    if E.shape[1] == 0:
        return z0.copy()
    B = dae.subspaces.range_perp_basis

    def residual(s):
        return B.T @ np.asarray(dae.f(z0 + E @ s), dtype=float)

    sol = newton_solve(residual, np.zeros(E.shape[1]), cfg)
    return z0 + E @ sol.w


@dataclass(frozen=True)
class StepRecord:
    """State and diagnostics after one accepted step (or the initial state)."""

    step_index: int
    time: float
    state: np.ndarray
    invariant_values: dict[str, float]
    constraint_residual_norm: float
    redundant_c_norm: float
    newton_iters: int
    newton_residual: float
    fallback_used: bool


@dataclass
class Trajectory:
    """Sequence of step records produced by :func:`integrate`."""

    records: list[StepRecord] = dc_field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final_state(self) -> np.ndarray:
        return self.records[-1].state

    def states(self) -> np.ndarray:
        return np.array([r.state for r in self.records])

    def invariant_series(self, name: str) -> np.ndarray:
        return np.array([r.invariant_values[name] for r in self.records])


def _constraint_norm(target, z: np.ndarray) -> float:
    if isinstance(target, ConstrainedHamiltonian):
        return float(np.linalg.norm(target.constraint_values(z[: target.n])))
    from .model import implicit_constraint_residual

    res = implicit_constraint_residual(target, z)
    return float(np.linalg.norm(res)) if res.size else 0.0


def _make_stepper(target, scheme: str, cfg: NewtonConfig, s_average: str):
    if scheme == "implicit-euler":
        if isinstance(target, LinearGradientDAE):
            target = target.as_general()
        return lambda z, dt: implicit_euler_step(target, z, dt, cfg)
    if scheme in ("dg-avf", "dg-midpoint", "dg-proper"):
        if not isinstance(target, LinearGradientDAE):
            raise ValueError(f"scheme {scheme!r} needs a linear-gradient system")
        kind = DiscreteGradientKind(scheme.removeprefix("dg-"))
        return lambda z, dt: dg_step(target, kind, z, dt, cfg, s_average)
    if scheme == "dg-index1":
        if not isinstance(target, LinearGradientDAE):
            raise ValueError("scheme 'dg-index1' needs a linear-gradient system")
        return lambda z, dt: index1_dg_step(target, z, dt, cfg, s_average)
    if scheme == "gonzalez":
        if not isinstance(target, ConstrainedHamiltonian):
            raise ValueError("scheme 'gonzalez' needs a constrained canonical system")
        return lambda z, dt: gonzalez_constrained_step(target, z, dt, cfg)
    raise ValueError(f"unknown scheme {scheme!r}; available: {', '.join(SCHEMES)}")


def integrate(
    target,
    scheme: str,
    z0,
    dt: float,
    steps: int,
    observers: Sequence[ScalarField] = (),
    cfg: NewtonConfig = NewtonConfig(),
    s_average: str = "average",
) -> Trajectory:
    """Advance ``target`` by ``steps`` steps of size ``dt``.

    ``target`` is a :class:`GeneralDAE`, :class:`LinearGradientDAE` or
    :class:`ConstrainedHamiltonian`, matched to the scheme.  Observers are
    named scalar fields whose values are recorded at every state.  The
    initial guess for each Newton solve is the previous state (with zero
    redundant force); the index-1 scheme first projects ``z0`` onto the
    constraint manifold.  Returns ``steps + 1`` records; a failing step
    raises :class:`StepFailure` carrying the partial trajectory.
    """
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    stepper = _make_stepper(target, scheme, cfg, s_average)
    z = np.asarray(z0, dtype=float).copy()
    if scheme == "dg-index1":
        z = project_to_constraint(target, z, cfg)

    def observe(state):
        return {obs.name or f"observer{i}": float(obs.value(state)) for i, obs in enumerate(observers)}

    traj = Trajectory()
    traj.records.append(
        StepRecord(0, 0.0, z.copy(), observe(z), _constraint_norm(target, z), 0.0, 0, 0.0, False)
    )
    for m in range(1, steps + 1):
        try:
            result = stepper(z, dt)
        except Exception as exc:  # noqa: BLE001 - converted to a typed failure
            raise StepFailure(m, exc, traj) from exc
        z = result.state
        traj.records.append(
            StepRecord(
                step_index=m,
                time=m * dt,
                state=z.copy(),
                invariant_values=observe(z),
                constraint_residual_norm=_constraint_norm(target, z),
                redundant_c_norm=float(np.linalg.norm(result.c)) if result.c.size else 0.0,
                newton_iters=result.newton_iters,
                newton_residual=result.newton_residual,
                fallback_used=result.fallback_used,
            )
        )
    return traj
