"""Error norms, convergence orders, energy/support diagnostics, and the
manufactured verification problem.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from .assembly import assemble_mass
from .errors import ConfigError
from .memory import KernelSpec, StateHistory, exponential_kernel
from .mesh import (Mesh1D, QuadratureRule, default_quad_points, eval_on_elements,
                   full_coefficients, gauss_legendre)


@dataclass(frozen=True)
class ProblemSpec:
    """Continuous problem: domain, horizon, exponent, kernel and data.

    u0 maps x -> value; f maps (x, t) -> value and must accept numpy
    arrays in x. exact_u / exact_y, when given, enable error tables.
    """

    a: float
    b: float
    horizon: float
    p: float
    kernel: KernelSpec
    u0: Callable
    f: Callable
    exact_u: Optional[Callable] = None
    exact_y: Optional[Callable] = None

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ConfigError("T", f"horizon must be positive, got {self.horizon}")
        if not self.p > 1.0:
            raise ConfigError("p", f"exponent must satisfy p > 1, got {self.p}")
        if not self.b > self.a:
            raise ConfigError("domain", f"need b > a, got [{self.a}, {self.b}]")


@dataclass
class RunOutput:
    """Everything one march produced.

    The u/y arrays hold the interior coefficient vectors for every time
    level (shape (N+1, n_interior)); support entries are (left, right)
    node coordinates of the around-zero dead zone or None once it closes.
    """

    mesh: Mesh1D
    times: np.ndarray
    u: np.ndarray
    y: np.ndarray
    energies: np.ndarray
    support: List[Optional[Tuple[float, float]]]
    diagnostics: list
    problem: Optional[ProblemSpec] = None
    errors: Optional[dict] = None
    support_threshold: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


def l2_error(mesh: Mesh1D, coeffs: np.ndarray, exact: Callable,
             quad: Optional[QuadratureRule] = None) -> float:
    """L2 norm of (u_h - exact) by per-element Gauss quadrature."""
    if quad is None:
        quad = gauss_legendre(min(mesh.r + 3, 16))
    x, vals = eval_on_elements(mesh, coeffs, quad.points)
    diff = vals - exact(x)
    total = mesh.h * float(np.einsum("q,mq->", quad.weights, diff * diff))
    return float(np.sqrt(total))


def energy(mesh: Mesh1D, coeffs: np.ndarray,
           mass=None) -> float:
    """Squared L2 norm of the finite-element function, U^T M U."""
    coeffs = np.asarray(coeffs, dtype=float)
    if mass is None:
        mass = assemble_mass(mesh, gauss_legendre(default_quad_points(mesh.r)))
    return float(coeffs @ mass.matvec(coeffs))


def mass_norm(coeffs: np.ndarray, mass) -> float:
    """Discrete L2 norm sqrt(v^T M v)."""
    coeffs = np.asarray(coeffs, dtype=float)
    return float(np.sqrt(coeffs @ mass.matvec(coeffs)))


def convergence_orders(errors, steps) -> np.ndarray:
    """Pairwise observed orders log(e_i/e_{i+1}) / log(s_i/s_{i+1})."""
    errors = np.asarray(errors, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if errors.shape != steps.shape or len(errors) < 2:
        raise ValueError("need matching error/step lists of length >= 2")
    if np.any(errors <= 0.0):
        raise ValueError("errors must be strictly positive")
    if np.any(np.diff(steps) >= 0.0):
        raise ValueError("steps must be strictly decreasing")
    return np.log(errors[:-1] / errors[1:]) / np.log(steps[:-1] / steps[1:])


def fit_order(errors, steps) -> float:
    """Least-squares slope of log(error) against log(step)."""
    errors = np.asarray(errors, dtype=float)
    steps = np.asarray(steps, dtype=float)
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    return float(slope)


def support_gap(mesh: Mesh1D, coeffs: np.ndarray, eta: float):
    """Contiguous run of below-threshold nodes around x = 0.

    Returns the (left, right) coordinates of the extreme nodes of the run,
    or None when the node nearest zero already carries |u| >= eta. Reported
    at node resolution only.
    """
    if not eta > 0.0:
        raise ValueError(f"threshold must be positive, got {eta}")
    full = np.abs(full_coefficients(mesh, coeffs))
    center = int(np.argmin(np.abs(mesh.nodes)))
    if full[center] >= eta:
        return None
    below = full < eta
    left = center
    while left > 0 and below[left - 1]:
        left -= 1
    right = center
    while right < mesh.n_nodes - 1 and below[right + 1]:
        right += 1
    return float(mesh.nodes[left]), float(mesh.nodes[right])


def default_support_threshold(u0_coeffs: np.ndarray) -> float:
    """1e-6 times the largest nodal magnitude of the initial datum."""
    return 1e-6 * float(np.max(np.abs(u0_coeffs)))


def extrema_series(run: RunOutput) -> np.ndarray:
    """(N+1, 2) array of per-step nodal (min, max); flags negative dips."""
    lo = run.u.min(axis=1)
    hi = run.u.max(axis=1)
    return np.column_stack([lo, hi])


def waiting_time(run: RunOutput) -> Optional[float]:
    """First time either dead-zone endpoint leaves its initial node.

    "Leaves" means a move of more than one node spacing; the value carries
    an implicit +- delta uncertainty. None when the boundary never moves
    (or there is no dead zone at t = 0).
    """
    if not run.support or run.support[0] is None:
        return None
    # slack absorbs roundoff so an exactly-one-node move does not count
    spacing = (run.mesh.h / run.mesh.r) * (1 + 1e-9)
    left0, right0 = run.support[0]
    for k, gap in enumerate(run.support):
        if gap is None:
            return float(run.times[k])
        if abs(gap[0] - left0) > spacing or abs(gap[1] - right0) > spacing:
            return float(run.times[k])
    return None


def build_run_output(problem: ProblemSpec, mesh: Mesh1D, cfg, asm, hist: StateHistory,
                     diagnostics: list) -> RunOutput:
    """Assemble the output record from a completed history."""
    mass = asm.mass
    n_levels = hist.n_steps + 1
    energies = np.array([float(hist.u[k] @ mass.matvec(hist.u[k]))
                         for k in range(n_levels)])
    eta = default_support_threshold(hist.u[0])
    if eta > 0.0:
        support = [support_gap(mesh, hist.u[k], eta) for k in range(n_levels)]
    else:
        support = [None] * n_levels
    errors = None
    if problem.exact_u is not None:
        horizon = problem.horizon
        errors = {"u": l2_error(mesh, hist.u[-1],
                                lambda x: problem.exact_u(x, horizon))}
        if problem.exact_y is not None:
            errors["y"] = l2_error(mesh, hist.y[-1],
                                   lambda x: problem.exact_y(x, horizon))
    return RunOutput(mesh=mesh, times=hist.times.copy(),
                     u=hist.u.copy(), y=hist.y.copy(),
                     energies=energies, support=support,
                     diagnostics=list(diagnostics), problem=problem,
                     errors=errors, support_threshold=eta)


# ---------------------------------------------------------------------------
# manufactured verification problem
# ---------------------------------------------------------------------------

def _bump(x):
    return (x * (1.0 - x)) ** 2


def _bump_dx(x):
    return 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x)


def _bump_dxx(x):
    return 2.0 - 12.0 * x + 12.0 * x * x


def plap_of_bump(x, p: float):
    """div(|w'|^(p-2) w') for w = (x(1-x))^2: (p-1)|w'|^(p-2) w''.

    The absolute value keeps fractional powers real; at the interior zeros
    of w' the factor vanishes for p > 2.
    """
    x = np.asarray(x, dtype=float)
    return (p - 1.0) * np.abs(_bump_dx(x)) ** (p - 2.0) * _bump_dxx(x)


def _memory_growth(t, p: float):
    """(e^{(2-p)t} - 1) / (2 - p), continuously extended to t at p = 2."""
    t = np.asarray(t, dtype=float)
    if p == 2.0:
        return t
    return np.expm1((2.0 - p) * t) / (2.0 - p)


def manufactured_example1(p: float, lam: float, horizon: float = 0.1) -> ProblemSpec:
    """Verification problem on (0, 1) with a known smooth solution.

    u(x,t) = (x(1-x))^2 e^{-t} with the exponential kernel lam*e^{-s}; the
    forcing is chosen so that u solves the full equation, and the memory
    term has the closed form lam * psi(x) * e^{-t} * (e^{(2-p)t}-1)/(2-p)
    with psi = div(|u0'|^{p-2} u0') of the spatial profile.
    """
    if not p > 1.0:
        raise ConfigError("p", f"exponent must satisfy p > 1, got {p}")

    def exact_u(x, t):
        return _bump(np.asarray(x, dtype=float)) * np.exp(-t)

    def exact_y(x, t):
        psi = plap_of_bump(x, p)
        return lam * psi * np.exp(-t) * _memory_growth(t, p)

    def forcing(x, t):
        x = np.asarray(x, dtype=float)
        return (-exact_u(x, t)
                - plap_of_bump(x, p) * np.exp(-(p - 1.0) * t)
                - exact_y(x, t))

    return ProblemSpec(a=0.0, b=1.0, horizon=horizon, p=p,
                       kernel=exponential_kernel(lam),
                       u0=_bump, f=forcing,
                       exact_u=exact_u, exact_y=exact_y)
