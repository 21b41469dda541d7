"""Memory kernel and the discrete Volterra quadratures of the time scheme.

At step k the memory integral over [0, t_{k+1/2}] is approximated by a
composite trapezoid on the stored time levels; the value on the final
half-interval node t_{k+1/2} is the Crank-Nicolson average of levels k and
k+1, which is what produces the delta/8 shares on both of those levels.
Collecting the k+1 unknowns on the left reduces the whole relation to

    alpha * M Y^{k+1} + beta * M U^{k+1} = R,

with alpha = 1/2 + (delta/8) g(0) and beta = -(g(0)/2 + (delta/8) g'(0)).
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .banded import BandedSymMatrix
from .errors import IllPosedStepError

QUADRATURE_MODES = ("consistent", "literal")


@dataclass(frozen=True)
class KernelSpec:
    """Memory kernel g and its derivative gp as functions of the time lag."""

    g: Callable
    gp: Callable
    lam: Optional[float] = None


def exponential_kernel(lam: float) -> KernelSpec:
    """The built-in family lam * exp(-s); its derivative is its negative."""

    def g(s):
        return lam * np.exp(-np.asarray(s, dtype=float))

    def gp(s):
        return -lam * np.exp(-np.asarray(s, dtype=float))

    return KernelSpec(g=g, gp=gp, lam=float(lam))


def _kernel_values(fn, lags: np.ndarray) -> np.ndarray:
    """Evaluate a kernel callable on an array, tolerating scalar-only ones."""
    try:
        vals = np.asarray(fn(lags), dtype=float)
    except (TypeError, ValueError):
        vals = None
    if vals is None or vals.shape != lags.shape:
        vals = np.array([float(fn(s)) for s in lags])
    return vals


@dataclass(frozen=True)
class VolterraWeights:
    """Trapezoid weights over the stored levels t_0..t_k plus the averaged node.

    node_weights[j] multiplies g(node_lags[j]) * value(t_j). The final
    half-interval node contributes half_weight * g(0) on value(t_k) and the
    same on value(t_{k+1}); the latter is the implicit share the caller
    moves to the left-hand side.
    """

    node_weights: np.ndarray
    node_lags: np.ndarray
    half_weight: float

    def total(self) -> float:
        """Weight sum for a constant kernel: equals t_{k+1/2} exactly."""
        return float(np.sum(self.node_weights) + 2.0 * self.half_weight)


def volterra_weights(k: int, delta: float) -> VolterraWeights:
    """Weights of the memory quadrature at step k.

    For k >= 1: delta/2 at t_0, delta at t_1..t_{k-1}, 3*delta/4 at t_k,
    and delta/8 on each of the two averaged values. k = 0 collapses to the
    two-point trapezoid over the single half interval [0, t_{1/2}], with
    delta/4 at t_0.
    """
    if k < 0:
        raise ValueError(f"step index must be >= 0, got {k}")
    t_half = (k + 0.5) * delta
    if k == 0:
        weights = np.array([delta / 4.0])
        lags = np.array([t_half])
    else:
        weights = np.full(k + 1, delta)
        weights[0] = delta / 2.0
        weights[k] = 3.0 * delta / 4.0
        lags = t_half - delta * np.arange(k + 1)
    return VolterraWeights(node_weights=weights, node_lags=lags,
                           half_weight=delta / 8.0)


def forcing_weights(k: int, delta: float, mode: str = "consistent"):
    """Weights/lags over the load levels [F(t_0), F(t_1/2), .., F(t_{k+1/2})].

    The consistent mode is the composite trapezoid on the half-step grid
    (sums to t_{k+1/2} for a constant kernel). The literal mode adds one
    extra delta * g(0) share on the final level, reproducing a printed
    upper summation limit that double-counts that node.
    """
    if mode not in QUADRATURE_MODES:
        raise ValueError(f"quadrature mode must be one of {QUADRATURE_MODES}, "
                         f"got {mode!r}")
    t_half = (k + 0.5) * delta
    if k == 0:
        weights = np.array([delta / 4.0, delta / 4.0])
        lags = np.array([t_half, 0.0])
    else:
        # nodes t_0, t_{1/2}, t_{3/2}, ..., t_{k+1/2}
        weights = np.full(k + 2, delta)
        weights[0] = delta / 4.0
        weights[1] = 3.0 * delta / 4.0
        weights[k + 1] = delta / 2.0
        lags = np.empty(k + 2)
        lags[0] = t_half
        lags[1:] = delta * (k - np.arange(k + 1))
    if mode == "literal":
        weights = weights.copy()
        weights[-1] += delta
    return weights, lags


class StateHistory:
    """Dense record of one march: coefficient vectors and half-step loads.

    Arrays are preallocated for the full horizon; `k` always points at the
    newest completed level. loads[0] holds the load at t = 0 and
    loads[1 + j] the load at t_{j+1/2}; the memory quadratures need the
    whole tail, which is why nothing is discarded.
    """

    def __init__(self, n_dofs: int, n_steps: int, delta: float):
        if n_steps < 1:
            raise ValueError(f"need at least one step, got {n_steps}")
        if delta <= 0.0:
            raise ValueError(f"time step must be positive, got {delta}")
        self.n_dofs = int(n_dofs)
        self.n_steps = int(n_steps)
        self.delta = float(delta)
        self.u = np.zeros((self.n_steps + 1, self.n_dofs))
        self.y = np.zeros((self.n_steps + 1, self.n_dofs))
        self.loads = np.zeros((self.n_steps + 2, self.n_dofs))
        self.k = 0

    def set_initial(self, u0: np.ndarray, load0: np.ndarray):
        self.u[0] = u0
        self.y[0] = 0.0          # the memory term vanishes at t = 0
        self.loads[0] = load0
        self.k = 0

    def set_half_load(self, j: int, load: np.ndarray):
        self.loads[1 + j] = load

    def append(self, u_new: np.ndarray, y_new: np.ndarray):
        if self.k >= self.n_steps:
            raise ValueError("history already holds the full horizon")
        self.k += 1
        self.u[self.k] = u_new
        self.y[self.k] = y_new

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(self.n_steps + 1)

    def u_view(self) -> np.ndarray:
        return self.u[:self.k + 1]

    def y_view(self) -> np.ndarray:
        return self.y[:self.k + 1]

    def loads_view(self) -> np.ndarray:
        return self.loads[:self.k + 2]

    def truncated(self, k: int) -> "StateHistory":
        """Read-only alias of this history rewound to level k (shares arrays)."""
        if not 0 <= k <= self.k:
            raise ValueError(f"cannot rewind to {k}; history is at {self.k}")
        view = object.__new__(StateHistory)
        view.n_dofs = self.n_dofs
        view.n_steps = self.n_steps
        view.delta = self.delta
        view.u = self.u
        view.y = self.y
        view.loads = self.loads
        view.k = k
        return view


@dataclass(frozen=True)
class MemoryEquation:
    """Linear relation alpha*M*Y^{k+1} + beta*M*U^{k+1} = rhs."""

    alpha: float
    beta: float
    rhs: np.ndarray


def q_g(hist: StateHistory, kernel: KernelSpec, mass: BandedSymMatrix):
    """Memory quadrature applied to the y history.

    Returns (explicit_part, implicit_coeff): the explicit part collects
    every stored level including the averaged t_k share; implicit_coeff is
    the delta/8 * g(0) multiplier of M Y^{k+1}.
    """
    w = volterra_weights(hist.k, hist.delta)
    g0 = float(kernel.g(0.0))
    coeffs = w.node_weights * _kernel_values(kernel.g, w.node_lags)
    acc = coeffs @ hist.y_view()
    acc += w.half_weight * g0 * hist.y[hist.k]
    return mass.matvec(acc), w.half_weight * g0


def q_gp(hist: StateHistory, kernel: KernelSpec, mass: BandedSymMatrix):
    """Same quadrature applied to the u history with the kernel derivative."""
    w = volterra_weights(hist.k, hist.delta)
    gp0 = float(kernel.gp(0.0))
    coeffs = w.node_weights * _kernel_values(kernel.gp, w.node_lags)
    acc = coeffs @ hist.u_view()
    acc += w.half_weight * gp0 * hist.u[hist.k]
    return mass.matvec(acc), w.half_weight * gp0


def i_f(hist: StateHistory, kernel: KernelSpec,
        mode: str = "consistent") -> np.ndarray:
    """Kernel-weighted sum of the stored load vectors over [0, t_{k+1/2}].

    The literal mode equals the consistent one plus delta * g(0) times the
    newest half-step load.
    """
    weights, lags = forcing_weights(hist.k, hist.delta, "consistent")
    coeffs = weights * _kernel_values(kernel.g, lags)
    out = coeffs @ hist.loads_view()
    if mode == "literal":
        out = out + hist.delta * float(kernel.g(0.0)) * hist.loads[hist.k + 1]
    elif mode != "consistent":
        raise ValueError(f"quadrature mode must be one of {QUADRATURE_MODES}, "
                         f"got {mode!r}")
    return out


def memory_equation(hist: StateHistory, kernel: KernelSpec,
                    mass: BandedSymMatrix,
                    mode: str = "consistent") -> MemoryEquation:
    """Reduce the memory relation at step k to its unknowns-on-the-left form.

    Every history term lands in rhs; the two k+1 unknowns produce the
    scalar coefficients alpha and beta of M Y^{k+1} and M U^{k+1}.
    """
    delta = hist.delta
    g0 = float(kernel.g(0.0))
    gp0 = float(kernel.gp(0.0))
    alpha = 0.5 + (delta / 8.0) * g0
    if abs(alpha) < 1e-12:
        raise IllPosedStepError(
            f"memory relation is ill posed: |1/2 + delta*g(0)/8| = {abs(alpha):.3e}; "
            "reduce the time step")
    beta = -(0.5 * g0 + (delta / 8.0) * gp0)
    t_half = (hist.k + 0.5) * delta
    qg_explicit, _ = q_g(hist, kernel, mass)
    qgp_explicit, _ = q_gp(hist, kernel, mass)
    rhs = (-0.5 * mass.matvec(hist.y[hist.k])
           + 0.5 * g0 * mass.matvec(hist.u[hist.k])
           - float(kernel.g(t_half)) * mass.matvec(hist.u[0])
           - qg_explicit
           + qgp_explicit
           - i_f(hist, kernel, mode))
    return MemoryEquation(alpha=alpha, beta=beta, rhs=rhs)


def memory_residual(hist: StateHistory, k: int, kernel: KernelSpec,
                    mass: BandedSymMatrix, mode: str = "consistent") -> np.ndarray:
    """Residual of the full memory relation across the completed step k -> k+1.

    Evaluates the averaged-unknowns form directly (not the rearranged one),
    so it cross-checks the alpha/beta/rhs reduction.
    """
    if k >= hist.k:
        raise ValueError(f"step {k} not completed yet (history at {hist.k})")
    past = hist.truncated(k)
    delta = hist.delta
    t_half = (k + 0.5) * delta
    g0 = float(kernel.g(0.0))
    gp0 = float(kernel.gp(0.0))
    qg_explicit, qg_impl = q_g(past, kernel, mass)
    qgp_explicit, qgp_impl = q_gp(past, kernel, mass)
    y_bar = 0.5 * (hist.y[k + 1] + hist.y[k])
    u_bar = 0.5 * (hist.u[k + 1] + hist.u[k])
    return (mass.matvec(y_bar)
            - g0 * mass.matvec(u_bar)
            + float(kernel.g(t_half)) * mass.matvec(hist.u[0])
            + qg_explicit + qg_impl * mass.matvec(hist.y[k + 1])
            - qgp_explicit - qgp_impl * mass.matvec(hist.u[k + 1])
            + i_f(past, kernel, mode))
