"""Power split between signal and NORAN by the concave-convex procedure.

With Bob cancelling the NORAN, the quantity to minimize over
``(u, k) = (sigma_u2, sigma_k2)`` is Eve's rate minus Bob's rate::

    f(u, k) = log2(1 + a u / (a k + se)) - log2(1 + b u / sn)

on the triangle ``u >= 0, k >= 0, u + k <= P``, where ``a = ||G p||^2``
and ``b = ||H p||^2``. Expanding the logs gives the split ``f = f_vex +
f_cave`` with

    f_vex(u, k)  = -log2(1 + a k / se) - log2(1 + b u / sn)   (convex)
    f_cave(u, k) =  log2(1 + a (u + k) / se)                  (concave)

both zero at the origin. Each CCP step linearizes ``f_cave`` at the current
point and minimizes the resulting convex majorizer with projected gradient
descent, so the true objective never increases between iterates.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from noran.errors import NumericalFailureError
from noran.secrecy import PowerAllocation

__all__ = [
    "DcObjective",
    "CcpConfig",
    "CcpState",
    "objective",
    "dc_split",
    "dc_gradients",
    "surrogate",
    "project_triangle",
    "solve_subproblem",
    "ccp_solve",
    "oracle_grid_search",
    "suboptimal_noran_design",
]

LN2 = math.log(2.0)
INIT_MODES = ("full-signal", "half-split")


@dataclass(frozen=True)
class DcObjective:
    """Coefficients of the power-split problem.

    ``a`` is Eve's effective gain and ``b`` Bob's. A zero budget is
    accepted and yields the single feasible point (0, 0).
    """

    a: float
    b: float
    sigma_n2: float
    sigma_e2: float
    p_budget: float

    def __post_init__(self):
        for name in ("a", "b", "sigma_n2", "sigma_e2", "p_budget"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
        if self.a < 0 or self.b < 0:
            raise ValueError("effective gains must be nonnegative")
        if self.sigma_n2 <= 0 or self.sigma_e2 <= 0:
            raise ValueError("noise variances must be positive")
        if self.p_budget < 0:
            raise ValueError("power budget must be nonnegative")


@dataclass(frozen=True)
class CcpConfig:
    max_iter: int = 200
    tol: float = 1e-8
    init: object = "half-split"  # or an explicit (sigma_u2, sigma_k2) pair
    subproblem_tol: float = 1e-10

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0 or not self.subproblem_tol > 0:
            raise ValueError("tolerances must be positive")
        if isinstance(self.init, str):
            if self.init not in INIT_MODES:
                raise ValueError(f"unknown init {self.init!r}; expected {INIT_MODES} or (u, k)")
        else:
            u, k = self.init
            object.__setattr__(self, "init", (float(u), float(k)))

    def start(self, p_budget):
        if self.init == "half-split":
            return PowerAllocation(p_budget / 2, p_budget / 2, p_budget)
        if self.init == "full-signal":
            return PowerAllocation.full_signal(p_budget)
        return PowerAllocation(self.init[0], self.init[1], p_budget).validate()


@dataclass
class CcpState:
    alloc: PowerAllocation
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def secrecy(self):
        """Secrecy rate with cancellation at the final iterate (negated objective)."""
        return 0.0 - self.objective_trace[-1]


def _f(dc, u, k):
    return (
        math.log1p(dc.a * u / (dc.a * k + dc.sigma_e2)) - math.log1p(dc.b * u / dc.sigma_n2)
    ) / LN2


def _convex(dc, u, k):
    return -(math.log1p(dc.a * k / dc.sigma_e2) + math.log1p(dc.b * u / dc.sigma_n2)) / LN2


def _concave(dc, u, k):
    return math.log1p(dc.a * (u + k) / dc.sigma_e2) / LN2


def _grad_convex(dc, u, k):
    return (
        -dc.b / ((dc.sigma_n2 + dc.b * u) * LN2),
        -dc.a / ((dc.sigma_e2 + dc.a * k) * LN2),
    )


def _grad_concave(dc, u, k):
    g = dc.a / ((dc.sigma_e2 + dc.a * (u + k)) * LN2)
    return g, g


def objective(dc, alloc):
    """Eve's rate minus Bob's (cancellation) rate at a feasible ``alloc``."""
    alloc.validate()
    return _f(dc, alloc.sigma_u2, alloc.sigma_k2)


def dc_split(dc, alloc):
    """``(convex_part, concave_part)``; they sum to :func:`objective`."""
    alloc.validate()
    u, k = alloc.sigma_u2, alloc.sigma_k2
    return _convex(dc, u, k), _concave(dc, u, k)


def dc_gradients(dc, alloc):
    """Analytic gradients ``(d/du, d/dk)`` of the convex and concave parts."""
    u, k = alloc.sigma_u2, alloc.sigma_k2
    return _grad_convex(dc, u, k), _grad_concave(dc, u, k)


def surrogate(dc, alloc, anchor):
    """Convex majorizer of the objective, tangent at ``anchor``."""
    u, k = alloc.sigma_u2, alloc.sigma_k2
    u0, k0 = anchor.sigma_u2, anchor.sigma_k2
    gu, gk = _grad_concave(dc, u0, k0)
    return _convex(dc, u, k) + _concave(dc, u0, k0) + gu * (u - u0) + gk * (k - k0)


def project_triangle(u, k, p_budget):
    """Euclidean projection onto ``{u >= 0, k >= 0, u + k <= P}``."""
    u_c, k_c = max(u, 0.0), max(k, 0.0)
    if u_c + k_c <= p_budget:
        return u_c, k_c
    shift = 0.5 * (u + k - p_budget)
    u_s, k_s = u - shift, k - shift
    if u_s <= 0.0:
        return 0.0, p_budget
    if k_s <= 0.0:
        return p_budget, 0.0
    return u_s, k_s


def solve_subproblem(dc, anchor, tol=1e-10, max_steps=20000):
    """Minimize :func:`surrogate` around ``anchor`` over the feasible triangle.

    Projected gradient descent with Armijo backtracking (halving). The first
    trial step is 1.0; later ones start from the Barzilai-Borwein estimate,
    which matters when the budget spans several orders of magnitude. Starts
    at the anchor and only accepts decreasing steps, so the returned point
    never has a larger surrogate value than the anchor.
    """
    P = dc.p_budget
    ca, _ = _grad_concave(dc, anchor.sigma_u2, anchor.sigma_k2)

    def value(u, k):
        v = _convex(dc, u, k) + ca * (u + k)
        if not math.isfinite(v):
            raise NumericalFailureError(f"surrogate is not finite at ({u!r}, {k!r})")
        return v

    def grad(u, k):
        gu, gk = _grad_convex(dc, u, k)
        return gu + ca, gk + ca

    u, k = project_triangle(anchor.sigma_u2, anchor.sigma_k2, P)
    fx = value(u, k)
    gu, gk = grad(u, k)
    step = 1.0
    prev = None
    for _ in range(max_steps):
        pu, pk = project_triangle(u - gu, k - gk, P)
        if math.hypot(pu - u, pk - k) <= tol:
            break
        if prev is not None:
            su, sk = u - prev[0], k - prev[1]
            yu, yk = gu - prev[2], gk - prev[3]
            sy = su * yu + sk * yk
            step = min(max((su * su + sk * sk) / sy, 1e-12), 1e12) if sy > 0 else 1.0
        while True:
            nu, nk = project_triangle(u - step * gu, k - step * gk, P)
            du, dk = nu - u, nk - k
            fn = value(nu, nk)
            if fn <= fx + 1e-4 * (gu * du + gk * dk):
                break
            step *= 0.5
            if step < 1e-20:
                nu, nk, fn = u, k, fx
                break
        if nu == u and nk == k:
            break
        prev = (u, k, gu, gk)
        decrease = fx - fn
        u, k, fx = nu, nk, fn
        gu, gk = grad(u, k)
        if decrease <= tol * 1e-3:
            break
    return PowerAllocation(u, k, P)


def ccp_solve(dc, cfg=None):
    """Iterate surrogate minimizations until the objective settles.

    ``objective_trace[0]`` is the value at the starting point; each later
    entry is the value after one CCP step.
    """
    cfg = cfg or CcpConfig()
    x = cfg.start(dc.p_budget)
    fx = objective(dc, x)
    state = CcpState(alloc=x, objective_trace=[fx])
    for r in range(1, cfg.max_iter + 1):
        try:
            x_next = solve_subproblem(dc, x, cfg.subproblem_tol)
        except NumericalFailureError as exc:
            raise NumericalFailureError(str(exc), iteration=r) from exc
        f_next = objective(dc, x_next)
        state.objective_trace.append(f_next)
        state.iterations = r
        state.alloc = x_next
        if abs(f_next - fx) < cfg.tol:
            state.converged = True
            break
        x, fx = x_next, f_next
    return state


def _golden_section(fn, lo, hi, tol):
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = hi - inv_phi * (hi - lo)
    d = lo + inv_phi * (hi - lo)
    fc, fd = fn(c), fn(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - inv_phi * (hi - lo)
            fc = fn(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + inv_phi * (hi - lo)
            fd = fn(d)
    return 0.5 * (lo + hi)


def oracle_grid_search(dc, grid_points=100_001):
    """Brute-force reference optimum.

    At fixed ``u`` Eve's rate falls as ``k`` grows while Bob's is ``k``-free,
    so a minimizer sits on the edge ``u + k = P``. That edge is scanned on a
    uniform grid (the ``k = 0`` edge too, as a guard), ties go to the
    smallest ``u``, and the winner is polished by golden-section search.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    P = dc.p_budget
    if P == 0:
        return PowerAllocation(0.0, 0.0, 0.0)
    a, b, sn, se = dc.a, dc.b, dc.sigma_n2, dc.sigma_e2
    u = np.linspace(0.0, P, grid_points)

    def vec(uu, kk):
        return (np.log1p(a * uu / (a * kk + se)) - np.log1p(b * uu / sn)) / LN2

    candidates = []
    for k_of_u in (lambda uu: np.maximum(P - uu, 0.0), lambda uu: np.zeros_like(uu)):
        vals = vec(u, k_of_u(u))
        best = vals.min()
        i = int(np.flatnonzero(vals <= best + 1e-12)[0])
        lo, hi = u[max(i - 1, 0)], u[min(i + 1, grid_points - 1)]

        def line(x, k_of_u=k_of_u):
            return float(vec(np.array([x]), k_of_u(np.array([x])))[0])

        x_ref = _golden_section(line, lo, hi, 1e-10)
        for x in (u[i], x_ref):
            candidates.append((line(x), float(x), float(k_of_u(np.array([x]))[0])))
    best_val = min(c[0] for c in candidates)
    _, u_best, k_best = min(
        (c for c in candidates if c[0] <= best_val + 1e-12), key=lambda c: c[1]
    )
    return PowerAllocation(u_best, k_best, P)


def suboptimal_noran_design(sigma_k2_opt, n_tx):
    """Amplitude template ``sqrt(sigma_k2) * ones(n_tx)`` for the NORAN."""
    if sigma_k2_opt < 0:
        raise ValueError(f"NORAN power must be nonnegative, got {sigma_k2_opt!r}")
    if n_tx < 1:
        raise ValueError("n_tx must be >= 1")
    return np.full(int(n_tx), math.sqrt(sigma_k2_opt), dtype=np.complex128)
