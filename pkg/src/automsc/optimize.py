"""Limited-memory BFGS minimizer with an Armijo backtracking line search.

Deterministic: no randomness, no re-orderings. The caller supplies a function
returning ``(value, gradient)``; convergence is declared when the max-norm of
the gradient drops to the tolerance. Every accepted step satisfies the Armijo
sufficient-decrease condition, so the recorded loss history is decreasing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NonFinite

ValueAndGrad = Callable[[np.ndarray], tuple[float, np.ndarray]]


@dataclass
class MinimizeResult:
    x: np.ndarray
    loss: float
    grad_max_norm: float
    n_iterations: int
    converged: bool
    status: str
    loss_history: list[float] = field(default_factory=list)


def minimize_lbfgs(
    fun: ValueAndGrad,
    x0: np.ndarray,
    *,
    tolerance: float,
    max_iterations: int,
    memory: int = 10,
    armijo_c1: float = 1e-4,
    backtrack_factor: float = 0.5,
    max_backtracks: int = 50,
) -> MinimizeResult:
    """Minimize ``fun`` from ``x0``; stop at grad max-norm <= tolerance."""
    x = np.asarray(x0, dtype=np.float64).copy()
    f, g = _evaluate(fun, x)
    history = [f]

    s_mem: deque[np.ndarray] = deque(maxlen=memory)
    y_mem: deque[np.ndarray] = deque(maxlen=memory)
    rho_mem: deque[float] = deque(maxlen=memory)

    n_steps = 0
    status = ""
    while _max_norm(g) > tolerance and n_steps < max_iterations:
        d = -_two_loop_direction(g, s_mem, y_mem, rho_mem)
        gd = float(g @ d)
        if gd >= 0.0 or not np.isfinite(gd):
            # stale curvature produced a non-descent direction; restart
            s_mem.clear()
            y_mem.clear()
            rho_mem.clear()
            d = -g
            gd = -float(g @ g)

        # on the first (steepest-descent) step, scale to unit length so the
        # backtracking loop starts near a sensible magnitude
        step = 1.0 if s_mem else min(1.0, 1.0 / max(float(np.linalg.norm(g)), 1e-12))
        accepted = False
        for _ in range(max_backtracks):
            x_new = x + step * d
            f_new, g_new = fun(x_new)
            if np.isfinite(f_new) and np.all(np.isfinite(g_new)) and f_new <= f + armijo_c1 * step * gd:
                accepted = True
                break
            step *= backtrack_factor
        if not accepted:
            status = "line_search_failed"
            break

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_mem.append(s)
            y_mem.append(y)
            rho_mem.append(1.0 / sy)

        x, f, g = x_new, f_new, np.asarray(g_new, dtype=np.float64)
        history.append(f)
        n_steps += 1

    converged = _max_norm(g) <= tolerance
    if converged:
        status = "converged"
    elif not status:
        status = "max_iterations"
    return MinimizeResult(
        x=x,
        loss=f,
        grad_max_norm=_max_norm(g),
        n_iterations=n_steps,
        converged=converged,
        status=status,
        loss_history=history,
    )


def _evaluate(fun: ValueAndGrad, x: np.ndarray) -> tuple[float, np.ndarray]:
    f, g = fun(x)
    g = np.asarray(g, dtype=np.float64)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NonFinite("objective or gradient is non-finite at the starting point")
    return float(f), g


def _max_norm(g: np.ndarray) -> float:
    return float(np.abs(g).max()) if g.size else 0.0


def _two_loop_direction(g, s_mem, y_mem, rho_mem) -> np.ndarray:
    """Two-loop recursion: returns H*g for the implicit inverse-Hessian H."""
    q = g.copy()
    alphas: list[float] = []
    for s, y, rho in zip(reversed(s_mem), reversed(y_mem), reversed(rho_mem)):
        a = rho * float(s @ q)
        q -= a * y
        alphas.append(a)
    if s_mem:
        s, y = s_mem[-1], y_mem[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(zip(s_mem, y_mem, rho_mem), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q
