"""Damped Newton-Raphson maximizer shared by the Cox, parametric and logistic fits."""

from dataclasses import dataclass, field

import numpy as np

GRAD_TOL = 1e-9
REL_LOGLIK_TOL = 1e-12
MAX_ITER = 100
MAX_HALVINGS = 20
STEP_TOL = 1e-4


@dataclass
class NewtonResult:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    message: str = ""


def _newton_direction(grad, hess):
    """Solve ``-H d = g``; fall back to Levenberg damping when -H is not PD."""
    neg_h = -hess
    p = len(grad)
    mu = 0.0
    scale = max(1.0, float(np.max(np.abs(np.diag(neg_h))))) if p else 1.0
    for _ in range(60):
        try:
            chol = np.linalg.cholesky(neg_h + mu * np.eye(p))
        except np.linalg.LinAlgError:
            mu = scale * 1e-8 if mu == 0.0 else mu * 10.0
            continue
        y = np.linalg.solve(chol, grad)
        return np.linalg.solve(chol.T, y)
    return grad / scale


def information_degenerate(hess, rel=1e-8):
    """True when the observed information has (numerically) collapsed.

    With a full-rank design this happens only as coefficients run off to
    infinity, where the likelihood flattens out.
    """
    info = -(hess + hess.T) / 2.0
    if not np.all(np.isfinite(info)):
        return True
    eig = np.linalg.eigvalsh(info)
    return bool(eig[0] <= rel * max(1.0, float(eig[-1])))


def _settled(x, step):
    """Newton step negligible next to the iterate.

    Under a monotone likelihood the gradient vanishes only at infinity while
    Newton steps stay O(1); such points are not optima.
    """
    return np.max(np.abs(step)) <= STEP_TOL * max(1.0, float(np.max(np.abs(x))))


def newton_maximize(fun, x0, tol=GRAD_TOL, max_iter=MAX_ITER, bound=None):
    """Maximize ``fun`` which returns ``(value, gradient, hessian)``.

    Converged when the max-norm of the gradient falls below `tol` or the
    relative change in value falls below ``REL_LOGLIK_TOL``, provided the
    pending Newton step is negligible. A step that lowers the objective is
    halved up to ``MAX_HALVINGS`` times.

    If `bound` is given and any ``|x|`` exceeds it the loop stops early with
    ``message == "diverged"``.
    """
    x = np.asarray(x0, dtype=float).copy()
    value, grad, hess = fun(x)
    history = [value]
    if not np.isfinite(value):
        return NewtonResult(x, value, grad, hess, 0, False, history, "non-finite start")
    if x.size == 0:
        return NewtonResult(x, value, grad, hess, 0, True, history)
    step = _newton_direction(grad, hess)
    if np.max(np.abs(grad)) < tol and _settled(x, step):
        return NewtonResult(x, value, grad, hess, 0, True, history)

    for it in range(1, max_iter + 1):
        for _ in range(MAX_HALVINGS + 1):
            x_new = x + step
            new_value, new_grad, new_hess = fun(x_new)
            if np.isfinite(new_value) and new_value >= value - 1e-12 * abs(value):
                break
            step = step / 2.0
        else:
            return NewtonResult(x, value, grad, hess, it, False, history,
                                "step-halving exhausted")

        rel_change = abs(new_value - value) / max(abs(value), 1.0)
        x, value, grad, hess = x_new, new_value, new_grad, new_hess
        history.append(value)

        if bound is not None and np.max(np.abs(x)) > bound:
            return NewtonResult(x, value, grad, hess, it, False, history, "diverged")
        step = _newton_direction(grad, hess)
        if (np.max(np.abs(grad)) < tol or rel_change < REL_LOGLIK_TOL) and _settled(x, step):
            return NewtonResult(x, value, grad, hess, it, True, history)

    return NewtonResult(x, value, grad, hess, max_iter, False, history,
                        "maximum iterations reached")
