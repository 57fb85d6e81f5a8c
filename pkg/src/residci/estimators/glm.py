"""Ridge-stabilized logistic GLMs fitted by Newton's method.

Design matrices passed in here exclude the intercept; class codes are
compressed to the observed classes ``0..K-1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize, special

RIDGE = 1e-4
MAX_ITER = 100
REL_TOL = 1e-8
MAX_HALVINGS = 10
# above this many free parameters the dense Newton Hessian is replaced by L-BFGS
NEWTON_MAX_PARAMS = 240


class ConvergenceError(RuntimeError):
    pass


@dataclass
class NewtonTrace:
    converged: bool
    iterations: int


def _with_intercept(X: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(X.shape[0]), X])


def _softmax_ref(eta: np.ndarray) -> np.ndarray:
    full = np.column_stack([np.zeros(eta.shape[0]), eta])
    full -= full.max(axis=1, keepdims=True)
    np.exp(full, out=full)
    full /= full.sum(axis=1, keepdims=True)
    return full


def _newton(loglik, grad_hess, theta, max_iter=MAX_ITER, tol=REL_TOL):
    """Maximize a concave penalized log-likelihood with step-halving."""
    ll = loglik(theta)
    if not np.isfinite(ll):
        raise ConvergenceError("non-finite starting log-likelihood")
    for it in range(1, max_iter + 1):
        g, H = grad_hess(theta)
        try:
            step = np.linalg.solve(-H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(-H, g, rcond=None)[0]
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            cand = theta + t * step
            ll_new = loglik(cand)
            if np.isfinite(ll_new) and ll_new >= ll - 1e-12 * abs(ll):
                break
            t *= 0.5
        else:
            return theta, NewtonTrace(False, it)
        theta, ll_old, ll = cand, ll, ll_new
        if abs(ll - ll_old) <= tol * (abs(ll_old) + tol):
            return theta, NewtonTrace(True, it)
    return theta, NewtonTrace(False, max_iter)


# ---------------------------------------------------------------------------
# multinomial (binomial when K == 2)


def fit_multinomial(X: np.ndarray, y: np.ndarray, K: int, ridge: float = RIDGE):
    """Return coefficients of shape ``(p+1, K-1)`` against reference class 0."""
    X1 = _with_intercept(np.asarray(X, dtype=float))
    n, p1 = X1.shape
    Y = np.zeros((n, K))
    Y[np.arange(n), y] = 1.0
    pen = np.ones(p1)
    pen[0] = 0.0
    m = K - 1

    # intercepts start at the log-odds of the marginal frequencies
    freq = Y.mean(axis=0)
    start = np.zeros((p1, m))
    start[0] = np.log(freq[1:] / freq[0])

    def unpack(theta):
        return theta.reshape(p1, m)

    def loglik(theta):
        W = unpack(theta)
        eta = X1 @ W
        full = np.column_stack([np.zeros(n), eta])
        lse = special.logsumexp(full, axis=1)
        ll = float(np.sum(full[np.arange(n), y] - lse))
        return ll - 0.5 * ridge * float(np.sum(pen[:, None] * W ** 2))

    def gradient(theta):
        W = unpack(theta)
        P = _softmax_ref(X1 @ W)
        return (X1.T @ (Y[:, 1:] - P[:, 1:]) - ridge * pen[:, None] * W).ravel(), P

    def grad_hess(theta):
        g, P = gradient(theta)
        Pm = P[:, 1:]
        Wt = Pm[:, :, None] * (np.eye(m)[None] - Pm[:, None, :])
        H = -np.einsum("nab,ni,nj->iajb", Wt, X1, X1).reshape(p1 * m, p1 * m)
        H -= np.diag(np.repeat(ridge * pen, m))
        return g, H

    if p1 * m <= NEWTON_MAX_PARAMS:
        theta, trace = _newton(loglik, grad_hess, start.ravel())
    else:
        res = optimize.minimize(
            lambda t: -loglik(t), start.ravel(), jac=lambda t: -gradient(t)[0],
            method="L-BFGS-B", options={"maxiter": 1000, "ftol": REL_TOL, "gtol": 1e-8},
        )
        theta, trace = res.x, NewtonTrace(bool(res.success), int(res.nit))
    return unpack(theta), trace


def predict_multinomial(W: np.ndarray, X: np.ndarray) -> np.ndarray:
    return _softmax_ref(_with_intercept(np.asarray(X, dtype=float)) @ W)


# ---------------------------------------------------------------------------
# proportional odds: logit P(Y <= j | z) = alpha_j - beta'z


def _po_bounds(alpha, eta, y, J):
    a = np.concatenate([[-np.inf], alpha, [np.inf]])
    upper = a[y + 1] - eta
    lower = a[y] - eta
    return upper, lower


def fit_proportional_odds(X: np.ndarray, y: np.ndarray, J: int, ridge: float = RIDGE):
    """Cumulative-logit fit over ``J`` observed ordered classes.

    Returns ``(alpha, beta, trace)``; raises ConvergenceError when Newton
    fails or the intercepts are not strictly increasing.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    nt = J - 1
    cum = np.cumsum(np.bincount(y, minlength=J))[:-1] / n
    start = np.concatenate([special.logit(cum), np.zeros(p)])
    rows = np.arange(n)

    def split(theta):
        return theta[:nt], theta[nt:]

    def loglik(theta):
        alpha, beta = split(theta)
        if nt > 1 and np.any(np.diff(alpha) <= 0):
            return -np.inf
        upper, lower = _po_bounds(alpha, X @ beta, y, J)
        prob = special.expit(upper) - special.expit(lower)
        if np.any(prob <= 0):
            return -np.inf
        return float(np.sum(np.log(prob))) - 0.5 * ridge * float(beta @ beta)

    def grad_hess(theta):
        alpha, beta = split(theta)
        upper, lower = _po_bounds(alpha, X @ beta, y, J)
        Fu, Fl = special.expit(upper), special.expit(lower)
        fu, fl = Fu * (1 - Fu), Fl * (1 - Fl)
        prob = Fu - Fl
        gu, gl = fu / prob, -fl / prob
        huu = fu * (1 - 2 * Fu) / prob - gu ** 2
        hll = -fl * (1 - 2 * Fl) / prob - gl ** 2
        hul = fu * fl / prob ** 2
        # Jacobians of (upper, lower) wrt (alpha, beta)
        Ju = np.zeros((n, nt + p))
        Jl = np.zeros((n, nt + p))
        has_u = y < J - 1
        has_l = y > 0
        Ju[rows[has_u], y[has_u]] = 1.0
        Jl[rows[has_l], y[has_l] - 1] = 1.0
        Ju[:, nt:] = -X * has_u[:, None]
        Jl[:, nt:] = -X * has_l[:, None]
        g = Ju.T @ gu + Jl.T @ gl
        H = (Ju.T * huu) @ Ju + (Jl.T * hll) @ Jl
        cross = (Ju.T * hul) @ Jl
        H += cross + cross.T
        g[nt:] -= ridge * beta
        H[nt:, nt:] -= ridge * np.eye(p)
        return g, H

    theta, trace = _newton(loglik, grad_hess, start)
    alpha, beta = split(theta)
    if not trace.converged or not np.all(np.isfinite(theta)) or np.any(np.diff(alpha) <= 0):
        raise ConvergenceError("proportional-odds fit did not converge")
    return alpha, beta, trace


def predict_proportional_odds(alpha: np.ndarray, beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    eta = np.asarray(X, dtype=float) @ beta
    cdf = special.expit(alpha[None, :] - eta[:, None])
    cdf = np.column_stack([np.zeros(len(eta)), cdf, np.ones(len(eta))])
    return np.clip(np.diff(cdf, axis=1), 0.0, None)
