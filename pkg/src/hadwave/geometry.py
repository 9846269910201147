"""Lorentzian geometry backend on a single coordinate chart.

Conventions used throughout the package:
  - signature (+, -, ..., -); the coordinate with index `time_axis` is
    timelike and its increasing direction is the future.
  - s(p, q) is the signed squared geodesic distance, s > 0 for spacelike
    pairs and s <= 0 for causal pairs.  For the affine connecting geodesic
    gamma: [0,1] with gamma(0) = p, gamma(1) = q this means
    s = -g(gamma', gamma'), grad_p s = +2 g(p) gamma'(0),
    grad_q s = -2 g(q) gamma'(1).
  - the transport factor is M(p, q) = -1/2 box_p s(p, q) - m, normalized so
    that M vanishes identically in flat space.

Metric callables must be vectorized: they take points of shape (..., m) and
return (..., m, m) arrays (the built-in metrics do; see `build_metric`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    ConjugatePointSuspected,
    NoConvergence,
    NonNullInput,
    OutOfChart,
    SignatureError,
    StencilOutOfChart,
    StepFailure,
    ZeroCovector,
)

FUTURE_NULL = "FutureNull"
PAST_NULL = "PastNull"
NON_NULL = "NonNull"

_DEFAULT_FD_FRACTION = 1e-3  # stencil spacing as a fraction of box extent


@dataclass(frozen=True)
class SpacetimeModel:
    """Analytic metric field over an axis-aligned chart box.

    chart_box has shape (m, 2) with [low, high] per axis; it is asserted by
    the user to be a convex normal domain.  metric_derivs, when given, maps
    points of shape (..., m) to (..., m, m, m) arrays indexed
    [lam, mu, nu] = d_lam g_{mu nu}.
    """

    m: int
    metric: Callable[[np.ndarray], np.ndarray]
    chart_box: np.ndarray
    time_axis: int = 0
    metric_derivs: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.m < 3:
            raise SignatureError("dimension must be >= 3")
        box = np.asarray(self.chart_box, dtype=float)
        if box.shape != (self.m, 2) or np.any(box[:, 1] <= box[:, 0]):
            raise ValueError("chart_box must be (m, 2) with low < high")
        object.__setattr__(self, "chart_box", box)
        if not 0 <= self.time_axis < self.m:
            raise ValueError("time_axis out of range")

    @property
    def extent(self) -> np.ndarray:
        return self.chart_box[:, 1] - self.chart_box[:, 0]

    @property
    def fd_step(self) -> np.ndarray:
        return _DEFAULT_FD_FRACTION * self.extent

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        lo = self.chart_box[:, 0] + margin * self.extent
        hi = self.chart_box[:, 1] - margin * self.extent
        return bool(np.all(x >= lo) and np.all(x <= hi))


@dataclass(frozen=True)
class CotangentPoint:
    """Base point q and covector components xi (causal status is computed)."""

    q: np.ndarray
    xi: np.ndarray


@dataclass
class GeodesicPath:
    """Sampled affinely parametrized geodesic with integrator statistics."""

    t: np.ndarray          # (n,)
    x: np.ndarray          # (n, m)
    u: np.ndarray          # (n, m)
    chart_exit: bool
    stats: dict


@dataclass
class WorldFunctionResult:
    s: float
    grad_x: np.ndarray     # d s / d p^mu   (first argument)
    grad_y: np.ndarray     # d s / d q^mu   (second argument)
    M: Optional[float]
    connecting_geodesic: GeodesicPath
    converged: bool
    residual: float


# ---------------------------------------------------------------------------
# built-in metrics
# ---------------------------------------------------------------------------

def _minkowski_eta(m: int) -> np.ndarray:
    eta = -np.eye(m)
    eta[0, 0] = 1.0
    return eta


def build_metric(name: str, m: int, params: Optional[dict] = None,
                 chart_box=None, time_axis: int = 0) -> SpacetimeModel:
    """Construct one of the shipped metrics: "minkowski", "conformal"
    (a(t)^2 * eta with a(t) = 1 + c t^2), or "ultrastatic-bump"
    (dt^2 - (1 + amp * exp(-|x|^2/width^2)) dx^2).
    """
    params = dict(params or {})
    eta = _minkowski_eta(m)

    if name == "minkowski":
        box = np.array([[-1.0, 1.0]] * m) if chart_box is None else chart_box

        def metric(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(eta, x.shape[:-1] + (m, m)).copy()

        def metric_derivs(x):
            x = np.asarray(x, dtype=float)
            return np.zeros(x.shape[:-1] + (m, m, m))

    elif name == "conformal":
        c = float(params.setdefault("c", 1.0))
        box = np.array([[-0.6, 0.6]] * m) if chart_box is None else chart_box

        def metric(x, _c=c):
            x = np.asarray(x, dtype=float)
            a = 1.0 + _c * x[..., 0] ** 2
            return a[..., None, None] ** 2 * eta

        def metric_derivs(x, _c=c):
            x = np.asarray(x, dtype=float)
            t = x[..., 0]
            a = 1.0 + _c * t ** 2
            out = np.zeros(x.shape[:-1] + (m, m, m))
            out[..., 0, :, :] = (2.0 * a * 2.0 * _c * t)[..., None, None] * eta
            return out

    elif name == "ultrastatic-bump":
        amp = float(params.setdefault("amp", 0.2))
        width = float(params.setdefault("width", 0.5))
        box = np.array([[-0.8, 0.8]] * m) if chart_box is None else chart_box

        def metric(x, _a=amp, _w=width):
            x = np.asarray(x, dtype=float)
            rho2 = np.sum(x[..., 1:] ** 2, axis=-1)
            bump = 1.0 + _a * np.exp(-rho2 / _w ** 2)
            g = np.zeros(x.shape[:-1] + (m, m))
            g[..., 0, 0] = 1.0
            for i in range(1, m):
                g[..., i, i] = -bump
            return g

        def metric_derivs(x, _a=amp, _w=width):
            x = np.asarray(x, dtype=float)
            rho2 = np.sum(x[..., 1:] ** 2, axis=-1)
            ebump = _a * np.exp(-rho2 / _w ** 2)
            out = np.zeros(x.shape[:-1] + (m, m, m))
            for k in range(1, m):
                dk = (2.0 * x[..., k] / _w ** 2) * ebump
                for i in range(1, m):
                    out[..., k, i, i] = dk
            return out

    else:
        raise ValueError(f"unknown metric name: {name!r}")

    model = SpacetimeModel(m=m, metric=metric, chart_box=np.asarray(box, float),
                           time_axis=time_axis, metric_derivs=metric_derivs,
                           name=name, params=params)
    _check_signature_on_samples(model)
    return model


def _check_signature_on_samples(model: SpacetimeModel, n_random: int = 8):
    rng = np.random.default_rng(0)
    lo, hi = model.chart_box[:, 0], model.chart_box[:, 1]
    pts = [0.5 * (lo + hi)]
    pts += list(lo + (hi - lo) * rng.random((n_random, model.m)))
    for x in pts:
        metric_at(model, x)


# ---------------------------------------------------------------------------
# pointwise metric data
# ---------------------------------------------------------------------------

def metric_at(model: SpacetimeModel, x) -> np.ndarray:
    """Metric matrix at x with chart, symmetry, and signature checks."""
    x = np.asarray(x, dtype=float)
    if not model.contains(x):
        raise OutOfChart(f"point {x.tolist()} outside chart box")
    g = np.asarray(model.metric(x), dtype=float)
    if not np.allclose(g, g.T, atol=1e-12):
        raise SignatureError("metric not symmetric at sampled point")
    eig = np.linalg.eigvalsh(g)
    if not (np.sum(eig > 0) == 1 and np.sum(eig < 0) == model.m - 1):
        raise SignatureError(f"eigenvalues {eig} are not (+,-,...,-)")
    return g


def metric_inverse_at(model: SpacetimeModel, x) -> np.ndarray:
    return np.linalg.inv(metric_at(model, x))


def metric_derivs_batch(model: SpacetimeModel, x) -> np.ndarray:
    """d_lam g_{mu nu} at points of shape (..., m); analytic if declared,
    else 4th-order central differences with the default spacing."""
    x = np.asarray(x, dtype=float)
    if model.metric_derivs is not None:
        return np.asarray(model.metric_derivs(x), dtype=float)
    h = model.fd_step
    out = np.zeros(x.shape[:-1] + (model.m, model.m, model.m))
    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    weights = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    for lam in range(model.m):
        acc = 0.0
        for off, wgt in zip(offsets, weights):
            xp = x.copy()
            xp[..., lam] += off * h[lam]
            acc = acc + wgt * np.asarray(model.metric(xp), dtype=float)
        out[..., lam, :, :] = acc / h[lam]
    return out


def christoffels_batch(model: SpacetimeModel, x) -> np.ndarray:
    """Gamma^lam_{mu nu} at points of shape (..., m), no chart checks."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(model.metric(x), dtype=float)
    ginv = np.linalg.inv(g)
    dg = metric_derivs_batch(model, x)
    # dg indexed [lam, mu, nu] = d_lam g_{mu nu}
    # Gamma^l_{mn} = 1/2 g^{ls} (d_m g_{sn} + d_n g_{sm} - d_s g_{mn})
    term = (np.einsum("...msn->...smn", dg)
            + np.einsum("...nsm->...smn", dg)
            - dg)
    return 0.5 * np.einsum("...ls,...smn->...lmn", ginv, term)


def christoffels(model: SpacetimeModel, x) -> np.ndarray:
    """Christoffel symbols at a single point with stencil chart checks."""
    x = np.asarray(x, dtype=float)
    if model.metric_derivs is None:
        margin = 2.0 * _DEFAULT_FD_FRACTION
        if not model.contains(x, margin=margin):
            raise StencilOutOfChart(
                "finite-difference stencil for christoffels leaves the chart")
    elif not model.contains(x):
        raise OutOfChart(f"point {x.tolist()} outside chart box")
    return christoffels_batch(model, x)


# ---------------------------------------------------------------------------
# geodesics
# ---------------------------------------------------------------------------

def _geodesic_rhs(model: SpacetimeModel):
    m = model.m

    def rhs(_t, z):
        x, u = z[:m], z[m:]
        gam = christoffels_batch(model, x)
        du = -np.einsum("lmn,m,n->l", gam, u, u)
        return np.concatenate([u, du])

    return rhs


def integrate_geodesic(model: SpacetimeModel, x0, u0, t_span=(0.0, 1.0),
                       tol: float = 1e-10, max_samples: int = 400) -> GeodesicPath:
    """Adaptive RK45 integration of the geodesic equation; terminates early
    (chart_exit=True) when the path leaves the chart box."""
    x0 = np.asarray(x0, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if not model.contains(x0):
        raise OutOfChart("geodesic start outside chart box")
    lo, hi = model.chart_box[:, 0], model.chart_box[:, 1]
    m = model.m

    def exit_event(_t, z):
        x = z[:m]
        return float(np.min(np.minimum(x - lo, hi - x)))

    exit_event.terminal = True
    exit_event.direction = -1.0

    t_eval = np.linspace(t_span[0], t_span[1], min(max_samples, 100))
    sol = solve_ivp(_geodesic_rhs(model), t_span,
                    np.concatenate([x0, u0]), method="RK45",
                    rtol=tol, atol=tol, dense_output=False,
                    t_eval=t_eval, events=exit_event)
    if sol.status == -1:
        raise StepFailure(f"geodesic integrator failed: {sol.message}")
    span = abs(t_span[1] - t_span[0])
    chart_exit = bool(
        sol.status == 1 and sol.t_events[0].size
        and abs(sol.t_events[0][0] - t_span[1]) > 1e-9 * max(span, 1.0))
    ts = sol.t
    zs = sol.y.T
    if chart_exit:
        ts = np.append(ts, sol.t_events[0][0])
        zs = np.vstack([zs, sol.y_events[0][0]])
    return GeodesicPath(t=ts, x=zs[:, :m], u=zs[:, m:],
                        chart_exit=chart_exit,
                        stats={"nfev": sol.nfev, "status": sol.status})


def geodesic_norm_drift(model: SpacetimeModel, path: GeodesicPath) -> float:
    """max_t |g(u,u)(t) - g(u,u)(0)| along the sampled path."""
    g = np.asarray(model.metric(path.x), dtype=float)
    norms = np.einsum("nm,nmk,nk->n", path.u, g, path.u)
    return float(np.max(np.abs(norms - norms[0])))


# fixed-step RK4 exponential map, vectorized over a batch of velocities
def batched_exp(model: SpacetimeModel, p, V, n_steps: int = 48,
                return_velocity: bool = False):
    """exp_p applied to each row of V (shape (..., m)); fixed-step RK4 on
    t in [0,1].  No chart checks (used in bulk paths; callers bound V)."""
    V = np.asarray(V, dtype=float)
    X = np.broadcast_to(np.asarray(p, dtype=float), V.shape).copy()
    U = V.copy()
    h = 1.0 / n_steps

    def acc(x, u):
        gam = christoffels_batch(model, x)
        return -np.einsum("...lmn,...m,...n->...l", gam, u, u)

    for _ in range(n_steps):
        k1x, k1u = U, acc(X, U)
        k2x, k2u = U + 0.5 * h * k1u, acc(X + 0.5 * h * k1x, U + 0.5 * h * k1u)
        k3x, k3u = U + 0.5 * h * k2u, acc(X + 0.5 * h * k2x, U + 0.5 * h * k2u)
        k4x, k4u = U + h * k3u, acc(X + h * k3x, U + h * k3u)
        X = X + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
        U = U + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
    if return_velocity:
        return X, U
    return X


def batched_log(model: SpacetimeModel, p, Q, n_steps: int = 48,
                max_iter: int = 30, tol: float = 1e-11) -> np.ndarray:
    """Initial velocities V with exp_p(V) = Q (rows of Q), by damped
    fixed-point iteration from the flat chord.  Intended for small
    separations well inside the injectivity region."""
    p = np.asarray(p, dtype=float)
    Q = np.asarray(Q, dtype=float)
    V = Q - p
    scale = max(float(np.max(np.linalg.norm(Q - p, axis=-1), initial=0.0)), 1e-30)
    for _ in range(max_iter):
        R = Q - batched_exp(model, p, V, n_steps=n_steps)
        err = float(np.max(np.linalg.norm(R, axis=-1)))
        V = V + R
        if err <= tol * max(1.0, scale):
            return V
    raise NoConvergence(f"batched exp-map inversion stalled at residual {err:.3e}")


# ---------------------------------------------------------------------------
# frames and normal coordinates
# ---------------------------------------------------------------------------

def frame_at(model: SpacetimeModel, p) -> np.ndarray:
    """Orthonormal frame E (columns e_A, time axis first, remaining
    coordinate axes in index order): g(e_0,e_0)=1, g(e_i,e_j)=-delta_ij."""
    g = metric_at(model, p)
    m = model.m
    order = [model.time_axis] + [i for i in range(m) if i != model.time_axis]
    E = np.zeros((m, m))
    signs = np.ones(m)
    signs[1:] = -1.0
    for a, axis in enumerate(order):
        v = np.zeros(m)
        v[axis] = 1.0
        for b in range(a):
            v = v - signs[b] * (E[:, b] @ g @ v) * E[:, b]
        nrm2 = signs[a] * (v @ g @ v)
        if nrm2 <= 0:
            raise SignatureError("Gram-Schmidt failed; time axis not timelike?")
        E[:, a] = v / np.sqrt(nrm2)
    return E


def frames_batch(model: SpacetimeModel, xs) -> np.ndarray:
    """frame_at over a batch of points (leading shape preserved)."""
    xs = np.asarray(xs, dtype=float)
    g = np.asarray(model.metric(xs), dtype=float)
    m = model.m
    order = [model.time_axis] + [i for i in range(m) if i != model.time_axis]
    signs = np.ones(m)
    signs[1:] = -1.0
    E = np.zeros(xs.shape[:-1] + (m, m))
    for a, axis in enumerate(order):
        v = np.zeros(xs.shape[:-1] + (m,))
        v[..., axis] = 1.0
        for b in range(a):
            proj = np.einsum("...i,...ij,...j->...", E[..., :, b], g, v)
            v = v - signs[b] * proj[..., None] * E[..., :, b]
        nrm2 = signs[a] * np.einsum("...i,...ij,...j->...", v, g, v)
        if np.any(nrm2 <= 0):
            raise SignatureError("Gram-Schmidt failed; time axis not timelike?")
        E[..., :, a] = v / np.sqrt(nrm2)[..., None]
    return E


def normal_coordinates(model: SpacetimeModel, p, x_nc,
                       tol: float = 1e-11) -> np.ndarray:
    """The point with normal coordinates x_nc about p (frame from frame_at):
    exp_p(E @ x_nc)."""
    E = frame_at(model, p)
    w = E @ np.asarray(x_nc, dtype=float)
    path = integrate_geodesic(model, p, w, (0.0, 1.0), tol=tol)
    if path.chart_exit:
        raise OutOfChart("normal-coordinate geodesic left the chart")
    return path.x[-1]


def _shoot(model: SpacetimeModel, p, q, w0=None, max_iter: int = 50,
           residual_tol: float = 1e-10, n_steps: int = 64):
    """Damped Newton on the initial velocity w with exp_p(w) = q.
    Returns (w, residual, converged)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = model.m
    w = (q - p) if w0 is None else np.asarray(w0, dtype=float).copy()
    delta = 1e-6 * max(1.0, float(np.linalg.norm(q - p)))
    res = None
    for _ in range(max_iter):
        batch = np.vstack([w, w + delta * np.eye(m)])
        ends = batched_exp(model, p, batch, n_steps=n_steps)
        F = ends[0] - q
        res = float(np.linalg.norm(F))
        if res <= residual_tol:
            return w, res, True
        J = (ends[1:] - ends[0]).T / delta
        try:
            cond = np.linalg.cond(J)
            if cond > 1e8:
                raise ConjugatePointSuspected(
                    f"shooting Jacobian condition number {cond:.2e}")
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise ConjugatePointSuspected("singular shooting Jacobian") from exc
        lam = 1.0
        for _ in range(8):
            trial = w + lam * step
            F_trial = batched_exp(model, p, trial[None], n_steps=n_steps)[0] - q
            if np.linalg.norm(F_trial) < res:
                w = trial
                break
            lam *= 0.5
        else:
            return w, res, False
    return w, res, False


def normal_coordinates_inverse(model: SpacetimeModel, p, q,
                               guess=None) -> np.ndarray:
    """Normal coordinates of q about p (inverse of normal_coordinates)."""
    E = frame_at(model, p)
    w0 = None if guess is None else E @ np.asarray(guess, dtype=float)
    w, res, ok = _shoot(model, p, q, w0=w0)
    if not ok:
        raise NoConvergence(f"normal-coordinate inversion residual {res:.3e}")
    return np.linalg.solve(E, w)


# ---------------------------------------------------------------------------
# world function and transport factor
# ---------------------------------------------------------------------------

def world_function(model: SpacetimeModel, p, q, compute_m: bool = False,
                   tol: float = 1e-10) -> WorldFunctionResult:
    """Signed squared geodesic distance and its endpoint gradients, via
    damped-Newton shooting from p to q (flat-chord initial guess)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    for pt in (p, q):
        if not model.contains(pt):
            raise OutOfChart(f"point {pt.tolist()} outside chart box")
    w, res, ok = _shoot(model, p, q, residual_tol=tol)
    if not ok:
        raise NoConvergence(f"world-function shooting residual {res:.3e}")
    gp = np.asarray(model.metric(p), dtype=float)
    s_val = -float(w @ gp @ w)
    path = integrate_geodesic(model, p, w, (0.0, 1.0), tol=1e-12)
    u1 = path.u[-1]
    gq = np.asarray(model.metric(path.x[-1]), dtype=float)
    grad_x = 2.0 * gp @ w
    grad_y = -2.0 * gq @ u1
    M_val = m_factor(model, p, q) if compute_m else None
    return WorldFunctionResult(s=s_val, grad_x=grad_x, grad_y=grad_y,
                               M=M_val, connecting_geodesic=path,
                               converged=True, residual=res)


def _grad_x_s(model: SpacetimeModel, x, y, w_guess=None):
    """d s / d x at (x, y) with a warm-started shoot; returns (grad, w)."""
    w, res, ok = _shoot(model, x, y, w0=w_guess)
    if not ok:
        raise NoConvergence(f"stencil shooting residual {res:.3e}")
    gx = np.asarray(model.metric(x), dtype=float)
    return 2.0 * gx @ w, w


def m_factor(model: SpacetimeModel, p, q, h_frac: float = 0.01) -> float:
    """Transport factor M(p, q) = -1/2 box_p s(p, q) - m.

    box_p s is assembled from 4th-order finite differences of grad_x s on a
    coordinate stencil around p, each stencil point solved by warm-started
    shooting; the covariant divergence uses the metric density:
    box s = |g|^{-1/2} d_mu(|g|^{1/2} g^{mu nu} d_nu s)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    h = h_frac * model.extent
    margin = 2.0 * h_frac
    if not model.contains(p, margin=margin):
        raise StencilOutOfChart("m_factor stencil around p leaves the chart")
    _, w_center = _grad_x_s(model, p, q)

    offsets = np.array([-2.0, -1.0, 1.0, 2.0])
    weights = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0

    def flux(x):
        grad, _ = _grad_x_s(model, x, q, w_guess=w_center + (p - x))
        g = np.asarray(model.metric(x), dtype=float)
        ginv = np.linalg.inv(g)
        root = np.sqrt(abs(np.linalg.det(g)))
        return root * (ginv @ grad), root

    div = 0.0
    for mu in range(model.m):
        acc = np.zeros(model.m)
        for off, wgt in zip(offsets, weights):
            xp = p.copy()
            xp[mu] += off * h[mu]
            acc = acc + wgt * flux(xp)[0]
        div += (acc / h[mu])[mu]
    _, root_p = flux(p)
    box_s = div / root_p
    return -0.5 * box_s - model.m


# ---------------------------------------------------------------------------
# null structure
# ---------------------------------------------------------------------------

def null_classify(model: SpacetimeModel, q, xi, tol: float = 1e-8) -> str:
    """Classify a covector as FutureNull / PastNull / NonNull.

    Null test: |g^{mu nu} xi_mu xi_nu| <= tol * |xi|^2 in the auxiliary
    Euclidean chart metric; orientation from the sign of the raised time
    component."""
    xi = np.asarray(xi, dtype=float)
    if np.allclose(xi, 0.0):
        raise ZeroCovector("covector must be nonzero")
    ginv = metric_inverse_at(model, q)
    norm2 = float(xi @ ginv @ xi)
    if abs(norm2) > tol * float(xi @ xi):
        return NON_NULL
    raised = ginv @ xi
    return FUTURE_NULL if raised[model.time_axis] > 0 else PAST_NULL


def propagate_null(model: SpacetimeModel, q, xi, t_span=(0.0, 1.0),
                   n_samples: int = 33, tol: float = 1e-10):
    """Bicharacteristic flow of a null covector: integrate the geodesic with
    initial velocity g^{-1} xi and co-transport xi as the metric dual of the
    velocity.  Returns a list of CotangentPoint samples."""
    status = null_classify(model, q, xi)
    if status == NON_NULL:
        raise NonNullInput("propagate_null requires a null covector")
    ginv = metric_inverse_at(model, q)
    u0 = ginv @ np.asarray(xi, dtype=float)
    path = integrate_geodesic(model, q, u0, t_span, tol=tol,
                              max_samples=n_samples)
    g = np.asarray(model.metric(path.x), dtype=float)
    xis = np.einsum("nmk,nk->nm", g, path.u)
    return [CotangentPoint(q=path.x[i], xi=xis[i]) for i in range(path.t.size)]
