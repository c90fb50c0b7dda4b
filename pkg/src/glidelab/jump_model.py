"""Kou double-exponential jump diffusion for real equity log returns.

Over a period ``dt`` (years) the log return is

    X = a*dt + sigma*sqrt(dt)*Z + sum_{i<=N} Y_i,   N ~ Poisson(lam*dt)

with Y_i double-exponential: +Exp(eta1) w.p. p_up, -Exp(eta2) otherwise.
``mu`` is the arithmetic growth rate, E[exp(X)] = exp(mu*dt), so the drift is
compensated: a = mu - sigma^2/2 - lam*kappa with kappa = E[e^Y] - 1.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, replace
from typing import Optional, Tuple

import numpy as np
from scipy import optimize, stats
from scipy.interpolate import CubicSpline

from . import rng as _rng
from .errors import InsufficientData, OptimizationFailed, ParameterOutOfDomain
from .market_data import ReturnSeries

log = logging.getLogger(__name__)

ETA1_MIN = 2.0
JSON_KEYS = ("mu", "sigma", "lambda", "p_up", "eta1", "eta2", "r", "dt_months")


@dataclass(frozen=True)
class KouParams:
    mu: float
    sigma: float
    lam: float
    p_up: float
    eta1: float
    eta2: float
    r: float = 0.0

    def validate(self) -> "KouParams":
        if not self.sigma > 0:
            raise ParameterOutOfDomain(f"sigma must be > 0, got {self.sigma}")
        if not self.lam >= 0:
            raise ParameterOutOfDomain(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 <= self.p_up <= 1.0:
            raise ParameterOutOfDomain(f"p_up must lie in [0, 1], got {self.p_up}")
        if not self.eta1 > ETA1_MIN:
            raise ParameterOutOfDomain(f"eta1 must be > 2, got {self.eta1}")
        if not self.eta2 > 0:
            raise ParameterOutOfDomain(f"eta2 must be > 0, got {self.eta2}")
        vals = (self.mu, self.sigma, self.lam, self.p_up, self.eta1, self.eta2, self.r)
        if not all(math.isfinite(v) for v in vals):
            raise ParameterOutOfDomain("parameters must be finite")
        return self

    def to_dict(self, dt_months: int = 1) -> dict:
        return {
            "mu": self.mu, "sigma": self.sigma, "lambda": self.lam, "p_up": self.p_up,
            "eta1": self.eta1, "eta2": self.eta2, "r": self.r, "dt_months": dt_months,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KouParams":
        try:
            p = cls(
                mu=float(d["mu"]), sigma=float(d["sigma"]), lam=float(d["lambda"]),
                p_up=float(d["p_up"]), eta1=float(d["eta1"]), eta2=float(d["eta2"]),
                r=float(d.get("r", 0.0)),
            )
        except KeyError as exc:
            raise ParameterOutOfDomain(f"missing parameter {exc}") from None
        return p.validate()

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    @property
    def bond_gross(self) -> float:
        """Per-year deterministic bond gross return."""
        return math.exp(self.r)


def jump_exp_moments(params: KouParams) -> Tuple[float, float, float]:
    """(E[e^Y], E[e^{2Y}], kappa) for one jump."""
    p, e1, e2 = params.p_up, params.eta1, params.eta2
    if not e1 > ETA1_MIN:
        raise ParameterOutOfDomain(f"eta1 must be > 2 for a finite second moment, got {e1}")
    if not e2 > 0:
        raise ParameterOutOfDomain(f"eta2 must be > 0, got {e2}")
    m1 = p * e1 / (e1 - 1.0) + (1.0 - p) * e2 / (e2 + 1.0)
    m2 = p * e1 / (e1 - 2.0) + (1.0 - p) * e2 / (e2 + 2.0)
    return m1, m2, m1 - 1.0


def log_drift(params: KouParams) -> float:
    _, _, kappa = jump_exp_moments(params)
    return params.mu - 0.5 * params.sigma ** 2 - params.lam * kappa


def gross_moments(params: KouParams, dt: float) -> Tuple[float, float]:
    """Closed-form E[R] and E[R^2] of the equity gross return over ``dt``."""
    m1, m2, _ = jump_exp_moments(params)
    e1 = math.exp(params.mu * dt)
    e2 = math.exp((2 * params.mu + params.sigma ** 2 + params.lam * (m2 - 2 * m1 + 1)) * dt)
    return e1, e2


def log_return_moments(params: KouParams, dt: float) -> Tuple[float, float]:
    """Mean and standard deviation of the log return over ``dt``."""
    p, e1, e2 = params.p_up, params.eta1, params.eta2
    ey = p / e1 - (1 - p) / e2
    ey2 = 2 * p / e1 ** 2 + 2 * (1 - p) / e2 ** 2
    mean = log_drift(params) * dt + params.lam * dt * ey
    var = params.sigma ** 2 * dt + params.lam * dt * ey2
    return mean, math.sqrt(var)


def char_function(params: KouParams, dt: float, u: np.ndarray) -> np.ndarray:
    """Characteristic function E[exp(iuX)] of the log return over ``dt``."""
    u = np.asarray(u, dtype=float)
    a = log_drift(params)
    iu = 1j * u
    phi_y = params.p_up * params.eta1 / (params.eta1 - iu) + (1 - params.p_up) * params.eta2 / (params.eta2 + iu)
    expo = iu * a - 0.5 * params.sigma ** 2 * u ** 2 + params.lam * (phi_y - 1.0)
    return np.exp(dt * expo)


# -- Fourier inversion ------------------------------------------------------


@dataclass(frozen=True)
class InversionGrid:
    x0: float
    dx: float
    n: int

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.n)


def _next_pow2(k: float) -> int:
    return 1 << max(10, int(math.ceil(math.log2(max(k, 2.0)))))


def default_grid(params: KouParams, dt: float, tail: float = 1e-12, points_per_sd: int = 32) -> InversionGrid:
    """Grid wide enough that the mass outside it is below ``tail``.

    The jump tails use the Chernoff bound P(S > z) <= exp(4*Lam - 0.8*eta*z)
    for a compound Poisson sum of Exp(eta) jumps with mean count Lam.
    """
    # anchor on the diffusion centre; jumps only widen one side or the other
    center = log_drift(params) * dt
    sd_diff = params.sigma * math.sqrt(dt)
    lam_dt = params.lam * dt
    gauss = math.sqrt(2.0 * -math.log(tail)) + 1.0
    lo = hi = gauss * sd_diff
    if lam_dt > 0:
        k = -math.log(tail) + 4.0 * lam_dt
        if params.p_up > 0:
            hi += k / (0.8 * params.eta1)
        if params.p_up < 1:
            lo += k / (0.8 * params.eta2)
    dx = sd_diff / points_per_sd
    n = _next_pow2((lo + hi) / dx)
    n = min(n, 1 << 20)
    dx = (lo + hi) / (n - 1)
    return InversionGrid(center - lo, dx, n)


def density_on_grid(params: KouParams, dt: float, grid: InversionGrid) -> np.ndarray:
    """Density at ``grid.x`` by FFT inversion of the characteristic function, clamped at 0."""
    n, dx = grid.n, grid.dx
    du = 2.0 * math.pi / (n * dx)
    k = np.fft.fftfreq(n, d=1.0 / n)  # 0..n/2-1, -n/2..-1
    u = k * du
    a = char_function(params, dt, u) * np.exp(-1j * u * grid.x0)
    f = np.fft.fft(a).real * (du / (2.0 * math.pi))
    return np.maximum(f, 0.0)


def density_grid(params: KouParams, dt: float, grid: Optional[InversionGrid] = None) -> Tuple[np.ndarray, np.ndarray]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    params.validate()
    grid = grid or default_grid(params, dt)
    return grid.x, density_on_grid(params, dt, grid)


def log_return_density(params: KouParams, dt: float, x) -> np.ndarray:
    """Density of the log return over ``dt`` at ``x`` (cubic interpolation of the inversion grid)."""
    xs, f = density_grid(params, dt)
    spline = CubicSpline(xs, f)
    x = np.asarray(x, dtype=float)
    out = np.where((x >= xs[0]) & (x <= xs[-1]), spline(np.clip(x, xs[0], xs[-1])), 0.0)
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


def standardized_density(params: KouParams, dt: float, z, loc: Optional[float] = None, scale: Optional[float] = None):
    """Density of (X - loc)/scale; defaults to the model's own mean and sd."""
    mean, sd = log_return_moments(params, dt)
    loc = mean if loc is None else loc
    scale = sd if scale is None else scale
    z = np.asarray(z, dtype=float)
    return scale * log_return_density(params, dt, loc + scale * z)


# -- simulation -------------------------------------------------------------


def sample_log_returns(params: KouParams, dt: float, size, gen: np.random.Generator) -> np.ndarray:
    """Draw Kou log returns of shape ``size`` from ``gen``.

    Sums of k Exp(eta) jumps are drawn as Gamma(k, 1/eta), so the cost does
    not depend on the jump count.
    """
    a = log_drift(params)
    z = gen.standard_normal(size)
    out = a * dt + params.sigma * math.sqrt(dt) * z
    if params.lam > 0:
        n_jumps = gen.poisson(params.lam * dt, size)
        hit = n_jumps > 0
        n = n_jumps[hit]
        n_up = gen.binomial(n, params.p_up)
        n_dn = n - n_up
        jumps = np.zeros(n.shape)
        m = n_up > 0
        jumps[m] += gen.gamma(n_up[m], 1.0 / params.eta1)
        m = n_dn > 0
        jumps[m] -= gen.gamma(n_dn[m], 1.0 / params.eta2)
        out[hit] += jumps
    return out


def simulate_gross_returns(params: KouParams, dt: float, n_periods: int, rng_seed: int) -> np.ndarray:
    """``n_periods`` independent equity gross returns; identical for identical seeds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    params.validate()
    out = np.empty(n_periods)
    for k, lo, hi in _rng.chunks(n_periods):
        out[lo:hi] = sample_log_returns(params, dt, hi - lo, _rng.stream(rng_seed, _rng.RETURNS, k))
    return np.exp(out)


# -- one-period quadrature --------------------------------------------------


@dataclass(frozen=True)
class DiscreteReturnDistribution:
    gross_returns: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gross_returns, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if g.shape != w.shape or g.ndim != 1:
            raise ValueError("nodes and weights must be matching 1-d arrays")
        if np.any(np.diff(g) <= 0) or np.any(g <= 0):
            raise ValueError("nodes must be positive and strictly increasing")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "gross_returns", g)
        object.__setattr__(self, "weights", w)

    def moment(self, k: int = 1) -> float:
        return float(np.dot(self.weights, self.gross_returns ** k))


def period_return_quadrature(params: KouParams, dt: float, n_nodes: int = 512, tail: float = 1e-7) -> DiscreteReturnDistribution:
    """Discretize the one-period gross return on ``n_nodes`` equally spaced log nodes.

    The support is cut at the ``tail`` and ``1 - tail`` quantiles of the
    inverted density; weights are trapezoid weights, renormalized.
    """
    if n_nodes < 16:
        raise ValueError("n_nodes must be >= 16")
    xs, f = density_grid(params, dt)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(xs))])
    cdf /= cdf[-1]
    lo = float(np.interp(tail, cdf, xs))
    hi = float(np.interp(1.0 - tail, cdf, xs))
    x = np.linspace(lo, hi, n_nodes)
    fx = np.maximum(CubicSpline(xs, f)(x), 0.0)
    w = fx * (x[1] - x[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    w /= w.sum()
    return DiscreteReturnDistribution(np.exp(x), w)


# -- maximum likelihood -----------------------------------------------------

_FIT_NAMES = ("mu", "sigma", "lam", "p_up", "eta1", "eta2")
_BOUNDS = (
    (-2.0, 2.0),       # mu
    (0.02, 2.0),       # sigma
    (0.0, 50.0),       # lam
    (0.0, 1.0),        # p_up
    (ETA1_MIN + 0.01, 500.0),  # eta1
    (0.5, 500.0),      # eta2
)

# (lam, p_up, eta1, eta2): low/high intensity, both jump asymmetries
FIT_STARTS = (
    (0.1, 0.3, 8.0, 8.0),
    (0.1, 0.5, 20.0, 4.0),
    (0.5, 0.3, 5.0, 5.0),
    (0.5, 0.2, 10.0, 3.0),
    (1.0, 0.4, 6.0, 6.0),
    (2.0, 0.5, 15.0, 10.0),
    (0.3, 0.7, 4.0, 8.0),
    (3.0, 0.3, 25.0, 20.0),
)


@dataclass(frozen=True)
class FitResult:
    params: KouParams
    log_likelihood: float
    gaussian_log_likelihood: float
    n_obs: int
    starts_converged: int
    jumps_significant: bool = True


def gaussian_mle(r: np.ndarray, dt: float) -> Tuple[float, float, float]:
    """Closed-form normal MLE: (mu, sigma, loglik), mu on the arithmetic convention."""
    r = np.asarray(r, dtype=float)
    m = r.mean()
    v = r.var()  # MLE, ddof=0
    sigma = math.sqrt(v / dt)
    mu = m / dt + 0.5 * sigma ** 2
    ll = -0.5 * r.size * (math.log(2 * math.pi * v) + 1.0)
    return mu, sigma, ll


class _Likelihood:
    """Negative mean log-likelihood on a grid fixed by the data."""

    def __init__(self, r: np.ndarray, dt: float):
        self.r = r
        self.dt = dt
        center = float(np.median(r))
        spread = float(np.max(np.abs(r - center)))
        sd = float(r.std())
        half = 2.0 * spread + 12.0 * sd
        # resolve the smallest diffusive scale the bounds allow near the data
        dx = min(sd, _BOUNDS[1][0] * math.sqrt(dt) * 4) / 48.0
        n = min(_next_pow2(2 * half / dx), 1 << 20)
        self.grid = InversionGrid(center - half, 2 * half / (n - 1), n)
        # fixed grid: interpolation indices and weights are computed once
        pos = (r - self.grid.x0) / self.grid.dx
        self.idx = np.clip(np.floor(pos).astype(np.int64), 0, n - 2)
        self.frac = pos - self.idx

    def __call__(self, theta: np.ndarray) -> float:
        p = KouParams(*theta)
        try:
            f = density_on_grid(p, self.dt, self.grid)
        except (ParameterOutOfDomain, FloatingPointError):
            return 1e10
        dens = f[self.idx] * (1.0 - self.frac) + f[self.idx + 1] * self.frac
        return -float(np.mean(np.log(np.maximum(dens, 1e-300))))


def fit_mle(returns: ReturnSeries, dt: float = 1.0 / 12.0, starts=FIT_STARTS, min_obs: int = 120,
            jump_test_level: float = 0.01) -> FitResult:
    """Multi-start bounded maximum likelihood for all parameters except ``r``.

    ``jump_test_level`` is the size of the likelihood-ratio test that decides
    between the jump model and the normal (lam = 0) model; 0 disables it.
    """
    r = np.asarray(returns.log_returns if isinstance(returns, ReturnSeries) else returns, dtype=float)
    if r.size < min_obs:
        raise InsufficientData(f"need >= {min_obs} observations, got {r.size}")
    mu_g, sig_g, ll_g = gaussian_mle(r, dt)
    nll = _Likelihood(r, dt)
    lb = np.array([b[0] for b in _BOUNDS])
    ub = np.array([b[1] for b in _BOUNDS])

    best = None
    n_ok = 0
    for lam0, p0, e10, e20 in starts:
        ey2 = 2 * p0 / e10 ** 2 + 2 * (1 - p0) / e20 ** 2
        sig0 = math.sqrt(max(sig_g ** 2 - lam0 * ey2, 0.25 * sig_g ** 2))
        x0 = np.clip(np.array([mu_g, sig0, lam0, p0, e10, e20]), lb, ub)
        scale = np.maximum(np.abs(x0), 0.05)

        def obj(y, scale=scale):
            return nll(y * scale)

        with np.errstate(all="ignore"):
            res = optimize.minimize(
                obj, x0 / scale, method="L-BFGS-B",
                bounds=list(zip(lb / scale, ub / scale)),
                options={"maxiter": 2000, "ftol": 1e-13, "gtol": 1e-9},
            )
        if not np.isfinite(res.fun) or res.fun >= 1e9:
            continue
        n_ok += 1
        theta = res.x * scale
        log.debug("start %s -> nll %.8f (%s)", (lam0, p0, e10, e20), res.fun, res.message)
        if best is None or res.fun < best[0] - 1e-12:
            best = (res.fun, theta)
    if best is None:
        raise OptimizationFailed("no start produced a finite likelihood")

    theta = best[1]
    ll = -best[0] * r.size
    # Likelihood-ratio check of the four jump parameters against the normal model.
    # Under lam = 0 they are not identified, and sample skew alone can pull the
    # optimum to many tiny jumps; fall back to the normal fit unless jumps are significant.
    significant = 2.0 * (ll - ll_g) > stats.chi2.ppf(1.0 - jump_test_level, 4) if jump_test_level else True
    if not significant:
        log.debug("jump gain %.3g not significant; returning the normal fit", ll - ll_g)
        theta = np.array([mu_g, sig_g, 0.0, theta[3], theta[4], theta[5]])
        ll = ll_g
    at_bound = [n for n, v, (lo, hi) in zip(_FIT_NAMES, theta, _BOUNDS) if n in ("eta1", "eta2") and (v <= lo * (1 + 1e-6))]
    if at_bound and significant:
        warnings.warn(f"fit stopped at lower bound for {', '.join(at_bound)}", RuntimeWarning)
    params = KouParams(*theta).validate()
    return FitResult(params, ll, ll_g, int(r.size), n_ok, bool(significant))


def with_bond_drift(params: KouParams, r: float) -> KouParams:
    return replace(params, r=float(r))
