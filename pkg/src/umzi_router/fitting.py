"""Weighted nonlinear least squares for peaks, routing fringes and beating fringes.

All three models carry analytic Jacobians and share one damped Gauss-Newton
(Levenberg-Marquardt) driver.  Counting data is weighted with
``1 / max(count, 1)``; reported errors are the square roots of the diagonal
of ``inv(J^T W J)``, i.e. they take the Poisson weights as absolute.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks, peak_widths

from .coincidence import FWHM_TO_SIGMA, CoincidenceHistogram

MAX_ITER = 200
XTOL = 1e-10
SIGMA_TO_FWHM = 1.0 / FWHM_TO_SIGMA


class FitError(ValueError):
    pass


@dataclass
class FitResult:
    model: str
    names: tuple[str, ...]
    params: np.ndarray
    covariance: np.ndarray
    rss: float
    converged: bool
    iterations: int
    visibility: float | None = None
    visibility_err: float | None = None
    visibility_raw: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0, None))

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def error(self, name: str) -> float:
        return float(self.errors[self.names.index(name)])

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "params": {n: float(v) for n, v in zip(self.names, self.params)},
            "errors": {n: float(e) for n, e in zip(self.names, self.errors)},
            "rss": float(self.rss),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }
        if self.visibility is not None:
            d["visibility"] = self.visibility
            d["visibility_err"] = self.visibility_err
            d["visibility_raw"] = self.visibility_raw
        d.update(self.extra)
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# --- driver -----------------------------------------------------------------


def levenberg_marquardt(fun, jac, p0, y, w, max_iter=MAX_ITER, xtol=XTOL):
    """Minimize sum(w * (y - fun(p))**2).

    Returns (p, covariance, rss, converged, iterations).
    """
    p = np.array(p0, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    r = y - fun(p)
    rss = float(np.sum(w * r * r))
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        J = jac(p)
        JW = J.T * w
        A = JW @ J
        g = JW @ r
        diag = np.diag(A).copy()
        diag[diag == 0] = 1.0
        while True:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), g)
            except np.linalg.LinAlgError:
                lam *= 10
                if lam > 1e16:
                    break
                continue
            p_new = p + step
            r_new = y - fun(p_new)
            rss_new = float(np.sum(w * r_new * r_new))
            if np.isfinite(rss_new) and rss_new <= rss:
                break
            lam *= 10
            if lam > 1e16:
                break
        if lam > 1e16:
            # no downhill step left at machine precision: stationary point
            converged = True
            break
        small = np.linalg.norm(step) <= xtol * (np.linalg.norm(p) + xtol)
        p, r, rss = p_new, r_new, rss_new
        lam = max(lam / 10, 1e-12)
        if small or rss == 0.0:
            converged = True
            break
    J = jac(p)
    A = (J.T * w) @ J
    try:
        cov = np.linalg.inv(A)
    except np.linalg.LinAlgError:
        cov = np.full_like(A, np.nan)
    cov = 0.5 * (cov + cov.T)
    return p, cov, rss, converged, it


def poisson_weights(counts) -> np.ndarray:
    return 1.0 / np.maximum(np.asarray(counts, dtype=float), 1.0)


def _wrap(angle: float) -> float:
    """Map to (-pi, pi]."""
    a = math.remainder(angle, 2 * math.pi)
    return math.pi if a == -math.pi else a


# --- multi-Gaussian peaks ---------------------------------------------------


def gaussian_peaks_model(x, p):
    """sum_k A_k exp(-(x - mu_k)^2 / (2 s_k^2)) + baseline; p = [A0, mu0, s0, ..., baseline]."""
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, p[-1])
    for k in range(0, len(p) - 1, 3):
        a, mu, s = p[k : k + 3]
        out += a * np.exp(-0.5 * ((x - mu) / s) ** 2)
    return out


def gaussian_peaks_jacobian(x, p):
    x = np.asarray(x, dtype=float)
    J = np.empty((x.size, len(p)))
    for k in range(0, len(p) - 1, 3):
        a, mu, s = p[k : k + 3]
        u = x - mu
        e = np.exp(-0.5 * (u / s) ** 2)
        J[:, k] = e
        J[:, k + 1] = a * e * u / s**2
        J[:, k + 2] = a * e * u**2 / s**3
    J[:, -1] = 1.0
    return J


def _initial_peaks(x, y, n_peaks):
    kernel = np.ones(5) / 5
    smooth = np.convolve(y, kernel, mode="same")
    base = float(np.median(y))
    noise = math.sqrt(max(base, 1.0))
    idx, props = find_peaks(smooth, prominence=3 * noise / math.sqrt(5), distance=3)
    if idx.size < n_peaks:
        raise FitError(f"found {idx.size} local maxima, need {n_peaks}")
    top = idx[np.argsort(smooth[idx])[::-1][:n_peaks]]
    top.sort()
    widths = peak_widths(smooth, top, rel_height=0.5)[0]
    dx = float(np.median(np.diff(x)))
    p0 = []
    for i, wbins in zip(top, widths):
        p0 += [max(smooth[i] - base, 1.0), x[i], max(wbins * dx * FWHM_TO_SIGMA, dx)]
    p0.append(base)
    return np.array(p0)


def fit_gaussian_peaks(h: CoincidenceHistogram, n_peaks: int = 3) -> FitResult:
    """Fit ``n_peaks`` Gaussians plus a flat baseline to a coincidence histogram.

    Parameters are reported as ``amp_k``, ``center_k`` and ``fwhm_k`` (seconds)
    with peaks ordered by center, followed by ``baseline``.
    """
    if n_peaks < 1:
        raise ValueError("n_peaks must be >= 1")
    y = np.asarray(h.counts, dtype=float)
    if np.count_nonzero(y) < 3 * n_peaks + 1:
        raise FitError("too few non-empty bins for the requested number of peaks")
    x = h.centers * 1e12  # fit in ps
    p0 = _initial_peaks(x, y, n_peaks)
    p, cov, rss, ok, it = levenberg_marquardt(
        lambda q: gaussian_peaks_model(x, q),
        lambda q: gaussian_peaks_jacobian(x, q),
        p0, y, poisson_weights(y),
    )
    for k in range(2, len(p) - 1, 3):
        if p[k] < 0:
            p[k] = -p[k]
            cov[k, :] *= -1
            cov[:, k] *= -1
    order = np.argsort(p[1:-1:3])
    perm = np.concatenate([[3 * k, 3 * k + 1, 3 * k + 2] for k in order] + [[len(p) - 1]])
    p, cov = p[perm], cov[np.ix_(perm, perm)]
    scale = np.array([1.0, 1e-12, 1e-12 * SIGMA_TO_FWHM] * n_peaks + [1.0])
    names = tuple(f"{n}_{k}" for k in range(n_peaks) for n in ("amp", "center", "fwhm")) + ("baseline",)
    return FitResult(
        model="gaussian_peaks",
        names=names,
        params=p * scale,
        covariance=cov * np.outer(scale, scale),
        rss=rss,
        converged=ok,
        iterations=it,
    )


# --- routing fringe ---------------------------------------------------------


def fringe_model(phi, p, period=math.pi):
    """A (1 + V cos(2 pi phi / period + delta)); p = [A, V, delta] or [A, V, delta, period]."""
    phi = np.asarray(phi, dtype=float)
    if len(p) == 4:
        period = p[3]
    a, v, d = p[:3]
    return a * (1 + v * np.cos(2 * np.pi * phi / period + d))


def fringe_jacobian(phi, p, period=math.pi):
    phi = np.asarray(phi, dtype=float)
    if len(p) == 4:
        period = p[3]
    a, v, d = p[:3]
    arg = 2 * np.pi * phi / period + d
    c, s = np.cos(arg), np.sin(arg)
    cols = [1 + v * c, a * c, -a * v * s]
    if len(p) == 4:
        cols.append(a * v * s * 2 * np.pi * phi / period**2)
    return np.column_stack(cols)


def _visibility_fields(p, cov, iv):
    """Raw V, V clamped to [0, 1], and its standard error."""
    v_raw = float(p[iv])
    return v_raw, float(min(max(v_raw, 0.0), 1.0)), float(math.sqrt(max(cov[iv, iv], 0.0)))


def fit_fringe(phis, counts, period_hint: float = math.pi, free_period: bool = False) -> FitResult:
    """Fit A (1 + V cos(2 pi phi / period + delta)) to a phase sweep.

    The period is held at ``period_hint`` (pi for the router) unless
    ``free_period`` is set, which is meant for diagnostics.  No background
    subtraction is applied.
    """
    phis = np.asarray(phis, dtype=float)
    y = np.asarray(counts, dtype=float)
    if phis.size < 6 or phis.size != y.size:
        raise FitError("need at least 6 (phi, count) points")
    step = float(np.median(np.diff(np.sort(phis))))
    if np.ptp(phis) + step < period_hint * (1 - 1e-9):
        raise FitError("phase grid spans less than one fringe period")
    arg = 2 * np.pi * phis / period_hint
    X = np.column_stack([np.ones_like(phis), np.cos(arg), np.sin(arg)])
    w = poisson_weights(y)
    sw = np.sqrt(w)
    coef = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)[0]
    a0 = coef[0] if coef[0] != 0 else 1.0
    p0 = [a0, math.hypot(coef[1], coef[2]) / a0, math.atan2(-coef[2], coef[1])]
    if free_period:
        p0.append(period_hint)
    p, cov, rss, ok, it = levenberg_marquardt(
        lambda q: fringe_model(phis, q, period_hint),
        lambda q: fringe_jacobian(phis, q, period_hint),
        p0, y, w,
    )
    if p[1] < 0:
        p[1] = -p[1]
        p[2] += math.pi
        cov[1, :] *= -1
        cov[:, 1] *= -1
    p[2] = _wrap(p[2])
    v_raw, v, v_err = _visibility_fields(p, cov, 1)
    names = ("amplitude", "visibility", "phase") + (("period",) if free_period else ())
    return FitResult(
        model="fringe_free_period" if free_period else "fringe",
        names=names,
        params=p,
        covariance=cov,
        rss=rss,
        converged=ok,
        iterations=it,
        visibility=v,
        visibility_err=v_err,
        visibility_raw=v_raw,
        extra={} if free_period else {"period": period_hint},
    )


# --- beating fringe ---------------------------------------------------------


def beating_model(x, p, sigma):
    """A (1 - V sinc(sigma x) cos(2 pi f x + delta)); p = [A, V, f, delta]."""
    x = np.asarray(x, dtype=float)
    a, v, f, d = p
    return a * (1 - v * np.sinc(sigma * x / np.pi) * np.cos(2 * np.pi * f * x + d))


def beating_jacobian(x, p, sigma):
    x = np.asarray(x, dtype=float)
    a, v, f, d = p
    env = np.sinc(sigma * x / np.pi)
    arg = 2 * np.pi * f * x + d
    c, s = np.cos(arg), np.sin(arg)
    return np.column_stack([
        1 - v * env * c,
        -a * env * c,
        a * v * env * s * 2 * np.pi * x,
        a * v * env * s,
    ])


def _beating_linear(x, y, w, sigma, f):
    env = np.sinc(sigma * x / np.pi)
    arg = 2 * np.pi * f * x
    X = np.column_stack([np.ones_like(x), env * np.cos(arg), env * np.sin(arg)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    rss = float(np.sum(w * (y - X @ coef) ** 2))
    return coef, rss


def fit_beating(delta_taus, counts, sigma: float, freq_hint: float) -> FitResult:
    """Fit the sinc-damped beating curve with ``sigma`` (rad/s) held fixed.

    Reports ``amplitude``, ``visibility``, ``frequency`` (Hz) and ``phase``;
    ``extra['period']`` is 1 / frequency in seconds.
    """
    x = np.asarray(delta_taus, dtype=float) * 1e12  # ps
    y = np.asarray(counts, dtype=float)
    if x.size != y.size:
        raise FitError("delta_taus and counts differ in length")
    s = sigma * 1e-12  # rad/ps
    if np.count_nonzero(np.abs(x) < math.pi / s) < 8:
        raise FitError("need at least 8 points inside the first sinc lobe")
    w = poisson_weights(y)
    f_hint = freq_hint * 1e-12  # THz
    grid = f_hint * np.linspace(0.8, 1.2, 81)
    fits = [_beating_linear(x, y, w, s, f) for f in grid]
    best = int(np.argmin([r for _, r in fits]))
    (a, b, c), _ = fits[best]
    a = a if a != 0 else 1.0
    p0 = [a, math.hypot(b, c) / a, grid[best], math.atan2(c, -b)]
    p, cov, rss, ok, it = levenberg_marquardt(
        lambda q: beating_model(x, q, s),
        lambda q: beating_jacobian(x, q, s),
        p0, y, w,
    )
    if p[1] < 0:
        p[1] = -p[1]
        p[3] += math.pi
        cov[1, :] *= -1
        cov[:, 1] *= -1
    p[3] = _wrap(p[3])
    scale = np.array([1.0, 1.0, 1e12, 1.0])
    p, cov = p * scale, cov * np.outer(scale, scale)
    v_raw, v, v_err = _visibility_fields(p, cov, 1)
    f = p[2]
    return FitResult(
        model="beating",
        names=("amplitude", "visibility", "frequency", "phase"),
        params=p,
        covariance=cov,
        rss=rss,
        converged=ok,
        iterations=it,
        visibility=v,
        visibility_err=v_err,
        visibility_raw=v_raw,
        extra={"period": 1 / f, "period_err": math.sqrt(cov[2, 2]) / f**2, "sigma": sigma},
    )


# --- off-ratio --------------------------------------------------------------


def off_ratio_db(max_counts: float, min_counts: float) -> tuple[float, float]:
    """10 log10(max/min) and its Poisson error; ``inf`` when min is zero."""
    if not max_counts > 0:
        raise ValueError("max_counts must be positive")
    if max_counts < min_counts:
        raise ValueError("max_counts is smaller than min_counts")
    if min_counts == 0:
        return math.inf, math.inf
    value = 10 * math.log10(max_counts / min_counts)
    err = 10 / math.log(10) * math.sqrt(1 / max_counts + 1 / min_counts)
    return value, err


def visibility_off_ratio_db(v: float) -> float:
    """Off-ratio implied by a fringe visibility, (1 + V) / (1 - V) in dB."""
    if v >= 1:
        return math.inf
    return 10 * math.log10((1 + v) / (1 - v))
