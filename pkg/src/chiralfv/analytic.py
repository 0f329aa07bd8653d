"""Closed-form reference states and the self-consistency solver.

Provides the uniform state, the von Mises steady state (zero phase lag), the
skewed traveling-wave profile for nonzero phase lag, and the Newton solver for
its self-consistent order parameter magnitude and wave speed.

All circle integrals use composite Gauss-Legendre quadrature with panel
doubling until successive results agree to 1e-11. Profile construction works
in log space throughout: exponents scale like sigma*R/d_phi and v/d_phi and
overflow double precision long before the normalized density does. The tail
integral of the bracket term is accumulated directly as a suffix sum of panel
integrals; computing it as (total - prefix) cancels catastrophically once
|v|/d_phi is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import InvalidStateError, ModelParams

TWO_PI = 2.0 * math.pi
_LOG_TINY = -745.0  # under exp() this is a clean 0.0


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap; carries the last iterate."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


def uniform_density() -> float:
    """The disordered state 1/(2*pi)."""
    return 1.0 / TWO_PI


def transition_d_phi(params: ModelParams) -> float:
    """Order-disorder transition line (sigma/2) cos(alpha)."""
    return 0.5 * params.sigma * math.cos(params.alpha)


def r_decay_threshold(params: ModelParams) -> float:
    """Diffusion level sigma (cos a + sin|a| / 2) above which R(t) decays monotonically.

    Only valid for |alpha| <= pi/2.
    """
    if abs(params.alpha) > 0.5 * math.pi:
        raise InvalidStateError(
            f"decay threshold requires |alpha| <= pi/2, got {params.alpha}"
        )
    return params.sigma * (math.cos(params.alpha) + 0.5 * math.sin(abs(params.alpha)))


def hydrodynamic_r_near_transition(params: ModelParams, v: float) -> float:
    """Near-transition magnitude sqrt(((4 d^2 + v^2)/d) (cos a - 2 d)), d = d_phi.

    Returns 0 when cos(alpha) - 2 d_phi < 0 (disordered side). Plot-overlay
    approximation only; stated at coupling strength 1.
    """
    d = params.d_phi
    margin = math.cos(params.alpha) - 2.0 * d
    if margin <= 0.0:
        return 0.0
    return math.sqrt((4.0 * d * d + v * v) / d * margin)


def _panel_nodes(n_panels: int, n_nodes: int, a: float = 0.0, b: float = TWO_PI):
    """Composite Gauss-Legendre nodes/weights on [a, b], shaped (panels, nodes)."""
    x, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(a, b, n_panels + 1)
    half = 0.5 * (edges[1] - edges[0])
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = mid[:, None] + half * x[None, :]
    weights = np.broadcast_to(half * w[None, :], nodes.shape)
    return nodes, weights, edges


def bessel_ratio(kappa: float, rel_tol: float = 1e-12) -> float:
    """I1(kappa)/I0(kappa) from the shifted integral definitions.

    Integrands exp(kappa (cos t - 1)) stay in [0, 1] for every kappa, so the
    quadrature never overflows. Panels double until the ratio stabilizes; for
    very large kappa the standard asymptotic expansion takes over.
    """
    if not math.isfinite(kappa):
        raise InvalidStateError(f"kappa must be finite, got {kappa}")
    if kappa < 0:
        raise InvalidStateError(f"kappa must be >= 0, got {kappa}")
    if kappa == 0.0:
        return 0.0
    if kappa > 1e4:
        inv = 1.0 / kappa
        return 1.0 - 0.5 * inv - 0.125 * inv * inv - 0.125 * inv**3
    previous = None
    panels = 16
    while panels <= 16384:
        t, w, _ = _panel_nodes(panels, 8, 0.0, math.pi)
        core = np.exp(kappa * (np.cos(t) - 1.0))
        ratio = float(np.sum(w * core * np.cos(t)) / np.sum(w * core))
        if previous is not None and abs(ratio - previous) <= rel_tol * max(abs(ratio), 1e-300):
            return ratio
        previous = ratio
        panels *= 2
    raise ConvergenceError(f"bessel_ratio quadrature did not stabilize (kappa={kappa})", previous)


def _log_scaled_i0(kappa: float) -> float:
    """log(I0(kappa) e^{-kappa}) by shifted quadrature, stable for all kappa >= 0."""
    t, w, _ = _panel_nodes(256, 8, 0.0, math.pi)
    return math.log(float(np.sum(w * np.exp(kappa * (np.cos(t) - 1.0)))) / math.pi)


@dataclass
class VonMisesState:
    """Zero-phase-lag steady state: density exp(kappa cos(phi - mean)) / (2 pi I0)."""

    r_mag: float
    theta_mean: float
    params: ModelParams

    @property
    def kappa(self) -> float:
        return self.params.sigma * self.r_mag / self.params.d_phi

    def __call__(self, phi) -> np.ndarray:
        kappa = self.kappa
        if kappa == 0.0:
            return np.full_like(np.asarray(phi, dtype=np.float64), uniform_density())
        log_norm = getattr(self, "_log_norm", None)
        if log_norm is None:
            log_norm = math.log(TWO_PI) + _log_scaled_i0(kappa)
            object.__setattr__(self, "_log_norm", log_norm)
        arg = np.asarray(phi, dtype=np.float64) - self.theta_mean
        return np.exp(kappa * (np.cos(arg) - 1.0) - log_norm)


def von_mises(theta_mean: float, params: ModelParams, damping: float = 0.7,
              tol: float = 1e-14, max_iter: int = 2000) -> VonMisesState:
    """Self-consistent von Mises state: R solves R = I1(sR/D)/I0(sR/D).

    Returns the R = 0 uniform branch when d_phi >= sigma/2. Damped fixed-point
    iteration from R0 = 0.5; non-convergence raises with the residual attached.
    """
    if params.d_phi <= 0.0:
        raise InvalidStateError("von Mises state requires d_phi > 0")
    if params.d_phi >= 0.5 * params.sigma:
        return VonMisesState(0.0, theta_mean, params)
    r = 0.5
    for _ in range(max_iter):
        target = bessel_ratio(params.sigma * r / params.d_phi)
        r_next = (1.0 - damping) * r + damping * target
        if abs(r_next - r) <= tol:
            return VonMisesState(r_next, theta_mean, params)
        r = r_next
    residual = abs(bessel_ratio(params.sigma * r / params.d_phi) - r)
    raise ConvergenceError(
        f"von Mises fixed point did not converge (residual {residual:.3e})", r
    )


class TravelingWaveProfile:
    """Normalized traveling-wave profile g(omega) for given (R, v).

    g(w) = c0 exp(A(w)) [1 + (e^{2 pi v/D} - 1) I(w)/I(2 pi)] with
    A(w) = -(v/D) w + (sigma R/D) cos(w + alpha) and I the running integral of
    exp(-A). Internally the bracket is held as
    (e^{2 pi v/D} I(w) + [I(2 pi) - I(w)]) / I(2 pi) whose terms are all
    nonnegative, and everything is evaluated in log space.
    """

    def __init__(self, r_mag: float, v_wave: float, params: ModelParams,
                 n_panels: int = 64, n_nodes: int = 8):
        if params.d_phi <= 0.0:
            raise InvalidStateError("traveling-wave profile requires d_phi > 0")
        self.r_mag = float(r_mag)
        self.v_wave = float(v_wave)
        self.params = params
        self.beta = v_wave / params.d_phi
        self.kappa = params.sigma * r_mag / params.d_phi
        self.n_nodes = n_nodes
        self._build(n_panels)

    # -- construction ---------------------------------------------------

    def _log_forcing(self, w: np.ndarray) -> np.ndarray:
        """B(w) = beta w - kappa cos(w + alpha) = -A(w)."""
        return self.beta * w - self.kappa * np.cos(w + self.params.alpha)

    def _build(self, n_panels: int) -> None:
        self.n_panels = n_panels
        nodes, weights, edges = _panel_nodes(n_panels, self.n_nodes)
        self._edges = edges
        self._panel_width = edges[1] - edges[0]
        logseg = _logsumexp(self._log_forcing(nodes) + np.log(weights), axis=1)
        # log of prefix integrals int_0^edge and suffix integrals int_edge^2pi
        self._log_prefix = np.concatenate(([-np.inf], _logcumsumexp(logseg)))
        self._log_suffix = np.concatenate((_logcumsumexp(logseg[::-1])[::-1], [-np.inf]))
        self._log_total = self._log_prefix[-1]
        # normalization on the same composite grid
        log_gw = self._log_unnormalized(nodes.ravel())
        self.log_c0 = -_logsumexp(log_gw + np.log(weights.ravel()))
        self._nodes = nodes.ravel()
        self._weights = weights.ravel()

    def _partial_log_integral(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """log of int_a^b exp(B), elementwise over equal-length arrays (a <= b)."""
        x, w = np.polynomial.legendre.leggauss(self.n_nodes)
        half = 0.5 * (b - a)
        mid = 0.5 * (a + b)
        pts = mid[:, None] + half[:, None] * x[None, :]
        logw = np.where(half > 0.0, np.log(np.maximum(half, 1e-300)), -np.inf)
        return _logsumexp(self._log_forcing(pts) + np.log(w)[None, :] + logw[:, None], axis=1)

    def _log_bracket(self, w: np.ndarray) -> np.ndarray:
        idx = np.clip((w / self._panel_width).astype(int), 0, self.n_panels - 1)
        left = self._edges[idx]
        right = self._edges[idx + 1]
        log_i = np.logaddexp(self._log_prefix[idx], self._partial_log_integral(left, w))
        log_j = np.logaddexp(self._log_suffix[idx + 1], self._partial_log_integral(w, right))
        return np.logaddexp(TWO_PI * self.beta + log_i, log_j) - self._log_total

    def _log_unnormalized(self, w: np.ndarray) -> np.ndarray:
        return -self._log_forcing(w) + self._log_bracket(w)

    # -- evaluation -----------------------------------------------------

    def log_density(self, omega) -> np.ndarray:
        w = np.mod(np.asarray(omega, dtype=np.float64), TWO_PI)
        flat = np.atleast_1d(w).ravel()
        return self.log_c0 + self._log_unnormalized(flat).reshape(np.shape(w))

    def __call__(self, omega):
        out = np.exp(self.log_density(omega))
        if np.ndim(omega) == 0:
            return float(out)
        return out

    def first_moments(self) -> tuple[float, float]:
        """(int g cos, int g sin) on the profile's composite grid."""
        g = np.exp(self.log_c0 + self._log_unnormalized(self._nodes))
        return (
            float(np.sum(self._weights * g * np.cos(self._nodes))),
            float(np.sum(self._weights * g * np.sin(self._nodes))),
        )

    def sce_residuals(self) -> tuple[float, float]:
        """(int g cos - R, int g sin) — both zero at a self-consistent root."""
        mc, ms = self.first_moments()
        return mc - self.r_mag, ms


def _logsumexp(a: np.ndarray, axis=None) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - amax), axis=axis)) + np.squeeze(amax, axis=axis)
    return out


def _logcumsumexp(a: np.ndarray) -> np.ndarray:
    amax = np.maximum.accumulate(a)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    # rescale increments against the running max; exact enough at our panel counts
    out = np.empty_like(a)
    total = 0.0
    current_max = -np.inf
    for i, value in enumerate(a):
        if value > current_max:
            if math.isfinite(current_max):
                total *= math.exp(current_max - value)
            current_max = value
        total += math.exp(value - current_max) if math.isfinite(current_max) else 0.0
        out[i] = math.log(total) + current_max if total > 0.0 else -np.inf
    return out


def traveling_wave_profile(r_mag: float, v_wave: float, params: ModelParams,
                           tol: float = 1e-11, max_panels: int = 4096) -> TravelingWaveProfile:
    """Profile with panel doubling until normalization and moments agree to tol."""
    panels = 64
    profile = TravelingWaveProfile(r_mag, v_wave, params, n_panels=panels)
    while panels < max_panels:
        refined = TravelingWaveProfile(r_mag, v_wave, params, n_panels=2 * panels)
        prev_m = profile.first_moments()
        next_m = refined.first_moments()
        drift = max(
            abs(profile.log_c0 - refined.log_c0),
            abs(prev_m[0] - next_m[0]),
            abs(prev_m[1] - next_m[1]),
        )
        profile, panels = refined, 2 * panels
        if drift <= tol:
            return profile
    raise ConvergenceError(
        f"profile quadrature did not stabilize (R={r_mag}, v={v_wave})", profile
    )


@dataclass
class TravelingWaveSolution:
    """Self-consistent traveling wave: magnitude, speed, and normalized profile.

    The disordered root is reported with r_mag = 0, v_wave = nan, and a uniform
    profile (any speed solves the system at R = 0).
    """

    r_mag: float
    v_wave: float
    params: ModelParams
    profile: Callable[[np.ndarray], np.ndarray]
    residual: float = 0.0

    @property
    def disordered(self) -> bool:
        return self.r_mag == 0.0


def _uniform_profile(omega):
    out = np.full_like(np.asarray(omega, dtype=np.float64), uniform_density())
    if np.ndim(omega) == 0:
        return float(out)
    return out


def solve_sce(
    params: ModelParams,
    initial_guess: tuple[float, float] | None = None,
    tol: float = 1e-10,
    max_iter: int = 60,
    fd_step: float = 1e-6,
) -> TravelingWaveSolution:
    """Newton-Raphson solve of the two moment conditions for (R, v).

    The Jacobian is central finite differences; steps are halved until the
    residual norm decreases. Converging to R < 1e-6 reports the disordered
    root. Quadrature resolution is frozen during the iteration and verified
    afterwards by panel doubling.
    """
    if params.d_phi <= 0.0:
        raise InvalidStateError("solve_sce requires d_phi > 0")
    if initial_guess is None:
        initial_guess = (0.5, -0.5 * params.sigma * math.sin(params.alpha))

    panels = traveling_wave_profile(*initial_guess, params).n_panels

    def residuals(x: np.ndarray) -> np.ndarray:
        prof = TravelingWaveProfile(max(x[0], 0.0), x[1], params, n_panels=panels)
        return np.array(prof.sce_residuals())

    for _refine in range(3):
        x = np.array(initial_guess, dtype=np.float64)
        converged = False
        for _ in range(max_iter):
            f = residuals(x)
            if x[0] < 1e-6 and float(np.max(np.abs(f))) <= 1e-6:
                # basin of the R = 0 root, which solves the system exactly
                # (kappa = 0 collapses the profile to the uniform density)
                return TravelingWaveSolution(0.0, math.nan, params, _uniform_profile)
            if float(np.max(np.abs(f))) <= tol:
                converged = True
                break
            jac = np.empty((2, 2))
            for col in range(2):
                step = np.zeros(2)
                step[col] = fd_step
                jac[:, col] = (residuals(x + step) - residuals(x - step)) / (2.0 * fd_step)
            try:
                delta = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError as exc:
                raise ConvergenceError(f"singular SCE Jacobian at {tuple(x)}", tuple(x)) from exc
            scale = 1.0
            norm0 = float(np.linalg.norm(f))
            while scale > 1e-6:
                trial = x + scale * delta
                if float(np.linalg.norm(residuals(trial))) < norm0:
                    break
                scale *= 0.5
            x = x + scale * delta
            x[0] = abs(x[0])
        if not converged:
            raise ConvergenceError(
                f"SCE Newton did not converge at alpha={params.alpha}, d_phi={params.d_phi}",
                tuple(x),
            )
        if x[0] < 1e-6:
            return TravelingWaveSolution(0.0, math.nan, params, _uniform_profile)
        # verify the root is quadrature-independent; refine and re-solve if not
        check = TravelingWaveProfile(x[0], x[1], params, n_panels=2 * panels)
        res = float(np.max(np.abs(check.sce_residuals())))
        if res <= 10.0 * tol:
            profile = traveling_wave_profile(x[0], x[1], params)
            return TravelingWaveSolution(
                float(x[0]), float(x[1]), params, profile,
                residual=float(np.max(np.abs(profile.sce_residuals()))),
            )
        panels *= 2
        initial_guess = (float(x[0]), float(x[1]))
    raise ConvergenceError("SCE root not stable under quadrature refinement", tuple(x))
