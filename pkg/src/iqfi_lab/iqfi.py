"""Frequency integration of QFI spectra.

K(T) = integral of J(B | omega) over omega in [0, inf).  The integrand
oscillates on the scale pi/T, so the finite range [0, Omega] is covered by
panels of that width, each evaluated with a fixed-order Gauss rule and
compared against its two-half refinement; the worst panels are split until
the summed discrepancy meets the tolerance.  Beyond Omega the spectrum
falls off as C/omega^2 with an oscillatory factor, so the tail is added
analytically as C/Omega with C fitted as the weighted mean of omega^2 * J
over the last sampled decade.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .evolution import qfi_vs_omega
from .protocol import (
    GhzProtocol,
    PiecewiseGenerator,
    PulseSequence,
    TransverseDrive,
)
from .signal_core import SignalParams

GAUSS_ORDER = 16
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_ORDER)

# Documented default seed for Haar Monte Carlo; change via the seed argument.
DEFAULT_HAAR_SEED = 1905
DEFAULT_HAAR_SAMPLES = 4096

__all__ = [
    "QuadratureConfig",
    "QfiSpectrum",
    "QuadratureNonConvergence",
    "HaarResult",
    "SweepPoint",
    "SweepResult",
    "integrate_iqfi",
    "integrate_qfi_band",
    "cross_spectral_integral",
    "haar_average_iqfi",
    "sweep_iqfi_vs_T",
    "fit_loglog_slope",
]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and panel policy for the frequency integration."""

    rel_tol: float = 1e-6
    abs_tol: float = 1e-12
    panel_width_factor: float = 1.0
    tail_start_factor: float = 40.0
    max_panels: int = 8192

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be > 0")
        if self.panel_width_factor <= 0.0 or self.tail_start_factor <= 0.0:
            raise ValueError("panel_width_factor and tail_start_factor must be > 0")
        if self.max_panels < 1:
            raise ValueError("max_panels must be >= 1")


@dataclass(frozen=True, eq=False)
class QfiSpectrum:
    """Sampled spectrum plus its integral.

    omegas/values are every retained quadrature node in increasing omega;
    integral includes the analytic tail C/tail_start; error_estimate folds
    the panel discrepancies and the tail-fit dispersion together.
    """

    omegas: np.ndarray
    values: np.ndarray
    integral: float
    error_estimate: float
    tail_coefficient: float
    tail_start: float


class QuadratureNonConvergence(RuntimeError):
    """Panel budget exhausted; .partial carries the best estimate so far."""

    def __init__(self, message: str, partial: Optional[QfiSpectrum] = None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class HaarResult:
    """Initial-state average of K: exact reduction or Monte Carlo."""

    value: float
    stderr: float
    method: str  # "closed_form" or "monte_carlo"
    samples: int


@dataclass(frozen=True)
class SweepPoint:
    T: float
    K: float
    K_err: float
    failed: bool = False


@dataclass(frozen=True)
class SweepResult:
    points: tuple
    slope: float
    slope_window: tuple


# -- panel machinery ----------------------------------------------------------


class _Panel:
    __slots__ = ("a", "b", "value", "error", "omegas", "values", "weights")

    def __init__(self, a, b, value, error, omegas, values, weights):
        self.a = a
        self.b = b
        self.value = value
        self.error = error
        self.omegas = omegas
        self.values = values
        self.weights = weights


def _panel_nodes(a, b):
    """Nodes/weights of the two-half Gauss rule, plus the whole-panel rule."""
    mid = 0.5 * (a + b)
    half1 = 0.5 * (mid - a) * _NODES + 0.5 * (a + mid)
    half2 = 0.5 * (b - mid) * _NODES + 0.5 * (mid + b)
    w1 = 0.5 * (mid - a) * _WEIGHTS
    w2 = 0.5 * (b - mid) * _WEIGHTS
    whole = 0.5 * (b - a) * _NODES + 0.5 * (a + b)
    w_whole = 0.5 * (b - a) * _WEIGHTS
    return np.concatenate([half1, half2]), np.concatenate([w1, w2]), whole, w_whole


def _evaluate_panels(f, edges_pairs):
    """Evaluate a list of (a, b) panels with one batched call to f."""
    fine_nodes, fine_w, coarse_nodes, coarse_w = [], [], [], []
    for a, b in edges_pairs:
        fn, fw, cn, cw = _panel_nodes(a, b)
        fine_nodes.append(fn)
        fine_w.append(fw)
        coarse_nodes.append(cn)
        coarse_w.append(cw)
    n_fine = 2 * GAUSS_ORDER
    all_nodes = np.concatenate(fine_nodes + coarse_nodes)
    all_vals = np.asarray(f(all_nodes), dtype=float)
    panels = []
    n_panels = len(edges_pairs)
    coarse_vals = all_vals[n_panels * n_fine:]
    for i, (a, b) in enumerate(edges_pairs):
        fv = all_vals[i * n_fine:(i + 1) * n_fine]
        cv = coarse_vals[i * GAUSS_ORDER:(i + 1) * GAUSS_ORDER]
        fine = float(np.dot(fine_w[i], fv))
        coarse = float(np.dot(coarse_w[i], cv))
        panels.append(_Panel(a, b, fine, abs(fine - coarse),
                             fine_nodes[i], fv, fine_w[i]))
    return panels


def _integrate_adaptive(f, lo, hi, width, cfg: QuadratureConfig,
                        tail: bool, t_char: float):
    """Shared core: panel-refined integral of f over [lo, hi].

    Returns (QfiSpectrum, node_weights).  With tail=True, adds C/hi for C
    the weighted mean of omega^2 * f over [hi/10, hi] and folds the fit
    dispersion into the error estimate.
    """
    n_base = max(1, int(math.ceil((hi - lo) / width)))
    if n_base > cfg.max_panels:
        raise QuadratureNonConvergence(
            f"{n_base} base panels exceed max_panels={cfg.max_panels}; "
            "increase panel_width_factor or max_panels"
        )
    edges = np.linspace(lo, hi, n_base + 1)
    panels = _evaluate_panels(f, list(zip(edges[:-1], edges[1:])))
    heap = []
    counter = 0
    value = 0.0
    err = 0.0
    for p in panels:
        heapq.heappush(heap, (-p.error, counter, p))
        counter += 1
        value += p.value
        err += p.error

    while err > max(cfg.abs_tol, cfg.rel_tol * abs(value)):
        if len(heap) + 1 > cfg.max_panels:
            tail_now = _tail_estimate(heap, hi, t_char) if tail \
                else (0.0, 0.0, 0.0)
            spectrum, _ = _collect(heap, value + tail_now[0],
                                   err + tail_now[1], tail_now[2], hi)
            raise QuadratureNonConvergence(
                f"panel budget {cfg.max_panels} exhausted with "
                f"panel error {err:.3e}",
                partial=spectrum,
            )
        neg_err, _, worst = heapq.heappop(heap)
        if neg_err == 0.0:
            heapq.heappush(heap, (neg_err, counter, worst))
            counter += 1
            break  # every panel at floor; nothing left to refine
        value -= worst.value
        err -= worst.error
        mid = 0.5 * (worst.a + worst.b)
        for child in _evaluate_panels(f, [(worst.a, mid), (mid, worst.b)]):
            heapq.heappush(heap, (-child.error, counter, child))
            counter += 1
            value += child.value
            err += child.error

    # the running sums steered refinement; the reported numbers use an
    # order-fixed exact summation so results are bit-stable
    ps = [item[2] for item in heap]
    value = math.fsum(p.value for p in sorted(ps, key=lambda q: q.a))
    err = math.fsum(p.error for p in ps)
    tail_add, tail_err, tail_c = _tail_estimate(heap, hi, t_char) if tail \
        else (0.0, 0.0, 0.0)
    return _collect(heap, value + tail_add, err + tail_err, tail_c, hi)


def _windowed_mean(om, scaled, w, lo, hi):
    """Hann-weighted mean of omega^2*J over [lo, hi]; the window suppresses
    the partial-oscillation bias a plain average suffers at the edges."""
    mask = (om >= lo) & (om <= hi)
    if not np.any(mask):
        return None
    x = (om[mask] - lo) / (hi - lo)
    hann = np.sin(math.pi * x) ** 2
    ww = w[mask] * hann
    total = float(np.sum(ww))
    if total <= 0.0:
        return None
    return float(np.dot(ww, scaled[mask]) / total)


def _tail_estimate(heap, omega_max, t_char):
    """Fit C = mean(omega^2 * J) over the last decade; tail adds C/omega_max.

    The error estimate combines the drift between the decade fit and a
    half-decade fit (sensitivity to where the asymptote is read off), the
    oscillation dispersion damped by the period count, and a truncation
    allowance for the C/omega^2 model itself.
    """
    lo = omega_max / 10.0
    om_list, val_list, w_list = [], [], []
    for _, _, p in heap:
        mask = p.omegas >= lo
        if np.any(mask):
            om_list.append(p.omegas[mask])
            val_list.append(p.values[mask])
            w_list.append(p.weights[mask])
    if not om_list:
        return 0.0, 0.0, 0.0
    om = np.concatenate(om_list)
    vals = np.concatenate(val_list)
    w = np.concatenate(w_list)
    scaled = om * om * vals
    c = _windowed_mean(om, scaled, w, lo, omega_max)
    if c is None:
        return 0.0, 0.0, 0.0
    c_late = _windowed_mean(om, scaled, w, omega_max / math.sqrt(10.0),
                            omega_max)
    spread = abs(c - c_late) if c_late is not None else abs(c)
    wsum = float(np.sum(w))
    disp = math.sqrt(max(0.0, float(np.dot(w, (scaled - c) ** 2) / wsum)))
    periods = max(1.0, 0.9 * omega_max * t_char / math.pi)
    err = (2.0 * spread / omega_max
           + disp / (omega_max * periods)
           + abs(c) / (omega_max ** 2 * t_char))
    return c / omega_max, err, c


def _collect(heap, integral, error, tail_c, tail_start):
    ps = sorted((item[2] for item in heap), key=lambda p: p.a)
    om = np.concatenate([p.omegas for p in ps])
    vals = np.concatenate([p.values for p in ps])
    weights = np.concatenate([p.weights for p in ps])
    spectrum = QfiSpectrum(omegas=om, values=vals, integral=integral,
                           error_estimate=error, tail_coefficient=tail_c,
                           tail_start=tail_start)
    return spectrum, weights


# -- protocol plumbing --------------------------------------------------------


def _total_time(protocol) -> float:
    return float(protocol.total_time)


def _feature_scale(protocol, signal: SignalParams, B: float) -> float:
    """Highest intrinsic frequency: sets where the C/omega^2 tail model starts."""
    T = _total_time(protocol)
    scale = max(1.0 / T, signal.zeta * abs(B))
    if isinstance(protocol, PulseSequence):
        scale = max(scale, protocol.segment_count() / T)
    elif isinstance(protocol, GhzProtocol):
        scale = max(scale, (len(protocol.times) - 1) / T,
                    protocol.n * signal.zeta * abs(B))
    elif isinstance(protocol, TransverseDrive):
        scale = max(scale, 2.0 * abs(protocol.g))
    elif isinstance(protocol, PiecewiseGenerator):
        gen = max((float(np.linalg.norm(h, 2)) for _, _, h in protocol.pieces),
                  default=0.0)
        scale = max(scale, 2.0 * gen, len(protocol.pieces) / T)
    return scale


def _make_evaluator(protocol, signal: SignalParams, B: float,
                    ode_tol: float) -> Callable:
    continuous = isinstance(protocol, (TransverseDrive, PiecewiseGenerator))
    if not continuous:
        return lambda om: qfi_vs_omega(protocol, signal, B, om)

    T = _total_time(protocol)

    def f(om):
        # Chunk by frequency so the shared adaptive step of a batch is not
        # dictated by frequencies far above the chunk's own.
        om = np.asarray(om, dtype=float)
        order = np.argsort(om)
        out = np.empty_like(om)
        sorted_om = om[order]
        start = 0
        while start < om.size:
            limit = max(4.0 * sorted_om[start], 8.0 * math.pi / T)
            stop = start
            while stop < om.size and sorted_om[stop] <= limit \
                    and stop - start < 1024:
                stop += 1
            stop = max(stop, start + 1)
            out[order[start:stop]] = qfi_vs_omega(
                protocol, signal, B, sorted_om[start:stop], ode_tol=ode_tol)
            start = stop
        return out

    return f


def _integrate_protocol(protocol, signal, B, cfg, ode_tol, t_char=None):
    t_char = t_char if t_char is not None else _total_time(protocol)
    width = cfg.panel_width_factor * math.pi / t_char
    omega_max = cfg.tail_start_factor * _feature_scale(protocol, signal, B)
    f = _make_evaluator(protocol, signal, B, ode_tol)
    return _integrate_adaptive(f, 0.0, omega_max, width, cfg, True, t_char)


def integrate_iqfi(protocol, signal: SignalParams, B: Optional[float] = None,
                   cfg: Optional[QuadratureConfig] = None,
                   T: Optional[float] = None,
                   ode_tol: float = 1e-9) -> QfiSpectrum:
    """Integrated QFI over omega in [0, inf) for any protocol kind.

    T overrides the oscillation time scale used for panel sizing (defaults
    to the protocol duration).  Raises QuadratureNonConvergence with a
    partial result when the panel budget runs out.
    """
    cfg = cfg or QuadratureConfig()
    if B is None:
        B = signal.B
    spectrum, _ = _integrate_protocol(protocol, signal, B, cfg, ode_tol,
                                      t_char=T)
    return spectrum


def integrate_qfi_band(protocol, signal: SignalParams, lo: float, hi: float,
                       B: Optional[float] = None,
                       cfg: Optional[QuadratureConfig] = None,
                       ode_tol: float = 1e-9) -> QfiSpectrum:
    """Integral of J over a finite band [lo, hi]; no tail term."""
    if not 0.0 <= lo < hi:
        raise ValueError("need 0 <= lo < hi")
    cfg = cfg or QuadratureConfig()
    if B is None:
        B = signal.B
    t_char = _total_time(protocol)
    width = cfg.panel_width_factor * math.pi / t_char
    f = _make_evaluator(protocol, signal, B, ode_tol)
    spectrum, _ = _integrate_adaptive(f, lo, hi, width, cfg, False, t_char)
    return spectrum


def cross_spectral_integral(t1: float, t0: float, mode: str = "analytic",
                            cfg: Optional[QuadratureConfig] = None) -> float:
    """Integral of sin(omega*t1)*sin(omega*t0)/omega^2 over [0, inf).

    Closed form (pi/2)*min(t1, t0); mode="numeric" runs the generic panel
    engine on the raw kernel instead, as an end-to-end check of the
    quadrature itself.
    """
    if t1 < 0.0 or t0 < 0.0:
        raise ValueError("times must be >= 0")
    if mode == "analytic":
        return 0.5 * math.pi * min(t1, t0)
    if mode != "numeric":
        raise ValueError(f"unknown mode {mode!r}")
    if t1 == 0.0 or t0 == 0.0:
        return 0.0
    cfg = cfg or QuadratureConfig(tail_start_factor=400.0, max_panels=200_000)
    t_char = max(t1, t0)
    width = cfg.panel_width_factor * math.pi / t_char
    delta = abs(t1 - t0)
    scale = max(1.0 / t1, 1.0 / t0)
    if delta > 0.0:
        scale = max(scale, min(1.0 / delta, 50.0 / min(t1, t0)))
    omega_max = cfg.tail_start_factor * scale

    def f(om):
        om = np.asarray(om, dtype=float)
        out = np.empty_like(om)
        small = np.abs(om) < 1e-12
        out[small] = t1 * t0
        ons = om[~small]
        out[~small] = np.sin(ons * t1) * np.sin(ons * t0) / ons ** 2
        return out

    spectrum, _ = _integrate_adaptive(f, 0.0, omega_max, width, cfg, True,
                                      t_char)
    return spectrum.integral


# -- Haar averaging -----------------------------------------------------------


def _is_z_flipping_train(seq: PulseSequence) -> bool:
    return all(p.flips_z() for p in seq.pulses)


def haar_average_iqfi(seq: PulseSequence, signal: SignalParams,
                      B: Optional[float] = None,
                      cfg: Optional[QuadratureConfig] = None,
                      samples: int = DEFAULT_HAAR_SAMPLES,
                      seed: int = DEFAULT_HAAR_SEED) -> HaarResult:
    """Average of K over Haar-random initial states.

    For trains of Z-reversing pi pulses at signal phase 0 the average is
    exact: K(alpha) = 2*pi*zeta^2*T*sin^2(alpha) and the sphere average of
    sin^2(alpha) is 2/3.  Any other sequence falls back to Monte Carlo with
    the documented fixed seed; the returned stderr is the sample standard
    error (0 for the closed form).
    """
    cfg = cfg or QuadratureConfig()
    if B is None:
        B = signal.B
    if signal.phi == 0.0 and _is_z_flipping_train(seq):
        k = (2.0 / 3.0) * 2.0 * math.pi * signal.zeta ** 2 * seq.total_time
        return HaarResult(value=k, stderr=0.0, method="closed_form", samples=0)

    # One pilot integration pins the node set and weights; every sample
    # reuses them, so the estimate is deterministic for a given seed.
    pilot, weights = _integrate_protocol(seq, signal, B, cfg, ode_tol=1e-9)
    om = pilot.omegas
    from .evolution import discrete_propagators

    P, W = discrete_propagators(seq, signal, B, om)
    rng = np.random.default_rng(seed)
    alphas = np.arccos(rng.uniform(-1.0, 1.0, size=samples))
    betas = rng.uniform(0.0, 2.0 * math.pi, size=samples)
    psi0 = np.stack([np.cos(alphas / 2.0),
                     np.exp(1j * betas) * np.sin(alphas / 2.0)], axis=1)
    # per-sample tail refit with the same Hann-windowed decade mean the
    # scalar integrator uses
    omega_max = pilot.tail_start
    lo = omega_max / 10.0
    tail_mask = om >= lo
    x = (om[tail_mask] - lo) / (omega_max - lo)
    tail_w = weights[tail_mask] * np.sin(math.pi * x) ** 2
    tail_wsum = float(np.sum(tail_w))
    om2 = om[tail_mask] ** 2

    ks = np.empty(samples)
    chunk = 256
    for s0 in range(0, samples, chunk):
        s1 = min(samples, s0 + chunk)
        block = psi0[s0:s1]
        psi = np.einsum("nij,sj->sni", P, block)
        dpsi = np.einsum("nij,sj->sni", W, block)
        dd = np.einsum("sni,sni->sn", dpsi.conj(), dpsi).real
        ov = np.einsum("sni,sni->sn", dpsi.conj(), psi)
        j = 4.0 * (dd + (ov * ov).real)
        body = j @ weights
        c = (j[:, tail_mask] * om2) @ tail_w / tail_wsum
        ks[s0:s1] = body + c / omega_max
    value = float(np.mean(ks))
    stderr = float(np.std(ks, ddof=1) / math.sqrt(samples))
    return HaarResult(value=value, stderr=stderr, method="monte_carlo",
                      samples=samples)


# -- sweeps -------------------------------------------------------------------


def sweep_iqfi_vs_T(family: Callable, Ts: Sequence[float],
                    signal: SignalParams, B: Optional[float] = None,
                    cfg: Optional[QuadratureConfig] = None,
                    slope_window: Optional[tuple] = None) -> SweepResult:
    """K(T) across durations for a protocol family T -> protocol.

    Per-point integration failures are recorded (failed=True) and the sweep
    continues.  The log-log slope is fitted over slope_window (defaults to
    the full range of successful points).
    """
    cfg = cfg or QuadratureConfig()
    points = []
    for T in Ts:
        protocol = family(float(T))
        try:
            spec = integrate_iqfi(protocol, signal, B, cfg)
            points.append(SweepPoint(T=float(T), K=spec.integral,
                                     K_err=spec.error_estimate))
        except QuadratureNonConvergence as exc:
            partial = exc.partial
            k = partial.integral if partial is not None else float("nan")
            err = partial.error_estimate if partial is not None else float("nan")
            points.append(SweepPoint(T=float(T), K=k, K_err=err, failed=True))
    good = [p for p in points if not p.failed and p.K > 0.0]
    if slope_window is None and good:
        slope_window = (good[0].T, good[-1].T)
    slope = fit_loglog_slope(
        [p.T for p in good], [p.K for p in good], slope_window
    ) if len(good) >= 2 else float("nan")
    return SweepResult(points=tuple(points), slope=slope,
                       slope_window=tuple(slope_window) if slope_window else ())


def fit_loglog_slope(Ts, Ks, window: Optional[tuple] = None) -> float:
    """Least-squares slope of log K against log T inside the window."""
    t = np.asarray(Ts, dtype=float)
    k = np.asarray(Ks, dtype=float)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, k = t[mask], k[mask]
    if t.size < 2:
        return float("nan")
    return float(np.polyfit(np.log(t), np.log(k), 1)[0])
