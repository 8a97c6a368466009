"""Closed-form references and bounds for sensing performance.

Everything here is an independent analytic expression: no function in this
module calls the evolution or quadrature code, so that measured numbers and
reference numbers come from separate routes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.linalg import expm_frechet

__all__ = [
    "BoundReport",
    "report_bound",
    "report_equality",
    "ramsey_closed_form",
    "pi_train_closed_form",
    "pi_train_qfi",
    "b0_linear_bound",
    "n_pulse_bound",
    "ghz_scaling",
    "rwa_qfi",
    "rwa_state",
    "rwa_iqfi_lower_bound",
]


@dataclass(frozen=True)
class BoundReport:
    """Outcome of checking a measured value against a bound or reference.

    margin is relative: (bound - measured)/|bound| for upper bounds, and
    tolerance - |measured - reference|/|reference| for equalities, so a
    nonnegative margin always means "satisfied with that much room".
    """

    name: str
    kind: str  # "upper_bound" or "equality"
    measured: float
    reference: float
    satisfied: bool
    margin: float
    tolerance: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def report_bound(name: str, measured: float, bound: float,
                 slack: float = 0.0) -> BoundReport:
    """Check measured <= bound, allowing `slack` of absolute measurement
    error; protocols that saturate a cap exactly would otherwise flip the
    verdict on integration noise."""
    scale = max(abs(bound), 1e-300)
    margin = (bound - measured) / scale
    return BoundReport(name=name, kind="upper_bound", measured=measured,
                       reference=bound, satisfied=measured <= bound + slack,
                       margin=margin, tolerance=slack / scale)


def report_equality(name: str, measured: float, reference: float,
                    tolerance: float) -> BoundReport:
    scale = max(abs(reference), 1e-300)
    rel = abs(measured - reference) / scale
    return BoundReport(name=name, kind="equality", measured=measured,
                       reference=reference, satisfied=rel <= tolerance,
                       margin=tolerance - rel, tolerance=tolerance)


# -- free-evolution protocols -------------------------------------------------


def ramsey_closed_form(T: float, phi: float = 0.0, zeta: float = 1.0) -> float:
    """K for free evolution over [0, T] from |+>:

        K = 2*zeta^2*T*(pi - ln(4)*sin(2*phi))

    phi = 0 gives 2*pi*zeta^2*T; the phase average also gives 2*pi*zeta^2*T.
    """
    return 2.0 * zeta * zeta * T * (math.pi - math.log(4.0) * math.sin(2.0 * phi))


def pi_train_closed_form(t0: float, tN: float, alpha: float,
                         zeta: float = 1.0) -> float:
    """K = 2*pi*zeta^2*(tN - t0)*sin^2(alpha) for a Z-reversing pi-train.

    Independent of the interior pulse times; alpha is the polar Bloch angle
    of the initial state.  Signal phase 0.
    """
    return 2.0 * math.pi * zeta * zeta * (tN - t0) * math.sin(alpha) ** 2


def pi_train_qfi(omega, times, alpha: float = math.pi / 2.0,
                 zeta: float = 1.0):
    """Spectrum of a pi-train with segment boundaries t_0 < ... < t_N:

        J = (4*zeta^2*sin^2(alpha)/omega^2) *
            (sin(omega t_0) + 2*sum_i (-1)^i sin(omega t_i) + (-1)^N sin(omega t_N))^2

    (interior sum over i = 1..N-1; signal phase 0).  Vectorized over omega;
    omega -> 0 is taken through the alternating segment-length limit.
    """
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    t = np.asarray(times, dtype=float)
    n_seg = t.size - 1
    coef = np.full(t.size, 2.0)
    coef[0] = 1.0
    coef[-1] = 1.0
    coef *= (-1.0) ** np.arange(t.size)
    out = np.empty_like(om)
    small = np.abs(om) * t[-1] < 1e-8
    big = ~small
    if np.any(big):
        pattern = np.sin(np.outer(om[big], t)) @ coef
        out[big] = (4.0 * zeta ** 2 * math.sin(alpha) ** 2 / om[big] ** 2) \
            * pattern ** 2
    if np.any(small):
        # limit of pattern/omega: sum of signed segment lengths
        signed = np.dot((-1.0) ** np.arange(n_seg), np.diff(t))
        out[small] = 4.0 * zeta ** 2 * math.sin(alpha) ** 2 * signed ** 2
    if np.isscalar(omega) or np.ndim(omega) == 0:
        return float(out[0])
    return out


# -- protocol-independent bounds ----------------------------------------------


def b0_linear_bound(T: float, B: float, zeta: float = 1.0) -> float:
    """Small-field cap on K for arbitrary pulse protocols:

        K <= 2*pi*zeta^2*T + 40*pi*zeta^4*B^2*T^3

    Exact at B = 0; the cubic term is the perturbative allowance, valid for
    zeta*B*T well below 1.
    """
    return 2.0 * math.pi * zeta ** 2 * T + 40.0 * math.pi * zeta ** 4 * B ** 2 * T ** 3


def n_pulse_bound(N: int, T: float, zeta: float = 1.0) -> float:
    """K <= 2*pi*N*zeta^2*T for protocols with N free-evolution segments."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return 2.0 * math.pi * N * zeta ** 2 * T


def ghz_scaling(n: int, T: float, zeta: float = 1.0):
    """(entangled, separable) = (2*pi*n^2*zeta^2*T, 2*pi*n*zeta^2*T).

    The first is the n-qubit GHZ value, the second the cap for n unentangled
    qubits measured in parallel.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    base = 2.0 * math.pi * zeta ** 2 * T
    return n * n * base, n * base


# -- rotating-wave model of the constant transverse drive ---------------------


def _rwa_hamiltonian(omega: float, B: float, g: float, zeta: float):
    u = zeta * B
    delta = omega - 2.0 * g
    return 0.5 * np.array([[u, -delta], [-delta, -u]], dtype=complex)


def rwa_state(omega: float, B: float, g: float, T: float,
              zeta: float = 1.0) -> np.ndarray:
    """State (a, b) of the rotating-frame model at time T, from |+>.

    In the frame rotating with the g*X drive, the co-rotating half of the
    signal gives the static Hamiltonian (1/2)[[zeta*B, -(omega-2g)],
    [-(omega-2g), -zeta*B]]; its exponential applied to |+> is the
    standard two-level precession about a tilted axis.
    """
    h = _rwa_hamiltonian(omega, B, g, zeta)
    u = zeta * B
    delta = omega - 2.0 * g
    r = math.hypot(u, delta)
    half = 0.5 * r * T
    if r == 0.0:
        return np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    c, s = math.cos(half), math.sin(half)
    axis = h / (0.5 * r)
    umat = c * np.eye(2) - 1j * s * axis
    return umat @ (np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0))


def rwa_qfi(omega, B: float, g: float, T: float, zeta: float = 1.0):
    """Exact QFI of the rotating-frame model, by differentiating the state.

    The propagator exp(-i*H_rwa*T) is differentiated with respect to B
    through the Frechet derivative of the matrix exponential, so no
    approximate printed spectrum enters.  At omega = 2g this reduces to
    (zeta*T)^2; for B -> 0 it tends to 4*zeta^2*sin^2(delta*T/2)/delta^2
    with delta = omega - 2g.  Vectorized over omega.
    """
    om = np.atleast_1d(np.asarray(omega, dtype=float))
    psi0 = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    dh_db = 0.5 * zeta * np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    out = np.empty_like(om)
    for i, w in enumerate(om):
        a = -1j * T * _rwa_hamiltonian(float(w), B, g, zeta)
        e = -1j * T * dh_db
        u, du = expm_frechet(a, e)
        psi = u @ psi0
        dpsi = du @ psi0
        ov = np.vdot(dpsi, psi)
        out[i] = 4.0 * (np.vdot(dpsi, dpsi).real + (ov * ov).real)
    if np.isscalar(omega) or np.ndim(omega) == 0:
        return float(out[0])
    return out


def rwa_iqfi_lower_bound(T: float, B: float, g: float,
                         zeta: float = 1.0) -> float:
    """Band-limited floor on K from the resonance peak of the driven qubit:

        K >= zeta^2*T^2*(g/(1 + g^2/(zeta*B)^2) + zeta*B*arctan(g/(zeta*B)))

    obtained by integrating the squared-Lorentzian envelope of the
    rotating-frame spectrum over [g, 3g].  Requires zeta*B*T well above 1
    for the envelope to hold.
    """
    u = zeta * B
    if u == 0.0:
        return 0.0
    return zeta ** 2 * T ** 2 * (
        g / (1.0 + g * g / (u * u)) + u * math.atan2(g, u)
    )
