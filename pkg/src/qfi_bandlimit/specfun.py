"""Bessel functions of orders 0-3 and the pupil overlap kernels O, P, Q.

The kernels are the clear-circular-pupil matrix elements between
single-frequency photon states,

    O(x) = <K_f | K_f'>               = 2 J1(z) / z
    P(x) = <K_f' | d_l K_f> / (1+f)    = -4 pi J2(z) / z
    Q(x) = <d_l K_f | d_l K_f'> / ((1+f)(1+f'))
         = -8 pi^2 J2(z) / z^2 + 4 pi^2 (J1(z) - J3(z)) / z

with x the detuning difference (f - f' or 2 + f + f') and z = 2 pi x l.
The forms above are algebraically identical to the textbook expressions but
avoid the J0 - 2 J1/z cancellation near the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "SWITCH_RADIUS",
    "KernelTriple",
    "bessel_j",
    "bessel_j0123",
    "kernel_O",
    "kernel_P",
    "kernel_Q",
]

SWITCH_RADIUS = 1e-3

_SERIES_LIMIT = 2.0
_SERIES_TERMS = 24
_RESCALE = 1e100


def _series(z: np.ndarray) -> np.ndarray:
    """Ascending series for J0..J3, accurate for |z| <= 2."""
    half = 0.5 * z
    q = -half * half
    out = np.zeros((4,) + z.shape)
    for n in range(4):
        term = half**n / math.factorial(n)
        acc = term.copy()
        for k in range(1, _SERIES_TERMS):
            term = term * q / (k * (k + n))
            acc = acc + term
        out[n] = acc
    return out


def _miller(z: np.ndarray) -> np.ndarray:
    """Backward recurrence normalised by J0^2 + 2 sum J_k^2 = 1 (z > 0).

    The sum of squares has no cancellation; the sign is taken from the
    linear identity J0 + 2 sum J_2k = 1.
    """
    zmax = float(np.max(z))
    start = int(zmax + 12.0 * zmax ** (1.0 / 3.0)) + 40
    start += start % 2
    inv = 2.0 / z
    j_next = np.zeros_like(z)
    j_cur = np.full_like(z, 1e-30)
    lin = np.zeros_like(z)
    sq = np.zeros_like(z)
    low = np.zeros((4,) + z.shape)
    for k in range(start, 0, -1):
        # j_cur holds J_k, produce J_{k-1}
        j_prev = k * inv * j_cur - j_next
        sq = sq + 2.0 * j_cur * j_cur
        if k % 2 == 0:
            lin = lin + 2.0 * j_cur
        if k <= 3:
            low[k] = j_cur
        j_next, j_cur = j_cur, j_prev
        big = np.abs(j_cur) > _RESCALE
        if np.any(big):
            s = np.where(big, 1.0 / _RESCALE, 1.0)
            j_cur, j_next, lin, low = j_cur * s, j_next * s, lin * s, low * s
            sq = sq * s * s
    low[0] = j_cur
    lin = lin + j_cur
    sq = sq + j_cur * j_cur
    return low / (np.sign(lin) * np.sqrt(sq))


def _miller_scalar(z: float) -> tuple[float, float, float, float]:
    """Same recurrence as ``_miller`` on Python floats, for quadrature callbacks."""
    start = int(z + 12.0 * z ** (1.0 / 3.0)) + 40
    start += start % 2
    inv = 2.0 / z
    j_next, j_cur = 0.0, 1e-30
    lin = sq = 0.0
    low = [0.0, 0.0, 0.0, 0.0]
    for k in range(start, 0, -1):
        j_prev = k * inv * j_cur - j_next
        sq += 2.0 * j_cur * j_cur
        if k % 2 == 0:
            lin += 2.0 * j_cur
        if k <= 3:
            low[k] = j_cur
        j_next, j_cur = j_cur, j_prev
        if abs(j_cur) > _RESCALE:
            s = 1.0 / _RESCALE
            j_cur, j_next, lin, sq = j_cur * s, j_next * s, lin * s, sq * s * s
            low = [v * s for v in low]
    low[0] = j_cur
    lin += j_cur
    sq += j_cur * j_cur
    norm = math.copysign(math.sqrt(sq), lin)
    return low[0] / norm, low[1] / norm, low[2] / norm, low[3] / norm


def bessel_j0123(z) -> np.ndarray:
    """Return an array ``(4, *z.shape)`` holding J0(z)..J3(z)."""
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("Bessel argument must be finite")
    a = np.abs(z)
    if z.ndim == 0 and a > _SERIES_LIMIT:
        j = _miller_scalar(float(a))
        sgn = -1.0 if z < 0 else 1.0
        return np.array([j[0], sgn * j[1], j[2], sgn * j[3]])
    out = np.empty((4,) + z.shape)
    small = a <= _SERIES_LIMIT
    if np.any(small):
        out[:, small] = _series(a[small])
    if np.any(~small):
        out[:, ~small] = _miller(a[~small])
    neg = z < 0
    if np.any(neg):
        out[1, neg] *= -1.0
        out[3, neg] *= -1.0
    return out


def bessel_j(n: int, z):
    """Bessel function of the first kind J_n(z) for n in {0, 1, 2, 3}.

    Scalars in, scalar out; arrays in, array out.
    """
    if n not in (0, 1, 2, 3):
        raise DomainError(f"order must be 0..3, got {n}")
    vals = bessel_j0123(z)[n]
    return float(vals) if vals.ndim == 0 else vals


def _check_l(l: float) -> None:
    if not (l > 0):
        raise DomainError(f"l must be positive, got {l}")


def _kernel(x, l: float, which: str, switch: float = SWITCH_RADIUS):
    _check_l(l)
    x = np.asarray(x, dtype=float)
    z = 2.0 * np.pi * np.abs(x) * l
    out = np.empty_like(z)
    small = z < switch
    zs = z[small]
    zb = z[~small]
    pi2 = np.pi**2
    if which == "O":
        out[small] = 1.0 - zs**2 / 8.0 + zs**4 / 192.0
        if zb.size:
            j = bessel_j0123(zb)
            out[~small] = 2.0 * j[1] / zb
    elif which == "P":
        out[small] = -4.0 * np.pi * (zs / 8.0 - zs**3 / 96.0 + zs**5 / 3072.0)
        if zb.size:
            j = bessel_j0123(zb)
            out[~small] = -4.0 * np.pi * j[2] / zb
        out = np.where(x < 0, -out, out)
    else:
        out[small] = pi2 * (1.0 - zs**2 / 4.0 + 5.0 * zs**4 / 384.0)
        if zb.size:
            j = bessel_j0123(zb)
            out[~small] = -8.0 * pi2 * j[2] / zb**2 + 4.0 * pi2 * (j[1] - j[3]) / zb
    return float(out) if out.ndim == 0 else out


def kernel_O(x, l: float):
    """Overlap <K_f|K_f'> = J1(2 pi x l)/(pi x l); even, O(0) = 1."""
    return _kernel(x, l, "O")


def kernel_P(x, l: float):
    """Derivative overlap -2 J2(2 pi x l)/(x l); odd in x, P(0) = 0."""
    return _kernel(x, l, "P")


def kernel_Q(x, l: float):
    """Gradient-gradient overlap; even, Q(0) = pi^2."""
    return _kernel(x, l, "Q")


@dataclass(frozen=True)
class KernelTriple:
    """The three pupil kernels bound to a fixed distance ``l``."""

    l: float
    switch_radius: float = SWITCH_RADIUS

    def __post_init__(self):
        _check_l(self.l)
        # series are truncated after the z^4 (z^5 for P) term
        if not (0 < self.switch_radius <= 1e-2):
            raise DomainError("switch_radius must lie in (0, 1e-2]")

    def O(self, x):
        return _kernel(x, self.l, "O", self.switch_radius)

    def P(self, x):
        return _kernel(x, self.l, "P", self.switch_radius)

    def Q(self, x):
        return _kernel(x, self.l, "Q", self.switch_radius)
