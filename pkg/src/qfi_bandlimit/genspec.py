"""Single-source density operator for an arbitrary symmetric emission spectrum.

With a normalised detuning spectrum W(f) the density operator is
rho = int W(f) |K_f><K_f| df. In the Fourier domain v (conjugate to f) the
eigenfunctions are supported on |v| < l and obey

    (2/pi) sqrt(1-x^2) int_{-1}^{1} d~(l x') W~(l (x - x')) dx' = lambda d~(l x)

with x = v / l and W~ the Fourier transform of W. For an even W the
solutions split into even and odd families.

Two discretisations are provided:

``"nystrom"`` (default)
    Writing d~ = sqrt(1-x^2) h(x) leaves a symmetric problem for the smooth
    function h, discretised on Gauss-Chebyshev (second kind) nodes. The
    parity split folds the mirror-symmetric nodes. Convergence is spectral.

``"fourier"``
    Cosine (even) and sine (odd) series times (1-x^2)^(1/4), with the
    double integrals evaluated by Gauss-Jacobi quadrature. The endpoint
    behaviour of the true eigenfunctions limits eigenvalue convergence to
    O(M^-1.5) in the series order M.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi

from .errors import DomainError, UnsupportedProfileError
from .fisher import FisherResult, qfi_from_matrix_elements
from .quadrature import chebyshev2
from .specfun import KernelTriple

__all__ = [
    "GenSpecSystem",
    "SpectrumProfile",
    "build_genspec_matrices",
    "qfi_genspec",
    "solve_genspec",
]

_SYMMETRY_TOL = 1e-10
_PANEL_NODES = 8


@dataclass(frozen=True, eq=False)
class SpectrumProfile:
    """Normalised, even detuning power spectrum W(f).

    ``support`` is the half-width of the interval on which W is sampled for
    frequency-domain work; ``fwhm`` sets the effective bandwidth.
    """

    kind: str
    params: dict
    fwhm: float
    support: float
    w_of_f: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    w_tilde_of_v: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    breakpoints: tuple = field(default=(), repr=False)

    # ---- constructors -------------------------------------------------
    @classmethod
    def flat_top(cls, B: float) -> "SpectrumProfile":
        if not (0 < B <= 0.5):
            raise DomainError(f"B must lie in (0, 0.5], got {B}")
        return cls(
            "flat-top",
            {"B": B},
            B,
            0.5 * B,
            lambda f: np.where(np.abs(np.asarray(f, float)) < 0.5 * B, 1.0 / B, 0.0),
            lambda v: np.sinc(B * np.asarray(v, float)),
        )

    @classmethod
    def gaussian(cls, fwhm: float) -> "SpectrumProfile":
        if not (0 < fwhm <= 0.2):
            raise DomainError(f"FWHM must lie in (0, 0.2], got {fwhm}")
        sig = fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        # tails beyond 8 sigma are below 1e-14 of the mass
        return cls(
            "gaussian",
            {"fwhm": fwhm},
            fwhm,
            8.0 * sig,
            lambda f: np.exp(-0.5 * (np.asarray(f, float) / sig) ** 2) / (sig * math.sqrt(2 * math.pi)),
            lambda v: np.exp(-2.0 * (math.pi * sig * np.asarray(v, float)) ** 2),
        )

    @classmethod
    def lorentzian(cls, fwhm: float, cutoff: float = 0.5) -> "SpectrumProfile":
        """Lorentzian truncated to |f| < cutoff and renormalised."""
        if not (0 < fwhm <= 0.2):
            raise DomainError(f"FWHM must lie in (0, 0.2], got {fwhm}")
        if not (0 < cutoff <= 0.9):
            raise DomainError("cutoff must lie in (0, 0.9]")
        g = 0.5 * fwhm
        mass = 2.0 * math.atan(cutoff / g) / math.pi

        def w(f):
            f = np.asarray(f, float)
            return np.where(np.abs(f) < cutoff, g / (math.pi * (f * f + g * g) * mass), 0.0)

        return cls._numeric("lorentzian", {"fwhm": fwhm, "cutoff": cutoff}, fwhm, cutoff, w, (-cutoff, 0.0, cutoff))

    @classmethod
    def tabulated(cls, f, W) -> "SpectrumProfile":
        """Piecewise-linear spectrum through the samples, renormalised by the trapezoid rule."""
        f = np.asarray(f, dtype=float)
        W = np.asarray(W, dtype=float)
        if f.ndim != 1 or f.shape != W.shape or f.size < 3:
            raise DomainError("tabulated spectrum needs matching 1-D arrays of at least 3 samples")
        if np.any(np.diff(f) <= 0) or np.any(W < 0):
            raise DomainError("frequencies must increase strictly and W must be non-negative")
        area = float(np.trapezoid(W, f))
        if not area > 0:
            raise DomainError("tabulated spectrum has zero area")
        W = W / area
        mirrored = np.interp(-f, f, W, left=0.0, right=0.0)
        if abs(f[0] + f[-1]) > _SYMMETRY_TOL * np.ptp(f) or np.max(np.abs(mirrored - W)) > _SYMMETRY_TOL * W.max():
            raise UnsupportedProfileError(
                "only even spectra W(-f) = W(f) are supported; asymmetric spectra do not split by parity"
            )
        half = 0.5 * (f[-1] - f[0])
        fwhm = _fwhm(f, W)

        def w(x):
            return np.interp(np.asarray(x, float), f, W, left=0.0, right=0.0)

        return cls._numeric("tabulated", {"n": int(f.size)}, fwhm, half, w, tuple(f))

    @classmethod
    def from_csv(cls, path) -> "SpectrumProfile":
        """Two-column (f, W) CSV; a non-numeric first row is taken as a header."""
        rows = []
        with open(Path(path), newline="", encoding="utf-8") as fh:
            for k, row in enumerate(csv.reader(fh)):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if k == 0:
                        continue
                    raise DomainError(f"malformed spectrum row {k + 1}: {row!r}") from None
        arr = np.array(rows)
        return cls.tabulated(arr[:, 0], arr[:, 1])

    @classmethod
    def _numeric(cls, kind, params, fwhm, support, w, breaks) -> "SpectrumProfile":
        nodes, weights = _panel_rule(np.asarray(breaks, float))
        wn = weights * w(nodes)

        def wt(v):
            v = np.asarray(v, float)
            flat = v.ravel()
            out = np.empty(flat.size)
            step = max(1, 2_000_000 // nodes.size)
            for k in range(0, flat.size, step):
                out[k : k + step] = np.cos(2.0 * math.pi * np.outer(flat[k : k + step], nodes)) @ wn
            return out.reshape(v.shape)

        return cls(kind, params, fwhm, support, w, wt, tuple(breaks))

    # ---- accessors ----------------------------------------------------
    def c_eff(self, l: float) -> float:
        """Effective space-bandwidth parameter pi * FWHM * l (diagnostic only)."""
        return math.pi * self.fwhm * l

    def freq_rule(self, n: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights W(f) df over the support, summing to ~1."""
        if self.kind in ("flat-top", "gaussian"):
            t, w = npleg.leggauss(n)
            f, wf = self.support * t, self.support * w
        else:
            f, wf = _panel_rule(np.asarray(self.breakpoints, float), max(2, n // max(1, len(self.breakpoints) - 1)))
        return f, wf * self.w_of_f(f)


def _fwhm(f: np.ndarray, W: np.ndarray) -> float:
    half = 0.5 * W.max()
    above = f[W >= half]
    return float(above.max() - above.min()) if above.size > 1 else float(np.ptp(f))


def _panel_rule(breaks: np.ndarray, per_panel: int = 0) -> tuple[np.ndarray, np.ndarray]:
    # composite Gauss-Legendre; dense panels keep W~ accurate for |v| up to a few l
    n = per_panel or max(_PANEL_NODES, int(4000 // max(1, breaks.size - 1)))
    n = min(n, 4000)
    t, w = npleg.leggauss(n)
    a, b = breaks[:-1], breaks[1:]
    mid, rad = 0.5 * (a + b), 0.5 * (b - a)
    return (mid[:, None] + rad[:, None] * t).ravel(), (rad[:, None] * w).ravel()


@dataclass(frozen=True, eq=False)
class GenSpecSystem:
    """One parity family of the general-spectrum eigenproblem.

    For ``method="fourier"`` ``fourier_coeffs[:, p]`` are the series
    coefficients d_m of eigenstate p, rescaled so that
    ``d_p . d_q = 2 / (pi lambda_p^2 l) delta_pq``. Odd-family coefficients
    are stored as real numbers; the physical ones are i times these.
    For ``method="nystrom"`` ``node_values[:, p]`` holds h_p = d~_p / sqrt(1-x^2)
    on ``nodes`` (x in (0, 1), the mirror half follows from parity), with the
    same normalisation int sqrt(1-x^2) h_p h_q dx = 2 / (pi lambda_p^2 l^2).
    """

    parity: int
    l: float
    eigs: np.ndarray
    method: str
    order: int
    fourier_coeffs: np.ndarray | None
    nodes: np.ndarray | None
    node_weights: np.ndarray | None
    node_values: np.ndarray | None
    profile: SpectrumProfile = field(repr=False)

    def coeff_funcs(self, f) -> np.ndarray:
        """Real coefficient functions d_p(f) = int d~_p(v) exp(-2 pi i f v) dv."""
        f = np.atleast_1d(np.asarray(f, dtype=float))
        l = self.l
        trig = np.cos if self.parity > 0 else np.sin
        if self.method == "nystrom":
            x, w, h = self.nodes, self.node_weights, self.node_values
            # mirror half doubles the even/odd integrand
            return 2.0 * l * (trig(2 * math.pi * l * np.outer(f, x)) * w) @ h
        x, w = roots_jacobi(4 * self.order + 64, 0.25, 0.25)
        m = np.arange(self.order) + (0 if self.parity > 0 else 1)
        if self.parity > 0:
            g = np.where(m == 0, 2.0, 1.0)
            basis = np.cos(math.pi * np.outer(x, m)) / np.sqrt(g * l)
        else:
            basis = np.sin(math.pi * np.outer(x, m)) / math.sqrt(l)
        vals = basis @ self.fourier_coeffs
        return l * (trig(2 * math.pi * l * np.outer(f, x)) * w) @ vals


def _check_symmetric(profile: SpectrumProfile) -> None:
    if not isinstance(profile, SpectrumProfile):
        raise UnsupportedProfileError("expected a SpectrumProfile")
    probe = np.linspace(0.0, profile.support, 17)
    a, b = profile.w_of_f(probe), profile.w_of_f(-probe)
    if np.max(np.abs(a - b)) > _SYMMETRY_TOL * max(np.max(a), 1.0):
        raise UnsupportedProfileError("only even spectra W(-f) = W(f) are supported")


def build_genspec_matrices(profile: SpectrumProfile, l: float, M_order: int) -> tuple[np.ndarray, np.ndarray]:
    """Fourier-series system matrices (M+, M-) of order ``M_order``.

    M+_mn = 2/(pi sqrt(g_m g_n)) int int w(x) w(x') cos(pi m x) cos(pi n x') W~(l(x-x'))
    with w = (1-x^2)^(1/4) and g_0 = 2, g_m = 1 otherwise; M- uses
    sin(pi m x) sin(pi n x') with m, n >= 1.
    """
    _check_symmetric(profile)
    if not l > 0:
        raise DomainError(f"l must be positive, got {l}")
    if M_order < 8:
        raise DomainError("M_order must be at least 8")
    x, w = roots_jacobi(4 * M_order + 64, 0.25, 0.25)
    K = profile.w_tilde_of_v(l * (x[:, None] - x[None, :]))
    m = np.arange(M_order)
    g = np.where(m == 0, 2.0, 1.0)
    Cc = np.cos(math.pi * np.outer(m, x)) / np.sqrt(g)[:, None] * w
    Ss = np.sin(math.pi * np.outer(m + 1, x)) * w
    out = []
    for T in (Cc, Ss):
        Mx = (2.0 / math.pi) * T @ K @ T.T
        out.append(0.5 * (Mx + Mx.T))
    return out[0], out[1]


def _descending(M: np.ndarray):
    vals, vecs = np.linalg.eigh(M)
    return vals[::-1], vecs[:, ::-1]


def _nystrom(profile: SpectrumProfile, l: float, n_half: int):
    # odd node count keeps x = 0 for the even family
    x, w = chebyshev2(2 * n_half + 1)
    # nodes are cos(j pi / (2 n_half + 2)): first n_half positive, then the centre
    xp, wp = x[:n_half], w[:n_half]
    K1 = profile.w_tilde_of_v(l * (xp[:, None] - xp[None, :]))
    K2 = profile.w_tilde_of_v(l * (xp[:, None] + xp[None, :]))
    x0, w0 = 0.0, w[n_half]
    sw = np.sqrt(wp)
    out = {}
    # even: nodes x>0 with mirror, plus the centre node
    Ke = np.empty((xp.size + 1, xp.size + 1))
    Ke[1:, 1:] = sw[:, None] * (K1 + K2) * sw[None, :]
    col = profile.w_tilde_of_v(l * xp) * math.sqrt(2.0 * w0) * sw
    Ke[0, 1:] = Ke[1:, 0] = col
    Ke[0, 0] = w0 * float(profile.w_tilde_of_v(np.array(0.0)))
    out[1] = ((2.0 / math.pi) * Ke, np.concatenate(([x0], xp)), np.concatenate(([w0], wp)))
    Ko = sw[:, None] * (K1 - K2) * sw[None, :]
    out[-1] = ((2.0 / math.pi) * Ko, xp, wp)
    return out


def solve_genspec(
    profile: SpectrumProfile, l: float, M_order: int = 64, method: str = "nystrom"
) -> tuple[GenSpecSystem, GenSpecSystem]:
    """Eigenvalues and eigenfunctions of both parity families; returns ``(plus, minus)``.

    ``M_order`` is the series order for ``"fourier"`` and the number of
    positive quadrature nodes for ``"nystrom"``.
    """
    _check_symmetric(profile)
    if not l > 0:
        raise DomainError(f"l must be positive, got {l}")
    if M_order < 8:
        raise DomainError("M_order must be at least 8")
    systems = []
    if method == "fourier":
        mats = build_genspec_matrices(profile, l, M_order)
        for parity, Mx in zip((1, -1), mats):
            vals, vecs = _descending(Mx)
            scale = np.divide(math.sqrt(2.0 / (math.pi * l)), vals, where=vals > 0, out=np.zeros_like(vals))
            coeffs = vecs * scale[None, :]
            systems.append(GenSpecSystem(parity, l, vals, method, M_order, coeffs, None, None, None, profile))
    elif method == "nystrom":
        parts = _nystrom(profile, l, M_order)
        for parity in (1, -1):
            Kp, xp, wp = parts[parity]
            vals, vecs = _descending(0.5 * (Kp + Kp.T))
            # full-interval weights: the centre node is not mirrored
            wfull = np.where(xp == 0.0, wp, 2.0 * wp) if parity > 0 else 2.0 * wp
            h = vecs / np.sqrt(wfull)[:, None]
            scale = np.divide(math.sqrt(2.0 / math.pi) / l, vals, where=vals > 0, out=np.zeros_like(vals))
            h = h * scale[None, :]
            wq = np.where(xp == 0.0, 0.5 * wp, wp)
            systems.append(GenSpecSystem(parity, l, vals, method, M_order, None, xp, wq, h, profile))
    else:
        raise DomainError(f"unknown method {method!r}")
    return systems[0], systems[1]


def qfi_genspec(
    profile: SpectrumProfile, l: float, n_freq: int = 64, cutoff: float = 1e-12, M_order: int = 64
) -> FisherResult:
    """Localization QFI for a general symmetric spectrum.

    The flat-top assembly is reused with the frequency measure df/B
    replaced by W(f) df.
    """
    plus, minus = solve_genspec(profile, l, M_order)
    top = max(plus.eigs[0], minus.eigs[0])
    f, wf = profile.freq_rule(n_freq)
    lam_parts, d_parts = [], []
    for sys in (plus, minus):
        keep = sys.eigs >= cutoff * top
        lam_parts.append(sys.eigs[keep])
        d_parts.append(sys.coeff_funcs(f)[:, keep].T)
    lam = np.concatenate(lam_parts)
    d = np.vstack(d_parts)
    order = np.argsort(lam)[::-1]
    lam, d = lam[order], d[order]
    k = KernelTriple(l)
    X = f[:, None] - f[None, :]
    O, P, Q = k.O(X), k.P(X), k.Q(X)
    g = 1.0 + f
    A = ((g[:, None] * P * wf[None, :]) @ d.T).T
    Aw, dw = A * wf, d * g * wf
    D = Aw @ (lam[:, None] * d).T + (lam[:, None] * d * wf) @ A.T
    D = 0.5 * (D + D.T)
    D2 = (
        lam**2 * np.einsum("if,fg,ig->i", dw, Q, dw)
        + 2.0 * lam * np.einsum("if,fg,ig->i", dw, P, Aw)
        + np.einsum("if,fg,ig->i", Aw, O, Aw)
    )
    value, diag, cross = qfi_from_matrix_elements(lam, D, D2)
    return FisherResult(
        problem=f"genspec-{profile.kind}",
        B=profile.fwhm,
        l=l,
        value=value,
        term_breakdown={"diagonal": diag, "cross": cross},
        convergence={},
        converged=True,
        drho=(D,),
    )
