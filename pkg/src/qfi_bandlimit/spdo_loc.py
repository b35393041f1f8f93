"""Eigensystem of the single-source single-photon density operator.

The Fourier-domain form of the eigenproblem is expanded in PSWFs of
C = pi B l, giving the matrix

    M_mn = (2/C) int_{-1}^{1} sqrt(1-x^2) Psi_m(x) Psi_n(x) dx

whose eigenvalues are those of the density operator. Eigenvectors are
mapped back to real coefficient functions d_p(f) on the detuning band
through the self-Fourier property of the PSWFs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import CutoffError, DomainError
from .pswf import DEFAULT_K, PswfBasis, build_basis, default_order, self_fourier_map
from .quadrature import chebyshev2, freq_grid
from .specfun import kernel_O

__all__ = [
    "SolverOptions",
    "SpdoEigensystem",
    "build_loc_matrix",
    "solve_loc",
    "verify_integral_equation",
]


@dataclass(frozen=True)
class SolverOptions:
    """Numerical knobs shared by the localization and pair solvers."""

    N: int | None = None
    K: int = DEFAULT_K
    n_freq: int = 64
    cutoff: float = 1e-12
    method: str = "legendre"
    freq_rule: str = "gauss"

    def with_cutoff(self, cutoff: float) -> "SolverOptions":
        return replace(self, cutoff=cutoff)

    def refined(self, C: float) -> "SolverOptions":
        """Options with truncation and grids doubled, for convergence checks."""
        N = default_order(C) if self.N is None else self.N
        return replace(self, N=2 * N, K=2 * self.K, n_freq=2 * self.n_freq)


@dataclass(frozen=True, eq=False)
class SpdoEigensystem:
    problem: str
    B: float
    l: float
    eigs: np.ndarray
    parities: np.ndarray
    coeff_funcs: np.ndarray
    f_grid: np.ndarray
    f_weights: np.ndarray
    cutoff: float
    all_eigs: np.ndarray
    vectors: np.ndarray
    degenerate: np.ndarray
    basis: PswfBasis = field(repr=False)
    options: SolverOptions = field(default_factory=SolverOptions, repr=False)

    @property
    def n_retained(self) -> int:
        return self.eigs.size


def check_Bl(B: float, l: float) -> None:
    if not (0 < B <= 0.5):
        raise DomainError(f"B must lie in (0, 0.5], got {B}")
    if not (l > 0 and math.isfinite(l)):
        raise DomainError(f"l must be positive, got {l}")


def pupil_moment(basis: PswfBasis, weight=None) -> np.ndarray:
    """int sqrt(1-x^2) w(x) u_m(x) u_n(x) dx for the (-1,1)-normalised PSWFs.

    Gauss-Chebyshev (second kind) nodes absorb the square-root endpoint
    behaviour, so the rule is exact for the polynomial Legendre expansion.
    """
    n = 2 * basis.N + int(4 * basis.C) + 120
    x, w = chebyshev2(n)
    u = basis.unit(x)
    if weight is not None:
        w = w * weight(x)
    return (u * w) @ u.T


def build_loc_matrix(basis: PswfBasis) -> np.ndarray:
    """Symmetric N x N matrix M with exact zeros where m - n is odd."""
    s = np.sqrt(basis.conc_eigs)
    M = (2.0 / basis.C) * s[:, None] * pupil_moment(basis) * s[None, :]
    M = 0.5 * (M + M.T)
    idx = np.arange(basis.N)
    M[(idx[:, None] - idx[None, :]) % 2 == 1] = 0.0
    return M


def sorted_eigh(M: np.ndarray):
    """Eigenpairs of a real symmetric matrix, eigenvalues descending."""
    vals, vecs = np.linalg.eigh(M)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def _parity_of(vectors: np.ndarray) -> np.ndarray:
    even = np.sum(vectors[0::2] ** 2, axis=0)
    odd = np.sum(vectors[1::2] ** 2, axis=0)
    return np.where(even >= odd, 1, -1)


def degenerate_flags(eigs: np.ndarray) -> np.ndarray:
    flags = np.zeros(eigs.size, dtype=bool)
    if eigs.size > 1:
        close = np.abs(np.diff(eigs)) < 1e-13 * eigs[0]
        flags[:-1] |= close
        flags[1:] |= close
    return flags


def retain(all_eigs: np.ndarray, cutoff: float) -> np.ndarray:
    keep = all_eigs >= cutoff * all_eigs[0]
    if not np.any(keep) or all_eigs[0] <= 0:
        raise CutoffError("no eigenvalue survives the retention cutoff")
    return keep


def solve_loc(B: float, l: float, opts: SolverOptions | None = None, basis: PswfBasis | None = None) -> SpdoEigensystem:
    """Eigenvalues and coefficient functions d_p(f) for source distance ``l``.

    The returned ``coeff_funcs[p]`` satisfy the normalisation
    (lambda_p / B) int d_p(f)^2 df = 1 on the frequency grid.
    """
    check_Bl(B, l)
    opts = opts or SolverOptions()
    C = math.pi * B * l
    if basis is None:
        basis = build_basis(C, opts.N, opts.K, opts.method)
    M = build_loc_matrix(basis)
    vals, vecs = sorted_eigh(M)
    keep = retain(vals, opts.cutoff)
    eigs, vecs_r = vals[keep], vecs[:, keep]

    f, w = freq_grid(B, opts.n_freq, opts.freq_rule)
    # i^parity folded against (-i)^n leaves the real sign (-1)^(n // 2)
    sigma = np.where((np.arange(basis.N) // 2) % 2 == 0, 1.0, -1.0)
    coeffs = vecs_r * np.sqrt(B / (l * eigs))[None, :]
    d = (coeffs * sigma[:, None]).T @ self_fourier_map(basis, B, l, f)
    for arr in (eigs, d, f, w):
        arr.setflags(write=False)
    return SpdoEigensystem(
        problem="localization",
        B=B,
        l=l,
        eigs=eigs,
        parities=_parity_of(vecs_r),
        coeff_funcs=d,
        f_grid=f,
        f_weights=w,
        cutoff=opts.cutoff,
        all_eigs=vals,
        vectors=vecs_r,
        degenerate=degenerate_flags(eigs),
        basis=basis,
        options=opts,
    )


def verify_integral_equation(sys: SpdoEigensystem) -> np.ndarray:
    """Residuals of (1/B) int O(f-f') d_p(f') df' = lambda_p d_p(f).

    ``residual_p = max_f |(1/B) sum_k w_k O(f - f_k) d_p(f_k) - lambda_p d_p(f)| / lambda_p``.
    In double precision the floor of this quantity grows like
    1e-16 max|d_p| / lambda_p, so it is only informative for eigenvalues
    well above the rounding level.
    """
    f, w = sys.f_grid, sys.f_weights
    O = kernel_O(f[:, None] - f[None, :], sys.l)
    lhs = (O * w[None, :]) @ sys.coeff_funcs.T / sys.B
    rhs = sys.coeff_funcs.T * sys.eigs[None, :]
    return np.max(np.abs(lhs - rhs), axis=0) / sys.eigs
