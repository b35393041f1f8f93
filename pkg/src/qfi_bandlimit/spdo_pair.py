"""Eigensystem of the two-source density operator in its +/- subspaces.

The pair density operator commutes with the exchange of the two sources,
so its eigenstates split into a symmetric (+) family with d_-(f) = d_+(f)
and an antisymmetric (-) family with d_-(f) = -d_+(f). In the PSWF basis
each family solves a real symmetric eigenproblem with matrix F~ +/- G~.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, CutoffError
from .pswf import PswfBasis, build_basis, self_fourier_map
from .quadrature import chebyshev2, freq_grid
from .spdo_loc import SolverOptions, check_Bl, degenerate_flags, sorted_eigh

__all__ = ["PairSubspaceSystem", "build_pair_matrices", "solve_pair"]

_IMAG_DISCARD = 1e-12
_IMAG_FAIL = 1e-10


@dataclass(frozen=True, eq=False)
class PairSubspaceSystem:
    """Retained eigenstates of one exchange subspace.

    ``t_vectors[:, p]`` carries the real PSWF coefficients of eigenstate p,
    scaled so that ``t_p . t_q = B / (l lambda_p) delta_pq``.
    ``coeff_funcs[p]`` samples d_+(f), normalised by
    ``(4 lambda_p / B) int d_+^2 df = 1``.
    """

    sign: int
    B: float
    l: float
    eigs: np.ndarray
    t_vectors: np.ndarray
    coeff_funcs: np.ndarray
    f_grid: np.ndarray
    f_weights: np.ndarray
    cutoff: float
    all_eigs: np.ndarray
    degenerate: np.ndarray
    basis: PswfBasis = field(repr=False)
    options: SolverOptions = field(default_factory=SolverOptions, repr=False)

    @property
    def problem(self) -> str:
        return "pair-even" if self.sign > 0 else "pair-odd"

    @property
    def parities(self) -> np.ndarray:
        return np.full(self.eigs.size, self.sign)

    @property
    def n_retained(self) -> int:
        return self.eigs.size


def _ipow(power: np.ndarray) -> np.ndarray:
    """Exact integer powers of i."""
    return np.array([1, 1j, -1, -1j])[power % 4]


def build_pair_matrices(basis: PswfBasis, l: float) -> tuple[np.ndarray, np.ndarray]:
    """Real symmetric matrices (F~, G~) for the pair problem.

    F_mn = (1/C) int sqrt(1-x^2) Psi_m Psi_n dx and
    G_mn = (1/C) int sqrt(1-x^2) exp(4 pi i l x) Psi_m Psi_n dx, twisted by
    i^(n-m) and i^(n+m) respectively.
    """
    if not l > 0:
        raise ConsistencyError(f"l must be positive, got {l}")
    C = basis.C
    x, w = chebyshev2(2 * basis.N + int(4 * C) + int(8 * math.pi * l) + 120)
    u = basis.unit(x)
    s = np.sqrt(basis.conc_eigs)
    F = s[:, None] * ((u * w) @ u.T) * s[None, :] / C
    G = s[:, None] * ((u * (w * np.exp(4j * math.pi * l * x))) @ u.T) * s[None, :] / C

    n = np.arange(basis.N)
    odd = (n[:, None] - n[None, :]) % 2 == 1
    F[odd] = 0.0
    Ft = _ipow(n[None, :] - n[:, None]) * F
    Gt = _ipow(n[None, :] + n[:, None]) * G
    out = []
    for Z in (Ft, Gt):
        resid = np.max(np.abs(Z.imag)) if Z.size else 0.0
        scale = max(np.max(np.abs(Z.real)), 1.0)
        if resid > _IMAG_FAIL * scale:
            raise ConsistencyError(f"imaginary residue {resid:.3e} after phase twist")
        R = Z.real.copy()
        out.append(0.5 * (R + R.T))
    return out[0], out[1]


def solve_pair(
    B: float, l: float, opts: SolverOptions | None = None, basis: PswfBasis | None = None
) -> tuple[PairSubspaceSystem, PairSubspaceSystem]:
    """Solve both exchange subspaces; returns ``(plus, minus)``.

    The retention cutoff is applied relative to the largest eigenvalue over
    both subspaces.
    """
    check_Bl(B, l)
    opts = opts or SolverOptions()
    C = math.pi * B * l
    if basis is None:
        basis = build_basis(C, opts.N, opts.K, opts.method)
    Ft, Gt = build_pair_matrices(basis, l)
    f, w = freq_grid(B, opts.n_freq, opts.freq_rule)
    sfm = self_fourier_map(basis, B, l, f)
    for arr in (f, w):
        arr.setflags(write=False)

    solved = {sign: sorted_eigh(Ft + sign * Gt) for sign in (1, -1)}
    top = max(solved[1][0][0], solved[-1][0][0])
    if not top > 0:
        raise CutoffError("no eigenvalue survives the retention cutoff")
    out = []
    for sign in (1, -1):
        vals, vecs = solved[sign]
        # the odd subspace may be empty when the sources nearly coincide
        keep = vals >= opts.cutoff * top
        eigs = vals[keep]
        t = vecs[:, keep] * np.sqrt(B / (l * eigs))[None, :]
        # S_+(f) = 2 d_+(f)
        d = 0.5 * (t.T @ sfm)
        for arr in (eigs, t, d):
            arr.setflags(write=False)
        out.append(
            PairSubspaceSystem(
                sign=sign,
                B=B,
                l=l,
                eigs=eigs,
                t_vectors=t,
                coeff_funcs=d,
                f_grid=f,
                f_weights=w,
                cutoff=opts.cutoff,
                all_eigs=vals,
                degenerate=degenerate_flags(eigs),
                basis=basis,
                options=opts,
            )
        )
    return out[0], out[1]
