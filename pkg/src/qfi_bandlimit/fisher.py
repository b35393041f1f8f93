"""Quantum Fisher information for the distance parameter l.

For a density operator with retained eigenpairs (lambda_i, |i>) the QFI is
assembled from the matrix elements of d(rho)/dl inside the support and the
diagonal elements of (d(rho)/dl)^2:

    H = sum_i [4 <i|drho^2|i> - 3 <i|drho|i>^2] / lambda_i
        + 2 sum_{i != j} [1/(lambda_i + lambda_j) - 1/lambda_i - 1/lambda_j] |<i|drho|j>|^2

The second sum folds in the contribution of the kernel of rho, so no
null-space basis is ever needed. All frequency integrals are tensor
quadratures on the eigensystem's grid.

For small eigenvalues the two sums are individually O(1/lambda) and cancel.
The reported value therefore uses the equivalent form

    H = sum_{i,j} 2 |<i|drho|j>|^2 / (lambda_i + lambda_j) + 4 sum_j L_j / lambda_j

where L_j = |(1 - Pi) drho|j>|^2 is the weight that drho|j> leaks out of
the retained support Pi. Only the part of drho|j> built from the source
gradients leaves the range of rho, and its leakage is evaluated directly as
lambda_j^2 times a difference of O(1/lambda_j) quantities, which keeps the
rounding error at the level of machine epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, DomainError, StateError
from .spdo_loc import SpdoEigensystem, solve_loc
from .spdo_pair import PairSubspaceSystem, solve_pair
from .specfun import KernelTriple

__all__ = [
    "CONVERGENCE_RTOL",
    "MONOCHROMATIC_QFI",
    "FisherResult",
    "min_sd",
    "pair_drho_element",
    "qfi_from_leakage",
    "qfi_from_matrix_elements",
    "qfi_localization",
    "qfi_pair",
    "qfi_point",
    "qfi_scaled",
    "qfi_upper_bound",
]

CONVERGENCE_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class FisherResult:
    """QFI per photon with its decomposition and convergence report.

    ``term_breakdown`` holds the diagonal-sum and cross-sum parts of the
    support assembly formula. The two are individually large and of
    opposite sign when small eigenvalues are retained; ``value`` comes from
    the cancellation-free leakage form and agrees with their sum up to
    that cancellation.
    ``convergence`` maps each refinement to the relative change in value.
    """

    problem: str
    B: float
    l: float
    value: float
    term_breakdown: dict
    convergence: dict
    converged: bool
    drho: tuple = field(default=(), repr=False)
    flags: tuple = ()

    @property
    def sd(self) -> float:
        """Minimum unbiased standard deviation for a single photon."""
        return min_sd(self, 1)


def qfi_from_matrix_elements(eigs, drho, drho2_diag) -> tuple[float, float, float]:
    """Assemble the QFI from support-restricted matrix elements.

    Parameters
    ----------
    eigs : (n,) array
        Retained positive eigenvalues.
    drho : (n, n) array
        <i|drho|j> in the retained eigenbasis.
    drho2_diag : (n,) array
        <i|drho^2|i>.

    Returns
    -------
    total, diagonal_sum, cross_sum
    """
    lam = np.asarray(eigs, dtype=float)
    D = np.asarray(drho)
    D2 = np.asarray(drho2_diag, dtype=float)
    if lam.size == 0:
        return 0.0, 0.0, 0.0
    diag = float(np.sum((4.0 * D2 - 3.0 * np.abs(np.diag(D)) ** 2) / lam))
    li, lj = lam[:, None], lam[None, :]
    w = 2.0 * (1.0 / (li + lj) - 1.0 / li - 1.0 / lj)
    np.fill_diagonal(w, 0.0)
    cross = float(np.sum(w * np.abs(D) ** 2))
    return diag + cross, diag, cross


def qfi_from_leakage(eigs, drho, leakage) -> float:
    """Cancellation-free QFI from support matrix elements and kernel leakage.

    Parameters
    ----------
    eigs : (n,) array
        Retained positive eigenvalues.
    drho : (n, n) array
        <i|drho|j> in the retained eigenbasis.
    leakage : (n,) array
        |(1 - Pi) drho|j>|^2 with Pi the projector on the retained states.
    """
    lam = np.asarray(eigs, dtype=float)
    if lam.size == 0:
        return 0.0
    D = np.asarray(drho)
    inner = float(np.sum(2.0 * np.abs(D) ** 2 / (lam[:, None] + lam[None, :])))
    return inner + float(np.sum(4.0 * np.asarray(leakage, dtype=float) / lam))


def _bilinear(a: np.ndarray, K: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise a_i^T K b_i."""
    return np.einsum("if,fg,ig->i", a, K, b)


def _loc_elements(sys: SpdoEigensystem):
    if sys.coeff_funcs is None or np.size(sys.coeff_funcs) == 0:
        raise StateError("eigensystem has no coefficient functions")
    B, f, w = sys.B, sys.f_grid, sys.f_weights
    lam, d = sys.eigs, sys.coeff_funcs
    k = KernelTriple(sys.l)
    X = f[:, None] - f[None, :]
    O, P, Q = k.O(X), k.P(X), k.Q(X)
    g = 1.0 + f
    # A_i(f) = <i| d/dl |K_f>
    A = ((g[:, None] * P * w[None, :]) @ d.T).T / B
    Aw, dw, ldw = A * w, d * g * w, lam[:, None] * d * w
    D = (Aw @ (lam[:, None] * d).T + ldw @ A.T) / B
    D = 0.5 * (D + D.T)
    qdd = _bilinear(dw, Q, dw) / B**2
    D2 = lam**2 * qdd + (2.0 * lam * _bilinear(dw, P, Aw) + _bilinear(Aw, O, Aw)) / B**2
    # T[k, j] = <k| gradient part of drho |j> / lambda_j
    T = Aw @ d.T / B
    leak = lam**2 * (qdd - np.sum(T**2, axis=0))
    return D, D2, leak


def _pair_elements(sys: PairSubspaceSystem):
    if sys.coeff_funcs is None:
        raise StateError("eigensystem has no coefficient functions")
    if sys.n_retained == 0:
        return np.zeros((0, 0)), np.zeros(0), np.zeros(0)
    B, f, w, s = sys.B, sys.f_grid, sys.f_weights, sys.sign
    lam, d = sys.eigs, sys.coeff_funcs
    k = KernelTriple(sys.l)
    X = f[:, None] - f[None, :]
    Y = 2.0 + f[:, None] + f[None, :]
    O = k.O(X) + s * k.O(Y)
    P = k.P(X) + s * k.P(Y)
    # d/dl of the mirrored state flips the sign of the gradient overlap
    Q = k.Q(X) - s * k.Q(Y)
    g = 1.0 + f
    A = ((g[:, None] * P * w[None, :]) @ d.T).T / B
    Aw, dw, ldw = A * w, d * g * w, lam[:, None] * d * w
    D = 2.0 * (Aw @ (lam[:, None] * d).T + ldw @ A.T) / B
    D = 0.5 * (D + D.T)
    qdd = 2.0 * _bilinear(dw, Q, dw) / B**2
    D2 = lam**2 * qdd + (_bilinear(Aw, O, Aw) + 4.0 * lam * _bilinear(dw, P, Aw)) / (2.0 * B**2)
    T = 2.0 * Aw @ d.T / B
    leak = lam**2 * (qdd - np.sum(T**2, axis=0))
    return D, D2, leak


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def qfi_upper_bound(B: float) -> float:
    """Small-l limit 4 pi^2 <(1+f)^2> over the flat band; no QFI exceeds it."""
    return MONOCHROMATIC_QFI * (1.0 + B * B / 12.0)


def _report(problem, B, l, value, diag, cross, conv, drho) -> FisherResult:
    converged = all(v <= CONVERGENCE_RTOL for v in conv.values())
    flags = ()
    if not (0.0 < value <= qfi_upper_bound(B) + 1e-6):
        flags, converged = ("outside_physical_bounds",), False
    return FisherResult(
        problem=problem,
        B=B,
        l=l,
        value=value,
        term_breakdown={"diagonal": diag, "cross": cross},
        convergence=conv,
        converged=converged,
        drho=drho,
        flags=flags,
    )


def _loc_value(sys: SpdoEigensystem) -> tuple[float, float, float, np.ndarray]:
    D, D2, leak = _loc_elements(sys)
    _, diag, cross = qfi_from_matrix_elements(sys.eigs, D, D2)
    return qfi_from_leakage(sys.eigs, D, leak), diag, cross, D


def qfi_localization(sys: SpdoEigensystem, check_convergence: bool = True) -> FisherResult:
    """QFI for the distance of a single source from the optical axis.

    With ``check_convergence`` the system is re-solved with the retention
    cutoff halved and, separately, with basis size and grids doubled.
    """
    if not isinstance(sys, SpdoEigensystem) or sys.problem != "localization":
        raise StateError("qfi_localization needs a localization eigensystem")
    value, diag, cross, D = _loc_value(sys)
    conv = {}
    if check_convergence:
        opts = sys.options
        half = solve_loc(sys.B, sys.l, opts.with_cutoff(0.5 * opts.cutoff), basis=sys.basis)
        conv["cutoff_halving"] = _rel(_loc_value(half)[0], value)
        fine = solve_loc(sys.B, sys.l, opts.refined(sys.basis.C))
        conv["grid_doubling"] = _rel(_loc_value(fine)[0], value)
    return _report("localization", sys.B, sys.l, value, diag, cross, conv, (D,))


def _pair_value(plus: PairSubspaceSystem, minus: PairSubspaceSystem):
    tot = diag = cross = 0.0
    blocks = []
    for sub in (plus, minus):
        D, D2, leak = _pair_elements(sub)
        _, a, c = qfi_from_matrix_elements(sub.eigs, D, D2)
        t = qfi_from_leakage(sub.eigs, D, leak)
        tot, diag, cross = tot + t, diag + a, cross + c
        blocks.append(D)
    return tot, diag, cross, tuple(blocks)


def qfi_pair(
    sys_plus: PairSubspaceSystem, sys_minus: PairSubspaceSystem, check_convergence: bool = True
) -> FisherResult:
    """QFI for the semi-separation l of a symmetric source pair.

    Matrix elements of drho between the two exchange subspaces vanish, so
    each subspace is assembled separately and the results added.
    """
    if sys_plus.sign != 1 or sys_minus.sign != -1:
        raise ConsistencyError("expected the (+, -) subspaces in that order")
    if sys_plus.B != sys_minus.B or sys_plus.l != sys_minus.l:
        raise ConsistencyError("subspaces were solved for different (B, l)")
    B, l = sys_plus.B, sys_plus.l
    value, diag, cross, blocks = _pair_value(sys_plus, sys_minus)
    conv = {}
    if check_convergence:
        opts = sys_plus.options
        half = solve_pair(B, l, opts.with_cutoff(0.5 * opts.cutoff), basis=sys_plus.basis)
        conv["cutoff_halving"] = _rel(_pair_value(*half)[0], value)
        fine = solve_pair(B, l, opts.refined(sys_plus.basis.C))
        conv["grid_doubling"] = _rel(_pair_value(*fine)[0], value)
    return _report("pair", B, l, value, diag, cross, conv, blocks)


def pair_drho_element(sys_j: PairSubspaceSystem, j: int, sys_i: PairSubspaceSystem, i: int) -> float:
    """<lambda_j|drho|lambda_i> from the four source-resolved terms.

    Every overlap is evaluated by quadrature from the expansion of the
    eigenstates; the eigenvalue identity is not used, so the result is an
    independent check of the subspace decoupling.
    """
    if sys_i.B != sys_j.B or sys_i.l != sys_j.l or sys_i.f_grid.size != sys_j.f_grid.size:
        raise ConsistencyError("eigenstates belong to different configurations")
    B, f, w = sys_i.B, sys_i.f_grid, sys_i.f_weights
    k = KernelTriple(sys_i.l)
    X = f[:, None] - f[None, :]
    Y = 2.0 + f[:, None] + f[None, :]
    OX, OY, PX, PY = k.O(X), k.O(Y), k.P(X), k.P(Y)
    di, dj = sys_i.coeff_funcs[i] * w, sys_j.coeff_funcs[j] * w
    pi_i, pi_j = sys_i.sign, sys_j.sign
    g = 1.0 + f
    # <K_{+f}|i>, <K_{-f}|i>
    kp_i = (OX + pi_i * OY) @ di / B
    km_i = (OY + pi_i * OX) @ di / B
    kp_j = (OX + pi_j * OY) @ dj / B
    km_j = (OY + pi_j * OX) @ dj / B
    # <j| d/dl |K_{+f}>, <j| d/dl |K_{-f}>
    ap_j = g * ((PX + pi_j * PY) @ dj) / B
    am_j = g * ((PY + pi_j * PX) @ dj) / B
    ap_i = g * ((PX + pi_i * PY) @ di) / B
    am_i = g * ((PY + pi_i * PX) @ di) / B
    integrand = ap_j * kp_i + kp_j * ap_i + am_j * km_i + km_j * am_i
    return float(np.sum(w * integrand) / (2.0 * B))


def qfi_scaled(result, photons: int) -> float:
    """Fisher information of ``photons`` independent photons."""
    if int(photons) != photons or photons < 1:
        raise DomainError(f"photon number must be a positive integer, got {photons}")
    value = result.value if isinstance(result, FisherResult) else float(result)
    return photons * value


def min_sd(result, photons: int = 1) -> float:
    """Cramer-Rao standard deviation 1/sqrt(photons * value)."""
    return 1.0 / math.sqrt(qfi_scaled(result, photons))


MONOCHROMATIC_QFI = 4.0 * math.pi**2


def qfi_point(problem: str, B: float, l: float, opts=None) -> FisherResult:
    """QFI for one (B, l), with B = 0 answered by the monochromatic value 4 pi^2.

    At B = 0 both problems reduce to pure or rank-two states whose QFI is
    4 Q(0) = 4 pi^2 for every l.
    """
    if problem not in ("loc", "pair"):
        raise DomainError(f"problem must be 'loc' or 'pair', got {problem!r}")
    if B == 0.0:
        if not l > 0:
            raise DomainError(f"l must be positive, got {l}")
        name = "localization" if problem == "loc" else "pair"
        return FisherResult(name, 0.0, l, MONOCHROMATIC_QFI, {"analytic": MONOCHROMATIC_QFI}, {}, True)
    if problem == "loc":
        return qfi_localization(solve_loc(B, l, opts))
    return qfi_pair(*solve_pair(B, l, opts))
