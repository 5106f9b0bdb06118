"""Fisher information of reflectivity estimation for Schmidt-form states.

Everything is evaluated at zero reflectivity, where the received state is
the product of the idler marginal and the thermal background.  The main
entry point is :func:`qfi_schmidt`, the closed pair-sum over Schmidt
terms; :func:`qfi_numerical` provides an independent route through the
eigendecomposition definition for cross-validation, and
:func:`qfi_cat_direct` evaluates the cat-family spectral sum with an
explicit received-mode cutoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fock import (DimensionError, MAX_TENSOR_DIM, TruncatedOperator,
                   annihilation, eig_hermitian, thermal_weights)
from .states import SchmidtState, cat_idler_eigenvalues

DENOM_GUARD = 1e-14
PAIR_FLOOR = 1e-12


class ConvergenceError(RuntimeError):
    """A cutoff sweep hit its limit before the target tolerance."""


@dataclass
class QfiReport:
    """Fisher information of one (state, bath) instance with its bounds.

    ``h`` is the state's information per squared reflectivity; ``h_q1``
    and ``h_q2`` are the two universal upper bounds, ``h_q`` their
    minimum, and ``h_c`` the best classical (coherent-transmitter)
    benchmark at the same photon numbers.  ``h_q2`` is infinite in a
    noiseless bath.
    """

    family: str
    n_signal: float
    n_bath: float
    h: float
    h_q1: float
    h_q2: float
    h_q: float
    h_c: float
    gain_db: float
    cutoff: int
    deficit_warning: float

    CSV_HEADER = "family,N_S,N_B,H,H_Q1,H_Q2,H_C,gain_db,cutoff,deficit"

    @property
    def gain(self) -> float:
        return self.h / self.h_c if self.h_c > 0 else math.nan

    def to_json_dict(self) -> dict:
        def _num(x):
            return x if math.isfinite(x) else None

        return {
            "family": self.family,
            "N_S": self.n_signal,
            "N_B": self.n_bath,
            "H": self.h,
            "H_Q1": self.h_q1,
            "H_Q2": _num(self.h_q2),
            "H_Q": _num(self.h_q),
            "H_C": self.h_c,
            "gain": _num(self.gain),
            "gain_db": _num(self.gain_db),
            "cutoff": self.cutoff,
            "deficit": self.deficit_warning,
            "equals_classical": bool(abs(self.h - self.h_c) <= 1e-9 * max(self.h_c, 1e-300)),
        }

    def to_csv_row(self) -> str:
        cells = [self.family, repr(self.n_signal), repr(self.n_bath), repr(self.h),
                 repr(self.h_q1), repr(self.h_q2), repr(self.h_c), repr(self.gain_db),
                 str(self.cutoff), repr(self.deficit_warning)]
        return ",".join(cells)


def qfi_bounds(n_signal: float, n_bath: float):
    """Upper bounds and the classical benchmark.

    h_q1 = 4 N_S / (1 + N_B); h_q2 = (2 N_S + 1) / N_B (infinite at
    N_B = 0, where h_q reduces to h_q1); h_c = 4 N_S / (1 + 2 N_B).
    """
    if n_signal < 0 or n_bath < 0:
        raise ValueError("photon numbers must be >= 0")
    h_q1 = 4.0 * n_signal / (1.0 + n_bath)
    h_q2 = (2.0 * n_signal + 1.0) / n_bath if n_bath > 0 else math.inf
    h_c = 4.0 * n_signal / (1.0 + 2.0 * n_bath)
    return h_q1, h_q2, h_c


def qfi_gaussian_closed(n_signal: float, n_bath: float) -> float:
    """Two-mode squeezed vacuum Fisher information in closed form."""
    if n_signal < 0 or n_bath < 0:
        raise ValueError("photon numbers must be >= 0")
    shrink = 1.0 + (n_signal / (1.0 + n_signal)) * (n_bath / (1.0 + n_bath)) \
        if n_signal > 0 else 1.0
    return 4.0 * n_signal / (1.0 + n_bath) / shrink


def signal_lowering_matrix(state: SchmidtState) -> np.ndarray:
    """m[i, j] = <w_i| s |w_j> over the state's Schmidt vectors."""
    if state.d_signal < 2:
        return np.zeros((state.rank, state.rank), dtype=np.complex128)
    s = annihilation(state.d_signal).data
    return state.vectors.conj().T @ (s @ state.vectors)


def qfi_schmidt(state: SchmidtState, n_bath: float) -> QfiReport:
    """Fisher information from the Schmidt pair sum.

    H = 4/(1+N_B) * sum_{a a'} p_a p_a' |<w_a'|s|w_a>|^2
                    / (p_a' + p_a N_B/(N_B+1)),
    including the diagonal pairs.  Pairs whose denominator falls under
    1e-14 cannot occur after pruning and are skipped defensively.
    """
    if n_bath < 0:
        raise ValueError("bath photon number must be >= 0")
    p = state.probs
    q = n_bath / (1.0 + n_bath)
    m = signal_lowering_matrix(state)
    # rows index a', columns a: numerator p_a p_a', denominator p_a' + p_a q
    num = np.abs(m) ** 2 * (p[None, :] * p[:, None])
    den = p[:, None] + p[None, :] * q
    mask = den > DENOM_GUARD
    h = 4.0 / (1.0 + n_bath) * float(np.sum(num[mask] / den[mask]))
    n_signal = state.mean_photons()
    h_q1, h_q2, h_c = qfi_bounds(n_signal, n_bath)
    h_q = min(h_q1, h_q2)
    gain_db = 10.0 * math.log10(h / h_c) if h > 0 and h_c > 0 else math.nan
    return QfiReport(
        family=state.meta.get("family", "custom"),
        n_signal=n_signal,
        n_bath=n_bath,
        h=h,
        h_q1=h_q1,
        h_q2=h_q2,
        h_q=h_q,
        h_c=h_c,
        gain_db=gain_db,
        cutoff=state.d_signal,
        deficit_warning=state.deficit,
    )


def qfi_cat_direct(n_signal: float, d: int, n_bath: float, dim_received: int) -> float:
    """Cat-family Fisher information from the spectral quadruple sum.

    Sums over idler eigenvector pairs (l, l') and received-mode levels,
    with the ladder selection rules collapsing one level index.  The
    result is monotonically nondecreasing in ``dim_received``; use
    :func:`converge_cutoff` to pick an adequate cutoff.
    """
    if d < 2:
        raise ValueError("cat states need d >= 2 components")
    if dim_received < 2:
        raise DimensionError("received-mode cutoff must be >= 2")
    lam = cat_idler_eigenvalues(n_signal, d)
    rho = thermal_weights(n_bath, dim_received)
    idx = np.arange(d)
    overlaps = np.exp(-n_signal * (1.0 - np.exp(2j * np.pi * (idx[None, :] - idx[:, None]) / d)))

    n_up = np.arange(1, dim_received)          # levels with a lower neighbor
    diff_dn = rho[n_up] - rho[n_up - 1]
    n_dn = np.arange(0, dim_received - 1)      # levels with an upper neighbor
    diff_up = rho[n_dn] - rho[n_dn + 1]

    total = 0.0
    for l in range(d):
        for lp in range(d):
            phase = np.exp(2j * np.pi * (lp * idx[None, :] - l * idx[:, None]) / d)
            t1 = np.sum(overlaps * phase * np.exp(-2j * np.pi * idx[None, :] / d))
            t2 = np.sum(overlaps * phase * np.exp(2j * np.pi * idx[:, None] / d))
            if abs(t1) > 0:
                den = rho[n_up - 1] * lam[l] + rho[n_up] * lam[lp]
                ok = den > DENOM_GUARD
                total += abs(t1) ** 2 * float(
                    np.sum(n_up[ok] * diff_dn[ok] ** 2 / den[ok]))
            if abs(t2) > 0:
                den = rho[n_dn + 1] * lam[l] + rho[n_dn] * lam[lp]
                ok = den > DENOM_GUARD
                total += abs(t2) ** 2 * float(
                    np.sum((n_dn[ok] + 1) * diff_up[ok] ** 2 / den[ok]))
    return 2.0 * n_signal / d ** 4 * total


def qfi_numerical(state: SchmidtState, n_bath: float, dim_bath: int,
                  max_dim: int = MAX_TENSOR_DIM, pair_floor: float = PAIR_FLOOR) -> float:
    """Fisher information through the eigendecomposition definition.

    Builds the zero-reflectivity received state on a concrete
    (idler-rank x bath) space together with the reflectivity derivative,
    then evaluates 2 sum |<m|drho|n>|^2 / (lam_m + lam_n), skipping pairs
    whose eigenvalue sum is below ``pair_floor``.  Exists as an
    independent cross-check of :func:`qfi_schmidt`.
    """
    r = state.rank
    dim = r * dim_bath
    if dim > max_dim:
        raise DimensionError(f"joint dimension {dim} exceeds maximum {max_dim}")
    rho_w = thermal_weights(n_bath, dim_bath)
    drho = _eta_derivative_tensor(state, rho_w, dim_bath)
    rho0 = np.kron(np.diag(state.probs), np.diag(rho_w))
    lam, vec = eig_hermitian(
        TruncatedOperator(rho0, (r, dim_bath), True))
    m = vec.conj().T @ drho @ vec
    pair = lam[:, None] + lam[None, :]
    mask = pair > pair_floor
    return 2.0 * float(np.sum(np.abs(m[mask]) ** 2 / pair[mask]))


def _eta_derivative_tensor(state: SchmidtState, rho_w: np.ndarray, dim_bath: int) -> np.ndarray:
    """Reflectivity derivative of the received state at zero reflectivity,
    assembled from per-bath-level vector pushes of the generator (no
    tripartite matrix is materialized)."""
    r = state.rank
    d_push = state.d_signal + 1  # headroom so s' acts exactly on stored vectors
    w = np.zeros((d_push, r), dtype=np.complex128)
    w[: state.d_signal] = state.vectors
    a = annihilation(d_push).data
    up = w.conj().T @ (a.conj().T @ w)   # up[a', a] = <w_a'| s' |w_a>
    dn = w.conj().T @ (a @ w)            # dn[a', a] = <w_a'| s  |w_a>
    sp = np.sqrt(state.probs)
    coeff_up = sp[:, None] * sp[None, :] * up.T  # [a, a'] entries
    coeff_dn = sp[:, None] * sp[None, :] * dn.T
    t = np.zeros((r, dim_bath, r, dim_bath), dtype=np.complex128)
    for n in range(1, dim_bath):
        t[:, n - 1, :, n] += rho_w[n] * np.sqrt(n) * coeff_up
    for n in range(0, dim_bath - 1):
        t[:, n + 1, :, n] -= rho_w[n] * np.sqrt(n + 1) * coeff_dn
    mat = t.reshape(r * dim_bath, r * dim_bath)
    return mat + mat.conj().T


def converge_cutoff(f, rel_tol: float = 1e-6, max_cutoff: int = 1 << 15,
                    start: int = 16):
    """Double a cutoff until successive values of ``f`` agree to ``rel_tol``.

    Verifies along the way that the sequence tends monotonically (the
    direction is inferred, not assumed).  Returns (value, cutoff_used).
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    cutoff = int(start)
    prev = float(f(cutoff))
    diffs = []
    while cutoff < max_cutoff:
        cutoff *= 2
        cur = float(f(cutoff))
        diffs.append(cur - prev)
        scale = max(abs(cur), abs(prev), 1e-300)
        if len(diffs) >= 2:
            slack = rel_tol * scale
            if (diffs[-1] > slack and diffs[0] < -slack) or \
               (diffs[-1] < -slack and diffs[0] > slack):
                raise ConvergenceError(
                    f"sequence is not monotone-tending near cutoff {cutoff}")
        if abs(cur - prev) <= rel_tol * scale:
            return cur, cutoff
        prev = cur
    raise ConvergenceError(
        f"no convergence to rel_tol={rel_tol:g} within max cutoff {max_cutoff}")
