"""Dense operator algebra on truncated bosonic Fock spaces.

Multimode objects follow one global factor-ordering convention: whenever
idler, signal, and bath modes appear together the factors are ordered
(idler, signal, bath), and the joint index is row-major over the per-mode
cutoffs.  Truncation never renormalizes: density operators carry the
probability mass lost to the cutoff in an explicit ``trace_deficit`` so
the truncation error stays auditable instead of silently biasing later
denominators.

All functions here are pure; returned objects are treated as immutable
and are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
EIGENVALUE_FLOOR = -1e-10
MAX_TENSOR_DIM = 1 << 14


class DimensionError(ValueError):
    """An operator dimension is invalid or a tensor product would overflow."""


class TruncationError(RuntimeError):
    """A truncation deficit exceeds the caller-supplied tolerance."""


@dataclass
class TruncatedOperator:
    """Dense complex matrix on a truncated mode (or tensor-product) space.

    ``cutoffs`` lists the per-factor dimensions; the matrix dimension is
    their product.  ``hermitian_hint`` asserts Hermiticity at construction
    time (checked entrywise to 1e-12).
    """

    data: np.ndarray
    cutoffs: tuple
    hermitian_hint: bool = False

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.complex128)
        self.cutoffs = tuple(int(c) for c in self.cutoffs)
        if any(c < 1 for c in self.cutoffs):
            raise DimensionError(f"cutoffs must be positive, got {self.cutoffs}")
        dim = int(np.prod(self.cutoffs))
        if self.data.shape != (dim, dim):
            raise DimensionError(
                f"matrix shape {self.data.shape} does not match cutoffs {self.cutoffs}"
            )
        if self.hermitian_hint:
            dev = np.abs(self.data - self.data.conj().T).max()
            if dev >= HERMITIAN_ATOL:
                raise ValueError(f"operator marked Hermitian deviates by {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dagger(self) -> "TruncatedOperator":
        return TruncatedOperator(self.data.conj().T, self.cutoffs, self.hermitian_hint)


@dataclass
class DensityOperator:
    """Hermitian positive operator with explicit truncation bookkeeping.

    ``trace + trace_deficit = 1`` holds to 1e-12; the deficit is the
    probability mass lost to finite cutoffs (never renormalized away).
    """

    op: TruncatedOperator
    trace_deficit: float = 0.0

    def __post_init__(self):
        if not self.op.hermitian_hint:
            raise ValueError("density operators must be constructed Hermitian")
        if self.trace_deficit < -TRACE_ATOL:
            raise ValueError(f"negative trace deficit {self.trace_deficit:.3e}")
        tr = float(np.real(np.trace(self.op.data)))
        if abs(tr + self.trace_deficit - 1.0) > 1e-9:
            raise ValueError(
                f"trace {tr:.12f} + deficit {self.trace_deficit:.3e} is not 1"
            )

    @property
    def data(self) -> np.ndarray:
        return self.op.data

    @property
    def cutoffs(self) -> tuple:
        return self.op.cutoffs

    def trace(self) -> float:
        return float(np.real(np.trace(self.op.data)))

    def validate(self, eig_floor: float = EIGENVALUE_FLOOR) -> None:
        """Full invariant check including the eigenvalue floor (O(D^3))."""
        tr = self.trace()
        if abs(tr + self.trace_deficit - 1.0) > TRACE_ATOL:
            raise ValueError("trace plus deficit drifted from 1")
        lo = float(np.linalg.eigvalsh(self.op.data).min())
        if lo < eig_floor:
            raise ValueError(f"negative eigenvalue {lo:.3e} below floor")


def annihilation(dim: int) -> TruncatedOperator:
    """Single-mode annihilation operator: <n-1|a|n> = sqrt(n)."""
    if dim < 2:
        raise DimensionError(f"annihilation needs dim >= 2, got {dim}")
    return TruncatedOperator(np.diag(np.sqrt(np.arange(1, dim)), 1), (dim,))


def creation(dim: int) -> TruncatedOperator:
    return annihilation(dim).dagger()


def number_operator(dim: int) -> TruncatedOperator:
    return TruncatedOperator(np.diag(np.arange(dim, dtype=float)), (dim,), True)


def identity(cutoffs) -> TruncatedOperator:
    cutoffs = tuple(int(c) for c in cutoffs)
    return TruncatedOperator(np.eye(int(np.prod(cutoffs))), cutoffs, True)


def thermal_weights(n_bath: float, dim: int) -> np.ndarray:
    """Bose-Einstein weights n_bath^n / (1+n_bath)^(n+1), untruncated values."""
    ratio = n_bath / (1.0 + n_bath)
    return ratio ** np.arange(dim) / (1.0 + n_bath)


def thermal_state(n_bath: float, dim: int, deficit_tol: float | None = None) -> DensityOperator:
    """Thermal state with mean photon number ``n_bath`` on ``dim`` levels.

    Keeps the exact untruncated weights; the geometric tail
    (n_bath/(1+n_bath))^dim is reported as ``trace_deficit``.  Pass
    ``deficit_tol`` to opt into a hard truncation check.
    """
    if n_bath < 0:
        raise ValueError(f"mean photon number must be >= 0, got {n_bath}")
    if dim < 1:
        raise DimensionError(f"thermal state needs dim >= 1, got {dim}")
    deficit = (n_bath / (1.0 + n_bath)) ** dim
    if deficit_tol is not None and deficit > deficit_tol:
        raise TruncationError(
            f"thermal deficit {deficit:.3e} exceeds tolerance {deficit_tol:.3e}"
        )
    op = TruncatedOperator(np.diag(thermal_weights(n_bath, dim)), (dim,), True)
    return DensityOperator(op, deficit)


_BS_SPECTRA: dict = {}


def _beamsplitter_spectrum(dim_signal: int, dim_bath: int):
    """Eigendecomposition of i(s'b - sb') on the (signal, bath) space, cached."""
    key = (dim_signal, dim_bath)
    if key not in _BS_SPECTRA:
        s = annihilation(dim_signal).data
        b = annihilation(dim_bath).data
        gen = np.kron(s.conj().T, b) - np.kron(s, b.conj().T)
        lam, vec = np.linalg.eigh(1j * gen)
        _BS_SPECTRA[key] = (lam, vec)
    return _BS_SPECTRA[key]


def beamsplitter_unitary(eta: float, dim_signal: int, dim_bath: int) -> TruncatedOperator:
    """Beamsplitter exp[asin(eta) (s'b - s b')] mixing signal into the bath mode.

    Exact matrix exponential through the eigendecomposition of the
    Hermitian generator, so the result is unitary on the truncated joint
    space up to eigensolver accuracy.  Rows in incomplete total-excitation
    sectors (n_s + n_b >= min(dim_signal, dim_bath)) remain unitary but no
    longer represent the physical beamsplitter; keep those amplitudes
    negligible by choosing cutoffs with headroom.
    """
    if abs(eta) > 1.0:
        raise ValueError(f"amplitude reflectivity must satisfy |eta| <= 1, got {eta}")
    theta = float(np.arcsin(eta))
    lam, vec = _beamsplitter_spectrum(dim_signal, dim_bath)
    u = (vec * np.exp(-1j * theta * lam)) @ vec.conj().T
    return TruncatedOperator(u, (dim_signal, dim_bath))


def tensor(a: TruncatedOperator, b: TruncatedOperator,
           max_dim: int = MAX_TENSOR_DIM) -> TruncatedOperator:
    """Kronecker product; cutoff lists concatenate."""
    dim = a.dim * b.dim
    if dim > max_dim:
        raise DimensionError(f"tensor dimension {dim} exceeds maximum {max_dim}")
    return TruncatedOperator(
        np.kron(a.data, b.data),
        a.cutoffs + b.cutoffs,
        a.hermitian_hint and b.hermitian_hint,
    )


def _partial_trace_matrix(data: np.ndarray, cutoffs, keep) -> np.ndarray:
    k = len(cutoffs)
    keep = sorted(keep)
    if not keep or any(i < 0 or i >= k for i in keep) or len(set(keep)) != len(keep):
        raise ValueError(f"invalid factor indices {keep} for {k} factors")
    tens = data.reshape(tuple(cutoffs) + tuple(cutoffs))
    letters = "abcdefghijklm"
    if k > len(letters):
        raise DimensionError("too many tensor factors")
    rows = []
    cols = []
    for i in range(k):
        rows.append(letters[i])
        cols.append(letters[i].upper() if i in keep else letters[i])
    out = "".join(letters[i] for i in keep) + "".join(letters[i].upper() for i in keep)
    sub = "".join(rows) + "".join(cols) + "->" + out
    kept = int(np.prod([cutoffs[i] for i in keep]))
    return np.einsum(sub, tens).reshape(kept, kept)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out every factor not listed in ``keep`` (kept in index order)."""
    reduced = _partial_trace_matrix(rho.data, rho.cutoffs, keep)
    reduced = 0.5 * (reduced + reduced.conj().T)
    kept_cutoffs = tuple(rho.cutoffs[i] for i in sorted(keep))
    op = TruncatedOperator(reduced, kept_cutoffs, True)
    return DensityOperator(op, rho.trace_deficit)


def eig_hermitian(a: TruncatedOperator):
    """Eigenvalues (descending) and orthonormal eigenvector columns."""
    if not a.hermitian_hint:
        raise ValueError("eig_hermitian requires hermitian_hint")
    lam, vec = np.linalg.eigh(a.data)
    return lam[::-1].copy(), vec[:, ::-1].copy()
