"""Signal-idler transmitter states in a common Schmidt representation.

A bipartite pure state sum_a sqrt(p_a) |w_a>_S |v_a>_I is stored as the
probabilities p_a plus the signal vectors w_a on a truncated Fock space.
The idler vectors are abstract orthonormal labels and are never
materialized here: every downstream quantity (Fisher information, optimal
observable) depends only on p_a, the w_a, and idler orthonormality.
Measurement-stage code instantiates a concrete idler space of dimension
equal to the Schmidt rank when it needs one.

Constructors take the signal cutoff from the caller and report the lost
probability mass as ``deficit``; they never enlarge the space on their
own and never renormalize.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .fock import annihilation

PRUNE_EPS = 1e-14


@dataclass
class SchmidtState:
    """Schmidt-form signal-idler state.

    probs    : (r,) term probabilities p_a (exact, not renormalized)
    vectors  : (d_signal, r) complex signal vectors as columns
    deficit  : probability mass lost to truncation and pruning
    meta     : family label and construction parameters
    """

    probs: np.ndarray
    vectors: np.ndarray
    d_signal: int
    deficit: float
    meta: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return len(self.probs)

    @property
    def terms(self):
        """List of (p, w) pairs."""
        return [(float(self.probs[i]), self.vectors[:, i]) for i in range(self.rank)]

    def mean_photons(self) -> float:
        if self.d_signal < 2:
            return 0.0
        a = annihilation(self.d_signal).data
        lowered = a @ self.vectors
        return float(np.sum(self.probs * np.sum(np.abs(lowered) ** 2, axis=0)))

    def validate(self, ortho_tol: float = 1e-9, mass_tol: float = 1e-10) -> None:
        gram = self.vectors.conj().T @ self.vectors
        dev = np.abs(gram - np.eye(self.rank)).max()
        if dev >= ortho_tol:
            raise ValueError(f"signal vectors not orthonormal, deviation {dev:.3e}")
        mass = float(np.sum(self.probs)) + self.deficit
        if abs(mass - 1.0) > mass_tol:
            raise ValueError(f"probability mass {mass:.12f} differs from 1")
        if np.any(self.probs < 0):
            raise ValueError("negative Schmidt probability")

    def to_json_dict(self) -> dict:
        return {
            "family": self.meta.get("family", "custom"),
            "params": {k: v for k, v in self.meta.items() if k != "family"},
            "cutoff": self.d_signal,
            "deficit": self.deficit,
            "terms": [
                {
                    "p": float(self.probs[i]),
                    "re": self.vectors[:, i].real.tolist(),
                    "im": self.vectors[:, i].imag.tolist(),
                }
                for i in range(self.rank)
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, **kwargs)

    @classmethod
    def from_json_dict(cls, payload: dict) -> "SchmidtState":
        terms = payload["terms"]
        probs = np.array([t["p"] for t in terms], dtype=float)
        vectors = np.array(
            [np.asarray(t["re"]) + 1j * np.asarray(t["im"]) for t in terms]
        ).T
        meta = {"family": payload.get("family", "custom")}
        meta.update(payload.get("params", {}))
        return cls(probs, vectors, int(payload["cutoff"]), float(payload["deficit"]), meta)

    @classmethod
    def from_json(cls, text: str) -> "SchmidtState":
        return cls.from_json_dict(json.loads(text))


def _finalize(probs: np.ndarray, vectors: np.ndarray, d_signal: int, meta: dict) -> SchmidtState:
    """Prune terms below PRUNE_EPS and account the total lost mass."""
    probs = np.asarray(probs, dtype=float)
    vectors = np.ascontiguousarray(vectors, dtype=np.complex128)
    keep = probs > PRUNE_EPS
    probs = probs[keep]
    vectors = vectors[:, keep]
    norms2 = np.sum(np.abs(vectors) ** 2, axis=0)
    deficit = max(0.0, 1.0 - float(np.sum(probs * norms2)))
    return SchmidtState(probs, vectors, d_signal, deficit, meta)


def tmsv(n_signal: float, d_signal: int) -> SchmidtState:
    """Two-mode squeezed vacuum: p_n = n_signal^n / (1+n_signal)^(n+1), w_n = |n>."""
    if n_signal < 0:
        raise ValueError("mean photon number must be >= 0")
    from .fock import thermal_weights

    probs = thermal_weights(n_signal, d_signal)
    vectors = np.eye(d_signal, dtype=np.complex128)
    return _finalize(probs, vectors, d_signal,
                     {"family": "tmsv", "n_signal": n_signal})


def coherent_amplitudes(alpha: complex, d_signal: int) -> np.ndarray:
    """Truncated Fock amplitudes exp(-|a|^2/2) a^n / sqrt(n!)."""
    amps = np.empty(d_signal, dtype=np.complex128)
    amps[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, d_signal):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps


def coherent(n_signal: float, phase: float, d_signal: int) -> SchmidtState:
    """Coherent transmitter |alpha> with alpha = sqrt(n_signal) e^{i phase}.

    Single Schmidt term; the stored vector keeps the raw truncated
    amplitudes, so its squared norm is 1 minus the Poisson tail.
    """
    if n_signal < 0:
        raise ValueError("mean photon number must be >= 0")
    alpha = np.sqrt(n_signal) * np.exp(1j * phase)
    vec = coherent_amplitudes(alpha, d_signal)
    return _finalize(np.array([1.0]), vec[:, None], d_signal,
                     {"family": "coherent", "n_signal": n_signal, "phase": phase})


def max_entangled_fock(d: int) -> SchmidtState:
    """Flat superposition of the first d Fock levels, p = 1/d, w_n = |n>."""
    if d < 1:
        raise ValueError("rank must be >= 1")
    probs = np.full(d, 1.0 / d)
    vectors = np.eye(d, dtype=np.complex128)
    return _finalize(probs, vectors, d,
                     {"family": "maxfock", "d": d, "n_signal": (d - 1) / 2.0})


def cat_idler_eigenvalues(n_signal: float, d: int) -> np.ndarray:
    """Idler reduced-state eigenvalues for the d-component cat transmitter.

    The idler state commutes with the cyclic boost operator, so its
    eigenvectors are the discrete-Fourier combinations of the idler
    labels; the eigenvalues follow from the coherent-state overlaps
    <a_r|a_s> = exp[-n_signal (1 - e^{i 2 pi (s-r)/d})] and equal the
    Poisson masses of photon number regrouped modulo d.
    """
    m = np.arange(d)
    overlaps = np.exp(-n_signal * (1.0 - np.exp(2j * np.pi * m / d)))
    lam = (overlaps[None, :] * np.exp(-2j * np.pi * np.outer(m, m) / d)).sum(axis=1) / d
    if np.abs(lam.imag).max() > 1e-12:
        raise ValueError("idler eigenvalues acquired an imaginary part")
    lam = lam.real
    if lam.min() < -1e-10:
        raise ValueError(f"idler eigenvalue {lam.min():.3e} below tolerance")
    return np.clip(lam, 0.0, None)


def cat_state(n_signal: float, d: int, d_signal: int) -> SchmidtState:
    """Multicomponent cat transmitter: equal superposition of d coherent
    states on the circle |a_k|, a_k = sqrt(n_signal) e^{i 2 pi k / d},
    each tagged by an orthonormal idler label.

    Returns the exact Schmidt form: probabilities are the idler
    eigenvalues from :func:`cat_idler_eigenvalues`; the signal vectors are
    the matched orthonormalized coherent superpositions.  The phase
    convention tying signal vectors to idler eigenvectors is fixed by this
    construction (the Fisher information is invariant to it).
    """
    if n_signal < 0:
        raise ValueError("mean photon number must be >= 0")
    if d < 2:
        raise ValueError("cat states need d >= 2 components")
    lam = cat_idler_eigenvalues(n_signal, d)
    alphas = np.sqrt(n_signal) * np.exp(2j * np.pi * np.arange(d) / d)
    amp = np.column_stack([coherent_amplitudes(a, d_signal) for a in alphas])
    # u_k = (1/d) sum_l e^{-i 2 pi k l / d} |a_l>, the unnormalized Schmidt vector
    phases = np.exp(-2j * np.pi * np.outer(np.arange(d), np.arange(d)) / d)
    raw = amp @ phases.T / d
    keep = lam > PRUNE_EPS
    lam_kept = lam[keep]
    raw_kept = raw[:, keep]
    norms = np.sqrt(np.sum(np.abs(raw_kept) ** 2, axis=0))
    if np.any(norms ** 2 < 0.5 * lam_kept):
        raise ValueError("signal cutoff too small to resolve a retained component")
    vectors = raw_kept / norms
    probs = lam_kept
    state = SchmidtState(probs, vectors, d_signal,
                         max(0.0, 1.0 - float(np.sum(probs * np.sum(np.abs(vectors) ** 2, axis=0)))),
                         {"family": "cat", "n_signal": n_signal, "d": d})
    return state


def cat_state_infinite_d(n_signal: float, d_signal: int) -> SchmidtState:
    """Infinite-component cat limit: Poisson coefficients p_n, w_n = |n>."""
    if n_signal < 0:
        raise ValueError("mean photon number must be >= 0")
    n = np.arange(d_signal)
    log_p = -n_signal + n * np.log(n_signal) - _log_factorial(n) if n_signal > 0 \
        else np.where(n == 0, 0.0, -np.inf)
    probs = np.exp(log_p)
    vectors = np.eye(d_signal, dtype=np.complex128)
    return _finalize(probs, vectors, d_signal,
                     {"family": "cat_inf", "n_signal": n_signal})


def _log_factorial(n: np.ndarray) -> np.ndarray:
    from scipy.special import gammaln

    return gammaln(np.asarray(n, dtype=float) + 1.0)


def schmidt_decompose(amplitudes: np.ndarray, meta: dict | None = None) -> SchmidtState:
    """Schmidt form of a pure state given as a (signal Fock, idler basis)
    amplitude matrix, via singular-value decomposition.

    Terms are sorted by descending probability.  The matrix must have unit
    Frobenius norm to 1e-10.
    """
    amplitudes = np.asarray(amplitudes, dtype=np.complex128)
    norm = float(np.linalg.norm(amplitudes))
    if abs(norm - 1.0) > 1e-10:
        raise ValueError(f"amplitude matrix norm {norm:.12f} differs from 1")
    u, sigma, _ = np.linalg.svd(amplitudes, full_matrices=False)
    probs = sigma ** 2
    return _finalize(probs, u, amplitudes.shape[0], meta or {"family": "custom"})


def state_from_family(family: str, n_signal: float, d_signal: int,
                      phase: float = 0.0) -> SchmidtState:
    """Build a transmitter from its CLI/config label.

    Labels: ``tmsv``, ``coherent``, ``cat:<d>``, ``cat:inf``, ``maxfock:<d>``.
    For ``maxfock`` the photon number is fixed by the rank and ``n_signal``
    is ignored.
    """
    if family == "tmsv":
        return tmsv(n_signal, d_signal)
    if family == "coherent":
        return coherent(n_signal, phase, d_signal)
    if family == "cat:inf":
        return cat_state_infinite_d(n_signal, d_signal)
    if family.startswith("cat:"):
        return cat_state(n_signal, int(family.split(":", 1)[1]), d_signal)
    if family.startswith("maxfock:"):
        return max_entangled_fock(int(family.split(":", 1)[1]))
    raise ValueError(f"unknown state family {family!r}")
