"""Monte Carlo simulation of the reflectivity-threshold detection protocol.

Each trial draws M single-copy outcomes of the optimal observable, takes
their mean as the reflectivity estimate, and declares the object present
when the estimate exceeds xi * eta.  Type I and II error probabilities
are estimated with Wilson confidence intervals, and exponential decay
rates are extracted two ways:

* ``exponent_fit``: weighted linear fit of -log P against M through the
  origin.  This matches the idealized pure-exponential picture but is
  biased upward at desk-scale M by the subexponential prefactor of the
  true tail (for a Gaussian mean, P = erfc(sqrt(rate * M)) / 2, whose
  -log P carries an additive ~ 0.5 log M term).
* ``gaussian_rate_fit``: inverts the Gaussian tail form before fitting,
  y(M) = erfcinv(2 P)^2 = rate * M, which removes that prefactor and
  recovers the decay rate already at moderate M.  This is the estimator
  used when comparing against the predicted rates xi^2 eta^2 H / 2.

Sampling uses counter-based RNG streams keyed by (seed, stream, chunk):
every trial's draws are reproducible independently of execution order,
so results are bit-identical across runs and thread counts.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import erfc, erfcinv

from .estimator import outcome_distribution, received_state, sld_observable
from .qfi import qfi_bounds, qfi_schmidt
from .states import SchmidtState, state_from_family

SAMPLE_CHUNK = 4096
MIN_ERROR_EVENTS = 50


class UnresolvedStatisticsError(RuntimeError):
    """Too few error events to resolve an exponent at the trial budget."""


@dataclass
class ProtocolConfig:
    """All parameters of one hypothesis-test run."""

    family: str = "tmsv"
    n_signal: float = 0.5
    n_bath: float = 1.0
    eta: float = 0.1                  # true reflectivity under H1
    m_copies: int = 500               # copies averaged per trial
    xi: float = 0.5                   # threshold fraction, declare at eta_hat > xi*eta
    prior_absent: float = 0.5
    prior_present: float = 0.5
    trials: int = 100_000
    seed: int = 2024
    d_signal: int | None = None       # transmitter cutoff (None = automatic)
    dim_bath: int | None = None       # returned-mode cutoff (None = automatic)
    phase: float = 0.0                # coherent-transmitter phase
    trials_cap_factor: int = 8        # adaptive doubling cap, multiple of trials

    def __post_init__(self):
        if not 0.0 < self.xi < 1.0:
            raise ValueError("threshold fraction must lie strictly between 0 and 1")
        if self.eta < 0:
            raise ValueError("reflectivity must be >= 0")
        if self.m_copies < 1:
            raise ValueError("need at least one copy per trial")
        if self.trials < 1:
            raise ValueError("zero trials requested")
        if abs(self.prior_absent + self.prior_present - 1.0) > 1e-12 or \
                min(self.prior_absent, self.prior_present) < 0:
            raise ValueError("priors must form a distribution")

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ProtocolConfig":
        return cls(**payload)


@dataclass
class ErrorReport:
    """Estimated error probabilities and decay rates for one (config, M)."""

    family: str
    n_signal: float
    n_bath: float
    eta: float
    xi: float
    m_copies: int
    trials: int
    errors_type1: int
    errors_type2: int
    p_type1: float
    p_type1_ci: tuple
    p_type2: float
    p_type2_ci: tuple
    pr_err: float
    rate_type1_raw: float             # -log(P_I) / M
    rate_type2_raw: float
    rate_type1: float                 # Gaussian-tail-inverted rate
    rate_type1_err: float
    rate_type2: float
    rate_type2_err: float
    rate_type1_pred: float            # xi^2 eta^2 H / 2
    rate_type2_pred: float            # (1-xi)^2 eta^2 H / 2
    h: float
    p_type1_classical: float
    p_type2_classical: float
    pr_err_opt_classical: float
    seed: int

    CSV_HEADER = ("family,N_S,N_B,eta,xi,M,trials,errors_I,errors_II,"
                  "P_I,P_I_lo,P_I_hi,P_II,P_II_lo,P_II_hi,Pr_err,"
                  "rate_I_raw,rate_II_raw,rate_I,rate_I_err,rate_II,rate_II_err,"
                  "rate_I_pred,rate_II_pred,H,P_I_classical,P_II_classical,"
                  "Pr_err_opt_classical,seed")

    def to_csv_row(self) -> str:
        cells = [self.family, repr(self.n_signal), repr(self.n_bath),
                 repr(self.eta), repr(self.xi), str(self.m_copies),
                 str(self.trials), str(self.errors_type1), str(self.errors_type2),
                 repr(self.p_type1), repr(self.p_type1_ci[0]), repr(self.p_type1_ci[1]),
                 repr(self.p_type2), repr(self.p_type2_ci[0]), repr(self.p_type2_ci[1]),
                 repr(self.pr_err), repr(self.rate_type1_raw), repr(self.rate_type2_raw),
                 repr(self.rate_type1), repr(self.rate_type1_err),
                 repr(self.rate_type2), repr(self.rate_type2_err),
                 repr(self.rate_type1_pred), repr(self.rate_type2_pred), repr(self.h),
                 repr(self.p_type1_classical), repr(self.p_type2_classical),
                 repr(self.pr_err_opt_classical), str(self.seed)]
        return ",".join(cells)

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["p_type1_ci"] = list(self.p_type1_ci)
        d["p_type2_ci"] = list(self.p_type2_ci)
        return d


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054):
    """Wilson score interval; well behaved for probabilities near 0."""
    if n <= 0:
        raise ValueError("zero trials")
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def classical_error_closed(n_signal: float, n_bath: float, eta: float,
                           m_copies: int, xi: float):
    """Closed-form coherent-transmitter error probabilities.

    P_I,II = erfc(sqrt(eta_{I,II}^2 H_C M / 2)) / 2 with eta_I = xi*eta,
    eta_II = (1-xi)*eta, plus the globally optimal error probability
    exp(-eta^2 N_S (sqrt(N_B+1) - sqrt(N_B))^2 M).
    """
    if min(n_signal, n_bath, eta) < 0 or m_copies < 0 or not 0 < xi < 1:
        raise ValueError("invalid classical-error parameters")
    _, _, h_c = qfi_bounds(n_signal, n_bath)
    p1 = 0.5 * erfc(math.sqrt((xi * eta) ** 2 * h_c * m_copies / 2.0))
    p2 = 0.5 * erfc(math.sqrt(((1 - xi) * eta) ** 2 * h_c * m_copies / 2.0))
    pr_opt = math.exp(-eta ** 2 * n_signal
                      * (math.sqrt(n_bath + 1) - math.sqrt(n_bath)) ** 2 * m_copies)
    return float(p1), float(p2), pr_opt


def _chunk_uniforms(seed: int, stream: int, chunk: int, m: int) -> np.ndarray:
    """Counter-based uniforms for one trial chunk; order-independent."""
    bg = Philox(counter=[0, chunk, 0, 0], key=[seed & 0xFFFFFFFFFFFFFFFF, stream])
    return Generator(bg).random((SAMPLE_CHUNK, m))


def sample_means(values: np.ndarray, probabilities: np.ndarray, m: int,
                 trials: int, seed: int, stream: int) -> np.ndarray:
    """Trial means of m inverse-CDF draws from a finite outcome distribution.

    The CDF is normalized by its total mass (the truncation deficit is at
    the 1e-12 scale, far below Monte Carlo resolution).  Chunked so that
    extending the trial count preserves all earlier draws.
    """
    order = np.argsort(values)
    vals = values[order]
    cdf = np.cumsum(probabilities[order])
    cdf /= cdf[-1]
    out = np.empty(trials)
    for start in range(0, trials, SAMPLE_CHUNK):
        take = min(SAMPLE_CHUNK, trials - start)
        u = _chunk_uniforms(seed, stream, start // SAMPLE_CHUNK, m)
        idx = np.searchsorted(cdf, u[:take], side="right")
        np.clip(idx, 0, len(vals) - 1, out=idx)
        out[start:start + take] = vals[idx].mean(axis=1)
    return out


def _auto_cutoffs(cfg: ProtocolConfig):
    d_signal = cfg.d_signal
    if d_signal is None:
        n = cfg.n_signal
        d_signal = max(16, int(math.ceil(n + 10.0 * math.sqrt(n + 1.0) + 10)))
    dim_bath = cfg.dim_bath
    if dim_bath is None:
        # thermal tail below 1e-8
        ratio = cfg.n_bath / (1.0 + cfg.n_bath)
        dim_bath = 16 if cfg.n_bath == 0 else max(
            16, int(math.ceil(math.log(1e-8) / math.log(ratio))) + 2)
    return d_signal, dim_bath


@dataclass
class ProtocolDistributions:
    """The two outcome distributions of one config, reusable across M and xi."""

    state: SchmidtState
    h: float
    dist_absent: object
    dist_present: object


def prepare_distributions(cfg: ProtocolConfig) -> ProtocolDistributions:
    """Build the transmitter, the optimal observable, and the outcome
    distributions under both hypotheses.  This is the expensive part; the
    eigendecomposition runs once per configuration."""
    d_signal, dim_bath = _auto_cutoffs(cfg)
    state = state_from_family(cfg.family, cfg.n_signal, d_signal, phase=cfg.phase)
    rep = qfi_schmidt(state, cfg.n_bath)
    obs = sld_observable(state, cfg.n_bath, dim_bath)
    rho0 = received_state(state, cfg.n_bath, 0.0, dim_bath)
    rho1 = received_state(state, cfg.n_bath, cfg.eta, dim_bath)
    d0 = outcome_distribution(rho0, obs, eta=0.0)
    d1 = outcome_distribution(rho1, obs, eta=cfg.eta)
    return ProtocolDistributions(state, rep.h, d0, d1)


def _gauss_rate_point(p: float, p_lo: float, p_hi: float, m: int):
    """Gaussian-tail-inverted rate erfcinv(2P)^2 / M with its CI half-width."""
    if not 0.0 < p < 0.5:
        return math.nan, math.nan
    y = float(erfcinv(2.0 * p)) ** 2
    ys = [float(erfcinv(2.0 * min(max(q, 1e-300), 1 - 1e-12))) ** 2
          for q in (p_hi, p_lo)]
    err = 0.5 * abs(ys[1] - ys[0])
    return y / m, err / m


def xi_sweep(cfg: ProtocolConfig, xi_grid,
             dists: ProtocolDistributions | None = None) -> list:
    """Run the threshold test over a grid of xi on one shared sample set.

    Both hypothesis branches are sampled once per trial budget and every
    threshold is applied to the same estimates, which makes the
    monotonicity of P_I and P_II in xi exact per sweep.  Trials double
    adaptively (up to ``trials_cap_factor`` times the configured count)
    until every threshold has at least 50 events in both error classes or
    the cap is reached.  Deterministic given the seed.
    """
    if dists is None:
        dists = prepare_distributions(cfg)
    xis = [float(x) for x in xi_grid]
    trials = cfg.trials
    cap = cfg.trials * cfg.trials_cap_factor
    while True:
        means0 = sample_means(dists.dist_absent.values, dists.dist_absent.probabilities,
                              cfg.m_copies, trials, cfg.seed, stream=2 * cfg.m_copies)
        means1 = sample_means(dists.dist_present.values, dists.dist_present.probabilities,
                              cfg.m_copies, trials, cfg.seed, stream=2 * cfg.m_copies + 1)
        counts = [(int(np.count_nonzero(means0 > xi * cfg.eta)),
                   int(np.count_nonzero(means1 <= xi * cfg.eta))) for xi in xis]
        if all(min(k1, k2) >= MIN_ERROR_EVENTS for k1, k2 in counts) or trials >= cap:
            break
        trials = min(cap, trials * 2)

    reports = []
    for xi, (k1, k2) in zip(xis, counts):
        p1, p2 = k1 / trials, k2 / trials
        ci1 = wilson_interval(k1, trials)
        ci2 = wilson_interval(k2, trials)
        rate1, err1 = _gauss_rate_point(p1, *ci1, cfg.m_copies)
        rate2, err2 = _gauss_rate_point(p2, *ci2, cfg.m_copies)
        c1, c2, c_opt = classical_error_closed(cfg.n_signal, cfg.n_bath, cfg.eta,
                                               cfg.m_copies, xi)
        reports.append(ErrorReport(
            family=cfg.family,
            n_signal=cfg.n_signal,
            n_bath=cfg.n_bath,
            eta=cfg.eta,
            xi=xi,
            m_copies=cfg.m_copies,
            trials=trials,
            errors_type1=k1,
            errors_type2=k2,
            p_type1=p1,
            p_type1_ci=ci1,
            p_type2=p2,
            p_type2_ci=ci2,
            pr_err=cfg.prior_absent * p1 + cfg.prior_present * p2,
            rate_type1_raw=-math.log(p1) / cfg.m_copies if p1 > 0 else math.inf,
            rate_type2_raw=-math.log(p2) / cfg.m_copies if p2 > 0 else math.inf,
            rate_type1=rate1,
            rate_type1_err=err1,
            rate_type2=rate2,
            rate_type2_err=err2,
            rate_type1_pred=(xi * cfg.eta) ** 2 * dists.h / 2.0,
            rate_type2_pred=((1 - xi) * cfg.eta) ** 2 * dists.h / 2.0,
            h=dists.h,
            p_type1_classical=c1,
            p_type2_classical=c2,
            pr_err_opt_classical=c_opt,
            seed=cfg.seed,
        ))
    return reports


def run_protocol(cfg: ProtocolConfig,
                 dists: ProtocolDistributions | None = None) -> ErrorReport:
    """Monte Carlo estimate of both error probabilities at one (M, xi)."""
    return xi_sweep(cfg, [cfg.xi], dists)[0]


def exponent_fit(m_grid, p_estimates, weights=None):
    """Weighted linear fit of -log P against M through the origin.

    Exact when P decays purely exponentially; at desk-scale M the
    subexponential prefactor biases this estimate upward (see the module
    docstring).  Raises when any estimate is zero.
    """
    ms = np.asarray(m_grid, dtype=float)
    ps = np.asarray(p_estimates, dtype=float)
    if len(ms) < 3:
        raise ValueError("need at least three M values")
    if np.any(ps <= 0.0) or np.any(ps >= 1.0):
        raise UnresolvedStatisticsError(
            "error probability estimate of 0 or 1; increase trials")
    y = -np.log(ps)
    w = np.ones_like(ms) if weights is None else np.asarray(weights, dtype=float)
    rate = float(np.sum(w * ms * y) / np.sum(w * ms * ms))
    resid = y - rate * ms
    dof = max(1, len(ms) - 1)
    var = float(np.sum(w * resid ** 2) / dof / np.sum(w * ms * ms))
    return rate, math.sqrt(max(var, 0.0))


def gaussian_rate_fit(m_grid, p_estimates, p_errs=None):
    """Decay rate via the Gaussian tail inversion y = erfcinv(2P)^2 = rate*M.

    ``p_errs`` are one-sigma errors of the P estimates; they propagate
    through the inversion and weight the through-origin fit.
    """
    ms = np.asarray(m_grid, dtype=float)
    ps = np.asarray(p_estimates, dtype=float)
    if np.any(ps <= 0.0) or np.any(ps >= 0.5):
        raise UnresolvedStatisticsError(
            "estimates outside (0, 1/2); the tail inversion needs resolved errors")
    x = erfcinv(2.0 * ps)
    y = x ** 2
    if p_errs is None:
        sig = np.full_like(ms, np.median(y) * 0.01 + 1e-30)
    else:
        # dy/dP = -2 x sqrt(pi) e^{x^2}
        sig = np.abs(2.0 * x * math.sqrt(math.pi) * np.exp(x ** 2)
                     * np.asarray(p_errs, dtype=float)) + 1e-30
    w = 1.0 / sig ** 2
    denom = float(np.sum(w * ms * ms))
    rate = float(np.sum(w * ms * y) / denom)
    stderr = math.sqrt(1.0 / denom)
    return rate, stderr


def gain_summary(rate_quantum: float, err_quantum: float,
                 rate_classical: float, err_classical: float):
    """Exponent gain in dB, 10 log10(rate_q / rate_c), with propagated error."""
    if rate_quantum <= 0 or rate_classical <= 0:
        raise ValueError("rates must be positive")
    db = 10.0 * math.log10(rate_quantum / rate_classical)
    rel = math.sqrt((err_quantum / rate_quantum) ** 2
                    + (err_classical / rate_classical) ** 2)
    return db, 10.0 * rel / math.log(10.0)


def load_config(path: str) -> ProtocolConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ProtocolConfig.from_json_dict(json.load(fh))
