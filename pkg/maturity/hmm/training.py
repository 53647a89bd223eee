"""
Baum-Welch fitting of the diagonal Gaussian HMM over one or many observation
sequences, with quantile initialization and seeded restarts.
"""
from pydantic import BaseModel, ConfigDict
from typing import List, Optional
import logging

import numpy as np
from scipy.special import logsumexp

from maturity.errors import NonFinite, NumericError, TooFewRows
from maturity.hmm.inference import forward_backward_terms, score
from maturity.hmm.params import DEFAULT_VARIANCE_FLOOR, HmmParams, ObservationSequence, stack_sequences
from maturity.utils.seeding import make_rng


logger = logging.getLogger(__name__)

EMPTY_STATE_MASS = 1e-12
# Round-off allowed before a drop in log-likelihood is reported
LIKELIHOOD_SLACK = 1e-8


class BaumWelchResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: HmmParams
    # Total log-likelihood before each M-step, then the final model's score
    log_likelihoods: List[float]
    n_iter: int
    converged: bool


class HmmFit(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    params: HmmParams
    log_likelihoods: List[float]
    n_iter: int
    converged: bool
    restart: int
    seed: int
    stacked: bool

    @property
    def log_likelihood(self) -> float:
        return self.log_likelihoods[-1]


def _pooled(seqs: List[ObservationSequence]) -> np.ndarray:
    return np.vstack([seq.obs for seq in seqs])


def _check_sequences(seqs: List[ObservationSequence], n_states: int) -> None:
    if not seqs:
        raise TooFewRows("no observation sequences to fit", stage="hmm")
    total = sum(len(seq) for seq in seqs)
    if total < n_states:
        raise TooFewRows(f"{total} observations cannot support {n_states} states", stage="hmm")


def initial_params(
    seqs: List[ObservationSequence],
    n_states: int,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
) -> HmmParams:
    """
    Quantile-spread means (state k at the (2k+1)/(2n) quantile of each dimension),
    uniform pi and A, pooled data variance for every state.
    """
    _check_sequences(seqs, n_states)
    pooled = _pooled(seqs)
    quantiles = [(2 * k + 1) / (2 * n_states) for k in range(n_states)]
    means = np.quantile(pooled, quantiles, axis=0)
    variances = np.tile(np.maximum(pooled.var(axis=0), variance_floor), (n_states, 1))
    return HmmParams(
        pi=np.full(n_states, 1.0 / n_states),
        A=np.full((n_states, n_states), 1.0 / n_states),
        means=means,
        variances=variances,
    )


def jittered_params(base: HmmParams, seqs: List[ObservationSequence], rng: np.random.Generator) -> HmmParams:
    """Restart start point: means shifted by 0.1 data std, A mixed with a Dirichlet draw"""
    pooled = _pooled(seqs)
    n = base.n_states
    std = np.sqrt(pooled.var(axis=0))
    means = base.means + rng.normal(0.0, 1.0, size=base.means.shape) * (0.1 * std)[None, :]
    A = 0.5 * np.full((n, n), 1.0 / n) + 0.5 * rng.dirichlet(np.ones(n), size=n)
    A /= A.sum(axis=1, keepdims=True)
    return HmmParams(pi=base.pi.copy(), A=A, means=means, variances=base.variances.copy())


def _m_step(
    params: HmmParams,
    pi_acc: np.ndarray,
    xi_acc: np.ndarray,
    gamma_sum: np.ndarray,
    obs_sum: np.ndarray,
    obs_sq: np.ndarray,
    variance_floor: float,
) -> HmmParams:
    pi = pi_acc / pi_acc.sum()

    A = params.A.copy()
    row_mass = xi_acc.sum(axis=1)
    for k in np.flatnonzero(row_mass > 0):
        A[k] = xi_acc[k] / row_mass[k]

    means = params.means.copy()
    variances = params.variances.copy()
    for k in range(params.n_states):
        if gamma_sum[k] < EMPTY_STATE_MASS:
            logger.warning(f"EmptyState: state {k} received no responsibility; keeping its previous emission")
            variances[k] = np.maximum(variances[k], variance_floor)
            continue
        means[k] = obs_sum[k] / gamma_sum[k]
        variances[k] = np.maximum(obs_sq[k] / gamma_sum[k] - means[k] ** 2, variance_floor)

    for name, value in (("pi", pi), ("A", A), ("means", means), ("variances", variances)):
        if not np.all(np.isfinite(value)):
            raise NonFinite(f"M-step produced non-finite {name}: {value.tolist()}")

    return HmmParams(pi=pi, A=A, means=means, variances=variances)


def baum_welch(
    init: HmmParams,
    seqs: List[ObservationSequence],
    tol: float = 1e-6,
    max_iter: int = 500,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
) -> BaumWelchResult:
    """
    EM over independent sequences, each with its own start.
    Stops once the log-likelihood gain drops below `tol` or after `max_iter` M-steps.
    """
    _check_sequences(seqs, init.n_states)
    params = init
    n = init.n_states
    history: List[float] = []
    converged = False
    iteration = 0

    while iteration < max_iter:
        pi_acc = np.zeros(n)
        xi_acc = np.zeros((n, n))
        gamma_sum = np.zeros(n)
        obs_sum = np.zeros((n, params.dim))
        obs_sq = np.zeros((n, params.dim))
        with np.errstate(divide="ignore"):
            log_A = np.log(params.A)

        total = 0.0
        for seq in seqs:
            log_b, log_alpha, log_beta, log_likelihood = forward_backward_terms(params, seq.obs)
            log_gamma = log_alpha + log_beta
            gamma = np.exp(log_gamma - logsumexp(log_gamma, axis=1, keepdims=True))

            pi_acc += gamma[0]
            if len(seq) > 1:
                log_xi = (
                    log_alpha[:-1, :, None]
                    + log_A[None, :, :]
                    + (log_b[1:] + log_beta[1:])[:, None, :]
                    - log_likelihood
                )
                xi_acc += np.exp(log_xi).sum(axis=0)
            gamma_sum += gamma.sum(axis=0)
            obs_sum += gamma.T @ seq.obs
            obs_sq += gamma.T @ (seq.obs ** 2)
            total += log_likelihood

        if not np.isfinite(total):
            raise NonFinite(f"log-likelihood became {total} at iteration {iteration}")
        history.append(total)

        if len(history) > 1 and history[-1] < history[-2] - LIKELIHOOD_SLACK:
            logger.warning(
                f"Baum-Welch log-likelihood decreased at iteration {iteration}: "
                f"{history[-2]:.6f} -> {history[-1]:.6f}"
            )
        if len(history) > 1 and history[-1] - history[-2] < tol:
            converged = True
            break

        params = _m_step(params, pi_acc, xi_acc, gamma_sum, obs_sum, obs_sq, variance_floor)
        iteration += 1

    if not converged:
        history.append(score(params, seqs))

    logger.debug(f"Baum-Welch stopped after {iteration} iterations at log-likelihood {history[-1]:.6f}")
    return BaumWelchResult(params=params, log_likelihoods=history, n_iter=iteration, converged=converged)


def fit_hmm(
    seqs: List[ObservationSequence],
    n_states: int = 3,
    seed: int = 42,
    tol: float = 1e-6,
    max_iter: int = 500,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    n_restarts: int = 5,
    stacked: bool = False,
) -> HmmFit:
    """
    Best of `n_restarts` Baum-Welch runs by final log-likelihood (lowest restart on ties).
    Restart 0 starts from the unjittered quantile initialization.
    """
    train = [stack_sequences(seqs)] if stacked else list(seqs)
    base = initial_params(train, n_states, variance_floor)

    best: Optional[HmmFit] = None
    last_error: Optional[NumericError] = None
    for restart in range(max(1, n_restarts)):
        init = base if restart == 0 else jittered_params(base, train, make_rng(seed, restart))
        try:
            result = baum_welch(init, train, tol=tol, max_iter=max_iter, variance_floor=variance_floor)
        except NumericError as e:
            logger.warning(f"Restart {restart} failed: {e}")
            last_error = e
            continue

        final = result.log_likelihoods[-1]
        logger.debug(f"Restart {restart}: log-likelihood {final:.6f} after {result.n_iter} iterations")
        if best is None or final > best.log_likelihood:
            best = HmmFit(
                params=result.params,
                log_likelihoods=result.log_likelihoods,
                n_iter=result.n_iter,
                converged=result.converged,
                restart=restart,
                seed=seed,
                stacked=stacked,
            )

    if best is None:
        raise last_error
    if not best.converged:
        logger.warning(f"Baum-Welch hit max_iter={max_iter} without converging")
    logger.info(f"Fitted {n_states}-state HMM: log-likelihood {best.log_likelihood:.4f} (restart {best.restart})")
    return best
