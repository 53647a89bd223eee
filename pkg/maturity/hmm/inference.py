"""
Log-space inference for the diagonal Gaussian HMM: emissions, forward-backward,
Viterbi and combined decoding.
"""
from typing import Tuple

import numpy as np
from scipy.special import logsumexp

from maturity.errors import DimensionMismatch, NumericUnderflow
from maturity.hmm.params import DecodedStates, HmmParams, ObservationSequence


LOG_2PI = np.log(2.0 * np.pi)


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def log_emissions(params: HmmParams, obs: np.ndarray) -> np.ndarray:
    """[T x n_states] log N(o_t; mu_k, diag(var_k))"""
    if obs.shape[1] != params.dim:
        raise DimensionMismatch(f"observations have {obs.shape[1]} dimensions, model expects {params.dim}", stage="hmm")
    diff = obs[:, None, :] - params.means[None, :, :]
    log_b = -0.5 * (
        np.sum(LOG_2PI + np.log(params.variances), axis=1)[None, :]
        + np.sum(diff ** 2 / params.variances[None, :, :], axis=2)
    )
    dead = ~np.isfinite(log_b).any(axis=1)
    if np.any(dead):
        t = int(np.flatnonzero(dead)[0])
        raise NumericUnderflow(f"observation {t} has zero density under every state")
    return log_b


def _forward(log_pi: np.ndarray, log_A: np.ndarray, log_b: np.ndarray) -> np.ndarray:
    T, n = log_b.shape
    log_alpha = np.empty((T, n))
    log_alpha[0] = log_pi + log_b[0]
    for t in range(1, T):
        log_alpha[t] = logsumexp(log_alpha[t - 1][:, None] + log_A, axis=0) + log_b[t]
    return log_alpha


def _backward(log_A: np.ndarray, log_b: np.ndarray) -> np.ndarray:
    T, n = log_b.shape
    log_beta = np.zeros((T, n))
    for t in range(T - 2, -1, -1):
        log_beta[t] = logsumexp(log_A + (log_b[t + 1] + log_beta[t + 1])[None, :], axis=1)
    return log_beta


def forward_backward_terms(params: HmmParams, obs: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
    """log emissions, log alpha, log beta and the sequence log-likelihood"""
    log_b = log_emissions(params, obs)
    log_A = _log(params.A)
    log_alpha = _forward(_log(params.pi), log_A, log_b)
    log_beta = _backward(log_A, log_b)
    log_likelihood = float(logsumexp(log_alpha[-1]))
    if not np.isfinite(log_likelihood):
        raise NumericUnderflow("sequence has zero probability under the model")
    return log_b, log_alpha, log_beta, log_likelihood


def log_forward_backward(params: HmmParams, seq: ObservationSequence) -> DecodedStates:
    """Smoothed state posteriors and log p(obs); states are the posterior argmax"""
    _, log_alpha, log_beta, log_likelihood = forward_backward_terms(params, seq.obs)
    log_gamma = log_alpha + log_beta
    log_gamma -= logsumexp(log_gamma, axis=1, keepdims=True)
    posteriors = np.exp(log_gamma)
    posteriors /= posteriors.sum(axis=1, keepdims=True)
    return DecodedStates(
        states=np.argmax(posteriors, axis=1),
        posteriors=posteriors,
        log_likelihood=log_likelihood,
    )


def viterbi(params: HmmParams, seq: ObservationSequence) -> Tuple[np.ndarray, float]:
    """Most probable state path and its joint log-probability; ties go to the lower state"""
    log_b = log_emissions(params, seq.obs)
    log_A = _log(params.A)
    T, n = log_b.shape

    delta = _log(params.pi) + log_b[0]
    backpointers = np.zeros((T, n), dtype=int)
    for t in range(1, T):
        scores = delta[:, None] + log_A
        # argmax returns the first maximum, i.e. the lowest predecessor index
        backpointers[t] = np.argmax(scores, axis=0)
        delta = scores[backpointers[t], np.arange(n)] + log_b[t]

    path = np.zeros(T, dtype=int)
    path[-1] = int(np.argmax(delta))
    log_prob = float(delta[path[-1]])
    for t in range(T - 1, 0, -1):
        path[t - 1] = backpointers[t, path[t]]

    if not np.isfinite(log_prob):
        raise NumericUnderflow("no state path has positive probability")
    return path, log_prob


def decode(params: HmmParams, seq: ObservationSequence, decoder: str = "viterbi") -> DecodedStates:
    """Posteriors from forward-backward with states from Viterbi (or posterior argmax for 'map')"""
    decoded = log_forward_backward(params, seq)
    if decoder == "map":
        return decoded
    path, _ = viterbi(params, seq)
    return DecodedStates(states=path, posteriors=decoded.posteriors, log_likelihood=decoded.log_likelihood)


def score(params: HmmParams, sequences) -> float:
    """Total log-likelihood over a list of sequences"""
    return float(sum(forward_backward_terms(params, seq.obs)[3] for seq in sequences))
