"""Pure numpy implementation of the hot kernels.

Mirrors ``_ckernels.pyx`` function for function. Every score is computed
row-independently (elementwise products reduced along the last axis), so a
document's score does not depend on which other documents are scored with it.
The exact fixed-point behaviour of the refinement relies on that.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import NearZeroQueryNorm

COSINE, MAXSIM = 0, 1
KL_CONSENSUS, JENSEN_SHANNON, KL_TARGET = 0, 1, 2
NORM_FLOOR = 1e-12
_LOG_HALF = math.log(0.5)
_CHUNK_ELEMS = 1 << 21


def _row_dots(tokens: np.ndarray, q: np.ndarray) -> np.ndarray:
    return (tokens * q).sum(axis=1)


def _maxsim_parts(Z: np.ndarray, tokens: np.ndarray, offsets: np.ndarray):
    """Per-document, per-query-vector max dot product and the global token row attaining it."""
    r, d = Z.shape
    n_tok = tokens.shape[0]
    sims = np.empty((n_tok, r))
    step = max(1, _CHUNK_ELEMS // max(1, r * d))
    for lo in range(0, n_tok, step):
        hi = min(n_tok, lo + step)
        sims[lo:hi] = (tokens[lo:hi, None, :] * Z[None, :, :]).sum(axis=-1)
    n = len(offsets) - 1
    maxes = np.empty((n, r))
    arg = np.empty((n, r), dtype=np.int64)
    # lowest-index token wins ties: argmax returns the first maximum
    for i in range(n):
        lo, hi = offsets[i], offsets[i + 1]
        block = sims[lo:hi]
        j = np.argmax(block, axis=0)
        arg[i] = j + lo
        maxes[i] = block[j, np.arange(r)]
    return maxes, arg


def dot_scores(kind: int, Z: np.ndarray, tokens: np.ndarray, offsets: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Raw similarity of query ``Z`` against every packed document."""
    if kind == COSINE:
        z = Z[0]
        nz = math.sqrt(float((z * z).sum()))
        return _row_dots(tokens, z) / (nz * norms)
    maxes, _ = _maxsim_parts(Z, tokens, offsets)
    return maxes.sum(axis=1)


def log_softmax(scores: np.ndarray) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    shifted = s - s.max()
    return shifted - math.log(float(np.exp(shifted).sum()))


def _log_mean(lp1: np.ndarray, lp2: np.ndarray) -> np.ndarray:
    """log(0.5 * (exp(lp1) + exp(lp2))), returning lp1 itself where the inputs agree exactly."""
    la = _LOG_HALF + np.logaddexp(lp1, lp2)
    return np.where(lp1 == lp2, lp1, la)


def divergence_terms(lp1: np.ndarray, lp2: np.ndarray, variant: int):
    """Loss value and dL/d(scores) for the given primary/guidance log-probabilities."""
    p1 = np.exp(lp1)
    p2 = np.exp(lp2)
    if variant == KL_TARGET:
        loss = float((p2 * (lp2 - lp1)).sum())
        w = p1 - p2
    else:
        la = _log_mean(lp1, lp2)
        if variant == KL_CONSENSUS:
            a = 0.5 * (p1 + p2)
            loss = float((a * (la - lp1)).sum())
            w = 0.5 * p1 * (la - lp1) + 0.5 * (p1 - p2)
        elif variant == JENSEN_SHANNON:
            loss = float(0.5 * (p2 * (lp2 - la)).sum() + 0.5 * (p1 * (lp1 - la)).sum())
            w = 0.5 * p1 * (lp1 - la)
        else:
            raise ValueError(f"unknown loss variant {variant}")
    grad_s = w - p1 * w.sum()
    return loss, grad_s


def _score_and_backprop(kind, Z, tokens, offsets, norms, lp2, variant):
    if kind == COSINE:
        z = Z[0]
        nz = math.sqrt(float((z * z).sum()))
        if nz < NORM_FLOOR:
            raise NearZeroQueryNorm(f"query norm {nz:.3e} below {NORM_FLOOR}")
        dots = _row_dots(tokens, z)
        s = dots / (nz * norms)
        loss, gs = divergence_terms(log_softmax(s), lp2, variant)
        coef = gs / (nz * norms)
        grad = (coef[:, None] * tokens).sum(axis=0) - (gs * s).sum() / (nz * nz) * z
        return loss, grad[None, :]
    maxes, arg = _maxsim_parts(Z, tokens, offsets)
    s = maxes.sum(axis=1)
    loss, gs = divergence_terms(log_softmax(s), lp2, variant)
    r = Z.shape[0]
    grad = np.zeros_like(Z)
    for k in range(r):
        grad[k] = (gs[:, None] * tokens[arg[:, k]]).sum(axis=0)
    return loss, grad


def loss_grad(kind: int, Z, tokens, offsets, norms, lp2, variant: int):
    """Loss and its gradient with respect to every query vector."""
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    return _score_and_backprop(kind, Z, tokens, offsets, norms, np.asarray(lp2, dtype=np.float64), variant)


def refine(kind: int, Z, tokens, offsets, norms, lp2, variant: int, iterations: int,
           lr: float, beta1: float, beta2: float, eps: float):
    """Run ``iterations`` Adam steps; returns the final query and the loss seen at each step."""
    z = np.array(Z, dtype=np.float64, copy=True)
    lp2 = np.asarray(lp2, dtype=np.float64)
    m = np.zeros_like(z)
    v = np.zeros_like(z)
    losses = np.empty(iterations)
    for t in range(1, iterations + 1):
        loss, g = _score_and_backprop(kind, z, tokens, offsets, norms, lp2, variant)
        losses[t - 1] = loss
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        z = z - lr * mhat / (np.sqrt(vhat) + eps)
    return z, losses
