"""Rank-one recovery from a relaxed PSD solution."""
from __future__ import annotations

import numpy as np


class RandomizationFailed(RuntimeError):
    pass


def principal(X):
    w, U = np.linalg.eigh(X)
    return np.sqrt(max(w[-1], 0.0)) * U[:, -1], w


def is_rank_one(X, tol=1e-6):
    w = np.linalg.eigvalsh(X)
    if w[-1] <= 0:
        return True  # the zero matrix is trivially rank one
    return max(w[-2], 0.0) / w[-1] <= tol if len(w) > 1 else True


def _gaussian(X, n, rng):
    w, U = np.linalg.eigh(X)
    root = U * np.sqrt(np.clip(w, 0.0, None))
    z = (rng.standard_normal((n, X.shape[0])) + 1j * rng.standard_normal((n, X.shape[0]))) / np.sqrt(2)
    return z @ root.T


def recover_rank_one(X, feasibility_check, n_trials=200, seed=0, objective=None, blocks=None,
                     rank_one_tol=1e-6, repair=None, batch=None, n_repair=20):
    """Pick a vector x whose outer product approximates the relaxed solution X.

    ``blocks`` splits x into independent sub-vectors (e.g. the two beams of a
    block-diagonal relaxation); each block is tested for rank one and each
    random draw is rescaled block-wise to the block's trace.  If every block
    is rank one the scaled principal eigenvectors are returned directly.
    Otherwise ``n_trials`` draws from CN(0, X) compete, together with the
    principal-eigenvector candidate, on ``objective`` (higher is better)
    among those passing ``feasibility_check``.  ``repair`` may map an
    infeasible candidate to a feasible one, or return None.

    ``batch(C) -> (feasible_mask, values)`` scores all candidate rows at once
    and replaces the per-candidate calls; when no candidate is feasible the
    ``n_repair`` best are passed through ``repair``.
    """
    X = np.asarray(X, dtype=complex)
    X = 0.5 * (X + X.conj().T)
    n = X.shape[0]
    blocks = [n] if blocks is None else list(blocks)
    cuts = np.cumsum([0] + blocks)
    parts = [X[a:b, a:b] for a, b in zip(cuts[:-1], cuts[1:])]
    objective = objective or (lambda x: -np.linalg.norm(x))

    def admit(x):
        if feasibility_check(x):
            return x
        if repair is not None:
            y = repair(x)
            if y is not None and feasibility_check(y):
                return y
        return None

    lead = np.concatenate([principal(P)[0] for P in parts]) if n else np.zeros(0, complex)
    if all(is_rank_one(P, rank_one_tol) for P in parts):
        x = admit(lead)
        if x is not None:
            return x

    rng = np.random.default_rng(seed)
    draws = [_gaussian(P, n_trials, rng) for P in parts]
    for P, D in zip(parts, draws):
        norms = np.linalg.norm(D, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        D *= np.sqrt(max(np.trace(P).real, 0.0)) / norms
    cands = [lead] + [np.concatenate([D[i] for D in draws]) for i in range(n_trials)]

    if batch is not None:
        C = np.array(cands)
        ok, vals = batch(C)
        vals = np.asarray(vals, dtype=float)
        if np.any(ok):
            return C[int(np.argmax(np.where(ok, vals, -np.inf)))]
        if repair is None:
            raise RandomizationFailed(f"none of {len(cands)} candidates passed the feasibility check")
        cands = [C[i] for i in np.argsort(-vals)[:n_repair]]

    best, best_val = None, -np.inf
    for c in cands:
        x = admit(c)
        if x is None:
            continue
        val = objective(x)
        if val > best_val:
            best, best_val = x, val
    if best is None:
        raise RandomizationFailed(f"none of {len(cands)} candidates passed the feasibility check")
    return best
