"""Interference alignment: feasibility, minimum-leakage design, ZF combining.

Arrays follow one layout throughout.  Channels are ``H[..., k, i, :, :]``
(``Nr x Nt``, tx ``i`` to rx ``k``), link weights are ``w[..., k, i]``,
precoders ``V[..., i, :, :]`` are ``Nt x d`` and combiners ``U[..., k, :, :]``
are ``Nr x d``.  Leading ``...`` axes are independent problems solved in
one vectorized pass.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, crandn
from .errors import AlignmentError, InfeasibleError

__all__ = [
    "AlignmentSolution",
    "feasible",
    "haar_semi_unitary",
    "min_leakage_solve",
    "min_leakage_solve_batch",
    "leakage",
    "zf_combiner",
    "min_interference_combiners",
    "instantaneous_rates",
    "write_leakage_trace",
]

DEFAULT_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-12
DEFAULT_MAX_ITER = 5000
DEFAULT_NEWTON_EVERY = 1


def feasible(K: int, N: int, d: int) -> bool:
    """Symmetric ``N x N`` IA feasibility, ``2N >= d(K + 1)``."""
    if min(K, N, d) < 1:
        raise ValueError("K, N and d must be positive integers")
    return 2 * N >= d * (K + 1)


@dataclass
class AlignmentSolution:
    precoders: np.ndarray
    combiners: np.ndarray
    leakage: float
    iterations_used: int
    converged: bool
    trace: list[float] = field(default_factory=list, repr=False)

    @property
    def K(self) -> int:
        return self.precoders.shape[0]

    @property
    def d(self) -> int:
        return self.precoders.shape[-1]


def _herm(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def _fix_phase(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real and positive."""
    idx = np.argmax(np.abs(vecs), axis=-2)[..., None, :]
    pivot = np.take_along_axis(vecs, idx, axis=-2)
    phase = pivot / np.abs(pivot)
    return vecs * np.conj(phase)


def _smallest_eigvecs(q: np.ndarray, d: int) -> np.ndarray:
    # eigh returns ascending eigenvalues
    q = 0.5 * (q + _herm(q))
    _, vecs = np.linalg.eigh(q)
    return _fix_phase(vecs[..., :d])


def haar_semi_unitary(rng: np.random.Generator, shape, n: int, d: int) -> np.ndarray:
    """Haar-distributed ``n x d`` matrices with orthonormal columns."""
    z = crandn(rng, tuple(shape) + (n, d))
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (diag / np.abs(diag))[..., None, :]


def _offdiag_mask(K: int) -> np.ndarray:
    return 1.0 - np.eye(K)


def _forward_cov(H, w, V, d):
    # Q[k] = sum_{i != k} w[k,i]/d H[k,i] V[i] V[i]^* H[k,i]^*
    K = H.shape[-4]
    hv = H @ V[..., None, :, :, :]
    ww = (w * _offdiag_mask(K))[..., None, None] / d
    return np.sum(ww * (hv @ _herm(hv)), axis=-3)


def _reverse_cov(H, w, U, d):
    # Q[i] = sum_{k != i} w[k,i]/d H[k,i]^* U[k] U[k]^* H[k,i]
    K = H.shape[-4]
    hu = _herm(H) @ U[..., :, None, :, :]
    ww = (w * _offdiag_mask(K))[..., None, None] / d
    return np.sum(ww * (hu @ _herm(hu)), axis=-4)


def _leakage(H, w, U, V, d) -> np.ndarray:
    K = H.shape[-4]
    a = _herm(U)[..., :, None, :, :] @ H @ V[..., None, :, :, :]
    power = np.sum(np.abs(a) ** 2, axis=(-2, -1))
    return np.sum(w * _offdiag_mask(K) * power, axis=(-2, -1)) / d


def _channels(channels) -> np.ndarray:
    return channels.matrices if isinstance(channels, ChannelSet) else np.asarray(channels)


def _weights(powers, shape) -> np.ndarray:
    if powers is None:
        return np.ones(shape)
    return np.broadcast_to(np.asarray(powers, dtype=float), shape)


def _complement(X: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the columns of ``X``."""
    n, d = X.shape[-2:]
    eye = np.broadcast_to(np.eye(n, dtype=complex), X.shape[:-2] + (n, n))
    q, _ = np.linalg.qr(np.concatenate([X, eye], axis=-1))
    return q[..., :, d:n]


def _gauss_newton(H, w, U, V, d, leak_now, damping=(0.0, 1e-3, 1e-2, 1e-1, 1.0)):
    """Damped Gauss-Newton move on the weighted alignment residuals.

    The residuals ``sqrt(w/d) U_k^* H_ki V_i`` (``i != k``) are linearized in
    the Grassmann charts ``V_i + V_i_perp X_i`` and ``U_k + U_k_perp Z_k^*``;
    their squared norm is the leakage.  One Levenberg-Marquardt step is
    solved per damping level (relative to the mean curvature) and, per
    problem, the candidate with the lowest leakage not above ``leak_now`` is
    kept, followed by an exact combiner update.  Returns ``(U, V, mid, new)``
    where ``mid`` is the leakage right after the joint move; problems without
    an acceptable candidate get ``inf``.
    """
    B, K, _, Nr, Nt = H.shape
    nx, nz = (Nt - d) * d, (Nr - d) * d
    Vp, Up = _complement(V), _complement(U)
    eye = np.eye(d)
    pairs = [(k, i) for k in range(K) for i in range(K) if k != i]
    J = np.zeros((B, len(pairs) * d * d, K * (nx + nz)), dtype=complex)
    r = np.zeros((B, len(pairs) * d * d), dtype=complex)
    for p, (k, i) in enumerate(pairs):
        scale = np.sqrt(w[:, k, i] / d)[:, None, None]
        uh = _herm(U[:, k]) @ H[:, k, i]
        a = scale * (uh @ Vp[:, i])
        b = scale * (_herm(Up[:, k]) @ H[:, k, i] @ V[:, i])
        rows = slice(p * d * d, (p + 1) * d * d)
        J[:, rows, i * nx:(i + 1) * nx] = np.einsum("xaj,cC->xacjC", a, eye).reshape(B, d * d, nx)
        cz = K * nx + k * nz
        J[:, rows, cz:cz + nz] = np.einsum("aA,xjc->xacAj", eye, b).reshape(B, d * d, nz)
        r[:, rows] = (scale * (uh @ V[:, i])).reshape(B, d * d)
    Jh = _herm(J)
    normal = Jh @ J
    grad = -(Jh @ r[..., None])
    n = normal.shape[-1]
    level = np.real(np.trace(normal, axis1=-2, axis2=-1)) / n
    tiny = 1e-14 * level

    best_mid = np.full(B, np.inf)
    best_x = np.zeros((B, K, Nt - d, d), dtype=complex)
    best_z = np.zeros((B, K, d, Nr - d), dtype=complex)
    for lam in damping:
        shift = (lam * level + tiny)[:, None, None] * np.eye(n)
        step = np.linalg.solve(normal + shift, grad)[..., 0]
        X = step[:, : K * nx].reshape(B, K, Nt - d, d)
        Z = step[:, K * nx:].reshape(B, K, d, Nr - d)
        vt = np.linalg.qr(V + Vp @ X)[0]
        ut = np.linalg.qr(U + Up @ _herm(Z))[0]
        mid = _leakage(H, w, ut, vt, d)
        better = (mid <= leak_now) & (mid < best_mid)
        best_mid = np.where(better, mid, best_mid)
        best_x[better], best_z[better] = X[better], Z[better]

    best_u, best_v = U.copy(), V.copy()
    best_new = np.full(B, np.inf)
    idx = np.flatnonzero(np.isfinite(best_mid))
    if idx.size:
        vv = _fix_phase(np.linalg.qr(V[idx] + Vp[idx] @ best_x[idx])[0])
        uu = np.linalg.qr(U[idx] + Up[idx] @ _herm(best_z[idx]))[0]
        best_mid[idx] = _leakage(H[idx], w[idx], uu, vv, d)
        uu = _smallest_eigvecs(_forward_cov(H[idx], w[idx], vv, d), d)
        best_v[idx], best_u[idx] = vv, uu
        best_new[idx] = _leakage(H[idx], w[idx], uu, vv, d)
    return best_u, best_v, best_mid, best_new


def min_leakage_solve_batch(
    channels,
    d: int,
    powers=None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    rng_seed=None,
    init=None,
    record_trace: bool = False,
    newton_every: int = DEFAULT_NEWTON_EVERY,
):
    """Vectorized minimum-leakage alignment over the leading batch axes.

    Returns ``(V, U, leakage, iterations, converged, traces)``; ``traces`` is
    ``None`` unless ``record_trace``.  Problems that meet the stopping rule are
    frozen while the rest keep iterating.

    Every ``newton_every`` iterations a Gauss-Newton candidate is computed
    alongside the plain alternating update and replaces it only when it ends
    lower without any intermediate increase; ``newton_every=0`` gives the
    pure alternating algorithm.
    """
    H = _channels(channels)
    *batch, K, K2, Nr, Nt = H.shape
    if K != K2:
        raise ValueError("channel array must be (..., K, K, Nr, Nt)")
    if d > min(Nr, Nt):
        raise InfeasibleError(f"d={d} exceeds min(Nr, Nt)={min(Nr, Nt)}")
    if Nr == Nt and K > 1 and not feasible(K, Nr, d):
        raise InfeasibleError(f"IA infeasible: 2N={2 * Nr} < d(K+1)={d * (K + 1)}")
    w = _weights(powers, tuple(batch) + (K, K))
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    use_newton = newton_every > 0 and K > 1 and (Nr > d or Nt > d)

    Hf = H.reshape((-1, K, K, Nr, Nt))
    wf = w.reshape((-1, K, K))
    B = Hf.shape[0]
    if init is None:
        V = haar_semi_unitary(rng, (B, K), Nt, d)
    else:
        V = np.array(np.broadcast_to(init, tuple(batch) + (K, Nt, d))).reshape((B, K, Nt, d))
    U = _smallest_eigvecs(_forward_cov(Hf, wf, V, d), d)
    leak = _leakage(Hf, wf, U, V, d)
    traces = [[float(x)] for x in leak] if record_trace else None
    iters = np.zeros(B, dtype=int)
    done = leak <= abs_tol
    active = np.flatnonzero(~done)

    for it in range(max_iter):
        if active.size == 0:
            break
        h, ww, u0 = Hf[active], wf[active], U[active]
        prev = leak[active]
        v = _smallest_eigvecs(_reverse_cov(h, ww, u0, d), d)
        mid = _leakage(h, ww, u0, v, d)
        u = _smallest_eigvecs(_forward_cov(h, ww, v, d), d)
        new = _leakage(h, ww, u, v, d)
        if use_newton and (it + 1) % newton_every == 0:
            ug, vg, mid_g, new_g = _gauss_newton(h, ww, u0, V[active], d, prev)
            take = new_g < new
            sel = take[:, None, None, None]
            u, v = np.where(sel, ug, u), np.where(sel, vg, v)
            mid, new = np.where(take, mid_g, mid), np.where(take, new_g, new)
        V[active], U[active], leak[active] = v, u, new
        iters[active] += 1
        if record_trace:
            for j, b in enumerate(active):
                traces[b].extend((float(mid[j]), float(new[j])))
        stop = (new <= abs_tol) | (prev - new <= tol * prev)
        done[active[stop]] = True
        active = active[~stop]

    shape = tuple(batch)
    return (
        V.reshape(shape + (K, Nt, d)),
        U.reshape(shape + (K, Nr, d)),
        leak.reshape(shape),
        iters.reshape(shape),
        done.reshape(shape),
        traces,
    )


def min_leakage_solve(
    channels,
    d: int,
    powers=None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    rng_seed=None,
    newton_every: int = DEFAULT_NEWTON_EVERY,
) -> AlignmentSolution:
    """Alternating minimization of the total interference leakage.

    Each iteration updates the precoders on the reciprocal network (the
    combiners act as reverse precoders) and then the combiners, each side set
    to the ``d`` least-dominant eigenvectors of its interference covariance.
    Both half-steps minimize the same objective exactly, so the recorded
    leakage never increases.  Near the feasibility boundary plain alternation
    converges slowly; a Gauss-Newton candidate on the alignment residuals is
    tried periodically and kept only if it does better than the plain step.

    Parameters
    ----------
    channels : ChannelSet or ndarray, shape (K, K, Nr, Nt)
    d : int
        Streams per user.
    powers : ndarray, shape (K, K), optional
        Per-link received power weights ``P_r[k, i]``; unit weights if omitted.
    max_iter, tol, abs_tol
        Stop once the relative leakage decrease falls below ``tol`` or the
        leakage itself is at most ``abs_tol``.
    rng_seed
        Seed for the Haar-random initial precoders.
    newton_every : int
        Period of the safeguarded Gauss-Newton candidate step; 0 disables it.

    Raises
    ------
    InfeasibleError
        Before iterating, if ``2N < d(K + 1)`` on a square system.
    """
    H = _channels(channels)
    if H.ndim != 4:
        raise ValueError("expected a single (K, K, Nr, Nt) channel set")
    V, U, leak, iters, done, traces = min_leakage_solve_batch(
        H, d, powers, max_iter, tol, abs_tol, rng_seed, record_trace=True,
        newton_every=newton_every,
    )
    return AlignmentSolution(V, U, float(leak), int(iters), bool(done), traces[0])


def leakage(solution, channels, powers=None) -> float:
    """Total interference power ``sum_k tr(U_k^* Q_k U_k)`` left after combining."""
    H = _channels(channels)
    w = _weights(powers, H.shape[:-2])
    if isinstance(solution, AlignmentSolution):
        V, U = solution.precoders, solution.combiners
    else:
        V, U = solution
    return float(_leakage(H[None], w[None], U[None], V[None], V.shape[-1])[0])


def zf_combiner(
    precoded_estimates,
    k: int,
    d: int | None = None,
    weights=None,
    strict: bool = True,
    rank_tol: float = 1e-6,
) -> np.ndarray:
    """Receive filter nulling the estimated interference at receiver ``k``.

    Parameters
    ----------
    precoded_estimates : ndarray, shape (K, Nr, d)
        ``A_hat[k, i]`` for every transmitter ``i``.
    k : int
        Index of the desired transmitter within ``precoded_estimates``.
    weights : ndarray, shape (K,), optional
        Link powers; only used by the non-strict fallback.
    strict : bool
        If the interference spans more than ``Nr - d`` dimensions, raise
        (``True``) or return the ``d`` directions of least weighted
        interference power (``False``).
    rank_tol : float
        Singular values below ``rank_tol`` times the largest count as zero.

    Returns
    -------
    ndarray, shape (Nr, d)
        Orthonormal columns.  When the null space is larger than ``d`` the
        ``d`` directions strongest for the direct channel are kept.
    """
    A = np.asarray(precoded_estimates)
    K, Nr, ds = A.shape
    d = ds if d is None else d
    direct = A[k]
    interf = np.concatenate([A[i] for i in range(K) if i != k], axis=1) if K > 1 else np.zeros((Nr, 0))

    if interf.size and np.any(interf != 0):
        left, s, _ = np.linalg.svd(interf, full_matrices=True)
        sv = np.zeros(Nr)
        sv[: len(s)] = s
        rank = int(np.sum(sv > rank_tol * sv[0]))
    else:
        left, rank = np.eye(Nr, dtype=complex), 0

    if rank > Nr - d:
        if strict:
            raise AlignmentError(
                f"interference at receiver {k} spans {rank} > Nr - d = {Nr - d} dimensions"
            )
        w = np.ones(K) if weights is None else np.asarray(weights, dtype=float)
        q = sum(w[i] * A[i] @ _herm(A[i]) for i in range(K) if i != k)
        return _smallest_eigvecs(q, d)

    null = left[:, rank:]
    if null.shape[1] == d:
        u = null
    else:
        proj = _herm(null) @ direct
        lu, _, _ = np.linalg.svd(proj)
        u = null @ lu[:, :d]
    sd = np.linalg.svd(_herm(u) @ direct, compute_uv=False)
    scale = np.linalg.norm(direct, 2)
    if sd.size < d or not scale > 0 or sd[-1] <= rank_tol * scale:
        raise AlignmentError(f"direct channel at receiver {k} loses rank after combining")
    return _fix_phase(u)


def min_interference_combiners(precoded_estimates, weights=None, d: int | None = None) -> np.ndarray:
    """Batched receive filters from estimated precoded channels.

    ``precoded_estimates[..., k, i]`` is the ``Nr x d`` estimate of ``H_ki V_i``.
    Each receiver keeps the ``d`` directions carrying the least weighted
    estimated interference.  When the estimates are exactly aligned this is
    the zero-forcing null space; otherwise it degrades gracefully instead of
    failing.
    """
    A = np.asarray(precoded_estimates)
    K = A.shape[-4]
    d = A.shape[-1] if d is None else d
    w = _weights(weights, A.shape[:-2]) * _offdiag_mask(K)
    q = np.sum(w[..., None, None] * (A @ _herm(A)), axis=-3)
    return _smallest_eigvecs(q, d)


def instantaneous_rates(true_channels, powers, precoders, combiners, p_noise: float) -> np.ndarray:
    """Per-user ``log2 det(I + S (Q_int + Q_noise)^{-1})`` on the true channels.

    ``S`` is the desired post-combining covariance and ``Q_int`` the residual
    interference, treated as Gaussian noise.  ``powers[..., k, i]`` are the
    received powers in the same unit as ``p_noise``.  Supports leading batch
    axes; returns shape ``(..., K)``.
    """
    if not p_noise > 0:
        raise ValueError("p_noise must be > 0 for a non-singular noise covariance")
    H = _channels(true_channels)
    V = np.asarray(precoders)
    U = np.asarray(combiners)
    K = H.shape[-4]
    d = V.shape[-1]
    w = np.broadcast_to(np.asarray(powers, dtype=float), H.shape[:-2])
    a = _herm(U)[..., :, None, :, :] @ H @ V[..., None, :, :, :]
    cov = (w / d)[..., None, None] * (a @ _herm(a))
    idx = np.arange(K)
    signal = cov[..., idx, idx, :, :]
    interference = cov.sum(axis=-3) - signal
    noise_plus = interference + p_noise * (_herm(U) @ U)
    _, ld_total = np.linalg.slogdet(noise_plus + signal)
    _, ld_noise = np.linalg.slogdet(noise_plus)
    return np.maximum((ld_total - ld_noise) / math.log(2.0), 0.0)


def write_leakage_trace(solution: AlignmentSolution, path) -> None:
    """Dump the per-half-iteration leakage as ``half_step,leakage`` CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["half_step", "leakage"])
        for i, v in enumerate(solution.trace):
            wr.writerow([i, f"{v:.12g}"])
