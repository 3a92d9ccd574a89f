"""Distributional checks of the large-system concentration claims.

Each experiment draws fresh signature matrices at increasing N with the
load ratio of the template held fixed (Ns = round(alpha N)), measures a
code-dependent quantity, and pairs it with its deterministic limit.
Convergence is judged across seeds (medians), never from a single draw.

All experiments require sigma_v2 > 0 in the template: without relayed
observation noise there is no multi-access interference and the limits
collapse to the trivial ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve

from .asymptotics import asymptotic_params
from .core import SystemParams, amplifier_gain, sensors_for_load, validate
from .errors import DomainError, InvalidParam, NumericalFailure
from .exact import ChannelModel, _cho, channel_covariance
from .spreading import SpreadingMatrix, generate

_PAIR_STREAM = 0x9A1C
_DECOMPOSITION_RTOL = 1e-8


@dataclass(frozen=True)
class ConvergenceRecord:
    """One measurement of a code-dependent statistic against its limit."""

    statistic: str
    N: int
    alpha: float
    Ns: int
    seed: int
    observed: float
    predicted: float
    abs_error: float
    rel_error: float


def _record(statistic: str, params: SystemParams, seed: int, observed: float, predicted: float) -> ConvergenceRecord:
    abs_error = abs(observed - predicted)
    rel_error = abs_error / abs(predicted) if predicted != 0.0 else math.nan
    return ConvergenceRecord(
        statistic=statistic,
        N=params.N,
        alpha=params.Ns / params.N,
        Ns=params.Ns,
        seed=seed,
        observed=observed,
        predicted=predicted,
        abs_error=abs_error,
        rel_error=rel_error,
    )


def _scaled(template: SystemParams, N: int) -> SystemParams:
    alpha = template.Ns / template.N
    return replace(template, N=N, Ns=sensors_for_load(alpha, N))


def _check_schedule(template: SystemParams, N_values, seeds) -> None:
    validate(template)
    if template.sigma_v2 <= 0.0:
        raise DomainError("convergence experiments require sigma_v2 > 0")
    if len(N_values) == 0:
        raise InvalidParam("N_values", N_values, "at least one spreading length required")
    if any(n2 <= n1 for n1, n2 in zip(N_values, N_values[1:])):
        raise InvalidParam("N_values", list(N_values), "must be strictly increasing")
    if len(seeds) == 0:
        raise InvalidParam("seeds", seeds, "at least one seed required")


def _leave_out_cov(entries: np.ndarray, col: int, c: float, sigma_w2: float) -> np.ndarray:
    keep = np.delete(entries, col, axis=1)
    cov = c * (keep @ keep.T)
    cov = 0.5 * (cov + cov.T)
    cov[np.diag_indices_from(cov)] += sigma_w2
    return cov


def mil_identity_check(S: SpreadingMatrix, params: SystemParams, sensor: int) -> float:
    """Residual of the leave-one-out inversion identity at one sensor.

    With c = g^2 sigma_v2 and Q_n the covariance built without sensor n's
    signature, s_n^T Sigma^{-1} s_n must equal q_n / (1 + c q_n) where
    q_n = s_n^T Q_n^{-1} s_n.  Both sides are computed from independent
    fresh factorizations; the absolute difference is returned and should
    sit at rounding level (~1e-12) for healthy linear algebra.
    """
    if not 0 <= sensor < S.Ns:
        raise DomainError(f"sensor index {sensor} out of range [0, {S.Ns})")
    model = ChannelModel.from_params(params, S)
    c = model.g * model.g * model.sigma_v2
    s_n = S.entries[:, sensor]
    lhs = float(s_n @ cho_solve(_cho(channel_covariance(model)), s_n))
    cov_n = _leave_out_cov(S.entries, sensor, c, model.sigma_w2)
    q_n = float(s_n @ cho_solve(_cho(cov_n), s_n))
    rhs = q_n / (1.0 + c * q_n)
    return abs(lhs - rhs)


def mil_residual_experiment(
    template: SystemParams, N_values, seeds, sensor: int = 0
) -> list[ConvergenceRecord]:
    """mil_identity_check across the (N, seed) schedule; predicted value 0."""
    _check_schedule(template, N_values, seeds)
    records = []
    for N in N_values:
        params = _scaled(template, N)
        for seed in seeds:
            S = generate(params.N, params.Ns, seed)
            residual = mil_identity_check(S, params, sensor)
            records.append(_record("mil_residual", params, seed, residual, 0.0))
    return records


def diagonal_term_experiment(template: SystemParams, N_values, seeds) -> list[ConvergenceRecord]:
    """Concentration of one sensor's diagonal quadratic forms.

    For sensor 0 of each fresh matrix: the leave-one-out form
    s_0^T Q_0^{-1} s_0 tends to beta0, and the full form s_0^T Sigma^{-1} s_0
    tends to beta0 / (1 + c beta0) with c = g^2 sigma_v2.  Emits statistics
    "diag_leave_out" and "diag_full" for every (N, seed) cell.
    """
    _check_schedule(template, N_values, seeds)
    records = []
    for N in N_values:
        params = _scaled(template, N)
        ap = asymptotic_params(params)
        g = amplifier_gain(params)
        c = g * g * params.sigma_v2
        pred_leave = ap.beta0
        pred_full = ap.beta0 / (1.0 + c * ap.beta0)
        for seed in seeds:
            S = generate(params.N, params.Ns, seed)
            model = ChannelModel.from_params(params, S)
            s_0 = S.entries[:, 0]
            full = float(s_0 @ cho_solve(_cho(channel_covariance(model)), s_0))
            cov_0 = _leave_out_cov(S.entries, 0, c, params.sigma_w2)
            leave = float(s_0 @ cho_solve(_cho(cov_0), s_0))
            records.append(_record("diag_leave_out", params, seed, leave, pred_leave))
            records.append(_record("diag_full", params, seed, full, pred_full))
    return records


def cross_term_experiment(
    template: SystemParams, N_values, seeds, max_pairs: int = 200
) -> list[ConvergenceRecord]:
    """Decay of cross quadratic forms between distinct sensors.

    Measures the mean of |s_i^T Sigma^{-1} s_j| over a deterministic random
    subset of at most max_pairs distinct pairs (i < j); the limit is 0 and
    the magnitude shrinks like 1/sqrt(N).  Emits statistic "cross_mean".
    Needs at least two sensors at every N in the schedule.
    """
    _check_schedule(template, N_values, seeds)
    if max_pairs < 1:
        raise InvalidParam("max_pairs", max_pairs, "must be >= 1")
    records = []
    for N in N_values:
        params = _scaled(template, N)
        if params.Ns < 2:
            raise InvalidParam(
                "Ns", params.Ns, f"cross terms need at least 2 sensors, got Ns={params.Ns} at N={N}"
            )
        rows, cols = np.triu_indices(params.Ns, k=1)
        n_all = rows.size
        for seed in seeds:
            S = generate(params.N, params.Ns, seed)
            model = ChannelModel.from_params(params, S)
            factor = _cho(channel_covariance(model))
            if n_all > max_pairs:
                pick_rng = np.random.Generator(
                    np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(_PAIR_STREAM,)))
                )
                idx = pick_rng.choice(n_all, size=max_pairs, replace=False)
                pi, pj = rows[idx], cols[idx]
            else:
                pi, pj = rows, cols
            uniq, inverse = np.unique(np.concatenate([pi, pj]), return_inverse=True)
            pos_i, pos_j = inverse[: pi.size], inverse[pi.size:]
            U = S.entries[:, uniq]
            G_uu = U.T @ cho_solve(factor, U)
            observed = float(np.mean(np.abs(G_uu[pos_i, pos_j])))
            records.append(_record("cross_mean", params, seed, observed, 0.0))
    return records


def quadratic_form_convergence(template: SystemParams, N_values, seeds) -> list[ConvergenceRecord]:
    """Concentration of the detector SNR g^2 qf on its limit 1/mu.

    Emits statistic "snr" for every (N, seed) cell, plus
    "decomposition_residual": the relative gap between qf computed from the
    summed signature and from the full Ns x Ns quadratic-form matrix.  The
    two are the same number in exact arithmetic; a gap above 1e-8 raises
    NumericalFailure because it means the linear algebra is corrupted.
    """
    _check_schedule(template, N_values, seeds)
    records = []
    for N in N_values:
        params = _scaled(template, N)
        ap = asymptotic_params(params)
        g = amplifier_gain(params)
        predicted = 1.0 / ap.mu
        for seed in seeds:
            S = generate(params.N, params.Ns, seed)
            model = ChannelModel.from_params(params, S)
            factor = _cho(channel_covariance(model))
            s1 = S.entries.sum(axis=1)
            qf = float(s1 @ cho_solve(factor, s1))
            G = S.entries.T @ cho_solve(factor, S.entries)
            residual = abs(qf - float(G.sum())) / qf if qf > 0 else abs(float(G.sum()))
            if not residual <= _DECOMPOSITION_RTOL:
                raise NumericalFailure(
                    f"quadratic-form decomposition residual {residual!r} exceeds "
                    f"{_DECOMPOSITION_RTOL} at N={N}, seed={seed}"
                )
            records.append(_record("snr", params, seed, g * g * qf, predicted))
            records.append(_record("decomposition_residual", params, seed, residual, 0.0))
    return records
