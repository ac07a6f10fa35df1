"""Exact transient moments on a truncated state lattice.

For small models the forward equations ``p' = p Q(t)`` are solved directly on
the box ``{0..cap_0} x ... x {0..cap_{d-1}}``.  Jumps that would leave the box
are disabled (reflecting truncation), which conserves probability mass and
keeps the moment oracle well defined; choose caps so the boundary occupancy
is negligible.  Within one schedule segment the generator is constant, so the
march is a sequence of matrix-exponential actions.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import expm_multiply

from .errors import NumericalError, UsageError
from .model import (
    CappedResidual,
    Constant,
    Kernel,
    Linear,
    MinPair,
    MinThreshold,
    NetworkModel,
    PositivePart,
    model_breakpoints,
    validate_model,
)
from .results import MomentTrajectory

STATE_LIMIT = 2_000_000
_MASS_TOL = 1e-8


def _kernel_values_lattice(kernel: Kernel, t: float, coords: np.ndarray) -> np.ndarray:
    """Vectorized kernel evaluation over the (S, d) lattice coordinates."""
    if isinstance(kernel, Constant):
        return np.ones(coords.shape[0])
    if isinstance(kernel, Linear):
        return coords @ np.asarray(kernel.weights)
    if isinstance(kernel, MinThreshold):
        return np.minimum(coords[:, kernel.index], kernel.threshold.value_at(t))
    if isinstance(kernel, PositivePart):
        return np.maximum(coords[:, kernel.index] - kernel.threshold.value_at(t), 0.0)
    if isinstance(kernel, MinPair):
        return np.minimum(coords[:, kernel.index], coords[:, kernel.other])
    if isinstance(kernel, CappedResidual):
        residual = np.maximum(
            kernel.threshold.value_at(t) - coords[:, kernel.other], 0.0
        )
        return np.minimum(coords[:, kernel.index], residual)
    raise UsageError(f"unknown kernel type {type(kernel).__name__}")


def _generator_transpose(model: NetworkModel, t: float, coords, strides, caps):
    """Sparse Q(t)' on the truncated lattice (outward jumps disabled)."""
    size = coords.shape[0]
    src_idx = coords @ strides
    rows, cols, vals = [], [], []
    for tr in model.transitions:
        rate = tr.rate.coefficient.value_at(t) * _kernel_values_lattice(
            tr.rate.kernel, t, coords
        )
        target = coords + np.asarray(tr.jump)
        inside = np.all((target >= 0) & (target <= caps), axis=1)
        active = inside & (rate > 0.0)
        if not np.any(active):
            continue
        tgt_idx = target[active] @ strides
        rows.append(tgt_idx)
        cols.append(src_idx[active])
        vals.append(rate[active])
        # diagonal outflow
        rows.append(src_idx[active])
        cols.append(src_idx[active])
        vals.append(-rate[active])
    if not rows:
        return coo_matrix((size, size)).tocsr()
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def state_distributions(model: NetworkModel, caps, grid):
    """State-probability vectors at the grid times.

    Returns ``(times, coords, probs)`` where ``coords`` is the (S, d) integer
    lattice and ``probs`` is (len(grid), S).
    """
    report = validate_model(model)
    if not report.ok:
        raise UsageError("invalid model: " + "; ".join(report.issues))
    caps = np.asarray([int(c) for c in caps])
    if caps.shape != (model.dimension,) or np.any(caps < 0):
        raise UsageError("need one nonnegative cap per state dimension")
    shape = caps + 1
    size = int(np.prod(shape))
    if size > STATE_LIMIT:
        raise UsageError(
            f"truncated state space has {size} states, limit is {STATE_LIMIT}"
        )
    times = np.asarray(grid, dtype=float)
    if np.any(np.diff(times) < 0) or times[0] < 0 or times[-1] > model.horizon + 1e-9:
        raise UsageError("grid must be ascending within [0, horizon]")
    x0 = np.asarray(model.initial_state)
    if np.any(x0 > caps):
        raise UsageError(f"initial state {tuple(x0)} outside caps {tuple(caps)}")

    coords = np.indices(shape).reshape(model.dimension, size).T
    strides = np.array(
        [int(np.prod(shape[i + 1 :])) for i in range(model.dimension)]
    )
    p = np.zeros(size)
    p[int(x0 @ strides)] = 1.0

    boundaries = [b for b in model_breakpoints(model) if b < times[-1]]
    events = sorted(set(times.tolist()) | set(boundaries) | {0.0})
    probs = np.empty((len(times), size))
    out_i = 0
    t_now = 0.0
    qt = _generator_transpose(model, 0.0, coords, strides, caps)
    for t_event in events:
        dt = t_event - t_now
        if dt > 0:
            p = expm_multiply(qt * dt, p)
        t_now = t_event
        while out_i < len(times) and times[out_i] <= t_now + 1e-12:
            mass = p.sum()
            if abs(1.0 - mass) > _MASS_TOL:
                raise NumericalError(
                    f"probability mass {mass} drifted beyond tolerance at t={t_now:g}"
                )
            probs[out_i] = p
            out_i += 1
        if t_event in boundaries or t_event == 0.0:
            qt = _generator_transpose(model, t_event, coords, strides, caps)
    return times, coords, probs


def exact_transient_moments(model: NetworkModel, caps, grid) -> MomentTrajectory:
    """Mean and covariance of the truncated chain at the grid times."""
    times, coords, probs = state_distributions(model, caps, grid)
    fcoords = coords.astype(float)
    means = probs @ fcoords
    covs = np.empty((len(times), model.dimension, model.dimension))
    for idx in range(len(times)):
        second = np.einsum("s,si,sj->ij", probs[idx], fcoords, fcoords)
        covs[idx] = second - np.outer(means[idx], means[idx])
        covs[idx] = 0.5 * (covs[idx] + covs[idx].T)
    return MomentTrajectory("exact", times, means, covs)
