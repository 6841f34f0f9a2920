"""Membrane-potential distillation through normalized Gram matrices.

Each recorded pre-reset potential ``[b, c, h, w]`` is flattened per sample and
turned into a ``b x b`` Gram matrix with unit Frobenius norm. The loss sums the
Frobenius distance between teacher and student Grams over layer pairs and
timesteps. Only the batch size has to agree between teacher and student, so
layers of different width or resolution can be paired.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np


class DegenerateGramError(ValueError):
    pass


@dataclass
class GramFeature:
    g: np.ndarray
    source_shape: tuple[int, ...]


LayerPairing = Sequence[tuple[int, int]]


def flatten_q(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    return u.reshape(u.shape[0], -1)


def _gram_parts(u):
    q = flatten_q(u)
    m = q @ q.T
    norm = float(np.sqrt(np.sum(m * m)))
    return q, m, norm


def gram(u) -> GramFeature:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim < 1 or u.shape[0] < 1:
        raise ValueError("need a batch of at least one sample")
    _, m, norm = _gram_parts(u)
    if norm == 0.0:
        raise DegenerateGramError("degenerate Gram: all-zero membrane potentials")
    g = m / norm
    # exact symmetry regardless of BLAS blocking
    g = 0.5 * (g + g.T)
    return GramFeature(g, tuple(u.shape))


def _pair_terms(teacher, student, pairing, T):
    for lt, ls in pairing:
        for t in range(T):
            tu = np.asarray(teacher[lt][t], dtype=np.float64)
            su = np.asarray(student[ls][t], dtype=np.float64)
            if tu.shape[0] != su.shape[0]:
                raise ValueError(
                    f"batch size mismatch: teacher layer {lt} has {tu.shape[0]}, student layer {ls} has {su.shape[0]}"
                )
            yield ls, t, tu, su


def mpfd_loss(teacher_potentials, student_potentials, pairing: LayerPairing, T: int, skip_degenerate: bool = False) -> float:
    """Sum over paired layers and timesteps of ``||G_teacher - G_student||_F``.

    Potentials are indexed ``[layer][t]`` and each entry is ``[b, c, h, w]``.
    With ``skip_degenerate`` a pair-step whose Gram is undefined contributes 0
    instead of raising.
    """
    total = 0.0
    for _, _, tu, su in _pair_terms(teacher_potentials, student_potentials, pairing, T):
        try:
            diff = gram(tu).g - gram(su).g
        except DegenerateGramError:
            if skip_degenerate:
                continue
            raise
        total += float(np.sqrt(np.sum(diff * diff)))
    return total


def mpfd_grad(teacher_potentials, student_potentials, pairing: LayerPairing, T: int, skip_degenerate: bool = False):
    """Gradient of :func:`mpfd_loss` with respect to the student potentials.

    Returns a dict ``{student_layer: array [T, b, c, h, w]}`` covering every
    student layer that appears in ``pairing``. Teacher potentials are constants.
    """
    grads: dict[int, np.ndarray] = {}
    for ls, t, tu, su in _pair_terms(teacher_potentials, student_potentials, pairing, T):
        if ls not in grads:
            grads[ls] = np.zeros((T,) + su.shape)
        try:
            g_t = gram(tu).g
            q, m, norm = _gram_parts(su)
            if norm == 0.0:
                raise DegenerateGramError("degenerate Gram: all-zero membrane potentials")
        except DegenerateGramError:
            if skip_degenerate:
                continue
            raise
        g_s = m / norm
        diff = g_s - g_t
        dist = float(np.sqrt(np.sum(diff * diff)))
        if dist == 0.0:
            continue
        d_g = diff / dist
        # G = M / ||M||  =>  dL/dM = (dL/dG - G <dL/dG, G>) / ||M||
        d_m = (d_g - g_s * np.sum(d_g * g_s)) / norm
        d_q = (d_m + d_m.T) @ q
        grads[ls][t] += d_q.reshape(su.shape)
    return grads
