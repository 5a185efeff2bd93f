"""Seeded random models, states and devices for property suites."""

from __future__ import annotations

import numpy as np

from . import opalg
from .devices import DeviceKind, DeviceSet, build_device_set
from .lindblad import LindbladModel


def _complex_square(rng: np.random.Generator, dim: int) -> np.ndarray:
    # entries uniform in the centered square [-1, 1] x [-1, 1]
    return rng.uniform(-1.0, 1.0, (dim, dim)) + 1j * rng.uniform(-1.0, 1.0, (dim, dim))


def random_hamiltonian(rng: np.random.Generator, dim: int) -> np.ndarray:
    r = _complex_square(rng, dim)
    return 0.5 * (r + opalg.adjoint(r))


def random_jump(rng: np.random.Generator, dim: int, max_norm: float = 1.0) -> np.ndarray:
    """Random jump operator with ``||A+ A|| <= max_norm`` (spectral norm)."""
    a = _complex_square(rng, dim)
    scale = rng.uniform(0.1, 1.0) * max_norm
    return a * np.sqrt(scale) / np.linalg.norm(a, 2)


def random_model(rng: np.random.Generator, dim: int, n_jumps: int | None = None) -> LindbladModel:
    if n_jumps is None:
        n_jumps = int(rng.integers(1, dim + 1))
    return LindbladModel(random_hamiltonian(rng, dim),
                         tuple(random_jump(rng, dim) for _ in range(n_jumps)))


def random_density(rng: np.random.Generator, dim: int, rank: int | None = None) -> np.ndarray:
    """Random unit-trace non-negative operator; ``rank=1`` gives a pure state."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ opalg.adjoint(g)
    return opalg.hermitian_part(rho / np.trace(rho).real)


def random_device(rng: np.random.Generator, kind, dim: int, n_events: int,
                  unbiased: bool = False) -> DeviceSet:
    """Random device set; ``unbiased=True`` gives a total proportional to 1."""
    kind = DeviceKind(kind)
    # the unbiased construction inverts the total, so it needs full-rank elements
    ops = [random_density(rng, dim, rank=dim if unbiased else int(rng.integers(1, dim + 1)))
           * rng.uniform(0.2, 1.0) for _ in range(n_events)]
    if unbiased:
        total = np.sum(ops, axis=0)
        vals, vecs = np.linalg.eigh(total)
        inv_sqrt = (vecs / np.sqrt(vals)) @ opalg.adjoint(vecs)
        ops = [opalg.hermitian_part(inv_sqrt @ op @ inv_sqrt) for op in ops]
    labels = [f"{kind.value[0]}{k}" for k in range(n_events)]
    return build_device_set(kind, labels, ops)
