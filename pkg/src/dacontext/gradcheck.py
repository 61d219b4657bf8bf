"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, zero_grad


class NonDeterministicError(RuntimeError):
    """The checked function returned different values for identical inputs."""


@dataclass
class Coordinate:
    tensor: str
    index: tuple[int, ...]
    analytic: float
    numeric: float
    abs_error: float
    rel_error: float


@dataclass
class GradCheckReport:
    passed: bool
    max_rel_error: float
    tol: float
    coordinates: list[Coordinate] = field(default_factory=list)

    def worst(self) -> Coordinate | None:
        if not self.coordinates:
            return None
        return max(self.coordinates, key=lambda c: c.rel_error)

    def __str__(self) -> str:
        w = self.worst()
        where = f" at {w.tensor}{list(w.index)}" if w else ""
        status = "pass" if self.passed else "FAIL"
        max_abs = max((c.abs_error for c in self.coordinates), default=0.0)
        return (f"grad_check {status}: max rel error {self.max_rel_error:.3e}{where}, "
                f"max abs error {max_abs:.1e} over {len(self.coordinates)} coordinates (tol {self.tol:g})")


def relative_error(analytic: float, numeric: float, floor: float = 1e-8) -> float:
    # differences below the absolute floor count as agreement
    diff = abs(analytic - numeric)
    if diff <= floor:
        return 0.0
    return diff / max(abs(analytic), abs(numeric))


def grad_check(
    f: Callable[[], Tensor],
    inputs: Tensor | Sequence[Tensor],
    step: float = 1e-5,
    tol: float = 1e-4,
    floor: float = 1e-8,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare tape gradients of the scalar ``f()`` against central differences.

    ``f`` closes over ``inputs``; each input's data is perturbed in place. With
    ``max_coords`` set, that many coordinates are sampled per input tensor.
    """
    if isinstance(inputs, Tensor):
        inputs = [inputs]
    inputs = list(inputs)
    zero_grad(inputs)
    out = f()
    again = f()
    if out.shape != ():
        raise ValueError(f"grad_check needs a scalar function, got shape {out.shape}")
    if out.data.tobytes() != again.data.tobytes():
        raise NonDeterministicError("f() is not deterministic: two evaluations differ")
    out.backward()
    analytic = [np.zeros_like(x.data) if x.grad is None else x.grad.copy() for x in inputs]
    zero_grad(inputs)

    rng = rng if rng is not None else np.random.default_rng(0)
    coords: list[Coordinate] = []
    for k, x in enumerate(inputs):
        flat_ids = np.arange(x.size)
        if max_coords is not None and x.size > max_coords:
            flat_ids = np.sort(rng.choice(x.size, size=max_coords, replace=False))
        for flat in flat_ids:
            idx = np.unravel_index(int(flat), x.shape)
            old = x.data[idx]
            x.data[idx] = old + step
            hi = f().item()
            x.data[idx] = old - step
            lo = f().item()
            x.data[idx] = old
            numeric = (hi - lo) / (2.0 * step)
            a = float(analytic[k][idx])
            coords.append(Coordinate(
                tensor=x.name or f"input{k}",
                index=tuple(int(i) for i in idx),
                analytic=a,
                numeric=numeric,
                abs_error=abs(a - numeric),
                rel_error=relative_error(a, numeric, floor),
            ))
    worst = max((c.rel_error for c in coords), default=0.0)
    return GradCheckReport(passed=worst < tol, max_rel_error=worst, tol=tol, coordinates=coords)
