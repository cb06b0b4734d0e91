"""Finite-difference verification of tape gradients.

``loss_builder(store, tape)`` must rebuild the loss from scratch on every
call and return a scalar Node; central differences then probe each stored
scalar parameter independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape
from .params import ParameterStore

__all__ = ["GradCheckReport", "finite_diff_check"]


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_param: str
    worst_index: tuple
    analytic: float
    numeric: float
    n_checked: int

    @property
    def ok(self) -> bool:
        return self.max_rel_err < 1e-4


def finite_diff_check(
    loss_builder,
    store: ParameterStore,
    epsilon: float = 1e-5,
    max_checks: int | None = None,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare tape gradients to central differences.

    Every stored scalar is probed unless ``max_checks`` caps the count, in
    which case a uniform subset is drawn (``rng`` required then).
    """
    store.zero_grads()
    tape = Tape()
    loss = loss_builder(store, tape)
    tape.backward(loss)
    analytic = {name: p.grad.copy() for name, p in store.items()}

    # A float64 central difference of a loss of magnitude |f| carries about
    # u*|f|/epsilon rounding noise, so gradients below noise/1e-4 cannot be
    # certified in relative terms; they are held to the absolute noise bound
    # instead by flooring the denominator.
    u = np.finfo(np.float64).eps
    fd_noise = 100.0 * u * max(1.0, abs(loss.item())) / epsilon
    floor = max(fd_noise / 1e-4, 1e-8)

    def eval_loss() -> float:
        return loss_builder(store, None).item()

    coords = []
    for name, p in store.items():
        it = np.nditer(p.value, flags=["multi_index"])
        while not it.finished:
            coords.append((name, it.multi_index))
            it.iternext()
    if max_checks is not None and len(coords) > max_checks:
        keep = rng.choice(len(coords), size=max_checks, replace=False)
        coords = [coords[i] for i in sorted(keep)]

    worst = GradCheckReport(0.0, "", (), 0.0, 0.0, 0)
    n = 0
    for name, idx in coords:
        value = store.value(name)
        orig = value[idx]
        value[idx] = orig + epsilon
        f_plus = eval_loss()
        value[idx] = orig - epsilon
        f_minus = eval_loss()
        value[idx] = orig
        numeric = (f_plus - f_minus) / (2.0 * epsilon)
        a = analytic[name][idx]
        rel = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        n += 1
        if rel > worst.max_rel_err:
            worst = GradCheckReport(rel, name, idx, float(a), float(numeric), n)
    worst.n_checked = n
    store.zero_grads()
    return worst
