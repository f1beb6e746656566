from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    failures: list[tuple[str, tuple, float, float, float]] = field(default_factory=list)
    n_checked: int = 0

    @property
    def passed(self) -> bool:
        return not self.failures and self.max_rel_error <= self.tolerance


def rel_error(a: float, b: float, floor: float = 1e-6) -> float:
    return abs(a - b) / max(abs(a), abs(b), floor)


def projection_objective(shape, seed=0):
    """``sum(y * R)`` for a fixed random ``R``: exercises every output element."""
    r = np.random.default_rng(seed).standard_normal(shape)

    def objective(y):
        return float((y * r).sum()), r

    return objective


def grad_check(model, x, objective=None, n_checks=20, eps=1e-5, tolerance=1e-3, seed=0,
               check_input=True, stop=None):
    """Compare backprop gradients with central differences.

    ``objective(y) -> (value, dvalue/dy)`` defaults to a random projection of
    the output. Up to ``n_checks`` entries per parameter array (and of the input)
    are perturbed; failures are reported per entry.
    """
    x = np.array(x, dtype=np.float64)
    rng = np.random.default_rng(seed)
    y = model.forward(x, stop=stop)
    if objective is None:
        objective = projection_objective(y.shape, seed)
    _, dy = objective(y)
    dx = model.backward(dy, stop=stop)

    def f():
        return objective(model.forward(x, stop=stop))[0]

    report = GradCheckReport(0.0, tolerance)
    targets = [(key, value, np.array(grad)) for key, value, grad in model.parameters()]
    if stop is not None:
        n_in = stop
        keys = {f"{i}." for i in range(n_in)}
        targets = [t for t in targets if any(t[0].startswith(k) for k in keys)]
    if check_input:
        targets.append(("input", x, dx))
    for key, arr, grad in targets:
        flat_idx = rng.choice(arr.size, size=min(n_checks, arr.size), replace=False)
        for fi in flat_idx:
            idx = np.unravel_index(fi, arr.shape)
            old = arr[idx]
            arr[idx] = old + eps
            fp = f()
            arr[idx] = old - eps
            fm = f()
            arr[idx] = old
            num = (fp - fm) / (2 * eps)
            ana = float(grad[idx])
            err = rel_error(ana, num)
            report.n_checked += 1
            report.max_rel_error = max(report.max_rel_error, err)
            if err > tolerance:
                report.failures.append((key, tuple(int(i) for i in idx), ana, num, err))
    return report
