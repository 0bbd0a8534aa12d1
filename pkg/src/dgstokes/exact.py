"""Manufactured Stokes pairs on the unit square."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial as P1


@dataclass(frozen=True)
class ExactSolution:
    """Velocity, its gradient and Laplacian, pressure and pressure gradient.

    All callables take points of shape ``(n, 2)``. ``grad_u(x)[:, c, d]`` is
    ``d u_c / d x_d``. When the pressure jumps across the vertical line
    ``x_1 = discontinuity``, ``grad_p`` is the piecewise gradient and
    ``pressure_jump(x_2)`` is ``p(a+, x_2) - p(a-, x_2)``.
    """

    name: str
    u: Callable
    grad_u: Callable
    laplace_u: Callable
    p: Callable
    grad_p: Callable
    discontinuity: float | None = None
    pressure_jump: Callable | None = None

    def load(self, mu: float = 1.0) -> Callable:
        """Pointwise ``f = -mu Delta u + grad p`` (smooth pressure only)."""
        if self.discontinuity is not None:
            raise ValueError("the load of a discontinuous pressure is not a function")
        return lambda x: -mu * self.laplace_u(x) + self.grad_p(x)


def _stream_velocity():
    # psi = g(x) g(y) with g(t) = t^2 (1 - t)^2 and u = Curl psi
    g = P1([0, 0, 1]) * P1([1, -1]) ** 2
    d = [g.deriv(k) if k else g for k in range(4)]

    def u(x):
        a, b = x[:, 0], x[:, 1]
        return np.column_stack([d[0](a) * d[1](b), -d[1](a) * d[0](b)])

    def grad_u(x):
        a, b = x[:, 0], x[:, 1]
        out = np.empty((len(x), 2, 2))
        out[:, 0, 0] = d[1](a) * d[1](b)
        out[:, 0, 1] = d[0](a) * d[2](b)
        out[:, 1, 0] = -d[2](a) * d[0](b)
        out[:, 1, 1] = -d[1](a) * d[1](b)
        return out

    def laplace_u(x):
        a, b = x[:, 0], x[:, 1]
        return np.column_stack([
            d[2](a) * d[1](b) + d[0](a) * d[3](b),
            -(d[3](a) * d[0](b) + d[1](a) * d[2](b)),
        ])

    return u, grad_u, laplace_u


def smooth_solution() -> ExactSolution:
    u, grad_u, laplace_u = _stream_velocity()
    return ExactSolution(
        "smooth", u, grad_u, laplace_u,
        p=lambda x: (x[:, 0] - 0.5) * (x[:, 1] - 0.5),
        grad_p=lambda x: np.column_stack([x[:, 1] - 0.5, x[:, 0] - 0.5]),
    )


JUMP_LINE = 1.0 / np.pi


def jump_solution() -> ExactSolution:
    u, grad_u, laplace_u = _stream_velocity()
    hi, lo = np.pi / (np.pi - 1.0), -np.pi
    return ExactSolution(
        "jump", u, grad_u, laplace_u,
        p=lambda x: np.where(x[:, 0] > JUMP_LINE, hi, lo),
        grad_p=lambda x: np.zeros((len(x), 2)),
        discontinuity=JUMP_LINE,
        pressure_jump=lambda y: np.full(np.shape(y), hi - lo),
    )


def get_solution(case: str) -> ExactSolution:
    if case in ("smooth", "locking"):
        return smooth_solution()
    if case == "jump":
        return jump_solution()
    raise ValueError(f"unknown case {case!r}")
