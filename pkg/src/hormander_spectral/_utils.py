from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING

import numpy as np

from . import settings


if TYPE_CHECKING:
    from collections.abc import Callable, Iterable, Iterator

    import numpy.typing as npt


def multi_indices(n: int, max_order: int) -> Iterator[tuple[int, ...]]:
    """
    Yield every multi-index `μ ∈ ℕⁿ` with `|μ| ≤ max_order`.

    Multi-indices come out ordered by `|μ|`, then lexicographically descending,
    so `(1, 0)` precedes `(0, 1)`.
    """
    for order in range(max_order + 1):
        yield from multi_indices_of_order(n, order)


def multi_indices_of_order(n: int, order: int) -> Iterator[tuple[int, ...]]:
    if n == 1:
        yield (order,)
        return
    for first in range(order, -1, -1):
        for rest in multi_indices_of_order(n - 1, order - first):
            yield (first, *rest)


def monomial(xi: npt.NDArray[np.float64], mu: tuple[int, ...]) -> npt.NDArray[np.float64]:
    """
    Evaluate `ξ^μ` on a batch of points of shape `(..., n)`.
    """
    result = np.ones(xi.shape[:-1])
    for axis, power in enumerate(mu):
        if power:
            result = result * xi[..., axis] ** power
    return result


def binomial(mu: tuple[int, ...], nu: tuple[int, ...]) -> int:
    return math.prod(math.comb(m, v) for m, v in zip(mu, nu, strict=True))


def below(mu: tuple[int, ...]) -> Iterator[tuple[int, ...]]:
    """
    Yield every multi-index `ν ≤ μ` componentwise.
    """
    yield from itertools.product(*(range(m + 1) for m in mu))


def map_ordered[T, R](
    func: Callable[[T], R], items: Iterable[T], *, workers: int | None = None
) -> list[R]:
    """
    Map `func` over `items`, returning results in input order.

    Results never depend on the number of workers: each call must be
    a pure function of its item, and merging follows the input order.
    """
    if workers is None:
        workers = settings.workers()
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def log_grid(start: float, stop: float, num: int) -> npt.NDArray[np.float64]:
    return np.geomspace(start, stop, num)


def sphere_grid(n: int) -> npt.NDArray[np.float64]:
    """
    Directions used to scan principal symbols on the unit sphere.

    One dimension uses both directions, two dimensions 720 equally spaced
    angles, three dimensions a 2000-point Fibonacci sphere.
    """
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        angles = np.arange(720) * (2 * np.pi / 720)
        return np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    if n == 3:
        count = 2000
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        radius = np.sqrt(1 - z**2)
        theta = np.pi * (1 + math.sqrt(5)) * k
        return np.stack([radius * np.cos(theta), radius * np.sin(theta), z], axis=-1)
    msg = f"no sphere grid for dimension {n}"
    raise ValueError(msg)
