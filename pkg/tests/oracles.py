"""Independent reference computations used to check the closed forms.

Nothing here calls the code under test except to read plain attributes.
"""

from __future__ import annotations

import itertools
import math


def rk4(f, z0: float, t0: float, t1: float, h: float) -> float:
    """Integrate dz/dt = f(t, z) from t0 to t1 with classic RK4."""
    n = max(1, math.ceil((t1 - t0) / h - 1e-12))
    h = (t1 - t0) / n
    t, z = t0, z0
    for _ in range(n):
        k1 = f(t, z)
        k2 = f(t + h / 2, z + h * k1 / 2)
        k3 = f(t + h / 2, z + h * k2 / 2)
        k4 = f(t + h, z + h * k3)
        z += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        t += h
    return z


def simpson(g, a: float, b: float, h: float) -> float:
    """Composite Simpson rule with step close to ``h``."""
    if b == a:
        return 0.0
    n = max(2, math.ceil((b - a) / h))
    n += n % 2
    step = (b - a) / n
    total = g(a) + g(b)
    for i in range(1, n):
        total += (4 if i % 2 else 2) * g(a + i * step)
    return total * step / 3


def rk4_many(f, z0, t0, t1, h: float):
    """RK4 on many independent problems at once (numpy arrays).

    Every problem uses the same number of steps, chosen so that no step
    exceeds ``h``.
    """
    import numpy as np

    z0, t0, t1 = (np.asarray(a, dtype=float) for a in (z0, t0, t1))
    n = max(1, math.ceil(float(np.max(t1 - t0)) / h))
    step = (t1 - t0) / n
    t, z = t0.copy(), z0.copy()
    for i in range(n):
        k1 = f(t, z)
        k2 = f(t + step / 2, z + step * k1 / 2)
        k3 = f(t + step / 2, z + step * k2 / 2)
        k4 = f(t + step, z + step * k3)
        z = z + step * (k1 + 2 * k2 + 2 * k3 + k4) / 6
        t = t0 + (i + 1) * step
    return z


def simpson_many(g, a, b, h: float):
    """Composite Simpson on many intervals at once (numpy arrays)."""
    import numpy as np

    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    n = max(2, math.ceil(float(np.max(b - a)) / h))
    n += n % 2
    step = (b - a) / n
    total = g(a) + g(b)
    for i in range(1, n):
        total = total + (4 if i % 2 else 2) * g(a + i * step)
    return total * step / 3


def central_difference(g, t, h: float = 1e-6):
    """Symmetric difference quotient; divides by the step actually represented."""
    hi, lo = t + h, t - h
    return (g(hi) - g(lo)) / (hi - lo)


# textbook rates, written independently of the package
def sinusoidal_rate(A, T, t0):
    return lambda t, z: math.pi * A / (2 * T) * math.sin(math.pi * (t - t0) / T)


def sinusoidal_state(A, T, t0, z0):
    return lambda t: z0 + A / 2 * (1 - math.cos(math.pi * (t - t0) / T))


def linear_state(s, t0, z0):
    return lambda t: z0 + s * (t - t0)


def dense_scan(predicate, t_lo: float, t_hi: float, h: float) -> float:
    """First grid time with step ``h`` at which ``predicate`` holds."""
    n = math.ceil((t_hi - t_lo) / h)
    for i in range(n + 1):
        t = t_lo + i * h
        if predicate(t):
            return t
    raise ValueError("predicate never holds")


def rect_overlap_by_sampling(c1, size1, c2, size2, n: int = 41) -> bool:
    """Brute force: does any sampled point of rectangle 1 lie in rectangle 2?"""
    (x1, y1), (l1, w1) = c1, size1
    (x2, y2), (l2, w2) = c2, size2
    for i in range(n):
        for j in range(n):
            px = x1 - l1 / 2 + l1 * i / (n - 1)
            py = y1 - w1 / 2 + w1 * j / (n - 1)
            if abs(px - x2) <= l2 / 2 + 1e-12 and abs(py - y2) <= w2 / 2 + 1e-12:
                return True
    return False


# --- brute-force category matching ------------------------------------------------


def _ancestors(path: tuple[str, ...]) -> set[tuple[str, ...]]:
    return {path[:i] for i in range(1, len(path) + 1)}


def closure(registry, labels) -> set[tuple[str, ...]]:
    out: set[tuple[str, ...]] = set()
    for label in labels:
        out |= _ancestors(registry.resolve(label).path)
    return out


def _tags_ok(registry, have, need) -> bool:
    return {registry.resolve(t).path for t in need} <= closure(registry, have)


def _maps(n_from: int, n_to: int):
    return itertools.permutations(range(n_to), n_from)


def brute_comprises(registry, category, scenario) -> bool:
    """Try every injective assignment, no pruning."""
    actors, acts = scenario.actors, scenario.activities
    phys = scenario.physical_elements
    s_acts = {(id(a.actor), id(a.activity)) for a in scenario.acts}

    def actor_ok(a, c):
        return a.category.actor_type == c.actor_type and _tags_ok(registry, a.tags + a.category.tags, c.tags)

    def activity_ok(v, c):
        return (
            v.category.model == c.model
            and set(v.category.state_variables) == set(c.state_variables)
            and _tags_ok(registry, v.tags + v.category.tags, c.tags)
        )

    phys_ok = any(
        all(_tags_ok(registry, phys[j].tags + phys[j].category.tags, c.tags) for c, j in zip(category.physical_element_categories, m))
        for m in _maps(len(category.physical_element_categories), len(phys))
    )
    if not phys_ok:
        return False
    ac_index = {id(c): i for i, c in enumerate(category.actor_categories)}
    vc_index = {id(c): i for i, c in enumerate(category.activity_categories)}
    for am in _maps(len(category.actor_categories), len(actors)):
        if not all(actor_ok(actors[j], c) for c, j in zip(category.actor_categories, am)):
            continue
        for vm in _maps(len(category.activity_categories), len(acts)):
            if not all(activity_ok(acts[j], c) for c, j in zip(category.activity_categories, vm)):
                continue
            if all(
                (id(actors[am[ac_index[id(ca.actor_category)]]]), id(acts[vm[vc_index[id(ca.activity_category)]]])) in s_acts
                for ca in category.acts
            ):
                return True
    return False
