"""Independent re-check of a solution against its instance."""
from __future__ import annotations

from .grid import Instance


def _at(path, t):
    return path[t] if t < len(path) else path[-1]


def _arrival(path) -> int:
    t = len(path) - 1
    while t > 0 and path[t - 1] == path[-1]:
        t -= 1
    return t


def validate_solution(instance: Instance, assignment, paths, cost=None) -> list[str]:
    """Return a list of violations; empty means the solution is valid.

    ``assignment`` gives the goal index of each robot, ``paths`` one list of
    ``(x, y)`` cells per robot. Robots rest at their last cell forever.
    """
    errors: list[str] = []
    ws = instance.workspace
    n = instance.num_robots
    assignment = list(assignment)
    if len(assignment) != n:
        errors.append(f"assignment covers {len(assignment)} robots, expected {n}")
        return errors
    if len(paths) != n:
        errors.append(f"{len(paths)} paths for {n} robots")
        return errors
    if len(set(assignment)) != n:
        errors.append("assignment is not injective")
    paths = [[tuple(c) for c in p] for p in paths]
    for r, (g, p) in enumerate(zip(assignment, paths)):
        if not 0 <= g < instance.num_goals:
            errors.append(f"robot {r}: goal index {g} out of range")
            continue
        if not p:
            errors.append(f"robot {r}: empty path")
            continue
        if p[0] != tuple(instance.starts[r]):
            errors.append(f"robot {r}: path starts at {p[0]}, not its start")
        if p[-1] != tuple(instance.goals[g]):
            errors.append(f"robot {r}: path ends at {p[-1]}, not goal {g}")
        for t, c in enumerate(p):
            if not ws.in_bounds(c):
                errors.append(f"robot {r}: out of bounds at t={t}")
            elif c in ws.obstacles:
                errors.append(f"robot {r}: on obstacle {c} at t={t}")
        for t in range(len(p) - 1):
            (x0, y0), (x1, y1) = p[t], p[t + 1]
            if abs(x0 - x1) + abs(y0 - y1) > 1:
                errors.append(f"robot {r}: illegal move {p[t]}->{p[t + 1]} at t={t}")
    if errors:
        return errors

    horizon = max((len(p) for p in paths), default=0)
    for t in range(horizon):
        where: dict = {}
        for r, p in enumerate(paths):
            c = _at(p, t)
            if c in where:
                errors.append(f"vertex conflict: robots {where[c]} and {r} at {c}, t={t}")
            else:
                where[c] = r
        if t + 1 < horizon:
            for i in range(n):
                a, b = _at(paths[i], t), _at(paths[i], t + 1)
                if a == b:
                    continue
                for j in range(i + 1, n):
                    if _at(paths[j], t) == b and _at(paths[j], t + 1) == a:
                        errors.append(f"edge conflict: robots {i} and {j} swap at t={t}")
    if cost is not None:
        actual = sum(_arrival(p) for p in paths)
        if actual != cost:
            errors.append(f"cost mismatch: reported {cost}, recomputed {actual}")
    return errors
