"""Closed-form real roots of cubic polynomials."""

from __future__ import annotations

import math


def _polish(t: float, p: float, q: float, steps: int = 2) -> float:
    # Newton refinement on t^3 + p t + q; the closed form loses digits near repeated roots
    for _ in range(steps):
        f = (t * t + p) * t + q
        df = 3 * t * t + p
        if df == 0.0 or f == 0.0:
            break
        step = f / df
        if not math.isfinite(step):
            break
        t -= step
    return t


def depressed_cubic_roots(p: float, q: float) -> list[float]:
    """Real roots of ``t**3 + p*t + q = 0``, ascending, repeated roots reported once."""
    if not (math.isfinite(p) and math.isfinite(q)):
        raise ValueError("cubic coefficients must be finite")
    # rescale t = s * tau so that the coefficients are O(1); the discriminant scales
    # as s**6, so keep s where that power cannot under- or overflow
    s = max(math.sqrt(abs(p)), abs(q) ** (1.0 / 3.0))
    if s > 0.0 and not 1e-40 < s < 1e40:
        # polish in the original coordinates: a root far below s may have underflowed to 0
        return sorted(_polish(s * t, p, q) for t in depressed_cubic_roots(p / s / s, q / s / s / s))
    if q == 0.0:
        if p >= 0.0:
            return [0.0]
        r = math.sqrt(-p)
        return [-r, 0.0, r]
    if p == 0.0:
        return [math.copysign(abs(q) ** (1.0 / 3.0), -q)]
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if p > 0.0 or disc > 0.0:
        # one real root; pick the cube root that avoids cancellation
        s = math.sqrt(disc)
        inner = -q / 2.0 - s if q >= 0 else -q / 2.0 + s
        u = math.copysign(abs(inner) ** (1.0 / 3.0), inner)
        v = -p / (3.0 * u)
        # t = u + v = -q / (u^2 - u v + v^2) avoids cancelling u against v
        roots = [-q / (u * u + p / 3.0 + v * v)]
    else:
        # p < 0 here: trigonometric form
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        phi = math.acos(max(-1.0, min(1.0, arg))) / 3.0
        roots = sorted((m * math.cos(phi - 2.0 * math.pi * k / 3.0) for k in range(3)), key=abs)
        # the smallest root cancels in the cosine form; recover it from t1 t2 t3 = -q
        if roots[1] * roots[2] != 0.0:
            roots[0] = -q / (roots[1] * roots[2])
    roots = sorted(_polish(t, p, q) for t in roots)
    out: list[float] = []
    scale = max(1.0, *(abs(t) for t in roots))
    for t in roots:
        if not out or abs(t - out[-1]) > 1e-12 * scale:
            out.append(t)
    return out


def cubic_roots(a: float, b: float, c: float, d: float) -> list[float]:
    """Real roots of ``a x^3 + b x^2 + c x + d`` via the depressed form (``a != 0``)."""
    if a == 0.0:
        raise ValueError("leading coefficient must be non-zero")
    b, c, d = b / a, c / a, d / a
    shift = b / 3.0
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d
    return [t - shift for t in depressed_cubic_roots(p, q)]
