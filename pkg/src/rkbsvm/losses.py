"""Piecewise margin losses and their exact scalar proximal maps.

A loss is a function of the margin u = y * t, given as an ordered list of
pieces covering the real line. Each piece is one of

* ``affine``:    a*u + b            coeffs (a, b)
* ``quadratic``: q*u**2 + a*u + b   coeffs (q, a, b)
* ``log``:       ln(a - u) + b      coeffs (a, b), needs the piece to sit left of ``a``

The proximal step minimizes L(y, alpha) / N + beta/2 (alpha - e)^2 by listing
the stationary point(s) of every piece, clipped to that piece, together with
all breakpoints, and keeping the best one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

PIECE_KINDS = ("affine", "quadratic", "log")
PROPERTY_FLAGS = ("lower_semi_continuous", "continuous_at_zero", "zero_not_stationary")
_ARITY = {"affine": 2, "quadratic": 3, "log": 2}
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class UnsupportedPieceError(ValueError):
    pass


@dataclass(frozen=True)
class Piece:
    kind: str
    coeffs: tuple
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool

    def __post_init__(self):
        if self.kind not in PIECE_KINDS:
            raise UnsupportedPieceError(f"unsupported piece kind {self.kind!r}; expected one of {PIECE_KINDS}")
        if len(self.coeffs) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind} piece takes {_ARITY[self.kind]} coefficients, got {len(self.coeffs)}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.lo < self.hi:
            raise ValueError(f"empty piece interval [{self.lo}, {self.hi}]")
        if self.kind == "log" and not self.hi < self.coeffs[0]:
            raise ValueError("log piece ln(a - u) must end strictly left of a")

    def value(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "affine":
            a, b = self.coeffs
            return a * u + b
        if self.kind == "quadratic":
            q, a, b = self.coeffs
            return (q * u + a) * u + b
        a, b = self.coeffs
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.log(a - u) + b

    def contains(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        left = u >= self.lo if self.lo_closed else u > self.lo
        right = u <= self.hi if self.hi_closed else u < self.hi
        return left & right

    def stationary(self, target: np.ndarray, s: float) -> list[np.ndarray]:
        """Zeros of piece'(u) + s (u - target), unclipped; NaN where none exist."""
        if self.kind == "affine":
            a, _ = self.coeffs
            return [target - a / s]
        if self.kind == "quadratic":
            q, a, _ = self.coeffs
            curv = 2.0 * q + s
            if curv <= 0.0:
                # concave or flat on this piece: only the endpoints matter
                return []
            return [(s * target - a) / curv]
        # -1/(a - u) + s (u - target) = 0  <=>  u^2 - (a + target) u + a target + 1/s = 0
        a, _ = self.coeffs
        disc = (a - target) ** 2 - 4.0 / s
        with np.errstate(invalid="ignore"):
            root = np.sqrt(disc)
        roots = []
        for r in ((a + target) - root) / 2.0, ((a + target) + root) / 2.0:
            roots.append(np.where((disc >= 0.0) & (r < a), r, np.nan))
        return roots

    def clip(self, u: np.ndarray) -> np.ndarray:
        return np.clip(u, self.lo, self.hi)


@dataclass(frozen=True)
class LossSpec:
    """Lower semi-continuous loss of the margin, built from ``Piece`` objects.

    ``declared_properties`` records what the caller asserts about the loss
    (lower semi-continuity, continuity at zero, zero not stationary); those
    claims are stored, not verified.
    """

    name: str
    pieces: tuple
    declared_properties: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        pieces = tuple(self.pieces)
        if not pieces:
            raise ValueError("a loss needs at least one piece")
        if pieces[0].lo != -math.inf or pieces[-1].hi != math.inf:
            raise ValueError("pieces must cover the whole real line")
        for left, right in zip(pieces, pieces[1:]):
            if left.hi != right.lo:
                raise ValueError(f"gap or overlap between pieces at {left.hi} / {right.lo}")
            if left.hi_closed == right.lo_closed:
                raise ValueError(f"breakpoint {left.hi} must belong to exactly one piece")
        unknown = set(self.declared_properties) - set(PROPERTY_FLAGS)
        if unknown:
            raise ValueError(f"unknown property flags {sorted(unknown)}")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "declared_properties", frozenset(self.declared_properties))
        self._check_nonnegative()

    @property
    def breakpoints(self) -> tuple:
        return tuple(p.hi for p in self.pieces[:-1])

    def _check_nonnegative(self):
        probes = []
        for p in self.pieces:
            lo = p.lo if math.isfinite(p.lo) else (p.hi if math.isfinite(p.hi) else 0.0) - 1e6
            hi = p.hi if math.isfinite(p.hi) else (p.lo if math.isfinite(p.lo) else 0.0) + 1e6
            pts = list(np.linspace(lo, hi, 65))
            if p.kind == "quadratic" and p.coeffs[0] != 0.0:
                pts.append(-p.coeffs[1] / (2.0 * p.coeffs[0]))
            pts = np.clip(np.array(pts), lo, hi)
            probes.append(p.value(pts))
        if min(float(np.min(v)) for v in probes) < -1e-12:
            raise ValueError(f"loss {self.name!r} takes negative values")

    def evaluate_margin(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape, np.nan)
        for p in self.pieces:
            mask = p.contains(u)
            if np.any(mask):
                out[mask] = p.value(u[mask])
        return out

    def evaluate(self, y, t) -> np.ndarray:
        return self.evaluate_margin(np.asarray(y, dtype=float) * np.asarray(t, dtype=float))

    def __call__(self, y, t):
        out = self.evaluate(y, t)
        return float(out) if np.ndim(out) == 0 else out

    @classmethod
    def from_breakpoints(cls, name: str, breakpoints: Sequence[float], pieces: Sequence[tuple],
                         closed: str = "right", properties: Iterable[str] = ()) -> "LossSpec":
        """Build a loss from sorted breakpoints and one ``(kind, coeffs)`` per interval.

        ``closed="right"`` puts every breakpoint in the piece to its right,
        the convention behind branches written as ``yt - 1 >= 0``.
        """
        bps = [float(b) for b in breakpoints]
        if sorted(bps) != bps or len(set(bps)) != len(bps):
            raise ValueError("breakpoints must be strictly increasing")
        if len(pieces) != len(bps) + 1:
            raise ValueError(f"{len(bps)} breakpoints need {len(bps) + 1} pieces, got {len(pieces)}")
        if closed not in ("left", "right"):
            raise ValueError("closed must be 'left' or 'right'")
        edges = [-math.inf] + bps + [math.inf]
        out = []
        for k, (kind, coeffs) in enumerate(pieces):
            lo, hi = edges[k], edges[k + 1]
            lo_closed = closed == "right" and math.isfinite(lo)
            hi_closed = closed == "left" and math.isfinite(hi)
            out.append(Piece(kind, tuple(coeffs), lo, hi, lo_closed, hi_closed))
        return cls(name, tuple(out), frozenset(properties))

    @classmethod
    def from_config(cls, block: dict) -> "LossSpec":
        """Build a user loss from a config mapping.

        Expected keys: ``name``, ``breakpoints`` (list), ``pieces`` (list of
        ``{"kind": ..., "coeffs": [...]}``), optional ``closed`` and
        ``properties``.
        """
        try:
            pieces = [(p["kind"], p["coeffs"]) for p in block["pieces"]]
            return cls.from_breakpoints(block.get("name", "custom"), block.get("breakpoints", []), pieces,
                                        block.get("closed", "right"), block.get("properties", ()))
        except KeyError as exc:
            raise ValueError(f"loss config is missing key {exc}") from None


_ALL_FLAGS = frozenset(PROPERTY_FLAGS)

HINGE = LossSpec.from_breakpoints("hinge", [1.0], [("affine", (-1.0, 1.0)), ("affine", (0.0, 0.0))],
                                  properties=_ALL_FLAGS)
SQUARED_HINGE = LossSpec.from_breakpoints("squared-hinge", [1.0],
                                          [("quadratic", (1.0, -2.0, 1.0)), ("affine", (0.0, 0.0))],
                                          properties=_ALL_FLAGS)
LOG_PIECEWISE = LossSpec.from_breakpoints("log-piecewise", [1.0], [("log", (2.0, 0.0)), ("affine", (0.0, 0.0))],
                                          properties=_ALL_FLAGS)
RAMP2 = LossSpec.from_breakpoints("ramp2", [0.0, 1.0],
                                  [("affine", (-1.0, 2.0)), ("affine", (-2.0, 2.0)), ("affine", (0.0, 0.0))],
                                  properties=_ALL_FLAGS)

BUILTIN_LOSSES = {loss.name: loss for loss in (HINGE, SQUARED_HINGE, LOG_PIECEWISE, RAMP2)}
# short aliases L1..L4 in the order the four losses are usually listed
ALIASES = {"l1": "hinge", "l2": "squared-hinge", "l3": "log-piecewise", "l4": "ramp2"}


def get_loss(name: str) -> LossSpec:
    key = ALIASES.get(name.lower(), name.lower())
    try:
        return BUILTIN_LOSSES[key]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; choose from {sorted(BUILTIN_LOSSES)}") from None


def loss_eval(loss: LossSpec, y, t) -> float:
    return loss(y, t)


def prox_objective(loss: LossSpec, y, alpha, e, beta: float, N: int):
    """L(y, alpha) / N + beta/2 (alpha - e)^2."""
    alpha = np.asarray(alpha, dtype=float)
    return loss.evaluate(y, alpha) / N + 0.5 * beta * (alpha - np.asarray(e, dtype=float)) ** 2


def prox_vector(loss: LossSpec, y, e, beta: float, N: int) -> np.ndarray:
    """Coordinatewise global minimizers of L(y_i, a)/N + beta/2 (a - e_i)^2.

    Ties go to the candidate closest to ``e_i``, then to the smallest margin
    ``y_i * alpha`` (the smallest alpha when ``y_i = +1``).
    """
    if not beta > 0 or N < 1:
        raise ValueError("need beta > 0 and N >= 1")
    y = np.asarray(y, dtype=float)
    e = np.asarray(e, dtype=float)
    y, e = np.broadcast_arrays(y, e)
    target = y * e  # the problem in margin units: same distance, same loss
    s = beta * N

    cands = []
    for p in loss.pieces:
        for u in p.stationary(target, s):
            cands.append(p.clip(u))
    for b in loss.breakpoints:
        cands.append(np.full(target.shape, b))
    U = np.stack(cands, axis=-1)

    dist = np.abs(U - target[..., None])
    with np.errstate(invalid="ignore"):
        obj = loss.evaluate_margin(U) / N + 0.5 * beta * dist**2
    obj = np.where(np.isnan(obj), np.inf, obj)

    best = obj.min(axis=-1, keepdims=True)
    tied = obj == best
    d = np.where(tied, dist, np.inf)
    tied &= d == d.min(axis=-1, keepdims=True)
    # last resort: smallest margin, which keeps the map odd under (y, e) -> (-y, -e)
    return y * np.where(tied, U, np.inf).min(axis=-1)


def prox_step(loss: LossSpec, y: float, e: float, beta: float, N: int) -> float:
    """Scalar proximal step; see ``prox_vector``."""
    return float(prox_vector(loss, y, e, beta, N))


def _golden_min(fun, lo: float, hi: float, tol: float = 1e-13, max_iter: int = 200) -> float:
    a, b = lo, hi
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(max_iter):
        if b - a <= tol * (1.0 + abs(a) + abs(b)):
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fun(x2)
    return x1 if f1 <= f2 else x2


def prox_oracle_grid(loss: LossSpec, y: float, e: float, beta: float, N: int,
                     lo: float, hi: float, step: float) -> float:
    """Brute-force prox: grid search on [lo, hi], then golden-section polish.

    Used to check ``prox_step``; it shares no code with the candidate
    enumeration beyond evaluating the loss.
    """
    need_lo, need_hi = min(e, -3.0) - 2.0, max(e, 3.0) + 2.0
    if not (lo < hi and step > 0):
        raise ValueError("need lo < hi and step > 0")
    if lo > need_lo or hi < need_hi:
        raise ValueError(f"grid [{lo}, {hi}] must contain [{need_lo}, {need_hi}]")

    def obj(a):
        return float(prox_objective(loss, y, a, e, beta, N))

    n = int(math.floor((hi - lo) / step)) + 1
    grid = lo + step * np.arange(n)
    vals = prox_objective(loss, y, grid, e, beta, N)
    g = float(grid[int(np.argmin(vals))])

    # polish inside [g - step, g + step], split at breakpoints (in alpha units)
    cuts = sorted({g - step, g + step} | {y * b for b in loss.breakpoints if g - step < y * b < g + step})
    best_a, best_v = g, obj(g)
    for a0, a1 in zip(cuts, cuts[1:]):
        for a in (a0, a1, _golden_min(obj, a0, a1)):
            v = obj(a)
            if v < best_v:
                best_a, best_v = a, v
    return best_a
