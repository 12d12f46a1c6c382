"""Classical kicked dynamics on R^4 x S^2.

One period applies, in order: a y-kick, an x-kick, then harmonic evolution.
Composing the three sub-maps gives the closed-form map implemented in
:func:`step` (with a = lam*q_y, b = lam*q_x):

    q_x -> (p_x - lam*(s_x cos a + s_z sin a)) sin w + q_x cos w
    p_x -> (p_x - lam*(s_x cos a + s_z sin a)) cos w - q_x sin w
    q_y -> (p_y - lam*s_y) sin w + q_y cos w
    p_y -> (p_y - lam*s_y) cos w - q_y sin w
    s   -> R_z(delta) . R_x(b) . R_y(a) . s

where R_y(a) is the spin rotation generated by the y-kick, R_x(b) by the
x-kick and R_z(delta) by the free evolution.  The closed form is normative;
the sub-maps are kept because their composition is the natural correctness
oracle and they are what an experiment would realise pulse by pulse.

All functions are pure; spin is carried in Cartesian components so the map
itself has no coordinate singularity at the spin poles.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import PoleProximity
from .model import ValidatedConfig

SPIN_RADIUS_SQ = 0.25
_SPIN_NORM_TOL = 1e-9


@dataclass(frozen=True)
class SpinVector:
    """Classical pseudo-spin on the radius-1/2 sphere."""

    s_x: float
    s_y: float
    s_z: float

    def __post_init__(self):
        n = self.s_x * self.s_x + self.s_y * self.s_y + self.s_z * self.s_z
        if not abs(n - SPIN_RADIUS_SQ) <= _SPIN_NORM_TOL:
            raise ValueError(f"spin norm^2 = {n!r}, expected 1/4")

    @classmethod
    def from_angles(cls, phi: float, s_z: float) -> "SpinVector":
        """Spin from azimuth phi and axial component s_z (|s_z| <= 1/2)."""
        r = math.sqrt(max(SPIN_RADIUS_SQ - s_z * s_z, 0.0))
        return cls(r * math.cos(phi), r * math.sin(phi), s_z)

    def norm(self) -> float:
        return math.sqrt(self.s_x ** 2 + self.s_y ** 2 + self.s_z ** 2)

    def as_array(self) -> np.ndarray:
        return np.array([self.s_x, self.s_y, self.s_z])


@dataclass(frozen=True)
class OscillatorPoint:
    """Positions and momenta of the two oscillator modes."""

    q_x: float
    q_y: float
    p_x: float
    p_y: float

    def __post_init__(self):
        for name in ("q_x", "q_y", "p_x", "p_y"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.q_x, self.q_y, self.p_x, self.p_y])


@dataclass(frozen=True)
class PhasePoint:
    """A point of the classical phase space R^4 x S^2."""

    osc: OscillatorPoint
    spin: SpinVector

    @classmethod
    def from_values(cls, q_x, q_y, p_x, p_y, s_x, s_y, s_z) -> "PhasePoint":
        return cls(OscillatorPoint(q_x, q_y, p_x, p_y), SpinVector(s_x, s_y, s_z))

    def as_array(self) -> np.ndarray:
        """Cartesian 7-vector (q_x, q_y, p_x, p_y, s_x, s_y, s_z)."""
        return np.concatenate([self.osc.as_array(), self.spin.as_array()])


@dataclass(frozen=True)
class Trajectory:
    """Ordered orbit segment; element 0 is the initial condition."""

    points: tuple[PhasePoint, ...]

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, k: int) -> PhasePoint:
        return self.points[k]

    def positions(self) -> np.ndarray:
        """(n+1, 2) array of the visited (q_x, q_y)."""
        return np.array([(p.osc.q_x, p.osc.q_y) for p in self.points])


class SubMap(enum.Enum):
    KICK_Y = "kick_y"
    KICK_X = "kick_x"
    HARMONIC = "harmonic"


def _spin_rotation_coeffs(a, b, delta):
    """Rows of the 3x3 spin matrix of the composed map.

    a = lam*q_y, b = lam*q_x evaluated at the pre-step point.
    """
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cd, sd = np.cos(delta), np.sin(delta)
    row_x = (cd * ca - sd * sb * sa, -sd * cb, cd * sa + sd * sb * ca)
    row_y = (cd * sb * sa + sd * ca, cd * cb, -cd * sb * ca + sd * sa)
    row_z = (-sa * cb, sb, ca * cb)
    return row_x, row_y, row_z


def spin_rotation_matrix(q_x: float, q_y: float, cfg: ValidatedConfig) -> np.ndarray:
    """3x3 matrix acting on (s_x, s_y, s_z) in one step; orthogonal, det +1.

    Its coefficients depend only on (q_x, q_y) and the parameters.
    """
    rows = _spin_rotation_coeffs(cfg.lam * q_y, cfg.lam * q_x, cfg.delta)
    return np.array(rows, dtype=float)


def step_arrays(q_x, q_y, p_x, p_y, s_x, s_y, s_z, omega, delta, lam):
    """Vectorised closed-form map; accepts scalars or broadcastable arrays."""
    a = lam * q_y
    b = lam * q_x
    cw, sw = np.cos(omega), np.sin(omega)
    kick_x = lam * (s_x * np.cos(a) + s_z * np.sin(a))
    kick_y = lam * s_y
    px_mid = p_x - kick_x
    py_mid = p_y - kick_y
    q_x_n = px_mid * sw + q_x * cw
    p_x_n = px_mid * cw - q_x * sw
    q_y_n = py_mid * sw + q_y * cw
    p_y_n = py_mid * cw - q_y * sw
    row_x, row_y, row_z = _spin_rotation_coeffs(a, b, delta)
    s_x_n = row_x[0] * s_x + row_x[1] * s_y + row_x[2] * s_z
    s_y_n = row_y[0] * s_x + row_y[1] * s_y + row_y[2] * s_z
    s_z_n = row_z[0] * s_x + row_z[1] * s_y + row_z[2] * s_z
    return q_x_n, q_y_n, p_x_n, p_y_n, s_x_n, s_y_n, s_z_n


def step(state: PhasePoint, cfg: ValidatedConfig) -> PhasePoint:
    """Apply the closed-form composed map once."""
    o, s = state.osc, state.spin
    out = step_arrays(o.q_x, o.q_y, o.p_x, o.p_y, s.s_x, s.s_y, s.s_z,
                      cfg.omega, cfg.delta, cfg.lam)
    return PhasePoint.from_values(*(float(v) for v in out))


def submap(kind: SubMap, state: PhasePoint, cfg: ValidatedConfig) -> PhasePoint:
    """One of the three elementary maps whose composition equals :func:`step`."""
    o, s = state.osc, state.spin
    lam = cfg.lam
    if kind is SubMap.KICK_Y:
        a = lam * o.q_y
        ca, sa = math.cos(a), math.sin(a)
        return PhasePoint.from_values(
            o.q_x, o.q_y, o.p_x, o.p_y - lam * s.s_y,
            s.s_x * ca + s.s_z * sa, s.s_y, -s.s_x * sa + s.s_z * ca)
    if kind is SubMap.KICK_X:
        b = lam * o.q_x
        cb, sb = math.cos(b), math.sin(b)
        return PhasePoint.from_values(
            o.q_x, o.q_y, o.p_x - lam * s.s_x, o.p_y,
            s.s_x, s.s_y * cb - s.s_z * sb, s.s_y * sb + s.s_z * cb)
    if kind is SubMap.HARMONIC:
        cw, sw = math.cos(cfg.omega), math.sin(cfg.omega)
        cd, sd = math.cos(cfg.delta), math.sin(cfg.delta)
        return PhasePoint.from_values(
            o.q_x * cw + o.p_x * sw, o.q_y * cw + o.p_y * sw,
            o.p_x * cw - o.q_x * sw, o.p_y * cw - o.q_y * sw,
            s.s_x * cd - s.s_y * sd, s.s_x * sd + s.s_y * cd, s.s_z)
    raise ValueError(f"unknown sub-map {kind!r}")


def composed_step(state: PhasePoint, cfg: ValidatedConfig) -> PhasePoint:
    """Harmonic o KickX o KickY; must agree with :func:`step` to 1e-10."""
    out = submap(SubMap.KICK_Y, state, cfg)
    out = submap(SubMap.KICK_X, out, cfg)
    return submap(SubMap.HARMONIC, out, cfg)


def _inverse_submap(kind: SubMap, state: PhasePoint, cfg: ValidatedConfig) -> PhasePoint:
    o, s = state.osc, state.spin
    lam = cfg.lam
    if kind is SubMap.KICK_Y:
        # q_y and s_y are conserved by the forward kick, so both the momentum
        # shift and the rotation angle can be undone from the image point.
        a = lam * o.q_y
        ca, sa = math.cos(a), math.sin(a)
        return PhasePoint.from_values(
            o.q_x, o.q_y, o.p_x, o.p_y + lam * s.s_y,
            s.s_x * ca - s.s_z * sa, s.s_y, s.s_x * sa + s.s_z * ca)
    if kind is SubMap.KICK_X:
        b = lam * o.q_x
        cb, sb = math.cos(b), math.sin(b)
        return PhasePoint.from_values(
            o.q_x, o.q_y, o.p_x + lam * s.s_x, o.p_y,
            s.s_x, s.s_y * cb + s.s_z * sb, -s.s_y * sb + s.s_z * cb)
    if kind is SubMap.HARMONIC:
        cw, sw = math.cos(cfg.omega), math.sin(cfg.omega)
        cd, sd = math.cos(cfg.delta), math.sin(cfg.delta)
        return PhasePoint.from_values(
            o.q_x * cw - o.p_x * sw, o.q_y * cw - o.p_y * sw,
            o.p_x * cw + o.q_x * sw, o.p_y * cw + o.q_y * sw,
            s.s_x * cd + s.s_y * sd, -s.s_x * sd + s.s_y * cd, s.s_z)
    raise ValueError(f"unknown sub-map {kind!r}")


def inverse_step(state: PhasePoint, cfg: ValidatedConfig) -> PhasePoint:
    """Inverse sub-maps applied in reverse order."""
    out = _inverse_submap(SubMap.HARMONIC, state, cfg)
    out = _inverse_submap(SubMap.KICK_X, out, cfg)
    return _inverse_submap(SubMap.KICK_Y, out, cfg)


def iterate(state: PhasePoint, n: int, cfg: ValidatedConfig) -> Trajectory:
    """Orbit segment of n steps; returned trajectory has length n + 1."""
    if n < 0:
        raise ValueError("iteration count must be >= 0")
    points = [state]
    current = state
    for _ in range(n):
        current = step(current, cfg)
        points.append(current)
    return Trajectory(tuple(points))


# --- canonical chart -------------------------------------------------------
#
# (q_x, p_x, q_y, p_y, phi, s_z) with phi = atan2(s_y, s_x) is canonical for
# the symplectic form dq^dp + dphi^ds_z, so one map step has unit Jacobian
# determinant there.  The chart degenerates at the spin poles.

POLE_GUARD = 0.5 - 1e-6


def to_canonical(state: PhasePoint) -> np.ndarray:
    s = state.spin
    if abs(s.s_z) >= POLE_GUARD:
        raise PoleProximity(f"|s_z| = {abs(s.s_z)!r} too close to 1/2 for the canonical chart")
    phi = math.atan2(s.s_y, s.s_x)
    o = state.osc
    return np.array([o.q_x, o.p_x, o.q_y, o.p_y, phi, s.s_z])


def from_canonical(vec: Iterable[float]) -> PhasePoint:
    q_x, p_x, q_y, p_y, phi, s_z = (float(v) for v in vec)
    if abs(s_z) >= 0.5:
        raise PoleProximity(f"|s_z| = {abs(s_z)!r} leaves the canonical chart")
    return PhasePoint(OscillatorPoint(q_x, q_y, p_x, p_y), SpinVector.from_angles(phi, s_z))


def _wrap_angle(x: np.ndarray | float):
    return (x + math.pi) % (2.0 * math.pi) - math.pi


def jacobian_canonical(state: PhasePoint, cfg: ValidatedConfig) -> np.ndarray:
    """Central finite-difference Jacobian of one step in the canonical chart.

    Raises PoleProximity when |s_z| >= 1/2 - 1e-6, where the chart degenerates.
    The determinant equals 1 to ~1e-6 (area preservation).
    """
    center = to_canonical(state)
    h = cfg.fd_step
    jac = np.empty((6, 6))
    for j in range(6):
        plus = center.copy()
        minus = center.copy()
        plus[j] += h
        minus[j] -= h
        fp = to_canonical(step(from_canonical(plus), cfg))
        fm = to_canonical(step(from_canonical(minus), cfg))
        diff = fp - fm
        diff[4] = _wrap_angle(diff[4])
        jac[:, j] = diff / (2.0 * h)
    return jac
