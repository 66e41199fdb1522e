"""Phase-space points for the two- and three-mode condensate manifolds.

A pure condensate of N particles in M modes is labelled by normalized complex
mode amplitudes psi with a fixed global phase, i.e. a point on CP^(M-1).  Two
coordinate charts are used throughout the package:

* M = 2: (p, q) with p = |psi_2|^2 the population of the second mode and
  q = arg(psi_1) - arg(psi_2) the relative phase, so psi = (sqrt(1-p),
  sqrt(p) e^{-iq}) up to a global phase.
* M = 3: (p1, p3, q1, q3) with pk = |psi_k|^2 and qk = arg(psi_2) - arg(psi_k)
  for k = 1, 3; the middle mode is the phase reference.

The amplitude representation is the primary one (it is regular everywhere,
including the simplex corners where the coordinate charts are singular); the
coordinates are derived views.
"""

from __future__ import annotations

import numpy as np

NORM_TOL = 1e-9
_TWO_PI = 2.0 * np.pi

# reference mode whose amplitude phase is rotated to zero (0-based)
_REF_MODE = {2: 0, 3: 1}


class PhasePoint:
    """A point on the mean-field phase space, stored as mode amplitudes.

    The constructor normalizes away rounding-level deviations of the norm and
    fixes the global phase so that the reference mode amplitude is real and
    non-negative (mode 1 for M=2, mode 2 for M=3).  If the reference amplitude
    vanishes, the first mode of largest magnitude is used instead.
    """

    __slots__ = ("psi",)

    def __init__(self, psi):
        psi = np.asarray(psi, dtype=complex)
        if psi.ndim != 1 or psi.size not in (2, 3):
            raise ValueError("amplitude vector must have 2 or 3 entries")
        if not np.all(np.isfinite(psi)):
            raise ValueError("amplitudes must be finite")
        norm = np.linalg.norm(psi)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"amplitudes not normalized: |psi|^2 = {norm**2!r}")
        psi = psi / norm
        ref = _REF_MODE[psi.size]
        if abs(psi[ref]) < 1e-15:
            ref = int(np.argmax(np.abs(psi)))
        phase = psi[ref] / abs(psi[ref])
        self.psi = psi * phase.conjugate()

    # -- constructors -------------------------------------------------------

    @classmethod
    def from_pq(cls, p: float, q: float) -> "PhasePoint":
        """Two-mode point from (p, q); p in [0, 1], q taken mod 2*pi."""
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p!r}")
        return cls([np.sqrt(1.0 - p), np.sqrt(p) * np.exp(-1j * q)])

    @classmethod
    def from_trimer(cls, p1: float, p3: float, q1: float, q3: float) -> "PhasePoint":
        """Three-mode point from (p1, p3, q1, q3) on the occupation simplex."""
        if p1 < 0 or p3 < 0 or p1 + p3 > 1.0 + 1e-12:
            raise ValueError(f"(p1, p3) = ({p1!r}, {p3!r}) outside the simplex")
        p2 = max(1.0 - p1 - p3, 0.0)
        return cls(
            [
                np.sqrt(p1) * np.exp(-1j * q1),
                np.sqrt(p2),
                np.sqrt(p3) * np.exp(-1j * q3),
            ]
        )

    # -- views --------------------------------------------------------------

    @property
    def modes(self) -> int:
        return self.psi.size

    @property
    def occupations(self) -> np.ndarray:
        return np.abs(self.psi) ** 2

    @property
    def p(self) -> float:
        if self.modes != 2:
            raise ValueError("p is a two-mode coordinate")
        return float(abs(self.psi[1]) ** 2)

    @property
    def q(self) -> float:
        """Relative phase arg(psi_1) - arg(psi_2), in [0, 2*pi)."""
        if self.modes != 2:
            raise ValueError("q is a two-mode coordinate")
        return _rel_phase(self.psi[0], self.psi[1])

    @property
    def p1(self) -> float:
        self._require_trimer()
        return float(abs(self.psi[0]) ** 2)

    @property
    def p3(self) -> float:
        self._require_trimer()
        return float(abs(self.psi[2]) ** 2)

    @property
    def q1(self) -> float:
        self._require_trimer()
        return _rel_phase(self.psi[1], self.psi[0])

    @property
    def q3(self) -> float:
        self._require_trimer()
        return _rel_phase(self.psi[1], self.psi[2])

    def coordinates(self) -> np.ndarray:
        """(p, q) for M=2, (p1, p3, q1, q3) for M=3."""
        if self.modes == 2:
            return np.array([self.p, self.q])
        return np.array([self.p1, self.p3, self.q1, self.q3])

    def _require_trimer(self):
        if self.modes != 3:
            raise ValueError("three-mode coordinate requested on a two-mode point")

    def __repr__(self):
        coords = ", ".join(f"{c:.6g}" for c in self.coordinates())
        return f"PhasePoint(M={self.modes}; {coords})"


def _rel_phase(a: complex, b: complex) -> float:
    """arg(a) - arg(b) wrapped to [0, 2*pi); 0 if either amplitude vanishes."""
    if abs(a) < 1e-15 or abs(b) < 1e-15:
        return 0.0
    return float(np.mod(np.angle(a) - np.angle(b), _TWO_PI))
