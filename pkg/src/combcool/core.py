"""State containers and unit conventions shared by the whole simulator.

Everything downstream works in dimensionless units: angular frequencies are
multiples of a single positive reference frequency, times are multiples of its
inverse, and hbar = 1.  The three-level basis is fixed as

    |1>  weakly bound initial (Feshbach) state
    |2>  excited intermediate state
    |3>  deeply bound target (ultracold) state

with E3 < E1 < E2, so omega31 = omega32 - omega21 > 0.  Indices in names and
file formats are 1-based to match the level labels.

The density matrix is stored as the real diagonal plus the upper triangle of
coherences, which makes Hermiticity and real populations structural instead of
numerical properties.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CONVENTIONS",
    "DEFAULT_CONVENTION",
    "DecoherenceRates",
    "DensityMatrix",
    "FrequencyUnit",
    "LevelSystem",
    "RateRelationViolation",
    "Trajectory",
    "hermitian_defect",
    "trace",
]

# Dimensionless-unit conventions for interpreting quoted laboratory values.
# 'angular'  : a value quoted in THz is already an angular frequency in
#              10^12 rad/s, so t_dimless = t_seconds * value * 1e12.
# 'ordinary' : a value quoted in THz is an ordinary frequency in 10^12 Hz and
#              the reference angular frequency carries an extra 2*pi.
CONVENTIONS = ("angular", "ordinary")
DEFAULT_CONVENTION = "angular"

#: Absolute tolerance for the Lambda ladder identity omega31 = omega32 - omega21.
LADDER_TOL = 1e-9

#: Absolute tolerance for the dephasing-rate relation Gamma23 = Gamma21 + Gamma31.
RATE_RELATION_TOL = 1e-12


class RateRelationViolation(ValueError):
    """The dephasing rates break Gamma23 = Gamma21 + Gamma31 while enforcement is on."""


@dataclass(frozen=True)
class FrequencyUnit:
    """Reference angular frequency (rad/s) defining the dimensionless unit system.

    All dimensionless frequencies in a scenario are multiples of this
    reference; all dimensionless times are real time multiplied by it.
    """

    reference_angular_frequency: float

    def __post_init__(self) -> None:
        if not self.reference_angular_frequency > 0.0:
            raise ValueError(
                f"reference angular frequency must be positive, got "
                f"{self.reference_angular_frequency!r}"
            )

    @classmethod
    def from_terahertz(cls, value_thz: float, convention: str = DEFAULT_CONVENTION) -> "FrequencyUnit":
        """Build the unit from a quoted THz value under the chosen convention."""
        if convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {convention!r}, expected one of {CONVENTIONS}")
        scale = 1.0 if convention == "angular" else 2.0 * math.pi
        return cls(reference_angular_frequency=value_thz * 1e12 * scale)

    def time_from_seconds(self, seconds: float) -> float:
        """Convert a real time in seconds to dimensionless units."""
        return seconds * self.reference_angular_frequency

    def period_from_rep_rate(self, rep_rate_hz: float) -> float:
        """Dimensionless pulse-train period for a repetition rate in Hz."""
        if not rep_rate_hz > 0.0:
            raise ValueError("repetition rate must be positive")
        return self.time_from_seconds(1.0 / rep_rate_hz)


@dataclass(frozen=True)
class LevelSystem:
    """Transition frequencies of the Lambda ladder, in reference units.

    omega21 and omega32 are the two driven one-photon transitions; omega31 is
    the undriven two-photon splitting between the initial and target states.
    The ladder identity omega31 = omega32 - omega21 is enforced at
    construction within LADDER_TOL.
    """

    omega21: float
    omega32: float
    omega31: float

    def __post_init__(self) -> None:
        for name in ("omega21", "omega32", "omega31"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        defect = abs(self.omega31 - (self.omega32 - self.omega21))
        if defect > LADDER_TOL:
            raise ValueError(
                "inconsistent Lambda ladder: omega32 - omega21 = "
                f"{self.omega32 - self.omega21!r} but omega31 = {self.omega31!r} "
                f"(defect {defect:.3e} > {LADDER_TOL:.0e})"
            )

    @classmethod
    def from_transitions(cls, omega21: float, omega32: float) -> "LevelSystem":
        """Build from the two driven transitions, deriving the 1-3 splitting."""
        return cls(omega21, omega32, omega32 - omega21)

    def transition_frequency(self, j: int, i: int) -> float:
        """omega_ji for the driven pairs (2,1) and (3,2)."""
        if (j, i) == (2, 1):
            return self.omega21
        if (j, i) == (3, 2):
            return self.omega32
        raise ValueError(f"no driven transition for index pair ({j}, {i})")


@dataclass(frozen=True)
class DecoherenceRates:
    """Spontaneous-emission and collisional-dephasing rates, in reference units.

    gamma21 / gamma23 are population decay rates of the excited state into
    levels 1 and 3.  Gamma21 / Gamma31 / Gamma23 are pure dephasing rates of
    the corresponding coherences; symmetric index pairs (e.g. Gamma12 and
    Gamma21) are the same physical rate and are stored once.  For elastic
    collisions that leave the 1-3 coherence untouched the rates satisfy
    Gamma23 = Gamma21 + Gamma31; construction checks this only when
    enforce_relation is set, propagation checks it unless explicitly waived.
    """

    gamma21: float = 0.0
    gamma23: float = 0.0
    Gamma21: float = 0.0
    Gamma31: float = 0.0
    Gamma23: float = 0.0
    enforce_relation: bool = False

    def __post_init__(self) -> None:
        for name in ("gamma21", "gamma23", "Gamma21", "Gamma31", "Gamma23"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative, got {getattr(self, name)!r}")
        if self.enforce_relation and abs(self.relation_deviation()) > RATE_RELATION_TOL:
            raise RateRelationViolation(
                f"Gamma23 = {self.Gamma23!r} deviates from Gamma21 + Gamma31 = "
                f"{self.Gamma21 + self.Gamma31!r} by {self.relation_deviation():.3e}"
            )

    @classmethod
    def none(cls) -> "DecoherenceRates":
        """All rates zero (closed-system dynamics)."""
        return cls()

    def relation_deviation(self) -> float:
        """Signed deviation Gamma23 - (Gamma21 + Gamma31)."""
        return self.Gamma23 - (self.Gamma21 + self.Gamma31)

    @property
    def gamma2_total(self) -> float:
        """Total population decay rate of the excited state."""
        return self.gamma21 + self.gamma23

    @property
    def any_nonzero(self) -> bool:
        return any(
            getattr(self, name) != 0.0
            for name in ("gamma21", "gamma23", "Gamma21", "Gamma31", "Gamma23")
        )


# Component order of the real 9-vector representation used by the integrator.
VECTOR_COMPONENTS = (
    "rho11", "rho22", "rho33",
    "re12", "im12", "re13", "im13", "re23", "im23",
)


@dataclass(frozen=True)
class DensityMatrix:
    """3x3 density matrix stored as real diagonal plus upper-triangle coherences.

    The lower triangle is defined by conjugation, so a stored state is
    Hermitian with real populations by construction.  No trace or positivity
    normalization happens here; the same container carries tangent vectors
    (time derivatives), whose diagonal entries may be negative and whose
    trace is near zero.
    """

    rho11: float
    rho22: float
    rho33: float
    rho12: complex = 0j
    rho13: complex = 0j
    rho23: complex = 0j

    def __post_init__(self) -> None:
        # Coerce numpy scalars so equality and repr behave like plain Python.
        object.__setattr__(self, "rho11", float(self.rho11))
        object.__setattr__(self, "rho22", float(self.rho22))
        object.__setattr__(self, "rho33", float(self.rho33))
        object.__setattr__(self, "rho12", complex(self.rho12))
        object.__setattr__(self, "rho13", complex(self.rho13))
        object.__setattr__(self, "rho23", complex(self.rho23))

    @classmethod
    def pure(cls, level: int) -> "DensityMatrix":
        """Pure population in one level (1, 2 or 3)."""
        if level not in (1, 2, 3):
            raise ValueError(f"level must be 1, 2 or 3, got {level!r}")
        pops = [0.0, 0.0, 0.0]
        pops[level - 1] = 1.0
        return cls(*pops)

    @classmethod
    def from_populations(cls, p1: float, p2: float, p3: float) -> "DensityMatrix":
        return cls(p1, p2, p3)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, defect_tol: float = 1e-12) -> "DensityMatrix":
        """Import a full 3x3 complex matrix, guarding against non-Hermitian input."""
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        defect = hermitian_defect(m)
        if defect > defect_tol:
            raise ValueError(f"matrix is not Hermitian: defect {defect:.3e} > {defect_tol:.0e}")
        return cls(
            m[0, 0].real, m[1, 1].real, m[2, 2].real,
            m[0, 1], m[0, 2], m[1, 2],
        )

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "DensityMatrix":
        """Rebuild from the real 9-vector (see VECTOR_COMPONENTS for the order)."""
        v = np.asarray(v, dtype=float)
        if v.shape != (9,):
            raise ValueError(f"expected a length-9 real vector, got shape {v.shape}")
        return cls(
            v[0], v[1], v[2],
            complex(v[3], v[4]), complex(v[5], v[6]), complex(v[7], v[8]),
        )

    def to_vector(self) -> np.ndarray:
        """Real 9-vector [p1, p2, p3, Re12, Im12, Re13, Im13, Re23, Im23]."""
        return np.array(
            [
                self.rho11, self.rho22, self.rho33,
                self.rho12.real, self.rho12.imag,
                self.rho13.real, self.rho13.imag,
                self.rho23.real, self.rho23.imag,
            ]
        )

    @property
    def matrix(self) -> np.ndarray:
        """Full 3x3 complex matrix (lower triangle by conjugation)."""
        return np.array(
            [
                [self.rho11, self.rho12, self.rho13],
                [self.rho12.conjugate(), self.rho22, self.rho23],
                [self.rho13.conjugate(), self.rho23.conjugate(), self.rho33],
            ]
        )

    @property
    def populations(self) -> tuple[float, float, float]:
        return (self.rho11, self.rho22, self.rho33)


def trace(rho: DensityMatrix) -> float:
    """Sum of the three populations."""
    return rho.rho11 + rho.rho22 + rho.rho33


def hermitian_defect(rho) -> float:
    """Largest |rho_ij - conj(rho_ji)| over all elements.

    Zero by construction for the triangular storage; this exists as a guard
    for full-matrix interchange formats.
    """
    if isinstance(rho, DensityMatrix):
        m = rho.matrix
    else:
        m = np.asarray(rho, dtype=complex)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    return float(np.abs(m - m.conj().T).max())


@dataclass
class Trajectory:
    """Time-ordered samples of a propagated density matrix.

    times and data are parallel arrays; data rows are the real 9-vector
    representation (see VECTOR_COMPONENTS).  pulse_end_indices marks, for each
    integrated pulse, the sample taken at the end of its integration window,
    which is what per-pulse diagnostics (transfer step counts, early-stop
    detection) read.  metadata carries the fully resolved configuration that
    produced the trajectory plus integration diagnostics.
    """

    times: np.ndarray
    data: np.ndarray
    pulse_end_indices: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        self.pulse_end_indices = np.asarray(self.pulse_end_indices, dtype=int)
        if self.times.ndim != 1:
            raise ValueError("times must be one-dimensional")
        if self.data.shape != (self.times.size, 9):
            raise ValueError(
                f"data shape {self.data.shape} does not match {self.times.size} samples"
            )
        if self.times.size > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("times must be strictly increasing")
        if self.pulse_end_indices.size and (
            self.pulse_end_indices.min() < 0
            or self.pulse_end_indices.max() >= self.times.size
        ):
            raise ValueError("pulse_end_indices out of range")

    @property
    def n_samples(self) -> int:
        return int(self.times.size)

    @property
    def populations(self) -> np.ndarray:
        """(n, 3) array of populations."""
        return self.data[:, :3]

    @property
    def rho11(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def rho22(self) -> np.ndarray:
        return self.data[:, 1]

    @property
    def rho33(self) -> np.ndarray:
        return self.data[:, 2]

    @property
    def rho12(self) -> np.ndarray:
        return self.data[:, 3] + 1j * self.data[:, 4]

    @property
    def rho13(self) -> np.ndarray:
        return self.data[:, 5] + 1j * self.data[:, 6]

    @property
    def rho23(self) -> np.ndarray:
        return self.data[:, 7] + 1j * self.data[:, 8]

    @property
    def trace_series(self) -> np.ndarray:
        return self.data[:, :3].sum(axis=1)

    def state(self, index: int) -> DensityMatrix:
        return DensityMatrix.from_vector(self.data[index])

    @property
    def states(self) -> list[DensityMatrix]:
        """All samples as DensityMatrix objects (built on demand)."""
        return [DensityMatrix.from_vector(row) for row in self.data]

    @property
    def final_state(self) -> DensityMatrix:
        return self.state(-1)
