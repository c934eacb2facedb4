"""Discretization bookkeeping for the periodic Euclidean path integral.

A path on N+1 time slices t_n = n*eps is written as

    x(t_n) = x0 + (N+1)**-0.5 * sum_{m=1}^{N/2} (exp(i theta_m n) x_m + c.c.)

with theta_m = 2 pi m / (N+1). The kinetic term of mode m is eps*M*omega_m**2*|x_m|**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np


class FreqConvention(str, Enum):
    """Lattice frequency formula.

    LAPLACIAN is the spectrum of the periodic second difference,
    (2 - 2cos theta)/eps**2. PAPER keeps the alternative (2 - cos theta)/eps**2
    for fidelity experiments; it does not vanish at theta = 0.
    """

    LAPLACIAN = "laplacian"
    PAPER = "paper"


@dataclass(frozen=True)
class FlowParams:
    """Global discretization and physical constants.

    ``beta`` is derived from hbar*beta = (N+1)*eps.
    """

    n_slices: int
    epsilon: float
    hbar: float = 1.0
    mass: float = 1.0
    freq_convention: FreqConvention = FreqConvention.LAPLACIAN

    def __post_init__(self):
        if int(self.n_slices) != self.n_slices or self.n_slices < 2:
            raise ValueError(f"n_slices must be an integer >= 2, got {self.n_slices!r}")
        if self.n_slices % 2:
            raise ValueError(f"n_slices must be even, got {self.n_slices}")
        for name in ("epsilon", "hbar", "mass"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
        object.__setattr__(self, "freq_convention", FreqConvention(self.freq_convention))

    @classmethod
    def from_beta(cls, n_slices: int, beta: float, hbar: float = 1.0, mass: float = 1.0,
                  freq_convention=FreqConvention.LAPLACIAN) -> "FlowParams":
        return cls(n_slices, hbar * beta / (n_slices + 1), hbar, mass, freq_convention)

    @property
    def beta(self) -> float:
        return (self.n_slices + 1) * self.epsilon / self.hbar

    @property
    def n_modes(self) -> int:
        """Number of complex modes, N/2."""
        return self.n_slices // 2

    def replace(self, **kw) -> "FlowParams":
        d = dict(n_slices=self.n_slices, epsilon=self.epsilon, hbar=self.hbar,
                 mass=self.mass, freq_convention=self.freq_convention)
        d.update(kw)
        return FlowParams(**d)


def omega_sq(m: int, params: FlowParams) -> float:
    """Squared lattice frequency of mode m (0 <= m <= N/2)."""
    if int(m) != m or not 0 <= m <= params.n_modes:
        raise ValueError(f"mode index {m!r} outside 0..{params.n_modes}")
    if m == 0:
        return 0.0
    c = math.cos(2.0 * math.pi * m / (params.n_slices + 1))
    eps2 = params.epsilon ** 2
    if params.freq_convention is FreqConvention.PAPER:
        return (2.0 - c) / eps2
    return (2.0 - 2.0 * c) / eps2


def omega(m: int, params: FlowParams) -> float:
    """Signed lattice frequency, omega_{-m} = -omega_m, used by kinetic sums."""
    w = math.sqrt(omega_sq(abs(m), params))
    return -w if m < 0 else w


@dataclass(frozen=True)
class FrequencyTable:
    omega_sq: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.omega_sq, dtype=float)
        if w[0] != 0.0:
            raise ValueError("omega_sq[0] must vanish")
        if np.any(np.diff(w[1:]) <= 0):
            raise ValueError("omega_sq must increase strictly for m >= 1")
        w.setflags(write=False)
        object.__setattr__(self, "omega_sq", w)

    def __getitem__(self, m):
        return self.omega_sq[m]

    def __len__(self):
        return len(self.omega_sq)


def frequency_table(params: FlowParams) -> FrequencyTable:
    """omega_m**2 for m = 0..N/2, evaluated in one vectorized pass."""
    m = np.arange(params.n_modes + 1)
    c = np.cos(2.0 * np.pi * m / (params.n_slices + 1))
    if params.freq_convention is FreqConvention.PAPER:
        w = (2.0 - c) / params.epsilon ** 2
    else:
        w = (2.0 - 2.0 * c) / params.epsilon ** 2
    w[0] = 0.0
    return FrequencyTable(w)


@dataclass(frozen=True)
class ModeVector:
    """Zero mode plus complex amplitudes x_1..x_mmax (conjugate modes implicit)."""

    x0: float
    modes: np.ndarray = np.zeros(0, dtype=complex)

    def __post_init__(self):
        object.__setattr__(self, "x0", float(self.x0))
        mo = np.array(self.modes, dtype=complex).ravel()
        mo.setflags(write=False)
        object.__setattr__(self, "modes", mo)

    @property
    def m_max(self) -> int:
        return len(self.modes)

    def normalized(self, params: FlowParams) -> dict[int, complex]:
        """Mode variables u_0 = x0 and u_{+-n} = x_n/sqrt(N+1), x_{-n} = conj(x_n).

        Zero amplitudes are kept so that callers see every index up to m_max.
        """
        s = 1.0 / math.sqrt(params.n_slices + 1)
        u = {0: complex(self.x0)}
        for n, xn in enumerate(self.modes, start=1):
            u[n] = complex(xn) * s
            u[-n] = complex(np.conj(xn)) * s
        return u


def reconstruct_path(v: ModeVector, params: FlowParams) -> np.ndarray:
    """Real path samples x(t_n), n = 0..N."""
    if v.m_max > params.n_modes:
        raise ValueError(f"{v.m_max} modes exceed N/2 = {params.n_modes}")
    n = np.arange(params.n_slices + 1)
    if v.m_max == 0:
        return np.full(n.shape, v.x0)
    m = np.arange(1, v.m_max + 1)
    phase = np.exp(2j * np.pi * np.outer(n, m) / (params.n_slices + 1))
    z = phase @ v.modes
    path = v.x0 + 2.0 * z.real / math.sqrt(params.n_slices + 1)
    return path


def measure_norm(params: FlowParams) -> float:
    """prod_{m=1}^{N/2} eps**2 omega_m**2 under the active convention."""
    w = frequency_table(params).omega_sq[1:] * params.epsilon ** 2
    return float(np.prod(w))


def free_particle_density(params: FlowParams) -> float:
    """Z/L of a free particle assembled from per-mode Gaussian integrals.

    The time-slicing measure contributes (M/(2 pi hbar eps))**((N+1)/2). The
    zero mode carries a Jacobian sqrt(N+1) and each complex mode m integrates
    to 1/(eps**2 omega_m**2) against its share of the measure, so the product
    over modes is 1/measure_norm.
    """
    p = params
    pref = math.sqrt(p.mass / (2.0 * math.pi * p.hbar * p.epsilon))
    return pref * math.sqrt(p.n_slices + 1) / measure_norm(p)


def free_particle_lattice_exact(params: FlowParams) -> float:
    """Z/L from the determinant of the periodic chain with one site pinned.

    Independent of the mode decomposition: translation invariance lets x_0 be
    fixed, the remaining N sites see the Dirichlet-reduced second-difference
    matrix, and the Gaussian integral is evaluated through its log-determinant.
    """
    p = params
    n = p.n_slices
    lap = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    sign, logdet = np.linalg.slogdet(lap)
    if sign <= 0:
        raise ArithmeticError("reduced chain matrix is not positive definite")
    pref = math.sqrt(p.mass / (2.0 * math.pi * p.hbar * p.epsilon))
    return pref * math.exp(-0.5 * logdet)


def free_particle_continuum(params: FlowParams) -> float:
    """sqrt(M/(2 pi hbar**2 beta)), the exact free result per unit length."""
    p = params
    return math.sqrt(p.mass / (2.0 * math.pi * p.hbar ** 2 * p.beta))
