"""Fourier-side fields, norms, conserved quantities and phase functions.

Fields are stored as 2N+1 complex coefficients indexed n = -N..N.  All
integrals drop the 2*pi factor, so the mass is the plain l2 sum of the
coefficients and also the spatial mean of |u|^2.

Three frames are used:

* ``PHYSICAL_U``      the solution u of  i u_t = u_xxxx + |u|^2 u
* ``RENORMALIZED_U``  the gauged field  u~ = exp(2 i t mass) u
* ``INTERACTION_V``   v_n = exp(i n^4 t) u~_n  (linear flow factored out)
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Frame(str, Enum):
    PHYSICAL_U = "PHYSICAL_U"
    RENORMALIZED_U = "RENORMALIZED_U"
    INTERACTION_V = "INTERACTION_V"


def frequencies(N):
    """Integer frequencies -N..N as an int64 array."""
    return np.arange(-N, N + 1, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Truncated Fourier coefficients c_{-N..N} with a frame tag and a time."""

    frame: Frame
    N: int
    coeffs: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 0:
            raise ValueError(f"N must be a nonnegative integer, got {self.N}")
        c = np.array(self.coeffs, dtype=np.complex128)
        if c.shape != (2 * self.N + 1,):
            raise ValueError(f"expected {2 * self.N + 1} coefficients, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "frame", Frame(self.frame))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "time", float(self.time))

    @property
    def n(self):
        return frequencies(self.N)

    def coeff(self, k):
        """Coefficient at frequency k (zero outside the truncation)."""
        if abs(k) > self.N:
            return 0j
        return self.coeffs[k + self.N]

    def replace(self, coeffs=None, frame=None, time=None):
        return SpectralField(
            self.frame if frame is None else frame,
            self.N,
            self.coeffs if coeffs is None else coeffs,
            self.time if time is None else time,
        )

    def __repr__(self):
        return f"SpectralField(frame={self.frame.value}, N={self.N}, t={self.time!r})"


def zero_field(N, frame=Frame.INTERACTION_V, time=0.0):
    return SpectralField(frame, N, np.zeros(2 * N + 1, dtype=complex), time)


def single_mode(N, k, c=1.0, frame=Frame.INTERACTION_V, time=0.0):
    coeffs = np.zeros(2 * N + 1, dtype=complex)
    coeffs[k + N] = c
    return SpectralField(frame, N, coeffs, time)


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid x_m = 2 pi m / M used for dealiased products."""

    N: int
    M: int

    def __post_init__(self):
        if self.M < 3 * (2 * self.N + 1):
            raise ValueError(f"grid size M={self.M} below 3(2N+1)={3 * (2 * self.N + 1)}")

    @classmethod
    def for_truncation(cls, N):
        return cls(N, 3 * (2 * N + 1))

    @property
    def x(self):
        return 2 * np.pi * np.arange(self.M) / self.M


def japanese_bracket(n):
    """<n> = sqrt(1 + n^2); works elementwise on arrays."""
    n = np.asarray(n, dtype=float)
    out = np.sqrt(1.0 + n * n)
    return float(out) if out.ndim == 0 else out


def sobolev_norm(f, sigma):
    """H^sigma norm (sum <n>^{2 sigma} |c_n|^2)^{1/2}."""
    w = japanese_bracket(f.n) ** (2 * sigma)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def mass(f):
    return float(np.sum(np.abs(f.coeffs) ** 2))


def _spectrum_to_grid(coeffs, N, M):
    buf = np.zeros(M, dtype=complex)
    buf[np.arange(-N, N + 1) % M] = coeffs
    return np.fft.ifft(buf) * M


def _grid_to_spectrum(values, N):
    M = values.shape[-1]
    spec = np.fft.fft(values) / M
    return spec[np.arange(-N, N + 1) % M]


def to_physical(f, grid=None):
    """Values sum_n c_n e^{i n x_m} on the grid points."""
    grid = grid or GridSpec.for_truncation(f.N)
    if grid.N < f.N:
        raise ValueError("grid truncation smaller than field truncation")
    return _spectrum_to_grid(f.coeffs, f.N, grid.M)


def from_physical(values, N, frame=Frame.PHYSICAL_U, time=0.0):
    """Inverse of to_physical for trigonometric polynomials of degree <= N."""
    return SpectralField(frame, N, _grid_to_spectrum(np.asarray(values, dtype=complex), N), time)


def cubic_product(coeffs, N, M=None):
    """Coefficients of |w|^2 w on |n| <= N, computed on an oversampled grid."""
    M = M or 3 * (2 * N + 1)
    w = _spectrum_to_grid(coeffs, N, M)
    return _grid_to_spectrum(np.abs(w) ** 2 * w, N)


def hamiltonian(f, grid=None):
    """H(u) = 1/2 sum n^4 |c_n|^2 + 1/4 mean(|u|^4)."""
    grid = grid or GridSpec.for_truncation(f.N)
    n = f.n.astype(float)
    kinetic = 0.5 * np.sum(n**4 * np.abs(f.coeffs) ** 2)
    u = to_physical(f, grid)
    return float(kinetic + 0.25 * np.mean(np.abs(u) ** 4))


def linear_propagate(f, dt):
    """Linear flow of i u_t = u_xxxx: c_n -> exp(-i n^4 dt) c_n."""
    n = f.n.astype(float)
    return f.replace(coeffs=np.exp(-1j * n**4 * dt) * f.coeffs)


def gauge(f, t):
    """Multiply by exp(2 i t mass(f))."""
    return f.replace(coeffs=np.exp(2j * t * mass(f)) * f.coeffs)


def gauge_inverse(f, t):
    return f.replace(coeffs=np.exp(-2j * t * mass(f)) * f.coeffs)


_ORDER = {Frame.PHYSICAL_U: 0, Frame.RENORMALIZED_U: 1, Frame.INTERACTION_V: 2}


def convert_frame(f, target):
    """Move a field between frames at its own time stamp."""
    target = Frame(target)
    t = f.time
    n = f.n.astype(float)
    c = f.coeffs
    here = _ORDER[f.frame]
    there = _ORDER[target]
    # the gauge factor only depends on the mass, which every frame shares
    m = mass(f)
    while here < there:
        if here == 0:
            c = np.exp(2j * t * m) * c
        else:
            c = np.exp(1j * n**4 * t) * c
        here += 1
    while here > there:
        if here == 2:
            c = np.exp(-1j * n**4 * t) * c
        else:
            c = np.exp(-2j * t * m) * c
        here -= 1
    return SpectralField(target, f.N, c, t)


@dataclass(frozen=True)
class PhaseTuple:
    """Frequency quadruple (n1, n2, n3, n) with n = n1 - n2 + n3."""

    n1: int
    n2: int
    n3: int
    n: int

    def __post_init__(self):
        for name in ("n1", "n2", "n3", "n"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.n != self.n1 - self.n2 + self.n3:
            raise ValueError(f"inconsistent tuple {self.as_tuple()}: n != n1 - n2 + n3")

    def as_tuple(self):
        return (self.n1, self.n2, self.n3, self.n)

    @property
    def nonresonant(self):
        """Membership in Gamma(n): n1 != n and n3 != n."""
        return self.n1 != self.n and self.n3 != self.n


def phase_phi(p):
    """n1^4 - n2^4 + n3^4 - n^4 in exact integer arithmetic."""
    return p.n1**4 - p.n2**4 + p.n3**4 - p.n**4


def phase_phi_factored(p):
    """The factorized form (n1 - n2)(n1 - n)(n1^2 + n2^2 + n3^2 + n^2 + 2(n1 + n3)^2)."""
    n1, n2, n3, n = p.as_tuple()
    return (n1 - n2) * (n1 - n) * (n1 * n1 + n2 * n2 + n3 * n3 + n * n + 2 * (n1 + n3) ** 2)


def phase_mu(p):
    """Quadratic phase -2 (n - n1)(n - n3)."""
    return -2 * (p.n - p.n1) * (p.n - p.n3)


def phase_phi_array(n1, n2, n3, n):
    """Vectorised phase for int64 arrays; exact while |n_i| < 2^14."""
    arrs = [np.asarray(a, dtype=np.int64) for a in (n1, n2, n3, n)]
    if any(a.size and np.max(np.abs(a)) >= 2**14 for a in arrs):
        raise OverflowError("int64 phase needs |n_i| < 2^14; use phase_phi for larger values")
    a, b, c, d = arrs
    return a**4 - b**4 + c**4 - d**4


def phase_phi_factored_array(n1, n2, n3, n):
    a, b, c, d = (np.asarray(x, dtype=np.int64) for x in (n1, n2, n3, n))
    return (a - b) * (a - d) * (a * a + b * b + c * c + d * d + 2 * (a + c) ** 2)


def gamma_tuples(n, N):
    """All (n1, n2, n3) in Gamma_N(n) as an int64 array of shape (k, 3), lexicographic."""
    r = np.arange(-N, N + 1, dtype=np.int64)
    n1, n3 = np.meshgrid(r, r, indexing="ij")
    n1 = n1.ravel()
    n3 = n3.ravel()
    n2 = n1 + n3 - n
    keep = (np.abs(n2) <= N) & (n1 != n) & (n3 != n)
    return np.stack([n1[keep], n2[keep], n3[keep]], axis=1)
