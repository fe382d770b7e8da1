"""Time integration of the truncated renormalized equation in the interaction picture.

In the interaction frame the coefficients obey

    d/dt v_n = -i sum_{Gamma_N(n)} e^{-i phi t} v_{n1} conj(v_{n2}) v_{n3} + i |v_n|^2 v_n

which is non-autonomous through the phases, so every Runge-Kutta stage is
evaluated at its absolute time.
"""

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .gaussian import sample_rng
from .spectral import (
    Frame,
    SpectralField,
    cubic_product,
    frequencies,
    hamiltonian,
    japanese_bracket,
    mass,
    phase_phi,
    PhaseTuple,
    sobolev_norm,
)


class Scheme(str, Enum):
    IF_RK4 = "IF_RK4"
    RK4_DIRECT = "RK4_DIRECT"


class IntegrationError(RuntimeError):
    def __init__(self, step_index, time):
        super().__init__(f"non-finite state at step {step_index} (t={time!r})")
        self.step_index = step_index
        self.time = time


@dataclass(frozen=True)
class IntegratorConfig:
    N: int
    dt: float
    t_final: float
    scheme: Scheme = Scheme.IF_RK4
    record_every: int = 1
    coupling: float = 1.0  # scales the nonlinearity; 0 gives the free flow

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        object.__setattr__(self, "scheme", Scheme(self.scheme))


@dataclass
class Trajectory:
    times: np.ndarray
    fields: list
    config: IntegratorConfig
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.fields)

    @property
    def N(self):
        return self.config.N

    def coeff_matrix(self):
        return np.array([f.coeffs for f in self.fields])


def _require_v(v):
    if v.frame is not Frame.INTERACTION_V:
        raise ValueError(f"expected an INTERACTION_V field, got {v.frame.value}")


def _rhs_array(c, t, n4, N, coupling=1.0):
    w = np.exp(-1j * n4 * t) * c
    m = np.sum(np.abs(w) ** 2)
    nl = -1j * cubic_product(w, N) + 2j * m * w
    return coupling * np.exp(1j * n4 * t) * nl


def rhs_interaction(v, t):
    """Interaction-picture vector field via the dealiased cubic product.

    Uses sum over Gamma(n) = (|w|^2 w)_n - 2 mass w_n + |w_n|^2 w_n with
    w = S(t) v, so the right-hand side collapses to
    e^{i n^4 t} [-i (|w|^2 w)_n + 2 i mass w_n].
    """
    _require_v(v)
    n4 = frequencies(v.N).astype(float) ** 4
    return v.replace(coeffs=_rhs_array(v.coeffs, t, n4, v.N), time=t)


def rhs_direct_oracle(v, t, N=None):
    """Literal sum over Gamma_N(n) with exact integer phases (O(N^3), for tests)."""
    N = v.N if N is None else N
    c = {k: v.coeff(k) for k in range(-N, N + 1)}
    out = np.zeros(2 * N + 1, dtype=complex)
    for n in range(-N, N + 1):
        acc = 0j
        for n1 in range(-N, N + 1):
            if n1 == n:
                continue
            for n3 in range(-N, N + 1):
                if n3 == n:
                    continue
                n2 = n1 + n3 - n
                if abs(n2) > N:
                    continue
                phi = phase_phi(PhaseTuple(n1, n2, n3, n))
                acc += np.exp(-1j * phi * t) * c[n1] * np.conj(c[n2]) * c[n3]
        out[n + N] = -1j * acc + 1j * abs(c[n]) ** 2 * c[n]
    return SpectralField(Frame.INTERACTION_V, N, out, t)


def _rk4(f, y, t, h):
    k1 = f(y, t)
    k2 = f(y + 0.5 * h * k1, t + 0.5 * h)
    k3 = f(y + 0.5 * h * k2, t + 0.5 * h)
    k4 = f(y + h * k3, t + h)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _stepper(config):
    N = config.N
    n4 = frequencies(N).astype(float) ** 4
    g = config.coupling
    if config.scheme is Scheme.IF_RK4:
        def advance(c, t, h):
            return _rk4(lambda y, s: _rhs_array(y, s, n4, N, g), c, t, h)
    else:
        # explicit RK4 on the renormalized field u~ = S(t) v, linear part included
        def f_direct(w, s):
            m = np.sum(np.abs(w) ** 2)
            return -1j * n4 * w + g * (-1j * cubic_product(w, N) + 2j * m * w)

        def advance(c, t, h):
            w = np.exp(-1j * n4 * t) * c
            w = _rk4(f_direct, w, t, h)
            return np.exp(1j * n4 * (t + h)) * w
    return advance


def step(v, t, dt, config):
    """One fixed step of size dt (may be negative) from absolute time t."""
    _require_v(v)
    if dt == 0:
        return v.replace(time=t)
    c = _stepper(config)(v.coeffs, t, dt)
    return v.replace(coeffs=c, time=t + dt)


def integrate(v0, config):
    """Integrate from v0.time to config.t_final with fixed steps.

    The step count is round(|t_final - t0| / dt) and the last step lands
    exactly on t_final.  Integration runs backwards when t_final < t0.
    """
    _require_v(v0)
    if v0.N != config.N:
        raise ValueError(f"field truncation {v0.N} != config.N {config.N}")
    t0 = v0.time
    span = config.t_final - t0
    nsteps = int(round(abs(span) / config.dt))
    h = span / nsteps if nsteps else 0.0
    if config.dt * mass(v0) > 0.1:
        warnings.warn(f"dt*mass = {config.dt * mass(v0):.3g} is not small", RuntimeWarning)
    advance = _stepper(config)
    c = v0.coeffs.copy()
    times = [t0]
    states = [c.copy()]
    for k in range(1, nsteps + 1):
        t = t0 + (k - 1) * h
        c = advance(c, t, h)
        if not np.all(np.isfinite(c)):
            raise IntegrationError(k, t + h)
        if k % config.record_every == 0 or k == nsteps:
            times.append(t0 + k * h if k < nsteps else config.t_final)
            states.append(c.copy())
    fields = [SpectralField(Frame.INTERACTION_V, config.N, s, tt) for s, tt in zip(states, times)]
    traj = Trajectory(np.array(times), fields, config)
    traj.diagnostics = trajectory_diagnostics(traj)
    return traj


def reconstruct_u(traj):
    """Physical solution u(t) = G_t^{-1}[S(t) v(t)] for each snapshot."""
    return [(f.time, _to_u(f)) for f in traj.fields]


def _to_u(v):
    n4 = v.n.astype(float) ** 4
    t = v.time
    w = np.exp(-1j * n4 * t) * v.coeffs
    u = np.exp(-2j * t * np.sum(np.abs(w) ** 2)) * w
    return SpectralField(Frame.PHYSICAL_U, v.N, u, t)


def trajectory_diagnostics(traj, s=1.0):
    """Mass, Hamiltonian of the reconstructed u and H^s norm per snapshot."""
    masses, hams, norms = [], [], []
    for f in traj.fields:
        masses.append(mass(f))
        hams.append(hamiltonian(_to_u(f)))
        norms.append(sobolev_norm(f, s))
    return {"mass": np.array(masses), "hamiltonian": np.array(hams), "hs_norm": np.array(norms)}


def relative_drift(values):
    values = np.asarray(values, dtype=float)
    ref = values[0]
    scale = abs(ref) if ref != 0 else 1.0
    return float(np.max(np.abs(values - ref)) / scale)


def random_initial_data(N, s, seed, index=0, target_mass=1.0, N_draw=None):
    """Coefficients g_n <n>^{-s} on |n| <= N rescaled to the target mass.

    The Gaussians are drawn on |n| <= N_draw (default N) from the stream
    (seed, index) and then truncated, so data for different N built from the
    same draw are nested.
    """
    N_draw = N if N_draw is None else N_draw
    if N_draw < N:
        raise ValueError("N_draw must be >= N")
    ab = sample_rng(seed, index).standard_normal((2, 2 * N_draw + 1))
    g = (ab[0] + 1j * ab[1])[N_draw - N:N_draw + N + 1]
    c = g * japanese_bracket(frequencies(N)) ** (-s)
    c *= math.sqrt(target_mass / np.sum(np.abs(c) ** 2))
    return SpectralField(Frame.INTERACTION_V, N, c, 0.0)


def fd_burst(v, h, scheme=Scheme.IF_RK4):
    """Five snapshots at v.time + (-2..2) h, integrated from v with step h."""
    fw = integrate(v, IntegratorConfig(v.N, h, v.time + 2 * h, scheme)).fields
    bw = integrate(v, IntegratorConfig(v.N, h, v.time - 2 * h, scheme)).fields
    return [bw[2], bw[1], v, fw[1], fw[2]]


def burst_trajectory(states, h, config=None):
    """Concatenate 5-point bursts around each state into one trajectory for finite differences."""
    fields = []
    for v in states:
        fields.extend(fd_burst(v, h))
    cfg = config or IntegratorConfig(states[0].N, h, states[-1].time + 2 * h)
    return Trajectory(np.array([f.time for f in fields]), fields, cfg)
