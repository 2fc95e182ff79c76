"""Hahn-echo coherence of the central electron spin.

Model
-----
The electron is prepared in a superposition of the m = 0 and m = +1
projections, refocused once, and read out.  Each bath nucleus precesses
about a branch-dependent effective field: the bare applied field in the
m = 0 branch, and the applied field shifted by its hyperfine vector
(converted to Gauss) in the m = +1 branch.  Echo factors contract the two
branch propagators against a maximally mixed bath state; pulses are ideal
and instantaneous.

Time axes: the echo *factor* functions take the total free-evolution time
``t`` with the refocusing flip at ``t/2``.  A :class:`CoherenceTrace` is
tabulated against ``tau``, the duration of each of the two free-precession
intervals (the axis revival laws are quoted on), so the trace evaluates the
factors at total time ``2 * tau``.  On that axis revivals recur every
``1 / (gamma_n * |B|)``.

Bath correlations are truncated at pair level: the trace is the product of
all single-spin factors times, for every retained pair, the pair factor
divided by its constituents' singles.  The product is accumulated in log
magnitude with separate sign parity, and a pair's correction ratio is
dropped wherever its denominator passes through zero (see
:data:`PAIR_RATIO_FLOOR`).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .bath import BathRealization, NuclearSpin
from .constants import GAMMA_N_13C_KHZ_PER_G
from .errors import (
    ConfigError,
    DomainError,
    GridTooCoarseError,
    PhysicsError,
    ShapeError,
    UnsupportedBranchError,
)

# Spin-1/2 operators.
_IX = np.array([[0.0, 0.5], [0.5, 0.0]], dtype=complex)
_IY = np.array([[0.0, -0.5j], [0.5j, 0.0]], dtype=complex)
_IZ = np.array([[0.5, 0.0], [0.0, -0.5]], dtype=complex)
_I2 = np.eye(2, dtype=complex)

# Ising + flip-flop pair operator:  Iz Iz - (I+ I- + I- I+) / 4.
_PAIR_DIPOLAR_OP = np.array(
    [
        [0.25, 0.0, 0.0, 0.0],
        [0.0, -0.25, -0.25, 0.0],
        [0.0, -0.25, -0.25, 0.0],
        [0.0, 0.0, 0.0, 0.25],
    ],
    dtype=complex,
)

# Minimum sampling of the expected revival period demanded of a time grid.
POINTS_PER_LARMOR_PERIOD_MIN = 40

# A pair's correction ratio  L_pair / (L_i L_j)  is indeterminate where its
# constituent single factors pass through zero (numerator and denominator
# vanish at slightly offset times, so the raw ratio spikes).  The correction
# is dropped wherever |L_i L_j| falls below this floor; there the overall
# product is already suppressed by the same small single factors, so the
# neglected correction multiplies a value of at most floor magnitude.
PAIR_RATIO_FLOOR = 1e-4

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class FieldVector:
    """Static magnetic field in the defect frame, Gauss."""

    bx: float
    by: float
    bz: float

    def __post_init__(self) -> None:
        if not all(np.isfinite([self.bx, self.by, self.bz])):
            raise ConfigError("field components must be finite")

    @classmethod
    def from_sequence(cls, seq) -> "FieldVector":
        arr = np.asarray(seq, dtype=float).reshape(-1)
        if arr.size != 3:
            raise ConfigError("a field needs exactly three components")
        return cls(*arr)

    @classmethod
    def along_z(cls, magnitude: float) -> "FieldVector":
        return cls(0.0, 0.0, float(magnitude))

    def as_array(self) -> np.ndarray:
        return np.array([self.bx, self.by, self.bz], dtype=float)

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.as_array()))


def required_time_step(field_magnitude_g: float, gamma_n: float = GAMMA_N_13C_KHZ_PER_G) -> float:
    """Largest grid step (ms) resolving the Larmor period at this field."""
    if field_magnitude_g == 0.0:
        return np.inf
    return 1.0 / (gamma_n * abs(field_magnitude_g)) / POINTS_PER_LARMOR_PERIOD_MIN


@dataclass(frozen=True)
class EchoSchedule:
    """Echo time grid: each entry is the per-interval time tau in ms."""

    t_grid: np.ndarray

    def __post_init__(self) -> None:
        grid = np.asarray(self.t_grid, dtype=float).reshape(-1)
        if grid.size == 0:
            raise ConfigError("empty echo schedule")
        if grid[0] < 0:
            raise ConfigError("echo times must be non-negative")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ConfigError("echo times must be strictly increasing")
        object.__setattr__(self, "t_grid", grid)

    @classmethod
    def regular(cls, t_max_ms: float, step_ms: float) -> "EchoSchedule":
        if t_max_ms <= 0 or step_ms <= 0:
            raise ConfigError("t_max and step must be positive")
        n = int(np.ceil(t_max_ms / step_ms))
        return cls(np.linspace(0.0, n * step_ms, n + 1))

    @classmethod
    def for_field(
        cls,
        field_magnitude_g: float,
        t_max_ms: float,
        points_per_period: int = 48,
        gamma_n: float = GAMMA_N_13C_KHZ_PER_G,
    ) -> "EchoSchedule":
        """Regular grid resolving the revival period at the given field."""
        if field_magnitude_g == 0.0:
            raise ConfigError("zero field has no Larmor period; use regular()")
        if points_per_period < POINTS_PER_LARMOR_PERIOD_MIN:
            raise ConfigError(
                f"points_per_period must be >= {POINTS_PER_LARMOR_PERIOD_MIN}"
            )
        step = 1.0 / (gamma_n * abs(field_magnitude_g)) / points_per_period
        return cls.regular(t_max_ms, step)

    def validate_resolution(
        self, field_magnitude_g: float, gamma_n: float = GAMMA_N_13C_KHZ_PER_G
    ) -> None:
        """Raise if the grid undersamples the expected revival period."""
        if self.t_grid.size < 2 or field_magnitude_g == 0.0:
            return
        step = float(np.max(np.diff(self.t_grid)))
        required = required_time_step(field_magnitude_g, gamma_n)
        if step > required * (1.0 + 1e-9):
            raise GridTooCoarseError(
                f"grid step {step:.6g} ms undersamples the revival period at "
                f"|B| = {abs(field_magnitude_g):g} G; use a step <= {required:.6g} ms "
                f"({POINTS_PER_LARMOR_PERIOD_MIN} points per period)"
            )


@dataclass
class CoherenceTrace:
    """Echo coherence L(tau) on a time grid, with provenance metadata."""

    t_grid: np.ndarray
    values: np.ndarray
    metadata: dict = dc_field(default_factory=dict)

    def __post_init__(self) -> None:
        self.t_grid = np.asarray(self.t_grid, dtype=float).reshape(-1)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.t_grid.shape != self.values.shape:
            raise ShapeError("time grid and values differ in length")
        if self.t_grid.size and self.t_grid[0] == 0.0:
            if abs(self.values[0] - 1.0) > 1e-9:
                raise PhysicsError(
                    f"coherence at tau = 0 must be 1, got {self.values[0]!r}"
                )
        if self.values.size and np.max(np.abs(self.values)) > 1.0 + 1e-9:
            warnings.warn(
                "coherence magnitudes exceed 1; pair truncation is likely "
                "outside its validity range",
                RuntimeWarning,
                stacklevel=2,
            )

    def __len__(self) -> int:
        return len(self.t_grid)

    def save_csv(self, csv_path) -> Path:
        """Write (t_ms, L) rows plus a JSON metadata sidecar; returns sidecar path."""
        csv_path = Path(csv_path)
        with open(csv_path, "w") as fh:
            fh.write("t_ms,L\n")
            for t, v in zip(self.t_grid, self.values):
                # repr of builtin floats: shortest round-trippable decimal
                fh.write(f"{float(t)!r},{float(v)!r}\n")
        sidecar = csv_path.with_suffix(".json")
        with open(sidecar, "w") as fh:
            json.dump(self.metadata, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return sidecar

    @classmethod
    def load_csv(cls, csv_path) -> "CoherenceTrace":
        csv_path = Path(csv_path)
        try:
            data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
        except ValueError as exc:
            raise ConfigError(f"{csv_path} is not a numeric trace file: {exc}") from exc
        if data.shape[1] != 2:
            raise ConfigError(f"{csv_path} is not a two-column trace file")
        sidecar = csv_path.with_suffix(".json")
        metadata = {}
        if sidecar.exists():
            with open(sidecar) as fh:
                metadata = json.load(fh)
        return cls(t_grid=data[:, 0], values=data[:, 1], metadata=metadata)


def effective_field(
    field: FieldVector,
    hyperfine_khz,
    m: int,
    gamma_n: float = GAMMA_N_13C_KHZ_PER_G,
) -> np.ndarray:
    """Effective field (Gauss) seen by a nucleus in electron branch ``m``.

    m = 0 leaves the applied field untouched; m = +1 shifts it by the
    hyperfine vector converted to field units, B - A / gamma_n.
    """
    b = field.as_array() if isinstance(field, FieldVector) else np.asarray(field, float)
    if m == 0:
        return b.copy()
    if m == 1:
        return b - np.asarray(hyperfine_khz, dtype=float) / gamma_n
    raise UnsupportedBranchError(
        f"electron projection m = {m} is outside the modeled {{0, +1}} pair"
    )


def _unit_and_norm(vec: np.ndarray) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return np.zeros(3), 0.0
    return vec / norm, norm


def single_spin_echo_factor(
    h0_g,
    h1_g,
    t_ms,
    gamma_n: float = GAMMA_N_13C_KHZ_PER_G,
):
    """Echo factor of one nucleus for total evolution time ``t_ms``.

    Each branch precesses about its effective field for t/2 on either side
    of the refocusing flip.  Closed form of the propagator contraction:

        L = 1 - 2 |n0 x n1|^2 sin^2(w0 t / 4) sin^2(w1 t / 4),

    with w_m = 2 pi gamma_n |h_m| the angular precession rates and n_m the
    field unit vectors.  Accepts scalar or array ``t_ms``.
    """
    h0 = np.asarray(h0_g, dtype=float)
    h1 = np.asarray(h1_g, dtype=float)
    t = np.asarray(t_ms, dtype=float)
    n0, b0 = _unit_and_norm(h0)
    n1, b1 = _unit_and_norm(h1)
    if b0 == 0.0 or b1 == 0.0:
        # One branch does not precess: its propagator is the identity and
        # the echo closes perfectly.
        return np.ones_like(t) if t.ndim else 1.0
    k = float(np.sum(np.cross(n0, n1) ** 2))
    s0 = np.sin(0.5 * np.pi * gamma_n * b0 * t)
    s1 = np.sin(0.5 * np.pi * gamma_n * b1 * t)
    out = 1.0 - 2.0 * k * s0**2 * s1**2
    return out if t.ndim else float(out)


def _zeeman_2x2(h_g: np.ndarray, gamma_n: float) -> np.ndarray:
    """Nuclear Zeeman Hamiltonian -gamma_n h . I in kHz, 2x2."""
    return -gamma_n * (h_g[0] * _IX + h_g[1] * _IY + h_g[2] * _IZ)


def _pair_hamiltonian(
    h_i_g: np.ndarray, h_j_g: np.ndarray, b_ij_khz: float, gamma_n: float
) -> np.ndarray:
    """Conditioned two-nucleus Hamiltonian (kHz, 4x4) for one branch."""
    return (
        np.kron(_zeeman_2x2(h_i_g, gamma_n), _I2)
        + np.kron(_I2, _zeeman_2x2(h_j_g, gamma_n))
        + b_ij_khz * _PAIR_DIPOLAR_OP
    )


def _propagator(hamiltonian_khz: np.ndarray, t_ms: float) -> np.ndarray:
    """exp(-i 2 pi H t) via Hermitian eigendecomposition."""
    evals, evecs = np.linalg.eigh(hamiltonian_khz)
    phases = np.exp(-2j * np.pi * evals * t_ms)
    return (evecs * phases) @ evecs.conj().T


def pair_echo_factor(
    spin_i: NuclearSpin,
    spin_j: NuclearSpin,
    b_ij_khz: float,
    field: FieldVector,
    t_ms,
    gamma_n: float = GAMMA_N_13C_KHZ_PER_G,
):
    """Echo factor of a coupled nuclear pair for total evolution time ``t_ms``.

    Exact 4x4 evolution of the pair under the two conditioned Hamiltonians
    (each branch's Zeeman terms plus the shared Ising + flip-flop coupling),
    contracted against the maximally mixed pair state.  Accepts scalar or
    array ``t_ms``.
    """
    h0 = effective_field(field, (0.0, 0.0, 0.0), 0, gamma_n)
    h1_i = effective_field(field, spin_i.hyperfine, 1, gamma_n)
    h1_j = effective_field(field, spin_j.hyperfine, 1, gamma_n)
    ham0 = _pair_hamiltonian(h0, h0, b_ij_khz, gamma_n)
    ham1 = _pair_hamiltonian(h1_i, h1_j, b_ij_khz, gamma_n)

    t = np.asarray(t_ms, dtype=float)
    scalar = t.ndim == 0
    out = np.empty(t.reshape(-1).shape, dtype=float)
    for idx, ti in enumerate(t.reshape(-1)):
        u0 = _propagator(ham0, 0.5 * ti)
        u1 = _propagator(ham1, 0.5 * ti)
        w0 = u1 @ u0
        w1 = u0 @ u1
        out[idx] = np.trace(w1.conj().T @ w0).real / 4.0
    return float(out[0]) if scalar else out.reshape(t.shape)


def _single_factors_on_grid(
    hyperfine: np.ndarray,
    field_arr: np.ndarray,
    tau_grid: np.ndarray,
    gamma_n: float,
) -> np.ndarray:
    """(N, T) single-spin factors, branch duration = tau (total time 2 tau)."""
    n_spins = hyperfine.shape[0]
    h0 = field_arr
    h1 = field_arr[None, :] - hyperfine / gamma_n  # (N, 3)
    b0 = float(np.linalg.norm(h0))
    b1 = np.linalg.norm(h1, axis=1)  # (N,)

    n0 = h0 / b0 if b0 > 0 else np.zeros(3)
    safe_b1 = np.where(b1 > 0, b1, 1.0)
    n1 = h1 / safe_b1[:, None]
    k = np.sum(np.cross(np.broadcast_to(n0, (n_spins, 3)), n1) ** 2, axis=1)
    k = np.where((b1 > 0) & (b0 > 0), k, 0.0)  # non-precessing branch: closed echo

    s0sq = np.sin(np.pi * gamma_n * b0 * tau_grid) ** 2  # (T,)
    s1sq = np.sin(np.pi * gamma_n * b1[:, None] * tau_grid[None, :]) ** 2  # (N, T)
    return 1.0 - 2.0 * k[:, None] * s0sq[None, :] * s1sq


def _batched_pair_hamiltonians(
    h_left: np.ndarray, h_right: np.ndarray, b: np.ndarray, gamma_n: float
) -> np.ndarray:
    """(P, 4, 4) conditioned pair Hamiltonians for one branch."""
    def zeeman_stack(h: np.ndarray) -> np.ndarray:
        z = np.zeros((h.shape[0], 2, 2), dtype=complex)
        z[:, 0, 0] = h[:, 2]
        z[:, 1, 1] = -h[:, 2]
        z[:, 0, 1] = h[:, 0] - 1j * h[:, 1]
        z[:, 1, 0] = h[:, 0] + 1j * h[:, 1]
        return -0.5 * gamma_n * z

    zi = zeeman_stack(h_left)
    zj = zeeman_stack(h_right)
    ham = np.einsum("pij,kl->pikjl", zi, _I2).reshape(-1, 4, 4)
    ham += np.einsum("ij,pkl->pikjl", _I2, zj).reshape(-1, 4, 4)
    ham += b[:, None, None] * _PAIR_DIPOLAR_OP[None, :, :]
    return ham


def _pair_factors_on_grid(
    bath: BathRealization,
    field_arr: np.ndarray,
    tau_grid: np.ndarray,
    gamma_n: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pair factors for every retained pair, branch duration = tau.

    Returns (idx_i, idx_j, factors) with factors of shape (P, T).  Uses the
    spectral form of both branch propagators: with U_m = V_m P_m V_m^+, the
    contraction Tr[U1+ U0+ U1 U0] reduces to a fixed 16x16 amplitude matrix
    per pair applied to outer products of branch phase factors, evaluated
    for all times at once.
    """
    pairs = bath.sorted_pairs()
    idx_i = np.fromiter((p[0] for p in pairs), dtype=int, count=len(pairs))
    idx_j = np.fromiter((p[1] for p in pairs), dtype=int, count=len(pairs))
    b = np.array([bath.pair_couplings[p] for p in pairs], dtype=float)

    h1 = field_arr[None, :] - bath.hyperfine / gamma_n  # (N, 3)
    h0 = np.broadcast_to(field_arr, (len(pairs), 3))
    ham0 = _batched_pair_hamiltonians(h0, h0, b, gamma_n)
    ham1 = _batched_pair_hamiltonians(h1[idx_i], h1[idx_j], b, gamma_n)

    e0, v0 = np.linalg.eigh(ham0)
    e1, v1 = np.linalg.eigh(ham1)
    overlap = np.einsum("pki,pkj->pij", v0.conj(), v1)  # V0^+ V1
    amp = np.einsum(
        "pba,pbc,pdc,pda->pabcd",
        overlap.conj(),
        overlap,
        overlap.conj(),
        overlap,
    ).reshape(-1, 16, 16)

    n_pairs, n_t = len(pairs), tau_grid.size
    factors = np.empty((n_pairs, n_t), dtype=float)
    # Chunk so the (chunk, 16, T) complex intermediates stay within ~0.5 GB.
    chunk = max(8, int(5e8 / (max(n_t, 1) * 16 * 16 * 4)))
    for lo in range(0, n_pairs, chunk):
        hi = min(lo + chunk, n_pairs)
        f0 = np.exp(2j * np.pi * e0[lo:hi, :, None] * tau_grid[None, None, :])
        f1 = np.exp(2j * np.pi * e1[lo:hi, :, None] * tau_grid[None, None, :])
        f = (f1[:, :, None, :] * f0[:, None, :, :]).reshape(hi - lo, 16, n_t)
        gf = np.matmul(amp[lo:hi], f.conj())
        factors[lo:hi] = np.einsum("pqt,pqt->pt", f, gf).real / 4.0
    return idx_i, idx_j, factors


def echo_coherence_trace(
    bath: BathRealization,
    field: FieldVector,
    schedule: EchoSchedule,
    gamma_n: float | None = None,
) -> CoherenceTrace:
    """Pair-truncated echo coherence of the full bath on the schedule grid.

    The trace is the product of every single-spin factor and, for each
    retained pair, the pair factor divided by its constituents' singles
    (equivalently: pair factors times singles raised to one minus their
    pair multiplicity).  Exact for baths of at most two spins.
    """
    gamma = bath.gamma_n if gamma_n is None else gamma_n
    field_arr = field.as_array()
    schedule.validate_resolution(field.magnitude, gamma)
    tau = schedule.t_grid

    n_spins = len(bath)
    if n_spins == 0:
        values = np.ones_like(tau)
    else:
        singles = _single_factors_on_grid(bath.hyperfine, field_arr, tau, gamma)
        log_singles = np.log(np.maximum(np.abs(singles), _LOG_FLOOR))
        log_total = np.sum(log_singles, axis=0)
        neg_parity = np.sum(singles < 0.0, axis=0)

        if bath.pair_couplings:
            idx_i, idx_j, pair_factors = _pair_factors_on_grid(
                bath, field_arr, tau, gamma
            )
            log_pairs = np.log(np.maximum(np.abs(pair_factors), _LOG_FLOOR))
            denom = singles[idx_i] * singles[idx_j]  # (P, T)
            keep = np.abs(denom) > PAIR_RATIO_FLOOR
            log_total += np.sum(
                np.where(keep, log_pairs - log_singles[idx_i] - log_singles[idx_j], 0.0),
                axis=0,
            )
            ratio_neg = (pair_factors < 0.0) ^ (denom < 0.0)
            neg_parity = neg_parity + np.sum(keep & ratio_neg, axis=0)

        values = np.where(neg_parity % 2 == 1, -1.0, 1.0) * np.exp(log_total)

    metadata = {
        "model": "pair-truncated echo",
        "field_G": [field.bx, field.by, field.bz],
        "gamma_n_khz_per_g": gamma,
        "seeds": [bath.seed],
        "abundance": bath.config.abundance if bath.config else None,
        "n_spins": n_spins,
        "n_pairs": len(bath.pair_couplings),
    }
    return CoherenceTrace(t_grid=tau.copy(), values=values, metadata=metadata)


def ensemble_average(traces: list[CoherenceTrace]) -> CoherenceTrace:
    """Pointwise mean of traces sharing an identical time grid."""
    if not traces:
        raise ConfigError("cannot average an empty trace collection")
    grid = traces[0].t_grid
    for tr in traces[1:]:
        if not np.array_equal(tr.t_grid, grid):
            raise ShapeError("ensemble members sample different time grids")
    values = np.mean(np.stack([tr.values for tr in traces]), axis=0)
    seeds: list = []
    for tr in traces:
        seeds.extend(tr.metadata.get("seeds", []))
    metadata = dict(traces[0].metadata)
    metadata["seeds"] = seeds
    metadata["ensemble_size"] = len(traces)
    return CoherenceTrace(t_grid=grid.copy(), values=values, metadata=metadata)


def analytic_coherence(t_revival_ms: float, t2_ms: float, t_ms):
    """Closed-form collapse-revival envelope model.

    L(t) = (1 + cos(2 pi t / T_revival)) / 2 * exp(-t / T2): unit-height
    revivals at multiples of the revival time under an exponential envelope.
    """
    if t_revival_ms <= 0:
        raise DomainError("revival time must be positive")
    if t2_ms <= 0:
        raise DomainError("decay time must be positive")
    t = np.asarray(t_ms, dtype=float)
    out = 0.5 * (1.0 + np.cos(2.0 * np.pi * t / t_revival_ms)) * np.exp(-t / t2_ms)
    return out if t.ndim else float(out)


def analytic_trace(
    schedule: EchoSchedule, t_revival_ms: float, t2_ms: float
) -> CoherenceTrace:
    """Tabulate :func:`analytic_coherence` on a schedule as a trace."""
    values = analytic_coherence(t_revival_ms, t2_ms, schedule.t_grid)
    metadata = {
        "model": "analytic collapse-revival",
        "T_R_ms": t_revival_ms,
        "T2_ms": t2_ms,
    }
    return CoherenceTrace(t_grid=schedule.t_grid.copy(), values=values, metadata=metadata)
