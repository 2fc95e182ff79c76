"""Nuclear spin bath construction.

Builds the diamond carbon lattice around a single defect site, samples 13C
occupancy, and attaches the secular couplings the echo engine needs: the
electron-nuclear hyperfine vector of every nucleus (point-dipole form) and
the intra-bath dipolar coupling of every retained nuclear pair.

Geometry convention: the defect vacancy sits at the origin, the substituting
nitrogen occupies the adjacent lattice site, and all coordinates are returned
in a frame whose z axis points along the vacancy-nitrogen bond (the defect
symmetry axis).  Neither the vacancy nor the nitrogen site carries a nuclear
spin.  Positions are in nm, couplings in kHz.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .constants import (
    ANGSTROM_TO_NM,
    DIAMOND_LATTICE_CONSTANT_A,
    GAMMA_N_13C_KHZ_PER_G,
    HYPERFINE_PREFACTOR_KHZ_NM3,
    NATURAL_ABUNDANCE_13C,
    NUCLEAR_DIPOLE_PREFACTOR_KHZ_NM3,
)
from .errors import ConfigError, DomainError

# Conventional-cell fractional coordinates: FCC translations plus the
# two-point diamond basis.
_FCC_OFFSETS = np.array(
    [(0.0, 0.0, 0.0), (0.0, 0.5, 0.5), (0.5, 0.0, 0.5), (0.5, 0.5, 0.0)]
)
_DIAMOND_BASIS = np.array([(0.0, 0.0, 0.0), (0.25, 0.25, 0.25)])

_Z_HAT = np.array([0.0, 0.0, 1.0])


def _rotation_111_to_z() -> np.ndarray:
    """Rotation matrix taking the cubic [111] direction onto +z."""
    axis_from = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
    cross = np.cross(axis_from, _Z_HAT)
    sin_a = np.linalg.norm(cross)
    cos_a = float(axis_from @ _Z_HAT)
    k = cross / sin_a
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + sin_a * kx + (1 - cos_a) * (kx @ kx)


_R_111_TO_Z = _rotation_111_to_z()


@dataclass(frozen=True)
class LatticeConfig:
    """Geometry and sampling parameters of a bath realization.

    lattice_constant : conventional cubic cell edge, Angstrom
    cutoff_radius    : keep carbon sites with |r| <= cutoff, nm
    exclusion_radius : drop carbon sites with |r| <= exclusion, Angstrom
    abundance        : 13C occupancy probability per site
    seed             : occupancy RNG seed
    pair_cutoff      : retain nuclear pair couplings with r_ij <= this, nm
    """

    lattice_constant: float = DIAMOND_LATTICE_CONSTANT_A
    cutoff_radius: float = 4.0
    exclusion_radius: float = 1.55
    abundance: float = NATURAL_ABUNDANCE_13C
    seed: int = 0
    pair_cutoff: float = 1.0

    def __post_init__(self) -> None:
        if self.lattice_constant <= 0:
            raise ConfigError("lattice_constant must be positive")
        if self.exclusion_radius < 0:
            raise ConfigError("exclusion_radius must be >= 0")
        if self.cutoff_radius <= self.exclusion_radius * ANGSTROM_TO_NM:
            raise ConfigError(
                "cutoff_radius (nm) must exceed exclusion_radius (Angstrom)"
            )
        if not 0.0 <= self.abundance <= 1.0:
            raise ConfigError("abundance must lie in [0, 1]")
        if self.pair_cutoff <= 0:
            raise ConfigError("pair_cutoff must be positive")

    @property
    def lattice_constant_nm(self) -> float:
        return self.lattice_constant * ANGSTROM_TO_NM

    @property
    def exclusion_radius_nm(self) -> float:
        return self.exclusion_radius * ANGSTROM_TO_NM


@dataclass(frozen=True)
class NuclearSpin:
    """One bath nucleus: position (nm, defect frame) and hyperfine vector (kHz)."""

    position: tuple[float, float, float]
    hyperfine: tuple[float, float, float]


@dataclass
class BathRealization:
    """A sampled bath: spins, pair couplings, and everything to rebuild it.

    pair_couplings maps index pairs (i, j) with i < j to the secular dipolar
    coupling b_ij in kHz; only pairs within the configured pair cutoff are
    stored, all other couplings are treated as zero.
    """

    spins: list[NuclearSpin]
    pair_couplings: dict[tuple[int, int], float]
    gamma_n: float = GAMMA_N_13C_KHZ_PER_G
    seed: int = 0
    config: LatticeConfig | None = None
    _positions: np.ndarray = field(init=False, repr=False, default=None)
    _hyperfine: np.ndarray = field(init=False, repr=False, default=None)

    def __post_init__(self) -> None:
        for i, j in self.pair_couplings:
            if not 0 <= i < j < len(self.spins):
                raise ConfigError(f"pair index ({i}, {j}) out of range")
        if self.gamma_n <= 0:
            raise ConfigError("gamma_n must be positive")

    def __len__(self) -> int:
        return len(self.spins)

    @property
    def positions(self) -> np.ndarray:
        """(N, 3) positions in nm."""
        if self._positions is None:
            self._positions = np.array(
                [s.position for s in self.spins], dtype=float
            ).reshape(len(self.spins), 3)
        return self._positions

    @property
    def hyperfine(self) -> np.ndarray:
        """(N, 3) hyperfine vectors in kHz."""
        if self._hyperfine is None:
            self._hyperfine = np.array(
                [s.hyperfine for s in self.spins], dtype=float
            ).reshape(len(self.spins), 3)
        return self._hyperfine

    def sorted_pairs(self) -> list[tuple[int, int]]:
        return sorted(self.pair_couplings)

    def to_json_dict(self) -> dict:
        return {
            "seed": self.seed,
            "gamma_n_khz_per_g": self.gamma_n,
            "config": dataclasses.asdict(self.config) if self.config else None,
            "spins": [
                {"position_nm": list(s.position), "hyperfine_khz": list(s.hyperfine)}
                for s in self.spins
            ],
            "pair_couplings_khz": [
                [i, j, self.pair_couplings[(i, j)]] for i, j in self.sorted_pairs()
            ],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "BathRealization":
        try:
            spins = [
                NuclearSpin(tuple(s["position_nm"]), tuple(s["hyperfine_khz"]))
                for s in data["spins"]
            ]
            pairs = {
                (int(i), int(j)): float(b) for i, j, b in data["pair_couplings_khz"]
            }
            config = LatticeConfig(**data["config"]) if data.get("config") else None
            return cls(
                spins=spins,
                pair_couplings=pairs,
                gamma_n=float(data["gamma_n_khz_per_g"]),
                seed=int(data["seed"]),
                config=config,
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed bath record: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "BathRealization":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def generate_lattice_sites(config: LatticeConfig) -> np.ndarray:
    """All candidate carbon sites around the defect, defect frame, nm.

    Deterministic in the config alone (no RNG): enumerates conventional
    cells out to the cutoff, removes the vacancy and nitrogen sites, applies
    the radial exclusion/cutoff window, and rotates so +z is the defect axis.
    Sites are returned sorted lexicographically by rounded coordinates.
    """
    a = config.lattice_constant_nm
    span = int(np.ceil(config.cutoff_radius / a)) + 1
    cells = np.arange(-span, span + 1)
    ci, cj, ck = np.meshgrid(cells, cells, cells, indexing="ij")
    corners = np.stack([ci, cj, ck], axis=-1).reshape(-1, 3).astype(float)

    fractional = (_FCC_OFFSETS[:, None, :] + _DIAMOND_BASIS[None, :, :]).reshape(-1, 3)
    sites = (corners[:, None, :] + fractional[None, :, :]).reshape(-1, 3) * a

    radii = np.linalg.norm(sites, axis=1)
    # Vacancy at the origin, nitrogen on the adjacent basis site along [111].
    nitrogen = np.full(3, a / 4.0)
    is_defect = (radii < 1e-9) | (np.linalg.norm(sites - nitrogen, axis=1) < 1e-9)
    keep = (
        ~is_defect
        & (radii > config.exclusion_radius_nm)
        & (radii <= config.cutoff_radius)
    )
    sites = sites[keep] @ _R_111_TO_Z.T

    order = np.lexsort(np.round(sites, 9).T[::-1])
    return sites[order]


def hyperfine_vector(
    position_nm: np.ndarray,
    prefactor_khz_nm3: float = HYPERFINE_PREFACTOR_KHZ_NM3,
) -> np.ndarray:
    """Secular hyperfine vector A (kHz) of a nucleus at ``position_nm``.

    Point-dipole form: the z row of the dipolar tensor between the electron
    at the origin and the nucleus,  A = C/r^3 * (z_hat - 3 cos(theta) r_hat),
    where theta is the polar angle from the defect axis.  Vanishes at the
    magic angle cos^2(theta) = 1/3 and falls off as 1/r^3.
    """
    r_vec = np.asarray(position_nm, dtype=float)
    r = float(np.linalg.norm(r_vec))
    if r == 0.0:
        raise DomainError("hyperfine vector undefined at the electron position")
    r_hat = r_vec / r
    return (prefactor_khz_nm3 / r**3) * (_Z_HAT - 3.0 * r_hat[2] * r_hat)


def nuclear_dipolar_coupling(
    position_i_nm: np.ndarray,
    position_j_nm: np.ndarray,
    prefactor_khz_nm3: float = NUCLEAR_DIPOLE_PREFACTOR_KHZ_NM3,
) -> float:
    """Secular dipolar coupling b_ij (kHz) between two bath nuclei.

    b_ij = C/r^3 * (1 - 3 cos^2 theta_ij) with theta_ij the angle between
    the internuclear vector and the defect axis; this multiplies the
    Ising + flip-flop pair operator in the pair Hamiltonian.
    """
    d = np.asarray(position_j_nm, dtype=float) - np.asarray(position_i_nm, dtype=float)
    r = float(np.linalg.norm(d))
    if r == 0.0:
        raise DomainError("coincident nuclei have no defined dipolar coupling")
    cos_t = d[2] / r
    return (prefactor_khz_nm3 / r**3) * (1.0 - 3.0 * cos_t**2)


def sample_bath(sites: np.ndarray, config: LatticeConfig) -> BathRealization:
    """Sample 13C occupancy over ``sites`` and assemble the couplings.

    Occupancy is an independent Bernoulli draw per site at the configured
    abundance, driven by ``numpy.random.default_rng(config.seed)``; identical
    (sites, config) inputs therefore reproduce the realization bit for bit.
    """
    sites = np.asarray(sites, dtype=float).reshape(-1, 3)
    rng = np.random.default_rng(config.seed)
    occupied = rng.random(len(sites)) < config.abundance
    positions = sites[occupied]

    spins = [
        NuclearSpin(tuple(pos), tuple(hyperfine_vector(pos))) for pos in positions
    ]

    pair_couplings: dict[tuple[int, int], float] = {}
    if len(positions) >= 2:
        tree = cKDTree(positions)
        for i, j in sorted(tree.query_pairs(config.pair_cutoff)):
            pair_couplings[(i, j)] = nuclear_dipolar_coupling(
                positions[i], positions[j]
            )

    return BathRealization(
        spins=spins,
        pair_couplings=pair_couplings,
        gamma_n=GAMMA_N_13C_KHZ_PER_G,
        seed=config.seed,
        config=config,
    )
