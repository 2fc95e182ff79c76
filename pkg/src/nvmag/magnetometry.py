"""Field inversion, vector reconstruction, and ODMR sign resolution.

The revival law T_revival = alpha / B turns a measured revival spacing into
a field magnitude; repeating the measurement along three orthogonal defect
orientations gives unsigned components, and an ODMR probe of the candidate
orientations removes the sign ambiguity (up to the antiparallel pair, which
is spectroscopically invisible).

Spin-1 energies are in GHz, fields in Gauss.  The level solver is an exact
3x3 eigendecomposition; closed forms exist only for the axial case and are
used as cross-checks, not as the implementation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .constants import ALPHA_MS_G, GAMMA_E_GHZ_PER_G, ZERO_FIELD_SPLITTING_GHZ
from .errors import ConfigError, DomainError

_SQ2 = math.sqrt(2.0)

# Spin-1 operators in the (+1, 0, -1) basis.
SPIN1_SX = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQ2
SPIN1_SY = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQ2
SPIN1_SZ = np.diag([1.0, 0.0, -1.0]).astype(complex)

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class Calibration:
    """Revival-law constant alpha (ms*G) and where it came from.

    source is "paper" for the published fit and "refit" when alpha was
    re-estimated from a fresh simulated sweep.
    """

    alpha: float = ALPHA_MS_G
    source: str = "paper"

    def __post_init__(self) -> None:
        if self.alpha <= 0:
            raise ConfigError("calibration constant must be positive")
        if self.source not in ("paper", "refit"):
            raise ConfigError('calibration source must be "paper" or "refit"')


@dataclass(frozen=True)
class AxisMeasurement:
    """A revival-time measurement taken with the defect axis along ``axis``."""

    axis: tuple[float, float, float]
    T_R: float
    bias: float = 0.0  # bias field applied along the same axis, Gauss

    def __post_init__(self) -> None:
        if abs(np.linalg.norm(self.axis) - 1.0) > _UNIT_TOL:
            raise ConfigError("measurement axis must be a unit vector")
        if self.T_R <= 0:
            raise ConfigError("revival time must be positive")


@dataclass(frozen=True)
class FieldEstimate:
    """Reconstructed field: magnitude, direction cosines, sign candidates."""

    magnitude: float
    direction_cosines: tuple[float, float, float]
    components: tuple[float, float, float]
    sign_candidates: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if abs(sum(c * c for c in self.direction_cosines) - 1.0) > _UNIT_TOL:
            raise ConfigError("direction cosines must have unit square sum")

    def to_json_dict(self) -> dict:
        return {
            "magnitude_G": self.magnitude,
            "direction_cosines": list(self.direction_cosines),
            "components_G": list(self.components),
            "sign_candidates_G": [list(c) for c in self.sign_candidates],
        }


def invert_TR_to_B(t_revival_ms: float, calibration: Calibration = Calibration()) -> float:
    """Field magnitude (Gauss) from a revival spacing: B = alpha / T_R."""
    if t_revival_ms <= 0:
        raise DomainError("revival time must be positive to invert")
    return calibration.alpha / t_revival_ms


def subtract_bias(measured_g: float, bias_g: float) -> float:
    """Remove a known collinear bias from a projected-field measurement."""
    return measured_g - bias_g


def measurements_to_components(
    measurements: list[AxisMeasurement],
    calibration: Calibration = Calibration(),
) -> tuple[float, float, float]:
    """Unsigned components from three orthogonal axis measurements.

    Each measurement inverts to the magnitude of the total projected field
    along its axis; any recorded bias is subtracted afterwards.  Axes must
    be mutually orthogonal unit vectors.
    """
    if len(measurements) != 3:
        raise ConfigError("component reconstruction needs exactly three axes")
    axes = np.array([m.axis for m in measurements], dtype=float)
    gram = axes @ axes.T
    if not np.allclose(gram, np.eye(3), atol=1e-6):
        raise ConfigError("measurement axes must be mutually orthogonal")
    comps = []
    for m in measurements:
        projected = invert_TR_to_B(m.T_R, calibration)
        comps.append(abs(subtract_bias(projected, m.bias)))
    return tuple(comps)


def reconstruct_field(components_g) -> FieldEstimate:
    """Assemble magnitude, direction, and sign candidates from components.

    The per-axis inversion yields only |B_i|, so every sign pattern over the
    nonzero components is a candidate orientation: 2^(number of nonzero
    components) candidates (8 in general position; the antiparallel pair
    among them can never be separated spectroscopically).
    """
    comps = np.asarray(components_g, dtype=float).reshape(-1)
    if comps.size != 3:
        raise ConfigError("a field estimate needs exactly three components")
    magnitude = float(np.linalg.norm(comps))
    if magnitude == 0.0:
        raise DomainError("zero field: direction is undefined")
    cosines = tuple(float(c) for c in comps / magnitude)

    magnitudes = np.abs(comps)
    candidates = []
    for signs in itertools.product((1.0, -1.0), repeat=3):
        cand = tuple(float(s * m) for s, m in zip(signs, magnitudes))
        if cand not in candidates:
            candidates.append(cand)
    return FieldEstimate(
        magnitude=magnitude,
        direction_cosines=cosines,
        components=tuple(float(c) for c in comps),
        sign_candidates=tuple(candidates),
    )


def zeeman_levels(
    field_g,
    splitting_ghz: float = ZERO_FIELD_SPLITTING_GHZ,
    gamma_e_ghz_per_g: float = GAMMA_E_GHZ_PER_G,
) -> np.ndarray:
    """Ground-triplet energies (GHz), ascending, for a field in the defect frame.

    Exact eigenvalues of  D Sz^2 - gamma_e B . S.  For an axial field the
    spectrum closes to (0, D - gamma_e Bz, D + gamma_e Bz); transverse
    components mix the levels and the closed form no longer applies.
    """
    b = np.asarray(field_g, dtype=float).reshape(-1)
    if b.size != 3:
        raise ConfigError("field must have three components")
    ham = splitting_ghz * (SPIN1_SZ @ SPIN1_SZ) - gamma_e_ghz_per_g * (
        b[0] * SPIN1_SX + b[1] * SPIN1_SY + b[2] * SPIN1_SZ
    )
    return np.linalg.eigvalsh(ham)


@dataclass(frozen=True)
class OdmrSpectrum:
    """The two ground-triplet transition frequencies and their diagnostics."""

    f_minus: float  # GHz
    f_plus: float   # GHz
    splitting: float  # f_plus - f_minus, GHz
    asymmetry: float  # |mean(f+, f-) - D|, GHz

    def to_json_dict(self) -> dict:
        return {
            "f_minus_GHz": self.f_minus,
            "f_plus_GHz": self.f_plus,
            "splitting_GHz": self.splitting,
            "asymmetry_GHz": self.asymmetry,
        }


def odmr_transitions(
    field_g,
    splitting_ghz: float = ZERO_FIELD_SPLITTING_GHZ,
    gamma_e_ghz_per_g: float = GAMMA_E_GHZ_PER_G,
) -> OdmrSpectrum:
    """Transition frequencies out of the lowest level, plus alignment checks.

    In the weak-field regime (Zeeman energy well below the zero-field
    splitting) the lowest eigenvalue is the m = 0 like level, so the two
    transitions are the gaps to the upper doublet.  For an aligned field
    they sit symmetrically about the zero-field splitting and are split by
    exactly 2 gamma_e |B|; both diagnostics degrade smoothly with
    misalignment.  Zero field gives a doubly degenerate line (splitting 0).
    """
    levels = zeeman_levels(field_g, splitting_ghz, gamma_e_ghz_per_g)
    f_minus = float(levels[1] - levels[0])
    f_plus = float(levels[2] - levels[0])
    return OdmrSpectrum(
        f_minus=f_minus,
        f_plus=f_plus,
        splitting=f_plus - f_minus,
        asymmetry=abs(0.5 * (f_minus + f_plus) - splitting_ghz),
    )


@dataclass(frozen=True)
class AlignmentResolution:
    """Outcome of probing sign candidates with an ODMR measurement."""

    selected: tuple[tuple[float, float, float], ...]
    spectra: tuple[OdmrSpectrum, ...]  # one per input candidate, same order
    resolved: bool
    note: str = ""


def make_simulated_probe(
    true_field_g,
    splitting_ghz: float = ZERO_FIELD_SPLITTING_GHZ,
    gamma_e_ghz_per_g: float = GAMMA_E_GHZ_PER_G,
):
    """An ODMR probe backed by the level solver: axis -> OdmrSpectrum.

    Models re-orienting the defect axis along ``axis`` in a fixed true
    field: the probe sees the true field's parallel projection along z and
    its transverse remainder along x.
    """
    true = np.asarray(true_field_g, dtype=float).reshape(3)

    def probe(axis) -> OdmrSpectrum:
        a = np.asarray(axis, dtype=float).reshape(3)
        norm = np.linalg.norm(a)
        if abs(norm - 1.0) > 1e-6:
            raise ConfigError("probe axis must be a unit vector")
        b_par = float(true @ a)
        b_perp = float(np.linalg.norm(true - b_par * a))
        return odmr_transitions(
            (b_perp, 0.0, b_par), splitting_ghz, gamma_e_ghz_per_g
        )

    return probe


# Antiparallel candidates produce analytically identical spectra; their
# numerically computed asymmetries differ only by eigensolver rounding
# (~1e-15 GHz).  Asymmetries within this window of the minimum count as
# tied — far above float noise, far below any physical family separation.
_TIE_EPSILON_GHZ = 1e-10


def resolve_alignment(
    candidates,
    probe,
    tolerance_ghz: float = 1e-3,
    gamma_e_ghz_per_g: float = GAMMA_E_GHZ_PER_G,
) -> AlignmentResolution:
    """Select the sign candidate whose probe spectrum is best aligned.

    Candidates are first gated: the spectrum must be symmetric about the
    zero-field splitting within ``tolerance_ghz`` (criterion a) and its
    splitting must match 2 gamma_e |candidate| within the same tolerance
    (criterion b).  Among the gated candidates the one *minimizing* the
    asymmetry wins — misalignment grows the asymmetry from exactly zero,
    so a threshold alone cannot separate nearby sign families at weak
    fields.  Antiparallel candidates produce identical spectra and tie, so
    at best a candidate *pair* survives; a tie across genuinely distinct
    directions (or no gated candidate at all) is reported unresolved.
    """
    cands = [np.asarray(c, dtype=float).reshape(3) for c in candidates]
    if not cands:
        raise ConfigError("no candidates to resolve")
    spectra: list[OdmrSpectrum] = []
    gated: list[int] = []
    for i, cand in enumerate(cands):
        mag = float(np.linalg.norm(cand))
        if mag == 0.0:
            raise DomainError("zero-magnitude candidate has no orientation")
        spectrum = probe(cand / mag)
        spectra.append(spectrum)
        symmetric = spectrum.asymmetry <= tolerance_ghz
        split_ok = abs(spectrum.splitting - 2.0 * gamma_e_ghz_per_g * mag) <= tolerance_ghz
        if symmetric and split_ok:
            gated.append(i)

    if not gated:
        return AlignmentResolution(
            selected=(),
            spectra=tuple(spectra),
            resolved=False,
            note="no candidate matches an aligned spectrum within tolerance",
        )

    min_asym = min(spectra[i].asymmetry for i in gated)
    winners = [i for i in gated if spectra[i].asymmetry <= min_asym + _TIE_EPSILON_GHZ]
    selected = tuple(tuple(float(x) for x in cands[i]) for i in winners)

    def family(vec: np.ndarray) -> tuple:
        # a direction and its antipode are one family; round away float fuzz
        unit = vec / np.linalg.norm(vec)
        a = tuple(np.round(unit, 9))
        return min(a, tuple(np.round(-unit, 9)))

    antipodal_families = {family(cands[i]) for i in winners}
    if len(antipodal_families) > 1:
        return AlignmentResolution(
            selected=selected,
            spectra=tuple(spectra),
            resolved=False,
            note="multiple distinct directions tie; probe cannot separate them",
        )
    note = (
        "antiparallel pair remains: aligned and anti-aligned spectra coincide"
        if len(winners) == 2
        else ""
    )
    return AlignmentResolution(
        selected=selected,
        spectra=tuple(spectra),
        resolved=True,
        note=note,
    )
