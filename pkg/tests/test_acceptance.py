"""Acceptance battery: one verdict line per contract criterion.

Each test runs its pipeline at the production protocol, evaluates the
stated tolerance, and emits a single ``[PASS]``/``[FAIL]`` line (echoed in
the terminal summary by the session hook) before asserting.  Simulated
traces are cached and shared across criteria, so the battery completes in
a couple of minutes on one core.
"""

import math
import warnings

import numpy as np
import pytest

from nvmag.bath import LatticeConfig, NuclearSpin, sample_bath
from nvmag.constants import (
    ALPHA_MS_G,
    GAMMA_E_GHZ_PER_G,
    GAMMA_N_13C_KHZ_PER_G,
    ZERO_FIELD_SPLITTING_GHZ,
)
from nvmag.decoherence import (
    EchoSchedule,
    FieldVector,
    echo_coherence_trace,
    ensemble_average,
    pair_echo_factor,
    single_spin_echo_factor,
)
from nvmag.errors import PhysicsError
from nvmag.magnetometry import (
    AxisMeasurement,
    Calibration,
    invert_TR_to_B,
    make_simulated_probe,
    measurements_to_components,
    odmr_transitions,
    reconstruct_field,
    resolve_alignment,
    subtract_bias,
    zeeman_levels,
)
from nvmag.sensitivity import (
    ReadoutModel,
    build_report,
    fluorescence_signal,
    optimal_sensitivity,
    sensitivity_eta,
    signal_response,
)
from nvmag.timescales import (
    extract_timescales,
    extract_Tw,
    find_revival_peaks,
    fit_power_law,
    snap_to_comb,
)

from oracles import exact_echo, exact_echo_trace, single_echo_unitary, spin1_levels_charpoly

GAMMA = GAMMA_N_13C_KHZ_PER_G
PHYSICAL_SPACING_MS_G = 1.0 / GAMMA  # revival spacing coefficient, ms*G

FIELDS_G = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0)
DILUTE, NATURAL, ENRICHED = 0.003, 0.011, 0.03
N_SWEEP_SEEDS = 10


def sweep_abundance(field_g: float) -> float:
    """Low fields need a dilute bath so the envelope outlives a revival."""
    return DILUTE if field_g <= 5.0 else NATURAL


def sweep_window(field_g: float, abundance: float) -> float:
    period = PHYSICAL_SPACING_MS_G / field_g
    if abundance <= 0.004:
        return 6.2 * period
    return min(max(4.6 * period, 0.55), 1.05)


def ensemble_of(traces):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ensemble_average(list(traces))


def check(log, name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    log.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="session")
def trace_cache(full_sites):
    """Memoized axial-field echo traces on the production lattice."""
    cache: dict = {}

    def get(field_g: float, abundance: float, seed: int, t_max_ms: float, ppp: int = 48):
        key = (field_g, abundance, seed, round(t_max_ms, 9), ppp)
        if key not in cache:
            cfg = LatticeConfig(seed=seed, abundance=abundance)
            bath = sample_bath(full_sites, cfg)
            sched = EchoSchedule.for_field(
                field_g, t_max_ms=t_max_ms, points_per_period=ppp
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                cache[key] = echo_coherence_trace(
                    bath, FieldVector.along_z(field_g), sched
                )
        return cache[key]

    return get


def test_01_revival_spacing_law(criterion_log, trace_cache):
    means = {}
    for b in FIELDS_G:
        ab = sweep_abundance(b)
        window = sweep_window(b, ab)
        spacings = [
            extract_timescales(trace_cache(b, ab, seed, window)).T_R
            for seed in range(N_SWEEP_SEEDS)
        ]
        finite = [v for v in spacings if math.isfinite(v)]
        means[b] = sum(finite) / len(finite)
    fit = fit_power_law(list(means), list(means.values()))
    c_err = fit.coefficient / ALPHA_MS_G - 1.0
    ok = abs(fit.exponent + 1.0) <= 0.05 and abs(c_err) <= 0.05
    check(
        criterion_log,
        "revival spacing law",
        ok,
        f"T_R = c*B^p over {{1..100}} G, {N_SWEEP_SEEDS} realizations each: "
        f"c = {fit.coefficient:.6f} ms*G ({100 * c_err:+.2f}% of {ALPHA_MS_G}, "
        f"within 5%), p = {fit.exponent:.6f} (within 0.05 of -1)",
    )


def test_02_collapse_width_law(criterion_log, full_sites):
    width_c0, width_p0 = 0.0427, -0.65  # grid-sizing guess only, not the verdict
    means, counts = {}, {}
    for b in FIELDS_G:
        width_guess = width_c0 * b**width_p0
        sched = EchoSchedule.regular(8.0 * width_guess, width_guess / 14.0)
        field = FieldVector.along_z(b)
        widths = []
        for seed in range(N_SWEEP_SEEDS):
            bath = sample_bath(
                full_sites, LatticeConfig(seed=seed, abundance=NATURAL)
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                trace = echo_coherence_trace(bath, field, sched)
            try:
                width, _ = extract_Tw(trace)
            except PhysicsError:
                continue  # deep-collapse crossing absent for this realization
            widths.append(width)
        means[b] = float(np.mean(widths))
        counts[b] = len(widths)
    fit = fit_power_law(list(means), list(means.values()))
    ok = abs(fit.exponent + 0.65) <= 0.10
    found = "/".join(str(counts[b]) for b in FIELDS_G)
    check(
        criterion_log,
        "first-collapse width law",
        ok,
        f"T_w exponent = {fit.exponent:.6f} over 1-100 G at natural abundance "
        f"(within 0.10 of -0.65); crossings found {found} of {N_SWEEP_SEEDS} per field",
    )


def test_03_envelope_saturation(criterion_log, trace_cache):
    t2_by_field = {}
    for b in (10.0, 20.0, 50.0, 100.0):
        window = sweep_window(b, NATURAL)
        ens = ensemble_of(trace_cache(b, NATURAL, s, window) for s in range(10))
        t2_by_field[b] = extract_timescales(ens).T2
    values = np.array(list(t2_by_field.values()))
    spread = float((values.max() - values.min()) / values.mean())
    grand = float(values.mean())
    ok = spread < 0.30 and 0.25 <= grand <= 1.0
    listing = ", ".join(f"{b:g} G: {v:.3f}" for b, v in t2_by_field.items())
    check(
        criterion_log,
        "envelope saturation above 10 G",
        ok,
        f"ensemble-trace T2 [{listing}] ms; spread (max-min)/mean = "
        f"{100 * spread:.1f}% (< 30%), mean = {grand:.3f} ms "
        f"(within a factor of 2 of 0.5 ms)",
    )


def test_04_abundance_ordering(criterion_log, trace_cache):
    legs = (
        (DILUTE, sweep_window(10.0, DILUTE)),
        (NATURAL, sweep_window(10.0, NATURAL)),
        (ENRICHED, 0.30),
    )
    t2 = {}
    for ab, window in legs:
        ens = ensemble_of(trace_cache(10.0, ab, s, window) for s in range(4))
        t2[ab] = extract_timescales(ens).T2
    ok = t2[ENRICHED] < t2[NATURAL] < t2[DILUTE]
    check(
        criterion_log,
        "abundance ordering",
        ok,
        f"ensemble-trace T2 at 10 G: {t2[ENRICHED]:.4f} ms (3%) < "
        f"{t2[NATURAL]:.4f} ms (1.1%) < {t2[DILUTE]:.4f} ms (0.3%); the 3% point "
        f"sits where pair clustering truncates hardest, see the notes ledger",
    )


def test_05_ten_gauss_revival_train(criterion_log, trace_cache):
    window = sweep_window(10.0, NATURAL)
    ens = ensemble_of(trace_cache(10.0, NATURAL, s, window) for s in range(5))
    ts = extract_timescales(ens)
    teeth = [
        p for p in snap_to_comb(find_revival_peaks(ens), ts.T_R) if p.time > 0
    ]
    spacings = np.diff([p.time for p in teeth[:4]])
    spacing_ok = bool(np.all(np.abs(spacings / 0.0937 - 1.0) < 0.03))
    predicted_width = 0.0427 * 10.0**-0.65  # collapse-width law at 10 G
    width_ratio = ts.T_w / predicted_width
    ok = len(teeth) >= 3 and spacing_ok and abs(width_ratio - 1.0) < 0.20
    check(
        criterion_log,
        "ten-gauss revival train",
        ok,
        f"{len(teeth)} revivals (>= 3); apex spacings "
        f"{[round(float(s), 6) for s in spacings]} ms each within 3% of 0.0937; "
        f"first-collapse width {ts.T_w:.6f} ms = {width_ratio:.3f}x the "
        f"width-law value (within 20%)",
    )


def test_06_field_round_trip(criterion_log, trace_cache, full_sites):
    cal = Calibration()

    axial_errors = {}
    for b_true, ab in ((0.5, 0.001), (2.0, DILUTE), (10.0, DILUTE)):
        window = 6.2 * PHYSICAL_SPACING_MS_G / b_true
        ens = ensemble_of(trace_cache(b_true, ab, s, window) for s in range(6))
        b_rec = invert_TR_to_B(extract_timescales(ens).T_R, cal)
        axial_errors[b_true] = b_rec / b_true - 1.0
    axial_ok = all(abs(e) <= 0.03 for e in axial_errors.values())

    # 0.1 G: the first revival would sit at ~9.3 ms, far beyond the envelope
    sched_flag = EchoSchedule.regular(3.0, 0.02)
    flag_field = FieldVector.along_z(0.1)
    flag_traces = []
    for seed in range(4):
        bath = sample_bath(full_sites, LatticeConfig(seed=seed, abundance=DILUTE))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            flag_traces.append(echo_coherence_trace(bath, flag_field, sched_flag))
    flag_ts = extract_timescales(ensemble_of(flag_traces))
    flag_ok = not flag_ts.has_revivals and "no-revival" in flag_ts.flags

    # bias path: re-measure at 0.1 G + 5 G bias, with the spacing-to-field
    # coefficient refit from nearby bias-only measurements
    def ensemble_spacing(b: float) -> float:
        window = 12.0 * PHYSICAL_SPACING_MS_G / b
        ens = ensemble_of(
            trace_cache(b, DILUTE, s, window, ppp=64) for s in range(12)
        )
        return extract_timescales(ens).T_R

    alpha_refit = float(
        np.mean([ensemble_spacing(bc) * bc for bc in (4.0, 6.0, 8.0)])
    )
    cal_refit = Calibration(alpha=alpha_refit, source="refit")
    b_total = invert_TR_to_B(ensemble_spacing(5.1), cal_refit)
    bias_error = subtract_bias(b_total, 5.0) / 0.1 - 1.0
    bias_ok = abs(bias_error) <= 0.05

    ok = axial_ok and flag_ok and bias_ok
    axial_txt = ", ".join(
        f"{b:g} G {100 * e:+.2f}%" for b, e in axial_errors.items()
    )
    check(
        criterion_log,
        "field inversion round trip",
        ok,
        f"axial recovery [{axial_txt}] (each within 3%); 0.1 G trace raises the "
        f"no-revival flag; bias path (5 G bias, refit coefficient "
        f"{alpha_refit:.5f} ms*G) recovers 0.1 G at {100 * bias_error:+.2f}% "
        f"(within 5%)",
    )


def test_07_vector_reconstruction(criterion_log):
    true_field = 0.5 * np.array([1.0, 2.0, 2.0]) / 3.0
    axes = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
    measurements = [
        AxisMeasurement(
            axis=a, T_R=PHYSICAL_SPACING_MS_G / abs(float(true_field @ np.array(a)))
        )
        for a in axes
    ]
    estimate = reconstruct_field(measurements_to_components(measurements, Calibration()))

    magnitude_error = estimate.magnitude / float(np.linalg.norm(true_field)) - 1.0
    true_cosines = true_field / np.linalg.norm(true_field)
    cosine_error = max(
        abs(c - t) for c, t in zip(estimate.direction_cosines, true_cosines)
    )
    ambiguity_ok = len(estimate.sign_candidates) == 8

    resolution = resolve_alignment(
        estimate.sign_candidates, make_simulated_probe(true_field), tolerance_ghz=1e-3
    )
    families = sorted(tuple(np.sign(c)) for c in resolution.selected)
    family_ok = (
        resolution.resolved
        and families == [(-1.0, -1.0, -1.0), (1.0, 1.0, 1.0)]
        and "antiparallel" in resolution.note
    )

    ok = (
        abs(magnitude_error) <= 0.03
        and cosine_error <= 0.05
        and ambiguity_ok
        and family_ok
    )
    check(
        criterion_log,
        "vector reconstruction",
        ok,
        f"magnitude error {100 * magnitude_error:+.2f}% (within 3%); direction "
        f"cosine error {cosine_error:.1e} (within 0.05); 8 sign candidates "
        f"reported; probe resolves the true direction family up to its "
        f"antiparallel twin",
    )


def test_08_level_spectrum(criterion_log):
    d = ZERO_FIELD_SPLITTING_GHZ
    g = GAMMA_E_GHZ_PER_G

    axial_err = 0.0
    for b in (0.5, 10.0, 100.0, 500.0):
        levels = zeeman_levels(np.array([0.0, 0.0, b]))
        closed_form = np.sort([0.0, d - g * b, d + g * b])
        axial_err = max(axial_err, float(np.max(np.abs(levels - closed_form))))

    transverse_err = 0.0
    for vec in ((7.0, 0.0, 0.0), (3.0, 4.0, 5.0), (0.2, -1.3, 0.7)):
        levels = zeeman_levels(np.array(vec))
        oracle = spin1_levels_charpoly(np.array(vec), d, g)
        transverse_err = max(transverse_err, float(np.max(np.abs(levels - oracle))))

    splitting = odmr_transitions(np.array([0.0, 0.0, 10.0])).splitting
    splitting_err = abs(splitting - 0.05605)

    ok = axial_err <= 1e-10 and transverse_err <= 1e-10 and splitting_err <= 1e-12
    check(
        criterion_log,
        "level spectrum",
        ok,
        f"axial closed form max err {axial_err:.1e} GHz (<= 1e-10); transverse "
        f"vs characteristic-polynomial oracle max err {transverse_err:.1e} "
        f"(<= 1e-10); axial 10 G splitting {splitting * 1e3:.4f} MHz (= 56.05)",
    )


def test_09_sensitivity_optimum(criterion_log):
    cal = Calibration()
    contrast = 0.3

    optimum = optimal_sensitivity(0.5, contrast, cal)
    eta_ut = optimum.eta_min_uT_sqHz
    eta_ok = abs(eta_ut / 20.7 - 1.0) <= 0.05

    report = build_report(0.5, ReadoutModel(C=contrast), cal)
    finite = report.eta_G_sqHz[np.isfinite(report.eta_G_sqHz)]
    grid_ratio = float(finite.min()) / report.eta_min_G_sqHz
    grid_ok = grid_ratio <= 1.02

    response_err = 0.0
    for tau in (0.11, 0.23, 0.37):
        analytic = signal_response(tau, 2.2, 0.4, cal)
        h = 1e-6
        numeric = (
            fluorescence_signal(tau, cal.alpha / (2.2 + h), 0.4)
            - fluorescence_signal(tau, cal.alpha / (2.2 - h), 0.4)
        ) / (2.0 * h)
        response_err = max(response_err, abs(analytic / numeric - 1.0))
    response_ok = response_err <= 1e-5

    taus = np.linspace(0.02, 1.2, 97)
    eta = sensitivity_eta(taus, 2.2, 0.5, contrast, cal)
    product = (
        eta
        * np.abs(np.sin(2.0 * np.pi * taus * 2.2 / cal.alpha))
        * np.sqrt(taus)
        * np.exp(-taus / 0.5)
    )
    constant = 2.0 * cal.alpha * math.sqrt(1e-3) / (math.pi * contrast)
    constancy_err = float(np.max(np.abs(product / constant - 1.0)))
    constancy_ok = constancy_err <= 1e-12

    ok = eta_ok and grid_ok and response_ok and constancy_ok
    check(
        criterion_log,
        "sensitivity chain",
        ok,
        f"eta_min(T2=0.5 ms, C=0.3) = {eta_ut:.4f} uT/rtHz (20.7 +- 5%); grid "
        f"minimum {100 * (grid_ratio - 1.0):.3f}% above the analytic optimum "
        f"(within 2%); response vs finite difference {response_err:.1e} "
        f"(<= 1e-5); invariant product constant to {constancy_err:.1e} (<= 1e-12)",
    )


def test_10_engine_equivalence(criterion_log, small_sites):
    field = FieldVector.along_z(10.0)

    single_err = 0.0
    branch_pairs = (
        (np.array([0.0, 0.0, 4.0]), np.array([5.0, 0.0, 1.0])),
        (np.array([1.0, -2.0, 3.0]), np.array([-4.0, 0.5, 2.0])),
        (np.array([0.2, 0.0, 9.9]), np.array([0.3, -0.1, 9.7])),
    )
    for h0, h1 in branch_pairs:
        for t in np.linspace(0.013, 1.9, 23):
            got = single_spin_echo_factor(h0, h1, float(t))
            want = single_echo_unitary(h0, h1, float(t), GAMMA)
            single_err = max(single_err, abs(got - want))

    spin_i = NuclearSpin((0.4, 0.0, 0.2), (12.0, -3.0, 7.0))
    spin_j = NuclearSpin((0.0, 0.5, -0.1), (-5.0, 8.0, 2.0))
    pair_err = 0.0
    for t in (0.017, 0.4, 2.3):
        got = pair_echo_factor(spin_i, spin_j, 0.9, field, t)
        cluster = [
            (np.array(s.position), np.array(s.hyperfine)) for s in (spin_i, spin_j)
        ]
        want = exact_echo(cluster, {(0, 1): 0.9}, field.as_array(), t, GAMMA)
        pair_err = max(pair_err, abs(got - want))

    # lattice-sampled baths of 1, 2, and 3 spins whose coupling graphs have
    # no shared vertex, where pair clustering reproduces full evolution
    cluster_err = 0.0
    from nvmag.bath import generate_lattice_sites

    for n_spins, seed in ((1, 15), (2, 1), (3, 3)):
        cfg = LatticeConfig(cutoff_radius=0.75, abundance=NATURAL, seed=seed)
        bath = sample_bath(generate_lattice_sites(cfg), cfg)
        assert len(bath.spins) == n_spins
        sched = EchoSchedule.for_field(10.0, t_max_ms=0.25)
        trace = echo_coherence_trace(bath, field, sched)
        exact = exact_echo_trace(bath, field.as_array(), sched.t_grid, GAMMA)
        cluster_err = max(cluster_err, float(np.max(np.abs(trace.values - exact))))

    empty_cfg = LatticeConfig(cutoff_radius=1.5, abundance=0.0, seed=1)
    empty_bath = sample_bath(small_sites, empty_cfg)
    empty_trace = echo_coherence_trace(
        empty_bath, field, EchoSchedule.for_field(10.0, t_max_ms=0.3)
    )
    empty_ok = len(empty_bath) == 0 and bool(np.all(empty_trace.values == 1.0))

    rerun_cfg = LatticeConfig(seed=13, abundance=0.08)
    sched = EchoSchedule.for_field(20.0, t_max_ms=0.3)
    rerun_field = FieldVector.along_z(20.0)
    first = echo_coherence_trace(sample_bath(small_sites, rerun_cfg), rerun_field, sched)
    second = echo_coherence_trace(sample_bath(small_sites, rerun_cfg), rerun_field, sched)
    determinism_ok = np.array_equal(first.values, second.values) and np.array_equal(
        first.t_grid, second.t_grid
    )
    determinism_ok = determinism_ok and (
        sample_bath(small_sites, rerun_cfg).to_json_dict()
        == sample_bath(small_sites, rerun_cfg).to_json_dict()
    )

    ok = (
        single_err <= 1e-10
        and pair_err <= 1e-10
        and cluster_err <= 1e-8
        and empty_ok
        and determinism_ok
    )
    check(
        criterion_log,
        "engine equivalences",
        ok,
        f"single-spin vs unitary oracle {single_err:.1e} (<= 1e-10); pair vs "
        f"full-Hilbert oracle {pair_err:.1e} (<= 1e-10); clustered vs exact "
        f"evolution on 1/2/3-spin baths {cluster_err:.1e} (<= 1e-8); empty bath "
        f"identically 1; identical seeds give bit-identical traces and baths",
    )
