"""Acceptance suite: one test per desk-scale quantitative claim.

Each test prints a PASS/FAIL line (run with -s to see them inline).  The
Monte-Carlo runs are fully seeded, so every number here is reproducible.

SNR axis convention: the link noise level is N0 = K/(gamma_s*M_t), so the
effective symbol SNR entering the error-rate formulas is 1/N0 =
gamma_s*M_t/K.  Sweeps anchored to published BER levels are therefore run
at configured gamma_s = target_effective - 10*log10(M_t/K); the matching
union bound evaluates the same effective SNR.  Criteria that compare two
runs (detector ordering, waveform gap, CSI floor) are invariant to this
offset.
"""
import math
import warnings

import numpy as np
import pytest

from gsmafdm.analysis import diversity_and_coding_gain, union_bound_ber
from gsmafdm.channel import (assemble_effective, daft_channel_operator,
                             daft_channel_sparse, generate_paths)
from gsmafdm.detectors import DetectorContext, complexity_model_ops
from gsmafdm.mapping import (Constellation, GsmConfig, build_frame,
                             build_tap_codebook, demap_frame)
from gsmafdm.sim import (SimConfig, _FrameRunner, complexity_table,
                         run_ber_sweep, run_capacity_sweep,
                         run_detector_comparison)
from gsmafdm.waveform import AfdmParams, daft, idaft

S2 = math.sqrt(2) / 2


def report(num: int, name: str, ok: bool, detail: str = "") -> None:
    print(f"\nACCEPTANCE {num:2d} {name}: {'PASS' if ok else 'FAIL'}"
          f"{'  [' + detail + ']' if detail else ''}")


def _crossing_db(snrs, bers, level=1e-3):
    """Log-linear interpolation of the SNR where a BER curve hits level."""
    for i in range(len(snrs) - 1):
        if bers[i] >= level >= bers[i + 1]:
            t = (math.log10(level) - math.log10(bers[i])) / \
                (math.log10(bers[i + 1]) - math.log10(bers[i]))
            return snrs[i] + t * (snrs[i + 1] - snrs[i])
    raise AssertionError(f"BER level {level} not bracketed by {list(bers)}")


# --------------------------------------------------------------- criterion 1

def test_01_mapper_exactness():
    """24-bit worked example reproduces the published frame matrix."""
    cfg = GsmConfig(4, 4, 4, 2, 4)
    cb = build_tap_codebook(4, 2)
    con = Constellation(4)
    bits = np.array([int(c) for c in "000010101001010001110111"], dtype=np.uint8)
    printed = np.array([
        [-S2 + S2 * 1j,  S2 + S2 * 1j,  0,             0],
        [S2 + S2 * 1j,   0,             S2 + S2 * 1j,  0],
        [0,             -S2 - S2 * 1j,  0,            -S2 - S2 * 1j],
        [0,              0,            -S2 - S2 * 1j,  S2 - S2 * 1j],
    ])
    x = build_frame(bits, cfg, cb, con)
    mismatch = np.abs(x - printed) > 1e-12
    # the published display is internally inconsistent at exactly one entry:
    # groups 1 and 3 both open with symbol bits [0,0], which the example's
    # own first-column derivation maps to -s+sj, yet entry (1,2) prints
    # +s+sj; every other entry must match verbatim
    erratum_only = mismatch.sum() == 1 and bool(mismatch[1, 2])
    corrected = printed.copy()
    corrected[1, 2] = -S2 + S2 * 1j
    exact = np.allclose(x, corrected, atol=1e-12)
    roundtrip = np.array_equal(demap_frame(x, cfg, cb, con), bits)
    ok = exact and erratum_only and roundtrip
    report(1, "mapper-exactness", ok,
           "entry-exact vs the self-consistent example; printed entry (1,2) "
           "is the documented erratum")
    assert ok


# --------------------------------------------------------------- criterion 2

def test_02_transform_identities():
    rng = np.random.default_rng(2)
    worst_inv, worst_dft = 0.0, 0.0
    for n in (6, 16, 64, 256, 1024):
        params = AfdmParams(n=n, c1=3 / (2 * n), c2=1 / (4 * n * n), l_p=0)
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        worst_inv = max(worst_inv, float(np.abs(daft(idaft(z, params), params) - z).max()))
        zero = AfdmParams.ofdm(n=n, l_max=0)
        f = np.exp(-2j * np.pi * np.outer(np.arange(n), np.arange(n)) / n) / np.sqrt(n)
        worst_dft = max(worst_dft, float(np.abs(daft(z, zero) - f @ z).max()))
    ok = worst_inv < 1e-12 and worst_dft < 1e-12
    report(2, "transform-identities", ok,
           f"max inverse error {worst_inv:.2e}, max DFT error {worst_dft:.2e}")
    assert ok


# --------------------------------------------------------------- criterion 3

def test_03_channel_construction_equivalence():
    params = AfdmParams.full_diversity(n=16, alpha_max=1, k_nu=0, l_max=2)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(100):
        delay = int(rng.integers(0, 3))
        dop = float(rng.integers(-1, 2))
        h_op = daft_channel_operator(delay, dop, params)
        h_sp = daft_channel_sparse(delay, dop, params).toarray()
        worst = max(worst, float(np.abs(h_op - h_sp).max()))
    # banded occupancy at the published illustration setup: N=16, l_max=2,
    # alpha_max=1, k_nu=1, delays {0,1,2}, Dopplers {0.2,0.3,1.4}.  The
    # caption arithmetic "2*k_nu+1 = 5" does not hold at k_nu=1 (it is 3),
    # and k_nu=2, which would give 5, violates the dimension rule at this
    # N and l_max; the check therefore pins band width = 2*k_nu+1.
    pfrac = AfdmParams.full_diversity(n=16, alpha_max=1, k_nu=1, l_max=2)
    width = 2 * pfrac.k_nu + 1
    bands_ok = True
    for delay, dop in zip((0, 1, 2), (0.2, 0.3, 1.4)):
        h = daft_channel_operator(delay, dop, pfrac)
        sp = daft_channel_sparse(delay, dop, pfrac)
        if not (np.diff(sp.indptr) == width).all():
            bands_ok = False
        peaks = np.argmax(np.abs(h), axis=1)
        mass = {}
        for off in range(16):
            vals = h[np.arange(16), (peaks + off) % 16]
            mass[off if off <= 8 else off - 16] = float(np.sum(np.abs(vals) ** 2))
        top = set(sorted(mass, key=lambda o: -mass[o])[:width])
        if top != {-1, 0, 1}:
            bands_ok = False
    from gsmafdm.errors import ConfigurationError
    try:
        AfdmParams.full_diversity(n=16, alpha_max=1, k_nu=2, l_max=2)
        five_wide_feasible = True
    except ConfigurationError:
        five_wide_feasible = False
    ok = worst < 1e-10 and bands_ok and not five_wide_feasible
    report(3, "channel-construction-equivalence", ok,
           f"max closed-form error {worst:.2e}; per-path band = 2k_nu+1 = "
           f"{width} dominant diagonals (a 5-wide guard is infeasible at "
           "this N and delay spread)")
    assert ok


# --------------------------------------------------------------- criterion 4

@pytest.mark.slow
def test_04_bound_tightness():
    """Simulated joint-search BER under the union bound and within x3 of it."""
    eff = np.array([12.0, 14.0, 16.0])
    off = 10 * math.log10(2.0)          # M_t/K = 2
    cfg = SimConfig(m_t=2, m_r=2, n=6, k=1, q=2, p=2, l_max=1, alpha_max=1,
                    integer_doppler=True, detector="mld",
                    fixed_delays=(0.0, 1.0), fixed_dopplers=(0.0, 1.0),
                    snr_db=tuple(eff - off), min_bit_errors=200,
                    max_frames=400_000, frames_per_round=2048,
                    master_seed=101, workers=2)
    curve = run_ber_sweep(cfg)
    gsm = cfg.gsm_config()
    runner = _FrameRunner(cfg)
    paths = generate_paths(2, 1, 1.0, 2, 2, np.random.default_rng(0),
                           integer_doppler=True, delays=np.array([0, 1]),
                           dopplers=np.array([0.0, 1.0]))
    eff_ch = assemble_effective(paths, cfg.waveform_params())
    bound = union_bound_ber(gsm, runner.ctx.codebook, runner.ctx.constellation,
                            eff_ch.h_paths, 10 ** (eff / 10.0), p=2, m_r=2,
                            snr_scale=1.0)
    sims = np.array([pt.ber for pt in curve.points])
    bounds = bound.ber_bound
    below = bool(np.all(sims <= bounds))
    anchor = int(np.argmin(np.abs(np.log10(sims) - math.log10(1e-3))))
    ratio = float(bounds[anchor] / sims[anchor])
    tight = ratio <= 3.0
    detail = ("eff snr " + ", ".join(
        f"{e:g}dB sim {s:.2e} bound {b:.2e}" for e, s, b in zip(eff, sims, bounds))
        + f"; anchor ratio {ratio:.2f}")
    report(4, "bound-tightness", below and tight, detail)
    assert below and tight


# --------------------------------------------------------------- criterion 5

@pytest.mark.slow
def test_05_diversity_order():
    """Exhaustive error-vector enumeration: min rank = P, so V_D = P*M_r."""
    gsm = GsmConfig(2, 2, 6, 1, 2)
    cb = build_tap_codebook(2, 1)
    con = Constellation(2)
    results = {}
    for p, delays, dops in ((2, (0, 1), (0.0, 1.0)), (3, (0, 1, 1), (0.0, 0.0, 1.0))):
        params = AfdmParams.full_diversity(n=6, alpha_max=1, k_nu=0, l_max=1)
        paths = generate_paths(p, 1, 1.0, 2, 2, np.random.default_rng(0),
                               integer_doppler=True,
                               delays=np.array(delays), dopplers=np.array(dops))
        eff = assemble_effective(paths, params)
        v_d, v_c, meta = diversity_and_coding_gain(gsm, cb, con, eff.h_paths,
                                                   m_r=2)
        results[p] = (v_d, v_c, meta["pairs"])
    ok = results[2][0] == 4 and results[3][0] == 6
    report(5, "diversity-order", ok,
           f"P=2: V_D={results[2][0]} over {results[2][2]} ordered pairs; "
           f"P=3: V_D={results[3][0]} over {results[3][2]}")
    assert ok


# --------------------------------------------------------------- criterion 6

@pytest.mark.slow
def test_06_detector_ordering():
    """LLRD >= TC-LLRD >= group-ML in BER; greedy/reduced-space within 1 dB."""
    off = 10 * math.log10(2.0)
    eff_grid = (13.0, 15.0, 17.0)
    base = SimConfig(m_t=4, m_r=4, n=16, k=2, q=4, p=4, l_max=3, alpha_max=1,
                     integer_doppler=True, min_bit_errors=250,
                     max_frames=60_000, frames_per_round=1024,
                     master_seed=21, workers=2)
    dets = [("lmmse-llrd", 3, 3), ("lmmse-tc-llrd", 3, 3), ("lmmse-mld", 3, 3),
            ("grcd", 3, 3), ("rscd", 3, 3)]
    curves = {d: [] for d in dets}
    for snr_eff in eff_grid:
        res = run_detector_comparison(base, dets, snr_eff - off,
                                      stop_on=("lmmse-mld", 3, 3))
        for d in dets:
            curves[d].append(res[d])
    # ordering with a two-standard-error allowance at 15 dB effective
    mid = 1
    def ber(d):
        return curves[d][mid].ber
    def se(d):
        return curves[d][mid].stderr
    tol_a = 2 * math.hypot(se(("lmmse-llrd", 3, 3)), se(("lmmse-tc-llrd", 3, 3)))
    tol_b = 2 * math.hypot(se(("lmmse-tc-llrd", 3, 3)), se(("lmmse-mld", 3, 3)))
    order_ok = (ber(("lmmse-llrd", 3, 3)) >= ber(("lmmse-tc-llrd", 3, 3)) - tol_a
                and ber(("lmmse-tc-llrd", 3, 3)) >= ber(("lmmse-mld", 3, 3)) - tol_b)
    min_errors_ok = all(curves[d][mid].errors >= 200 for d in dets)
    # 1e-3 crossings for the residual-search detectors vs the group scan
    gaps = {}
    snrs = list(eff_grid)
    mld_cross = _crossing_db(snrs, [pt.ber for pt in curves[("lmmse-mld", 3, 3)]])
    for d in (("grcd", 3, 3), ("rscd", 3, 3)):
        cross = _crossing_db(snrs, [pt.ber for pt in curves[d]])
        gaps[d[0]] = cross - mld_cross
    gap_ok = all(abs(g) <= 1.0 for g in gaps.values())
    ok = order_ok and gap_ok and min_errors_ok
    detail = (f"BER@15dB eff: llrd {ber(('lmmse-llrd', 3, 3)):.2e} >= "
              f"tc {ber(('lmmse-tc-llrd', 3, 3)):.2e} >= "
              f"mld {ber(('lmmse-mld', 3, 3)):.2e}; "
              f"1e-3 gaps: grcd {gaps['grcd']:+.2f} dB, rscd {gaps['rscd']:+.2f} dB")
    report(6, "detector-ordering", ok, detail)
    assert ok


# --------------------------------------------------------------- criterion 7

def test_07_tc_equals_llrd_without_unused_patterns():
    """K=1, Q=16 at M_t=4: binom = 2^L1, so pattern checking is a no-op."""
    cfg = SimConfig(m_t=4, m_r=4, n=16, k=1, q=16, p=4, l_max=3, alpha_max=1,
                    integer_doppler=True, snr_db=(9.0,), master_seed=77)
    runner = _FrameRunner(cfg)
    dets = [("lmmse-llrd", 3, 3), ("lmmse-tc-llrd", 3, 3)]
    groups = 0
    identical = True
    frame = 0
    while groups < 10_000:
        out = runner.one_frame(0, frame, detectors=dets)
        errs = {k: v[0] for k, v in out.items()}
        if errs[dets[0]] != errs[dets[1]]:
            identical = False
            break
        groups += cfg.n
        frame += 1
    # error-count equality per frame is necessary; spot-check full decisions
    from gsmafdm.detectors import detect_frame as _detect
    rng = np.random.default_rng(7)
    for _ in range(20):
        bits = rng.integers(0, 2, runner.gsm.l_total).astype(np.uint8)
        x = build_frame(bits, runner.gsm, runner.ctx.codebook,
                        runner.ctx.constellation)
        paths = generate_paths(4, 3, 1.0, 4, 4, rng, integer_doppler=True)
        eff = assemble_effective(paths, runner.params)
        y = eff.g @ np.ascontiguousarray(x.T).reshape(-1)
        a = _detect("lmmse-llrd", y, eff.g, 8.0, runner.ctx)
        b = _detect("lmmse-tc-llrd", y, eff.g, 8.0, runner.ctx)
        identical &= bool(np.array_equal(a.bits, b.bits))
    report(7, "tc-equivalence-corner", identical,
           f"{groups} shared groups, decisions identical")
    assert identical


# --------------------------------------------------------------- criterion 8

@pytest.mark.slow
def test_08_ofdm_degradation():
    """Full-diversity chirp waveform beats the zero-chirp baseline by >= 2 dB
    at BER 1e-3 under 540 km/h Doppler."""
    base = dict(m_t=4, m_r=4, n=16, k=2, q=4, p=3, l_max=2,
                velocity_kmh=540.0, integer_doppler=False,
                detector="lmmse-mld", min_bit_errors=350,
                max_frames=100_000, frames_per_round=1024,
                master_seed=33, workers=2)
    snrs = tuple(float(s) for s in (10, 12, 14, 16))
    afdm = run_ber_sweep(SimConfig(**base, snr_db=snrs))
    ofdm = run_ber_sweep(SimConfig(**base, snr_db=snrs, ofdm_mode=True))
    cross_a = _crossing_db(snrs, [p.ber for p in afdm.points])
    cross_o = _crossing_db(snrs, [p.ber for p in ofdm.points])
    gap = cross_o - cross_a
    ok = gap >= 2.0
    report(8, "ofdm-degradation", ok,
           f"SNR@1e-3: chirp {cross_a:.2f} dB, zero-chirp {cross_o:.2f} dB, "
           f"gap {gap:.2f} dB (bar: 2 dB)")
    assert ok


# --------------------------------------------------------------- criterion 9

@pytest.mark.slow
def test_09_imperfect_csi_floor():
    base = dict(m_t=4, m_r=4, n=16, k=2, q=4, p=4, l_max=3, alpha_max=1,
                integer_doppler=True, detector="lmmse-mld",
                frames_per_round=1024, master_seed=44, workers=2)
    floor = run_ber_sweep(SimConfig(**base, kappa_h=0.8, snr_db=(20.0, 30.0),
                                    min_bit_errors=2000, max_frames=2000))
    b20, b30 = floor.points[0].ber, floor.points[1].ber
    floor_ok = max(b30, b20) / min(b30, b20) <= 2.0
    clean = run_ber_sweep(SimConfig(**base, kappa_h=0.0, snr_db=(20.0, 30.0),
                                    min_bit_errors=80, max_frames=50_000))
    c20 = clean.points[0].ber
    # one-sided: even crediting the 30 dB point with its observed errors + 2
    c30_ub = (clean.points[1].errors + 2) / clean.points[1].bits
    improve_ok = c20 / c30_ub >= 10.0
    ok = floor_ok and improve_ok
    report(9, "imperfect-csi-floor", ok,
           f"kappa=0.8: {b20:.2e} -> {b30:.2e} (x{max(b30,b20)/min(b30,b20):.2f}); "
           f"kappa=0: {c20:.2e} -> <={c30_ub:.2e} (>= x{c20 / c30_ub:.0f})")
    assert ok


# -------------------------------------------------------------- criterion 10

def test_10_dcmc_asymptotes():
    off = 10 * math.log10(2.0)          # M_t/K at this configuration
    cfg = SimConfig(m_t=2, m_r=2, n=4, k=1, q=2, p=2, l_max=0, alpha_max=1,
                    integer_doppler=True, snr_db=(40.0 - off, -20.0 - off),
                    capacity_samples=60, master_seed=55)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rows = run_capacity_sweep(cfg)
    l_over_n = cfg.gsm_config().l_total / cfg.n
    hi, lo = rows[0]["value"], rows[1]["value"]
    ok = abs(hi - l_over_n) <= 0.01 * l_over_n and lo <= 0.05
    report(10, "dcmc-asymptotes", ok,
           f"C(eff 40dB) = {hi:.4f} (L/N = {l_over_n}), C(eff -20dB) = {lo:.4f}")
    assert ok


# -------------------------------------------------------------- criterion 11

def test_11_complexity_ordering():
    cfg = SimConfig(m_t=4, m_r=4, n=16, k=2, q=4, p=4, l_max=3, alpha_max=1,
                    integer_doppler=True, min_bit_errors=10 ** 9,
                    max_frames=400, frames_per_round=400, master_seed=55,
                    snr_db=(12.0,))
    dets = [("grcd", 1, 1), ("rscd", 1, 1), ("lmmse-llrd", 3, 3),
            ("lmmse-tc-llrd", 3, 3), ("lmmse-mld", 3, 3)]
    rows = {r["detector"].split("(")[0]: r for r in
            complexity_table(cfg, dets, 12.0)}
    grcd = rows["grcd"]["model_ops"]
    rscd = rows["rscd"]["model_ops"]
    llrd = rows["lmmse-llrd"]["model_ops"]
    tc_worst = rows["lmmse-tc-llrd"]["model_ops_worst"]
    mld = rows["lmmse-mld"]["model_ops"]
    ok = grcd < min(rscd, llrd) and max(rscd, llrd) < tc_worst < mld
    report(11, "complexity-ordering", ok,
           f"grcd(T1=1) {grcd:.3e} < rscd(T2=1) {rscd:.3e}, llrd {llrd:.3e} "
           f"< tc-worst {tc_worst:.3e} < group-ml {mld:.3e}")
    assert ok


def test_12_scale_note():
    """Not a criterion: records which published results stay out of scope."""
    report(0, "scale-note", True,
           "full-size BER curves at N=64..128 down to 1e-5 and the coded "
           "runs are out of desk-scale scope; covered by the scaled checks")
    assert True
