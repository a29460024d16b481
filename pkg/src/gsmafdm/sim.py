"""Monte-Carlo experiment engine: BER sweeps, bound/capacity drivers, CSV and
plot emission.

One frame of the link runs bits -> sparse frame -> per-antenna inverse chirp
transform -> chirp-periodic prefix -> exact time-domain channel -> prefix
removal -> forward transform -> detector.  The detector sees the effective
matrix built from the same realization (genie CSI) or from multiplicatively
corrupted gains.

Reproducibility: frame f of sweep point s uses the substream
SeedSequence(master_seed, spawn_key=(s, f)); frames are simulated in fixed
rounds, so results are bit-identical for any worker count.
"""
from __future__ import annotations

import csv
import hashlib
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import (PathSet, add_noise, apply_td_channel, assemble_effective,
                      corrupt_csi, generate_paths)
from .detectors import (DETECTOR_NAMES, DetectionResult, DetectorContext,
                        complexity_model_ops, detect_frame)
from .errors import ConfigurationError
from .mapping import Constellation, GsmConfig, build_frame, build_tap_codebook
from .waveform import AfdmParams, add_cpp, daft, idaft

__all__ = [
    "SimConfig",
    "BerPoint",
    "BerCurve",
    "run_ber_sweep",
    "run_bound_sweep",
    "run_capacity_sweep",
    "run_detector_comparison",
    "emit_curve_csv",
    "read_curve_csv",
    "emit_plot_svg",
]

SPEED_OF_LIGHT = 3e8


@dataclass(frozen=True)
class SimConfig:
    """Flat run configuration; unset channel fields take the standard defaults."""

    m_t: int = 4
    m_r: int = 4
    n: int = 16
    k: int = 2
    q: int = 4
    # channel
    p: int = 4
    l_max: int | None = None            # default P-1
    alpha_max: int | None = None        # derived from velocity when unset
    k_nu: int | None = None             # default 0 integer-Doppler, else 1
    integer_doppler: bool = False
    kappa_h: float = 0.0
    velocity_kmh: float | None = None
    carrier_hz: float = 4e9
    delta_f_hz: float = 2e3
    c2: float | None = None
    ofdm_mode: bool = False
    fixed_delays: tuple | None = None
    fixed_dopplers: tuple | None = None
    # detector
    detector: str = "lmmse-mld"
    t1: int = 3
    t2: int = 3
    eps_th: float | None = None
    # sweep / stopping
    snr_db: tuple = (10.0,)
    min_bit_errors: int = 200
    max_frames: int = 100_000
    frames_per_round: int = 256
    master_seed: int = 1
    workers: int = 1
    capacity_samples: int = 300

    @property
    def k_max(self) -> float:
        if self.velocity_kmh is not None:
            v = self.velocity_kmh / 3.6
            doppler_hz = v * self.carrier_hz / SPEED_OF_LIGHT
            return doppler_hz / self.delta_f_hz
        if self.alpha_max is not None:
            return float(self.alpha_max)
        return 1.0

    def resolved(self) -> dict:
        alpha = self.alpha_max if self.alpha_max is not None else int(round(self.k_max))
        l_max = self.l_max if self.l_max is not None else max(self.p - 1, 0)
        k_nu = self.k_nu if self.k_nu is not None else (0 if self.integer_doppler else 1)
        return {"alpha_max": alpha, "l_max": l_max, "k_nu": k_nu}

    def validate(self) -> None:
        GsmConfig(self.m_t, self.m_r, self.n, self.k, self.q)
        if self.detector not in DETECTOR_NAMES:
            raise ConfigurationError(
                f"unknown detector {self.detector!r}; choose from {DETECTOR_NAMES}")
        if self.detector in ("lmmse-llrd", "lmmse-tc-llrd") and self.k >= self.m_t:
            raise ConfigurationError("LLR detectors need K < M_t")
        if not self.ofdm_mode:
            r = self.resolved()
            AfdmParams.full_diversity(self.n, r["alpha_max"], r["k_nu"],
                                      r["l_max"], c2=self.c2,
                                      delta_f=self.delta_f_hz)
        if self.min_bit_errors < 1 or self.max_frames < 1:
            raise ConfigurationError("stopping thresholds must be positive")

    def waveform_params(self) -> AfdmParams:
        r = self.resolved()
        if self.ofdm_mode:
            return AfdmParams.ofdm(self.n, r["l_max"], delta_f=self.delta_f_hz)
        return AfdmParams.full_diversity(self.n, r["alpha_max"], r["k_nu"],
                                         r["l_max"], c2=self.c2,
                                         delta_f=self.delta_f_hz)

    def gsm_config(self) -> GsmConfig:
        return GsmConfig(self.m_t, self.m_r, self.n, self.k, self.q)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def config_hash(self) -> str:
        text = repr(sorted(self.to_dict().items()))
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        kwargs = {}
        type_map = {f.name: f for f in fields(cls)}
        for key, value in d.items():
            if key not in type_map:
                raise ConfigurationError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str) -> "SimConfig":
        d = {}
        with open(path) as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigurationError(f"expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                d[key.strip()] = value.strip()
        return cls.from_dict(d)


_TUPLE_KEYS = {"snr_db", "fixed_delays", "fixed_dopplers"}
_BOOL_KEYS = {"integer_doppler", "ofdm_mode"}
_FLOAT_KEYS = {"kappa_h", "velocity_kmh", "carrier_hz", "delta_f_hz", "c2", "eps_th"}
_STR_KEYS = {"detector"}
_OPTIONAL_INT_KEYS = {"l_max", "alpha_max", "k_nu"}


def _coerce(key: str, value):
    if not isinstance(value, str):
        return tuple(value) if isinstance(value, list) else value
    if value.lower() in ("none", ""):
        return None
    if key in _TUPLE_KEYS:
        return tuple(float(v) for v in value.split(","))
    if key in _BOOL_KEYS:
        return value.lower() in ("1", "true", "yes", "on")
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _STR_KEYS:
        return value
    return int(value)


@dataclass
class BerPoint:
    snr_db: float
    errors: int
    bits: int
    frames: int
    counters: dict
    wall_time: float

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    @property
    def stderr(self) -> float:
        if self.bits == 0:
            return float("nan")
        p = self.ber
        return float(np.sqrt(max(p * (1 - p), 0.0) / self.bits))


@dataclass
class BerCurve:
    config: SimConfig
    points: list

    def low_confidence(self, point: BerPoint) -> bool:
        return point.errors < self.config.min_bit_errors


class _FrameRunner:
    """Per-process state for frame simulation (context tables, waveform)."""

    def __init__(self, cfg: SimConfig):
        cfg.validate()
        self.cfg = cfg
        self.gsm = cfg.gsm_config()
        self.params = cfg.waveform_params()
        self.ctx = DetectorContext.build(self.gsm)
        r = cfg.resolved()
        self.l_max = r["l_max"]
        self.fixed_delays = (np.asarray(cfg.fixed_delays, dtype=np.int64)
                             if cfg.fixed_delays is not None else None)
        self.fixed_dopplers = (np.asarray(cfg.fixed_dopplers, dtype=np.float64)
                               if cfg.fixed_dopplers is not None else None)

    def one_frame(self, snr_idx: int, frame_idx: int, detectors=None):
        """Simulate one frame; returns per-detector (errors, counters)."""
        cfg, gsm = self.cfg, self.gsm
        rng = np.random.default_rng(
            np.random.SeedSequence(cfg.master_seed, spawn_key=(snr_idx, frame_idx)))
        gamma = 10.0 ** (cfg.snr_db[snr_idx] / 10.0)
        bits = rng.integers(0, 2, gsm.l_total).astype(np.uint8)
        frame = build_frame(bits, gsm, self.ctx.codebook, self.ctx.constellation)
        s = idaft(frame.T, self.params).T
        s_ext = add_cpp(s, self.params)
        paths = generate_paths(cfg.p, self.l_max, cfg.k_max, cfg.m_r, cfg.m_t,
                               rng, integer_doppler=cfg.integer_doppler,
                               delays=self.fixed_delays, dopplers=self.fixed_dopplers)
        r = apply_td_channel(paths, s_ext, self.params)
        r = add_noise(r, gamma, gsm.k, gsm.m_t, rng)
        y = daft(r.T, self.params).T.reshape(-1)
        rx_paths = paths
        if cfg.kappa_h > 0:
            rx_paths = paths.with_gains(corrupt_csi(paths.gains, cfg.kappa_h, rng))
        eff = assemble_effective(rx_paths, self.params)
        out = {}
        for name, t1, t2 in detectors or [(cfg.detector, cfg.t1, cfg.t2)]:
            res = detect_frame(name, y, eff.g, gamma, self.ctx,
                               t1=t1, t2=t2, eps_th=cfg.eps_th)
            out[(name, t1, t2)] = (int(np.count_nonzero(res.bits != bits)),
                                   res.counters)
        return out


_RUNNER_CACHE: dict = {}


def _get_runner(cfg: SimConfig) -> _FrameRunner:
    key = cfg.config_hash()
    runner = _RUNNER_CACHE.get(key)
    if runner is None:
        runner = _FrameRunner(cfg)
        _RUNNER_CACHE.clear()
        _RUNNER_CACHE[key] = runner
    return runner


def _simulate_chunk(cfg_dict: dict, snr_idx: int, start: int, count: int,
                    detectors: tuple) -> dict:
    cfg = SimConfig.from_dict(cfg_dict)
    runner = _get_runner(cfg)
    agg = {key: [0, {}] for key in detectors}
    for f in range(start, start + count):
        res = runner.one_frame(snr_idx, f, detectors=list(detectors))
        for key, (err, counters) in res.items():
            agg[key][0] += err
            bucket = agg[key][1]
            for ck, cv in counters.items():
                bucket[ck] = bucket.get(ck, 0) + cv
    return agg


def _merge(total: dict, part: dict) -> None:
    for key, (err, counters) in part.items():
        total[key][0] += err
        bucket = total[key][1]
        for ck, cv in counters.items():
            bucket[ck] = bucket.get(ck, 0) + cv


def _run_point(cfg: SimConfig, snr_idx: int, detectors: list,
               pool: ProcessPoolExecutor | None,
               stop_on: tuple | None = None) -> tuple[dict, int]:
    """Simulate rounds at one sweep point until the stop rule fires.

    stop_on names the detector key whose error count drives stopping
    (defaults to the first); all detectors see identical frames.
    """
    detectors = [tuple(d) for d in detectors]
    stop_key = tuple(stop_on) if stop_on else detectors[0]
    total = {key: [0, {}] for key in detectors}
    frames = 0
    cfg_dict = cfg.to_dict()
    while frames < cfg.max_frames:
        round_frames = min(cfg.frames_per_round, cfg.max_frames - frames)
        if pool is None:
            part = _simulate_chunk(cfg_dict, snr_idx, frames, round_frames,
                                   tuple(detectors))
            _merge(total, part)
        else:
            n_w = max(cfg.workers, 1)
            per = (round_frames + n_w - 1) // n_w
            futs = []
            off = 0
            while off < round_frames:
                cnt = min(per, round_frames - off)
                futs.append(pool.submit(_simulate_chunk, cfg_dict, snr_idx,
                                        frames + off, cnt, tuple(detectors)))
                off += cnt
            for fut in futs:
                _merge(total, fut.result())
        frames += round_frames
        if total[stop_key][0] >= cfg.min_bit_errors:
            break
    return total, frames


def run_ber_sweep(cfg: SimConfig) -> BerCurve:
    """Frame-level Monte-Carlo BER for the configured detector at each SNR."""
    cfg.validate()
    l_total = cfg.gsm_config().l_total
    key = (cfg.detector, cfg.t1, cfg.t2)
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    points = []
    try:
        for s, snr in enumerate(cfg.snr_db):
            t0 = time.perf_counter()
            total, frames = _run_point(cfg, s, [key], pool)
            errors, counters = total[key]
            points.append(BerPoint(snr_db=float(snr), errors=errors,
                                   bits=frames * l_total, frames=frames,
                                   counters=counters,
                                   wall_time=time.perf_counter() - t0))
    finally:
        if pool is not None:
            pool.shutdown()
    return BerCurve(config=cfg, points=points)


def run_detector_comparison(cfg: SimConfig, detectors: list, snr_db: float,
                            stop_on: tuple | None = None) -> dict:
    """Run several detectors on identical frames at one SNR.

    detectors is a list of (name, t1, t2) triples; returns per-triple
    BerPoint records sharing the same instance set.
    """
    cfg = replace(cfg, snr_db=(snr_db,))
    cfg.validate()
    l_total = cfg.gsm_config().l_total
    pool = ProcessPoolExecutor(cfg.workers) if cfg.workers > 1 else None
    try:
        t0 = time.perf_counter()
        total, frames = _run_point(cfg, 0, detectors, pool, stop_on=stop_on)
        dt = time.perf_counter() - t0
    finally:
        if pool is not None:
            pool.shutdown()
    out = {}
    for key, (errors, counters) in total.items():
        out[key] = BerPoint(snr_db=float(snr_db), errors=errors,
                            bits=frames * l_total, frames=frames,
                            counters=counters, wall_time=dt)
    return out


def run_bound_sweep(cfg: SimConfig) -> list:
    """Union-bound BER at each configured SNR.

    The bound conditions on one delay/Doppler structure: the configured
    fixed delays/Dopplers when given, otherwise a draw seeded by
    master_seed.  Gains are averaged analytically.  Points above 1 are
    flagged vacuous.
    """
    from .analysis import EXACT_BOUND_LIMIT, union_bound_ber

    cfg.validate()
    gsm = cfg.gsm_config()
    params = cfg.waveform_params()
    runner = _FrameRunner(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed,
                                                       spawn_key=(0xB0, 0)))
    paths = generate_paths(cfg.p, runner.l_max, cfg.k_max, cfg.m_r, cfg.m_t,
                           rng, integer_doppler=cfg.integer_doppler,
                           delays=runner.fixed_delays,
                           dopplers=runner.fixed_dopplers)
    eff = assemble_effective(paths, params)
    gammas = 10.0 ** (np.asarray(cfg.snr_db) / 10.0)
    mode = "exact" if (1 << gsm.l_total) <= EXACT_BOUND_LIMIT else "sampled"
    res = union_bound_ber(gsm, runner.ctx.codebook, runner.ctx.constellation,
                          eff.h_paths, gammas, p=cfg.p, m_r=cfg.m_r,
                          snr_scale=cfg.m_t / cfg.k, mode=mode,
                          rng=np.random.default_rng(cfg.master_seed))
    rows = []
    for i, snr in enumerate(cfg.snr_db):
        rows.append({"snr_db": float(snr), "value": float(res.ber_bound[i]),
                     "stderr": float(res.stderr[i]),
                     "flag": "vacuous" if res.ber_bound[i] > 1.0 else "",
                     "diversity_order": res.diversity_order,
                     "coding_gain": res.coding_gain, "mode": res.mode})
    return rows


def run_capacity_sweep(cfg: SimConfig) -> list:
    """Discrete-input capacity estimate at each configured SNR."""
    from .analysis import dcmc_capacity

    cfg.validate()
    gsm = cfg.gsm_config()
    params = cfg.waveform_params()
    runner = _FrameRunner(cfg)

    def sampler(rng: np.random.Generator) -> np.ndarray:
        paths = generate_paths(cfg.p, runner.l_max, cfg.k_max, cfg.m_r, cfg.m_t,
                               rng, integer_doppler=cfg.integer_doppler,
                               delays=runner.fixed_delays,
                               dopplers=runner.fixed_dopplers)
        return assemble_effective(paths, params).g

    rows = []
    for i, snr in enumerate(cfg.snr_db):
        rng = np.random.default_rng(np.random.SeedSequence(cfg.master_seed,
                                                           spawn_key=(0xCA, i)))
        res = dcmc_capacity(gsm, runner.ctx.codebook, runner.ctx.constellation,
                            sampler, 10.0 ** (snr / 10.0), cfg.capacity_samples,
                            rng=rng)
        rows.append({"snr_db": float(snr), "value": res.value,
                     "stderr": res.stderr, "flag": "",
                     **{f"meta_{k}": v for k, v in res.meta.items()}})
    return rows


# ---------------------------------------------------------------------------
# output emission

CSV_FIELDS = ["snr_db", "value", "errors", "bits", "frames", "stderr", "flag"]


def _curve_rows(curve: BerCurve) -> list:
    rows = []
    for pt in curve.points:
        rows.append({"snr_db": pt.snr_db, "value": pt.ber, "errors": pt.errors,
                     "bits": pt.bits, "frames": pt.frames, "stderr": pt.stderr,
                     "flag": "low_confidence" if curve.low_confidence(pt) else "",
                     **{f"c_{k}": v for k, v in sorted(pt.counters.items())}})
    return rows


def emit_curve_csv(rows, path: str, kind: str, cfg: SimConfig | None = None) -> None:
    """Write a sweep as CSV; the leading comment records config hash and seed.

    Accepts a BerCurve or a list of row dicts.  Re-running an identical
    configuration produces a byte-identical file (wall time is not stored).
    """
    if isinstance(rows, BerCurve):
        cfg = rows.config
        rows = _curve_rows(rows)
    names = list(CSV_FIELDS)
    for row in rows:
        for key in row:
            if key not in names:
                names.append(key)
    buf = io.StringIO()
    meta = f"# gsm-afdm-curve kind={kind}"
    if cfg is not None:
        meta += f" config_hash={cfg.config_hash()} seed={cfg.master_seed}"
    buf.write(meta + "\n")
    writer = csv.DictWriter(buf, fieldnames=names, restval="")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_curve_csv(path: str):
    """Parse a curve CSV back into (meta, rows); numbers are floated."""
    with open(path) as fh:
        header = fh.readline().strip()
        meta = {}
        if header.startswith("#"):
            for tok in header[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    meta[k] = v
        rows = []
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                if v is None or v == "":
                    parsed[k] = v
                    continue
                try:
                    parsed[k] = float(v) if ("." in v or "e" in v or "inf" in v
                                             or "nan" in v) else int(v)
                except ValueError:
                    parsed[k] = v
            rows.append(parsed)
    return meta, rows


def emit_plot_svg(rows, path: str, kind: str, title: str = "") -> None:
    """Log-y line plot; the SVG metadata lists every plotted sweep point."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if isinstance(rows, BerCurve):
        rows = _curve_rows(rows)
    x = [row["snr_db"] for row in rows]
    y = [row["value"] for row in rows]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    if kind in ("ber", "bound"):
        ax.semilogy(x, np.clip(y, 1e-12, None), "o-")
        ax.set_ylabel("BER" if kind == "ber" else "BER bound")
    else:
        ax.plot(x, y, "o-")
        ax.set_ylabel("bits/s/subcarrier")
    ax.set_xlabel("SNR per symbol (dB)")
    ax.grid(True, which="both", alpha=0.3)
    if title:
        ax.set_title(title)
    desc = "points: " + "; ".join(f"snr_db={row['snr_db']:g}" for row in rows)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Description": desc})
    plt.close(fig)


def complexity_table(cfg: SimConfig, detectors: list, snr_db: float) -> list:
    """Aggregate measured counters and model operation counts per detector.

    Runs every detector on the same instance set (fixed frame budget:
    max_frames frames, no early stop) and reports the per-group operation
    model alongside the raw counters.
    """
    results = run_detector_comparison(cfg, detectors, snr_db,
                                      stop_on=detectors[0])
    gsm = cfg.gsm_config()
    rows = []
    for key, pt in results.items():
        name = key[0]
        ops = complexity_model_ops(name, gsm, pt.counters, pt.frames)
        worst = complexity_model_ops(name, gsm, pt.counters, pt.frames,
                                     worst_case_tc=True)
        rows.append({"snr_db": snr_db, "value": ops, "errors": pt.errors,
                     "bits": pt.bits, "frames": pt.frames,
                     "stderr": 0.0, "flag": "",
                     "detector": f"{name}(t1={key[1]},t2={key[2]})",
                     "model_ops": ops, "model_ops_worst": worst,
                     **{f"c_{k}": v for k, v in sorted(pt.counters.items())}})
    rows.sort(key=lambda row: row["model_ops"])
    return rows
