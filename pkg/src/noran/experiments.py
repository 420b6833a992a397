"""Monte Carlo sweeps of secrecy capacity and eavesdropper BER.

Every trial owns a stream seeded from ``(master_seed, trial_index,
antenna configuration)``. SNR and NORAN mode are deliberately left out of
the seed, so trial ``i`` sees the same ``H``, ``G``, bits and noise at every
SNR and in every mode; A-vs-B comparisons are paired draw by draw.

SNRs are total-budget SNRs: ``snr_bob = P / sigma_n2`` and
``snr_eve = P / sigma_e2``.
"""

import csv
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from noran.channel import (
    PRECODER_MODES,
    ChannelRealization,
    effective_gain,
    sample_rayleigh_channel,
    select_precoder,
    transmit_block,
)
from noran.codebook import EVE_MODELS, build_codebook, fnv1a64, lookup
from noran.errors import ConfigError
from noran.optimizer import CcpConfig, DcObjective, ccp_solve
from noran.rng import MASK64, RngStream, splitmix64
from noran.secrecy import PowerAllocation, secrecy_from_gains

__all__ = [
    "ExperimentConfig",
    "GridPoint",
    "SweepRow",
    "CSV_COLUMNS",
    "parse_mode",
    "grid_points",
    "trial_seed",
    "draw_trial",
    "sc_trials",
    "ber_trials",
    "eve_ber_errors",
    "wilson_interval",
    "run_sc_sweep",
    "run_ber_sweep",
    "write_csv",
    "read_csv",
    "check_rows",
]

MODES = ("off", "fixed", "optimized", "optimized-with-codebook")
WILSON_Z95 = 1.959963984540054

CSV_COLUMNS = (
    "n_tx", "n_rx", "n_eve", "snr_bob_db", "snr_eve_db", "mode", "trials",
    "c_bob_mean", "c_eve_mean", "sc_raw_mean", "sc_raw_std", "sc_clamped_mean",
    "eve_ber", "eve_ber_lo95", "eve_ber_hi95", "seed",
)


def parse_mode(mode):
    """``"fixed:0.5"`` -> ``("fixed", 0.5)``; other modes carry no parameter."""
    name, _, arg = mode.partition(":")
    if name not in MODES:
        raise ConfigError(f"unknown NORAN mode {mode!r}", ["noran_mode"])
    if name == "fixed":
        try:
            value = float(arg)
        except ValueError:
            raise ConfigError(f"fixed mode needs a power, e.g. 'fixed:0.5', got {mode!r}",
                              ["noran_mode"]) from None
        if not (value >= 0 and math.isfinite(value)):
            raise ConfigError(f"fixed NORAN power must be >= 0, got {value!r}", ["noran_mode"])
        return name, value
    if arg:
        raise ConfigError(f"mode {name!r} takes no parameter", ["noran_mode"])
    return name, None


def _tuple(value, cast):
    if isinstance(value, (list, tuple)):
        return tuple(cast(v) for v in value)
    return (cast(value),)


@dataclass(frozen=True)
class ExperimentConfig:
    n_tx: tuple = (2,)
    n_rx: tuple = (2,)
    n_eve: tuple = (2,)
    snr_bob_db: tuple = (10.0,)
    snr_eve_db: tuple = (10.0,)
    p_budget: float = 1.0
    trials: int = 100
    master_seed: int = 1
    modulation: str = "bpsk"
    noran_mode: tuple = ("off", "optimized-with-codebook")
    precoder_mode: str = "max-gain"
    delta: float = 0.1
    eve_model: str = "genie"
    symbols_per_trial: int = 10_000
    ccp: CcpConfig = field(default_factory=CcpConfig)

    def __post_init__(self):
        bad = []
        for name in ("n_tx", "n_rx", "n_eve"):
            vals = _tuple(getattr(self, name), int)
            object.__setattr__(self, name, vals)
            if not vals or min(vals) < 1:
                bad.append(name)
        for name in ("snr_bob_db", "snr_eve_db"):
            vals = _tuple(getattr(self, name), float)
            object.__setattr__(self, name, vals)
            if not vals or not all(math.isfinite(v) for v in vals):
                bad.append(name)
        modes = _tuple(self.noran_mode, str)
        object.__setattr__(self, "noran_mode", modes)
        if not modes:
            bad.append("noran_mode")
        if not (self.p_budget > 0 and math.isfinite(self.p_budget)):
            bad.append("p_budget")
        if self.trials < 1:
            bad.append("trials")
        if self.symbols_per_trial < 1:
            bad.append("symbols_per_trial")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            bad.append("delta")
        if self.modulation != "bpsk":
            bad.append("modulation")
        if self.precoder_mode not in PRECODER_MODES:
            bad.append("precoder_mode")
        if self.eve_model not in EVE_MODELS:
            bad.append("eve_model")
        if not 0 <= self.master_seed <= MASK64:
            bad.append("master_seed")
        if bad:
            raise ConfigError(f"invalid experiment settings: {', '.join(bad)}", bad)
        for mode in modes:
            name, power = parse_mode(mode)
            if name == "fixed" and power > self.p_budget:
                raise ConfigError(f"{mode!r} exceeds the power budget {self.p_budget}", ["noran_mode"])


@dataclass(frozen=True)
class GridPoint:
    n_tx: int
    n_rx: int
    n_eve: int
    snr_bob_db: float
    snr_eve_db: float
    mode: str

    @property
    def sigma_n2_scale(self):
        return 10.0 ** (-self.snr_bob_db / 10.0)

    @property
    def sigma_e2_scale(self):
        return 10.0 ** (-self.snr_eve_db / 10.0)


@dataclass
class SweepRow:
    n_tx: int
    n_rx: int
    n_eve: int
    snr_bob_db: float
    snr_eve_db: float
    mode: str
    trials: int
    c_bob_mean: float
    c_eve_mean: float
    sc_raw_mean: float
    sc_raw_std: float
    sc_clamped_mean: float
    eve_ber: float
    eve_ber_lo95: float
    eve_ber_hi95: float
    seed: int
    c_bob_std: float = 0.0
    c_eve_std: float = 0.0
    sc_clamped_std: float = 0.0


def grid_points(cfg):
    """Grid in output order: antennas, Bob SNR, Eve SNR, then mode."""
    return [
        GridPoint(nt, nr, ne, sb, se, mode)
        for nt in cfg.n_tx
        for nr in cfg.n_rx
        for ne in cfg.n_eve
        for sb in cfg.snr_bob_db
        for se in cfg.snr_eve_db
        for mode in cfg.noran_mode
    ]


def _antenna_hash(n_tx, n_rx, n_eve):
    return fnv1a64(struct.pack("<QQQ", n_tx, n_rx, n_eve))


def trial_seed(master_seed, trial_index, n_tx, n_rx, n_eve):
    return splitmix64((master_seed ^ trial_index ^ _antenna_hash(n_tx, n_rx, n_eve)) & MASK64)


@dataclass
class Trial:
    seed: int
    ch: ChannelRealization
    precoder: object
    gain_h: float
    gain_g: float


def draw_trial(cfg, point, index):
    """Channels and precoder for trial ``index`` at ``point``.

    Draw order from the trial stream: ``H`` then ``G`` then, for
    random-unit precoding, the precoder.
    """
    seed = trial_seed(cfg.master_seed, index, point.n_tx, point.n_rx, point.n_eve)
    rng = RngStream(seed)
    h = sample_rayleigh_channel(point.n_rx, point.n_tx, rng)
    g = sample_rayleigh_channel(point.n_eve, point.n_tx, rng)
    P = cfg.p_budget
    ch = ChannelRealization(h, g, P * point.sigma_n2_scale, P * point.sigma_e2_scale)
    p = select_precoder(h, cfg.precoder_mode, rng)
    return Trial(seed, ch, p, effective_gain(h, p), effective_gain(g, p))


def _planned_eve_gain(cfg, trial):
    return trial.gain_g if cfg.eve_model == "genie" else float(trial.ch.n_eve)


def _design(cfg, point, trial):
    """``(alloc, precoder, cancellation, noran_seed)`` for one trial.

    ``noran_seed`` is None when the NORAN samples come from the trial's own
    stream rather than a codebook entry.
    """
    name, power = parse_mode(point.mode)
    P = cfg.p_budget
    if name == "off":
        return PowerAllocation.full_signal(P), trial.precoder, False, None
    if name == "fixed":
        return PowerAllocation(P - power, power, P), trial.precoder, False, None
    if name == "optimized":
        dc = DcObjective(_planned_eve_gain(cfg, trial), trial.gain_h,
                         trial.ch.sigma_n2, trial.ch.sigma_e2, P)
        return ccp_solve(dc, cfg.ccp).alloc, trial.precoder, False, None
    # enrol this trial's CSI, then query it the way Bob would
    cb = build_codebook(
        [trial.ch], cfg.delta, P, cfg.ccp, trial.seed,
        precoder_mode=cfg.precoder_mode, eve_model=cfg.eve_model,
    )
    entry = lookup(cb, trial.ch.h)
    alloc = PowerAllocation(entry.sigma_u2, entry.sigma_k2, P)
    return alloc, entry.precoder, True, entry.noise_seed


def _secrecy(trial, alloc, precoder, cancellation):
    if precoder is trial.precoder:
        gh, gg = trial.gain_h, trial.gain_g
    else:
        gh, gg = effective_gain(trial.ch.h, precoder), effective_gain(trial.ch.g, precoder)
    return secrecy_from_gains(gh, gg, alloc, trial.ch.sigma_n2, trial.ch.sigma_e2, cancellation)


def sc_trials(cfg, point):
    """Per-trial ``(c_bob, c_eve, c_secrecy_raw)`` arrays at one grid point."""
    out = np.empty((cfg.trials, 3))
    for i in range(cfg.trials):
        trial = draw_trial(cfg, point, i)
        alloc, p, cancel, _ = _design(cfg, point, trial)
        rep = _secrecy(trial, alloc, p, cancel)
        out[i] = rep.c_bob, rep.c_eve, rep.c_secrecy_raw
    return out[:, 0], out[:, 1], out[:, 2]


def eve_ber_errors(ch, p, alloc, n_symbols, bit_rng, noise_rng, noran_rng):
    """Bit errors of a genie MRC eavesdropper over ``n_symbols`` BPSK symbols.

    Eve knows ``G p`` exactly, combines with it, and slices the real part.
    """
    bits = bit_rng.bits(n_symbols)
    s = math.sqrt(alloc.sigma_u2) * (1.0 - 2.0 * bits.astype(np.float64))
    t = math.sqrt(alloc.sigma_k2) * noran_rng.complex_normal(n_symbols)
    _, y = transmit_block(ch, p, s, t, noise_rng)
    gp = ch.g @ p.p
    r = y @ gp.conj()
    decided = (r.real < 0).astype(np.uint8)
    return int(np.count_nonzero(decided != bits))


def ber_trials(cfg, point):
    """Per-trial secrecy triples plus Eve's bit-error counts."""
    c = np.empty((cfg.trials, 3))
    errors = np.empty(cfg.trials, dtype=np.int64)
    for i in range(cfg.trials):
        trial = draw_trial(cfg, point, i)
        alloc, p, cancel, noran_seed = _design(cfg, point, trial)
        rep = _secrecy(trial, alloc, p, cancel)
        c[i] = rep.c_bob, rep.c_eve, rep.c_secrecy_raw
        noran_rng = RngStream(noran_seed) if noran_seed is not None else RngStream.derive(trial.seed, 3)
        errors[i] = eve_ber_errors(
            trial.ch, p, alloc, cfg.symbols_per_trial,
            RngStream.derive(trial.seed, 1), RngStream.derive(trial.seed, 2), noran_rng,
        )
    return c[:, 0], c[:, 1], c[:, 2], errors


def wilson_interval(errors, n, z=WILSON_Z95):
    if n <= 0:
        raise ValueError("need at least one trial")
    phat = errors / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == n else min(1.0, centre + half)
    return lo, hi


def _std(x):
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


def _row(cfg, point, c_bob, c_eve, raw, ber=(math.nan, math.nan, math.nan)):
    clamped = np.maximum(raw, 0.0)
    return SweepRow(
        n_tx=point.n_tx, n_rx=point.n_rx, n_eve=point.n_eve,
        snr_bob_db=point.snr_bob_db, snr_eve_db=point.snr_eve_db, mode=point.mode,
        trials=cfg.trials,
        c_bob_mean=float(np.mean(c_bob)), c_eve_mean=float(np.mean(c_eve)),
        sc_raw_mean=float(np.mean(raw)), sc_raw_std=_std(raw),
        sc_clamped_mean=float(np.mean(clamped)),
        eve_ber=ber[0], eve_ber_lo95=ber[1], eve_ber_hi95=ber[2],
        seed=cfg.master_seed,
        c_bob_std=_std(c_bob), c_eve_std=_std(c_eve), sc_clamped_std=_std(clamped),
    )


def _sc_task(args):
    cfg, point = args
    return _row(cfg, point, *sc_trials(cfg, point))


def _ber_task(args):
    cfg, point = args
    c_bob, c_eve, raw, errors = ber_trials(cfg, point)
    n = cfg.trials * cfg.symbols_per_trial
    total = int(errors.sum())
    lo, hi = wilson_interval(total, n)
    return _row(cfg, point, c_bob, c_eve, raw, (total / n, lo, hi))


def _run(task, cfg, workers):
    jobs = [(cfg, pt) for pt in grid_points(cfg)]
    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [task(j) for j in jobs]
    # map() preserves order and each row depends only on its own job
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, jobs))


def run_sc_sweep(cfg, workers=1):
    """Secrecy-capacity statistics for every grid point."""
    return _run(_sc_task, cfg, workers)


def run_ber_sweep(cfg, workers=1):
    """Eve BER (with Wilson 95% interval) plus secrecy statistics per grid point."""
    if cfg.modulation != "bpsk":
        raise ConfigError(f"unsupported modulation {cfg.modulation!r}", ["modulation"])
    return _run(_ber_task, cfg, workers)


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.9g}"
    return str(value)


def write_csv(rows, path):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in rows:
                d = asdict(row)
                w.writerow([_fmt(d[c]) for c in CSV_COLUMNS])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc


_INT_COLUMNS = {"n_tx", "n_rx", "n_eve", "trials", "seed"}


def read_csv(path):
    """Rows of a sweep CSV as dicts with numeric columns parsed."""
    with open(path, newline="", encoding="utf-8") as fh:
        out = []
        for rec in csv.DictReader(fh):
            row = {}
            for k, v in rec.items():
                if k == "mode":
                    row[k] = v
                elif k in _INT_COLUMNS:
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            out.append(row)
        return out


def check_rows(rows, trend_modes=("off",), slack=1e-7):
    """Post-hoc invariant check on sweep output (dicts or SweepRow).

    Per-row bounds always apply. The SNR trends are checked for modes in
    ``trend_modes``; they hold draw by draw only for modes whose optimum
    moves with the true channels (``off``, or optimized modes planned with
    the genie Eve model). Returns a list of human-readable violations.
    """
    rows = [asdict(r) if isinstance(r, SweepRow) else dict(r) for r in rows]
    problems = []
    for r in rows:
        tag = f"{r['mode']} @ ({r['n_tx']},{r['n_rx']},{r['n_eve']}) {r['snr_bob_db']}/{r['snr_eve_db']} dB"
        if r["sc_raw_std"] < 0:
            problems.append(f"{tag}: negative std")
        if r["sc_clamped_mean"] < -slack:
            problems.append(f"{tag}: negative clamped secrecy")
        if r["c_bob_mean"] < -slack or r["c_eve_mean"] < -slack:
            problems.append(f"{tag}: negative capacity")
        ber = r["eve_ber"]
        if not math.isnan(ber):
            width = r["eve_ber_hi95"] - r["eve_ber_lo95"]
            if ber < 0 or ber > 0.5 + width:
                problems.append(f"{tag}: eve_ber {ber} outside [0, 0.5]")
    antennas = lambda r: (r["n_tx"], r["n_rx"], r["n_eve"])  # noqa: E731
    for mode in trend_modes:
        sub = [r for r in rows if r["mode"] == mode]
        for axis, other, sign in (("snr_bob_db", "snr_eve_db", 1), ("snr_eve_db", "snr_bob_db", -1)):
            groups = {}
            for r in sub:
                groups.setdefault((antennas(r), r[other]), []).append(r)
            for key, grp in groups.items():
                grp.sort(key=lambda r: r[axis])
                for lo, hi in zip(grp, grp[1:]):
                    if sign * (hi["sc_raw_mean"] - lo["sc_raw_mean"]) < -slack:
                        problems.append(
                            f"{mode} {key}: sc_raw_mean not {'non-decreasing' if sign > 0 else 'non-increasing'} "
                            f"in {axis} between {lo[axis]} and {hi[axis]}"
                        )
    return problems
