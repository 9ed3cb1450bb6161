"""Monte-Carlo link-level simulation: BER versus Eb/N0 per basis and channel."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .chanest import ESTIMATION_MODES, PilotOnlyEstimator, WienerEstimator
from .channel import PRESETS, ScatteringConfig, add_noise, covariance_flat, draw_paths, realize
from .fec import ConvolutionalCode, Interleaver, map_qpsk
from .frame import ConfigurationError, FrameConfig, default_pilot_pattern, load_mapping
from .precoding import BASIS_KINDS, make_basis
from .receiver import PerfectCsi, detect_frame

log = logging.getLogger(__name__)

BATCH = 25  # stopping rule is checked every BATCH frames, independent of workers


def resolve_scenario(name: str, frame: FrameConfig, n_paths: int = 60) -> ScatteringConfig:
    """Map a scenario name to a scattering configuration.

    Reference presets (``"doubly-selective"`` etc.) use a flat scattering
    function; ``"v<km/h>"`` (e.g. ``"v200"``) builds the vehicular setup with an
    exponential delay profile of 0.4 us RMS spread over a 1 us support.
    """
    if name in PRESETS:
        return ScatteringConfig.preset(name, n_paths)
    if name.startswith("v"):
        try:
            v = float(name[1:])
        except ValueError:
            pass
        else:
            return ScatteringConfig.from_physical(frame, v, n_paths=n_paths, name=name)
    raise ConfigurationError(f"unknown scenario {name!r}")


@dataclass
class SimulationPlan:
    frame: FrameConfig = field(default_factory=FrameConfig)
    scenarios: list[str] = field(default_factory=lambda: ["v200"])
    bases: list[str] = field(default_factory=lambda: ["dsft"])
    estimation: str = "perfect-csi"
    ebn0_db: list[float] = field(default_factory=lambda: [float(x) for x in range(0, 17)])
    min_errors: int = 100
    max_frames: int = 2000
    min_frames: int = 0
    seed: int = 0
    n_paths: int = 60
    generators: tuple[int, ...] = (0o133, 0o171)
    constraint_length: int = 7
    interleaver_seed: int = 0
    pilot_seed: int = 0
    estimator_cutoff: float | None = 1e-10

    def validate(self) -> None:
        if not self.bases:
            raise ConfigurationError("at least one basis is required")
        for b in self.bases:
            if b not in BASIS_KINDS:
                raise ConfigurationError(f"unknown basis {b!r}")
        if not self.scenarios:
            raise ConfigurationError("at least one scenario is required")
        for s in self.scenarios:
            resolve_scenario(s, self.frame, self.n_paths)
        if not self.ebn0_db:
            raise ConfigurationError("Eb/N0 grid is empty")
        if self.estimation not in ESTIMATION_MODES:
            raise ConfigurationError(f"unknown estimation mode {self.estimation!r}")
        if self.min_errors < 1 or self.max_frames < 1 or self.min_frames < 0:
            raise ConfigurationError("stopping rule must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "SimulationPlan":
        d = dict(d)
        frame = FrameConfig.from_dict(d.pop("frame", {}))
        known = set(cls.__dataclass_fields__) - {"frame"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown plan keys: {sorted(unknown)}")
        if "generators" in d:
            d["generators"] = tuple(int(str(g), 8) if isinstance(g, str) else int(g) for g in d["generators"])
        if "ebn0_db" in d:
            d["ebn0_db"] = [float(x) for x in d["ebn0_db"]]
        for key in ("scenarios", "bases"):
            if isinstance(d.get(key), str):
                d[key] = [d[key]]
        plan = cls(frame=frame, **d)
        plan.validate()
        return plan

    @classmethod
    def from_file(cls, path) -> "SimulationPlan":
        return cls.from_dict(load_mapping(path))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["frame"] = self.frame.to_dict()
        d["generators"] = [oct(g)[2:] for g in self.generators]
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class BerRecord:
    ebn0_db: float
    basis: str
    scenario: str
    estimation: str
    iteration: int
    bits: int
    errors: int
    frames: int
    frame_error_sq: int
    stop_reason: str
    wall_time: float = 0.0

    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else float("nan")

    def confidence_halfwidth(self, z: float = 1.96) -> float:
        """Half-width of a frame-level normal confidence interval on the BER.

        Errors cluster within frames, so the per-frame error count (not the
        per-bit outcome) is treated as the i.i.d. sample.
        """
        if self.frames < 2:
            return float("inf")
        bits_per_frame = self.bits / self.frames
        mean = self.errors / self.frames
        var = (self.frame_error_sq - self.frames * mean**2) / (self.frames - 1)
        return z * math.sqrt(max(var, 0.0) / self.frames) / bits_per_frame


CSV_FIELDS = [
    "ebn0_db", "basis", "scenario", "estimation", "iteration",
    "bits", "errors", "ber", "frames", "frame_error_sq", "stop_reason",
]


class LinkContext:
    """Everything needed to simulate frames of one (scenario, basis) curve."""

    def __init__(self, plan: SimulationPlan, scenario: str, basis_kind: str):
        self.plan = plan
        self.frame = plan.frame
        self.scattering = resolve_scenario(scenario, plan.frame, plan.n_paths)
        self.scattering.check_cyclic_prefix(plan.frame)
        self.pattern = default_pilot_pattern(plan.frame, plan.pilot_seed)
        self.basis = make_basis(basis_kind, plan.frame, self.scattering.nu_d, self.scattering.theta_p)
        self.code = ConvolutionalCode(tuple(plan.generators), plan.constraint_length)
        self.interleaver = Interleaver(plan.frame.n_code_bits, plan.interleaver_seed)
        self.n_info = self.code.info_length(plan.frame.n_code_bits)
        N, M = plan.frame.grid_shape
        # estimator assumes a flat scattering function over the true supports
        self.covariance = covariance_flat(self.scattering.nu_d, self.scattering.theta_p, M, N)
        self._principal = None

    def estimator(self, g: np.ndarray, sigma2: float):
        mode = self.plan.estimation
        if mode == "perfect-csi":
            return PerfectCsi(g)
        cls = PilotOnlyEstimator if mode == "pilot-only" else WienerEstimator
        cutoff = self.plan.estimator_cutoff
        if cutoff is not None and self._principal is None:
            self._principal = self.covariance.principal(cutoff)
        return cls(self.covariance, self.pattern, self.basis, sigma2, cutoff, self._principal)

    def simulate_frame(self, ebn0_db: float, seed: np.random.SeedSequence) -> np.ndarray:
        """Bit errors per iteration for one frame."""
        bits_rng, chan_rng, noise_rng = (np.random.default_rng(s) for s in seed.spawn(3))
        info = bits_rng.integers(0, 2, self.n_info)
        symbols = map_qpsk(self.interleaver.interleave(self.code.encode(info)))
        x = self.pattern.multiplex(self.basis.apply(symbols))
        g = realize(draw_paths(self.scattering, chan_rng), self.frame).vector
        y, sigma2 = add_noise(g * x, ebn0_db, self.frame, noise_rng)
        result = detect_frame(
            y,
            self.estimator(g, sigma2),
            sigma2,
            self.basis,
            self.pattern,
            self.code,
            self.interleaver,
            self.frame.n_iterations,
            info,
        )
        return np.array([r.bit_errors for r in result.iterations])


def frame_seed(master_seed: int, point_index: int, frame_index: int) -> np.random.SeedSequence:
    """Per-frame seed; shared across bases and scenarios for paired comparisons."""
    return np.random.SeedSequence([master_seed, point_index, frame_index])


_WORKER: dict = {}


def _worker_init(plan_dict, scenario, basis_kind):
    _WORKER["ctx"] = LinkContext(SimulationPlan.from_dict(plan_dict), scenario, basis_kind)


def _worker_frame(args):
    ebn0_db, seed = args
    return _WORKER["ctx"].simulate_frame(ebn0_db, seed)


def run_point(
    plan: SimulationPlan,
    scenario: str,
    basis_kind: str,
    ebn0_db: float,
    point_index: int = 0,
    workers: int = 1,
    context: LinkContext | None = None,
    pool=None,
) -> list[BerRecord]:
    """Simulate frames at one Eb/N0 until the stopping rule fires.

    Stops once the final iteration has ``min_errors`` errors and at least
    ``min_frames`` frames were run, or at ``max_frames``. Returns one record
    per receiver iteration.
    """
    ctx = context or LinkContext(plan, scenario, basis_kind)
    n_it = plan.frame.n_iterations
    errors = np.zeros(n_it, dtype=np.int64)
    errors_sq = np.zeros(n_it, dtype=np.int64)
    frames = 0
    start = time.perf_counter()
    reason = "max_frames"
    while frames < plan.max_frames:
        batch = range(frames, min(frames + BATCH, plan.max_frames))
        jobs = [(ebn0_db, frame_seed(plan.seed, point_index, f)) for f in batch]
        if pool is not None:
            results = pool.map(_worker_frame, jobs)
        else:
            results = [ctx.simulate_frame(*job) for job in jobs]
        for e in results:
            errors += e
            errors_sq += e.astype(np.int64) ** 2
        frames += len(jobs)
        if errors[-1] >= plan.min_errors and frames >= plan.min_frames:
            reason = "min_errors"
            break
    elapsed = time.perf_counter() - start
    log.info("%s/%s Eb/N0=%.1f dB: %d frames, BER=%s", scenario, basis_kind, ebn0_db, frames,
             errors / (frames * ctx.n_info))
    return [
        BerRecord(
            ebn0_db=float(ebn0_db),
            basis=basis_kind,
            scenario=scenario,
            estimation=plan.estimation,
            iteration=i + 1,
            bits=frames * ctx.n_info,
            errors=int(errors[i]),
            frames=frames,
            frame_error_sq=int(errors_sq[i]),
            stop_reason=reason,
            wall_time=elapsed,
        )
        for i in range(n_it)
    ]


def run_curves(plan: SimulationPlan, workers: int = 1, stop_below: float | None = None) -> list[BerRecord]:
    """All records for every (scenario, basis, Eb/N0) combination of ``plan``.

    With ``stop_below`` a curve is cut off once its final-iteration BER has
    dropped to zero errors or below that value, saving the empty high-SNR tail.
    """
    plan.validate()
    records = []
    for scenario in plan.scenarios:
        for basis_kind in plan.bases:
            ctx = LinkContext(plan, scenario, basis_kind)
            pool = None
            if workers > 1:
                import multiprocessing

                pool = multiprocessing.get_context("spawn").Pool(
                    workers, _worker_init, (plan.to_dict(), scenario, basis_kind)
                )
            try:
                for idx, ebn0 in enumerate(plan.ebn0_db):
                    recs = run_point(plan, scenario, basis_kind, ebn0, idx, workers, ctx, pool)
                    records.extend(recs)
                    final = recs[-1]
                    if stop_below is not None and (final.errors == 0 or final.ber < stop_below):
                        break
            finally:
                if pool is not None:
                    pool.close()
                    pool.join()
    return records


def write_records(path: str | Path, records: list[BerRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for r in records:
            writer.writerow([
                f"{r.ebn0_db:g}", r.basis, r.scenario, r.estimation, r.iteration,
                r.bits, r.errors, f"{r.ber:.6e}", r.frames, r.frame_error_sq, r.stop_reason,
            ])


def read_records(path: str | Path) -> list[BerRecord]:
    with Path(path).open(newline="") as fh:
        return [
            BerRecord(
                ebn0_db=float(row["ebn0_db"]),
                basis=row["basis"],
                scenario=row["scenario"],
                estimation=row["estimation"],
                iteration=int(row["iteration"]),
                bits=int(row["bits"]),
                errors=int(row["errors"]),
                frames=int(row["frames"]),
                frame_error_sq=int(row["frame_error_sq"]),
                stop_reason=row["stop_reason"],
            )
            for row in csv.DictReader(fh)
        ]


def run_sweep(
    plan: SimulationPlan,
    out_dir: str | Path,
    workers: int = 1,
    stop_below: float | None = None,
) -> Path:
    """Run the full plan and write ``ber.csv`` plus a ``manifest.json`` sidecar."""
    plan.validate()
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    start = time.perf_counter()
    records = run_curves(plan, workers, stop_below)
    result = out / "ber.csv"
    try:
        write_records(result, records)
        manifest = {
            "config_hash": plan.config_hash(),
            "seed": plan.seed,
            "plan": plan.to_dict(),
            "versions": {
                "orthoprecoding": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "wall_time_s": round(time.perf_counter() - start, 3),
            "workers": workers,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    except OSError as exc:
        raise OSError(f"cannot write results to {out}: {exc}") from exc
    return result


def select(records, **where) -> list[BerRecord]:
    """Records matching all ``field=value`` pairs, sorted by Eb/N0."""
    out = [r for r in records if all(getattr(r, k) == v for k, v in where.items())]
    return sorted(out, key=lambda r: r.ebn0_db)


def ebn0_at_ber(records: list[BerRecord], target: float) -> float:
    """Eb/N0 where a BER curve crosses ``target`` (log-linear interpolation).

    A point without errors is treated as half an error over its bits. Returns
    ``nan`` when the curve does not bracket the target.
    """
    pts = sorted(records, key=lambda r: r.ebn0_db)
    x = np.array([r.ebn0_db for r in pts])
    y = np.log10([max(r.errors, 0.5) / r.bits for r in pts])
    t = math.log10(target)
    for i in range(len(pts) - 1):
        if y[i] >= t >= y[i + 1] and y[i] != y[i + 1]:
            return float(x[i] + (t - y[i]) * (x[i + 1] - x[i]) / (y[i + 1] - y[i]))
    return float("nan")
