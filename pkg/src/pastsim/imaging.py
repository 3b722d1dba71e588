"""Thermal-frame rendering, labels, and the binary dataset container.

A frame is the belt field rendered as a single-channel image with pixel
values clamped to [0, 1] over a fixed temperature window (72 to 212 degF by
default) and oriented so axis 0 runs down the belt length (637 x 65 by
default). Each frame carries a two-element label: the mean temperature of
the leading pastille row and the instantaneous flow rate.

Dataset files are little-endian and trivially parseable:

    header: magic 8s = b"PASTSET1", u32 count, u32 ny, u32 nx, f32 t_lo, f32 t_hi
    record: ny*nx f32 pixels (row-major), 2 f32 labels, u64 meta

with meta packing (episode_id << 32) | step. A plain-text "key: value"
sidecar (path + ".meta") records the randomization spec and seed.
"""

import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import FormatError, InvalidParameterError, PastsimError
from .field import ThermalField
from .process import SimulationState, leading_row_temp, simulate_step

__all__ = [
    "Frame", "DatasetHeader", "EpisodeRandomization", "render_frame",
    "leading_row_temp", "write_dataset", "read_dataset", "iter_dataset",
    "load_dataset_arrays", "generate_dataset", "episode_frames",
]

MAGIC = b"PASTSET1"
_HEADER = struct.Struct("<8sIIIff")
T_LO_DEFAULT = 72.0
T_HI_DEFAULT = 212.0


@dataclass
class Frame:
    pixels: np.ndarray          # (ny, nx) float32 in [0, 1]
    label: tuple                # (leading-row temp degF, flow rate per step)
    meta: tuple = (0, 0)        # (episode id, step)


@dataclass
class DatasetHeader:
    count: int
    ny: int
    nx: int
    t_lo: float
    t_hi: float

    @property
    def record_size(self) -> int:
        return 4 * self.ny * self.nx + 8 + 8


def render_frame(field: ThermalField, t_lo=T_LO_DEFAULT, t_hi=T_HI_DEFAULT) -> np.ndarray:
    """Normalize the grid to [0, 1] pixels with axis 0 along the belt length."""
    if t_lo >= t_hi:
        raise InvalidParameterError(f"temperature window [{t_lo}, {t_hi}] is empty")
    scaled = (field.u.T - t_lo) / (t_hi - t_lo)
    return np.clip(scaled, 0.0, 1.0).astype(np.float32)


def _pack_record(frame: Frame) -> bytes:
    pixels = np.ascontiguousarray(frame.pixels, dtype="<f4")
    episode, step = frame.meta
    meta = (int(episode) << 32) | (int(step) & 0xFFFFFFFF)
    return (pixels.tobytes()
            + struct.pack("<2f", float(frame.label[0]), float(frame.label[1]))
            + struct.pack("<Q", meta))


def write_dataset(path, frames, t_lo=T_LO_DEFAULT, t_hi=T_HI_DEFAULT):
    """Write frames to the binary container; dims come from the first frame."""
    frames = list(frames)
    if not frames:
        raise InvalidParameterError("cannot write an empty dataset")
    ny, nx = frames[0].pixels.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, len(frames), ny, nx, t_lo, t_hi))
        for frame in frames:
            if frame.pixels.shape != (ny, nx):
                raise InvalidParameterError("all frames in a dataset must share dims")
            fh.write(_pack_record(frame))


def read_header(fh) -> DatasetHeader:
    raw = fh.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for dataset header", offset=len(raw))
    magic, count, ny, nx, t_lo, t_hi = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}", offset=0)
    if t_lo >= t_hi:
        raise FormatError("header temperature scale is empty")
    return DatasetHeader(count=count, ny=ny, nx=nx, t_lo=t_lo, t_hi=t_hi)


def iter_dataset(path):
    """Stream (header, frame iterator) without loading the whole file."""
    fh = open(path, "rb")
    header = read_header(fh)

    def records():
        with fh:
            for index in range(header.count):
                raw = fh.read(header.record_size)
                if len(raw) < header.record_size:
                    raise FormatError(
                        f"dataset truncated inside record {index}",
                        offset=_HEADER.size + index * header.record_size,
                        record=index,
                    )
                pixels = np.frombuffer(raw, dtype="<f4",
                                       count=header.ny * header.nx).reshape(header.ny, header.nx)
                temp, flow = struct.unpack_from("<2f", raw, 4 * header.ny * header.nx)
                (meta,) = struct.unpack_from("<Q", raw, 4 * header.ny * header.nx + 8)
                yield Frame(pixels=pixels.copy(), label=(temp, flow),
                            meta=(meta >> 32, meta & 0xFFFFFFFF))

    return header, records()


def read_dataset(path):
    """Load every frame into memory; returns (header, list of Frame)."""
    header, records = iter_dataset(path)
    return header, list(records)


def load_dataset_arrays(path):
    """Load pixels (N, ny, nx) float32 and labels (N, 2) float64 for training."""
    header, records = iter_dataset(path)
    pixels = np.empty((header.count, header.ny, header.nx), dtype=np.float32)
    labels = np.empty((header.count, 2), dtype=np.float64)
    for i, frame in enumerate(records):
        pixels[i] = frame.pixels
        labels[i] = frame.label
    return header, pixels, labels


@dataclass
class EpisodeRandomization:
    """Per-episode draws used by generate_dataset.

    Speed follows a clipped random walk inside an episode-specific range;
    clog propensities are redrawn per episode unless the clog model pins
    them; cooling intensity scales the water rate. ``dimension_jitter`` > 0
    additionally perturbs the belt dims by that fraction and resamples the
    rendered frames back to the fixed frame dims (nearest neighbor).
    """

    speed_min: float = 2.0
    speed_max: float = 12.0
    min_span: float = 0.5             # episode speed-band width draw
    max_span: float = 3.0
    walk_sigma: float = 0.03          # within-band jitter per step
    speed_jump_min: int = 0           # steps between in-band speed jumps;
    speed_jump_max: int = 0           # 0 disables jumps (steady episodes)
    cooling_scale_min: float = 0.5
    cooling_scale_max: float = 1.3
    persistence_min: float = 1.0      # clog-duration draw (deposition events)
    persistence_max: float = 10.0
    propensity_scale_min: float = 0.45 # per-episode clog-rate multiplier
    propensity_scale_max: float = 1.6
    deposit_temp_min: float = 86.0    # per-episode melt contact temperature
    deposit_temp_max: float = 102.0
    frames_per_episode: int = 4
    sample_stride: int = 12
    warmup_steps: int = None          # None -> belt length in cells
    dimension_jitter: float = 0.0

    def __post_init__(self):
        if not (2.0 <= self.speed_min < self.speed_max <= 12.0):
            raise InvalidParameterError("episode speed range must sit inside [2, 12]")
        if not 0 < self.min_span <= self.max_span:
            raise InvalidParameterError("speed-band span draw must be ordered")
        if not 0 <= self.speed_jump_min <= self.speed_jump_max:
            raise InvalidParameterError("speed-jump interval must be ordered")
        if self.frames_per_episode < 1 or self.sample_stride < 1:
            raise InvalidParameterError("frames_per_episode and sample_stride must be >= 1")
        if not 1.0 <= self.persistence_min <= self.persistence_max:
            raise InvalidParameterError("persistence draw range must be ordered and >= 1")
        if not 72.0 < self.deposit_temp_min <= self.deposit_temp_max:
            raise InvalidParameterError("deposit-temperature draw must exceed ambient")
        if not 0.0 < self.propensity_scale_min <= self.propensity_scale_max:
            raise InvalidParameterError("propensity-scale draw must be ordered and positive")


def _nearest_resample(img, ny, nx):
    sy = np.minimum(((np.arange(ny) + 0.5) * img.shape[0] / ny).astype(int), img.shape[0] - 1)
    sx = np.minimum(((np.arange(nx) + 0.5) * img.shape[1] / nx).astype(int), img.shape[1] - 1)
    return img[np.ix_(sy, sx)]


def _scale_regions(regions, fi, fj, nx, ny):
    scaled = []
    for (i0, i1, j0, j1) in regions:
        a0 = min(max(int(round(i0 * fi)), 1), nx - 2)
        a1 = min(max(int(round(i1 * fi)), a0 + 1), nx - 1)
        b0 = min(max(int(round(j0 * fj)), 1), ny - 2)
        b1 = min(max(int(round(j1 * fj)), b0 + 1), ny - 1)
        scaled.append((a0, a1, b0, b1))
    return scaled


def episode_frames(setup, rand: EpisodeRandomization, quota, episode_idx, base_seed,
                   frame_dims=None, t_lo=T_LO_DEFAULT, t_hi=T_HI_DEFAULT, on_frame=None):
    """Simulate one randomized episode and yield exactly ``quota`` frames.

    The episode RNG is seeded with base_seed + episode_idx, so episodes are
    independent and the parallel generation path is byte-identical to the
    serial one.
    """
    rng = np.random.default_rng(base_seed + episode_idx)
    v_lo = rng.uniform(rand.speed_min, rand.speed_max - rand.min_span)
    span = rng.uniform(rand.min_span, rand.max_span)
    v_hi = min(v_lo + span, rand.speed_max)
    cool_scale = rng.uniform(rand.cooling_scale_min, rand.cooling_scale_max)
    persistence = rng.uniform(rand.persistence_min, rand.persistence_max)
    deposit_temp = rng.uniform(rand.deposit_temp_min, rand.deposit_temp_max)
    propensity_scale = rng.uniform(rand.propensity_scale_min,
                                   rand.propensity_scale_max)

    process = replace(setup.process, deposit_temp=deposit_temp)
    cooling = setup.cooling.scaled(cool_scale)
    if rand.dimension_jitter > 0:
        j = rand.dimension_jitter
        ny = max(int(round(process.belt_length * (1 + rng.uniform(-j, j)))), 16)
        nx = max(int(round(process.belt_width * (1 + rng.uniform(-j, j)))), 8)
        regions = _scale_regions(cooling.wetted_regions,
                                 nx / process.belt_width, ny / process.belt_length, nx, ny)
        cooling = replace(cooling, wetted_regions=regions)
        process = replace(process, belt_width=nx, belt_length=ny)
    clog = setup.clog
    if clog is not None and clog.base_propensity is None \
            and clog.empirical_table is None and not clog.temperature_driven:
        # draw this episode's heterogeneous propensities up front so the
        # episode-level clog rate can be scaled for extra flow diversity
        base = np.clip(rng.beta(clog.beta_a, clog.beta_b,
                                size=process.nozzles_per_row) * propensity_scale,
                       0.0, 1.0)
        clog = replace(clog, base_propensity=base, persistence=persistence)
    episode_setup = replace(setup, process=process, cooling=cooling, clog=clog)
    state: SimulationState = episode_setup.build(rng=rng)

    if frame_dims is None:
        frame_dims = (setup.process.belt_length, setup.process.belt_width)
    warmup = rand.warmup_steps if rand.warmup_steps is not None else process.belt_length

    speed = rng.uniform(v_lo, v_hi)
    jumps = rand.speed_jump_min > 0
    jump_timer = int(rng.integers(rand.speed_jump_min,
                                  rand.speed_jump_max + 1)) if jumps else -1

    def walk():
        # slow jitter inside a narrow episode band keeps the belt near a
        # steady regime, so every label stays readable from its own frame;
        # optional step jumps (speed_jump_min > 0) add flow transients
        nonlocal speed, jump_timer
        if jumps:
            jump_timer -= 1
            if jump_timer <= 0:
                speed = rng.uniform(v_lo, v_hi)
                jump_timer = int(rng.integers(rand.speed_jump_min,
                                              rand.speed_jump_max + 1))
                return speed
        speed = float(np.clip(speed + rng.normal(0.0, rand.walk_sigma),
                              v_lo, v_hi))
        return speed

    for _ in range(warmup):
        simulate_step(state, walk())

    produced = 0
    since_sample = 0
    budget = warmup + quota * rand.sample_stride * 50 + 1000
    for _ in range(budget):
        report = simulate_step(state, walk())
        since_sample += 1
        if since_sample < rand.sample_stride:
            continue
        if not np.isfinite(report.leading_row_temp):
            continue  # wait for a measurable row before sampling
        since_sample = 0
        pixels = render_frame(state.field, t_lo, t_hi)
        if pixels.shape != frame_dims:
            pixels = _nearest_resample(pixels, *frame_dims)
        frame = Frame(pixels=pixels,
                      label=(report.leading_row_temp, report.flow_rate),
                      meta=(episode_idx, report.step))
        if on_frame is not None:
            on_frame(state, report, frame)
        yield frame
        produced += 1
        if produced >= quota:
            return
    raise PastsimError(
        f"episode {episode_idx} produced only {produced}/{quota} frames within budget"
    )


def _episode_records(args):
    setup, rand, quota, episode_idx, base_seed, frame_dims, t_lo, t_hi = args
    return b"".join(_pack_record(f) for f in episode_frames(
        setup, rand, quota, episode_idx, base_seed, frame_dims, t_lo, t_hi))


def generate_dataset(setup, rand: EpisodeRandomization, n_frames, seed, path,
                     t_lo=T_LO_DEFAULT, t_hi=T_HI_DEFAULT, frame_dims=None, jobs=1):
    """Generate a dataset of randomized episodes; same seed => byte-identical file."""
    if n_frames < 1:
        raise InvalidParameterError(f"n_frames must be >= 1, got {n_frames}")
    if frame_dims is None:
        frame_dims = (setup.process.belt_length, setup.process.belt_width)
    per = rand.frames_per_episode
    episodes = (n_frames + per - 1) // per
    quotas = [per] * episodes
    quotas[-1] = n_frames - per * (episodes - 1)

    args = [(setup, rand, quotas[e], e, seed, frame_dims, t_lo, t_hi)
            for e in range(episodes)]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, n_frames, frame_dims[0], frame_dims[1], t_lo, t_hi))
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for blob in pool.map(_episode_records, args):
                    fh.write(blob)
        else:
            for a in args:
                fh.write(_episode_records(a))

    with open(str(path) + ".meta", "w") as fh:
        fh.write(f"seed: {seed}\n")
        fh.write(f"frames: {n_frames}\n")
        fh.write(f"episodes: {episodes}\n")
        fh.write(f"frame_dims: {frame_dims[0]}x{frame_dims[1]}\n")
        fh.write(f"scale: {t_lo}..{t_hi}\n")
        fh.write(f"nozzles_per_row: {setup.process.nozzles_per_row}\n")
        for key in ("speed_min", "speed_max", "min_span", "walk_sigma",
                    "cooling_scale_min", "cooling_scale_max", "frames_per_episode",
                    "sample_stride", "warmup_steps", "dimension_jitter"):
            fh.write(f"{key}: {getattr(rand, key)}\n")
