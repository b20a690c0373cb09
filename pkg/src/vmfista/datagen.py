"""Desk-scale experiment data: phantoms, Poisson acquisition simulation,
PGM input/output and cached high-accuracy reference solutions."""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .exceptions import ConfigError
from .problems import ConvolutionOperator, gaussian_psf
from .solver import (CompositeProblem, EpsilonSchedule, SolverConfig,
                     SolveResult, solve)

PHANTOMS = ("piecewise", "blobs")

_CACHE_MAGIC = b"VMFREF1\n"


@dataclass(frozen=True)
class ExperimentSpec:
    """Data-generation settings for one simulated acquisition."""

    source: str = "piecewise"
    scale: int = 32
    intensity_range: Tuple[float, float] = (0.0, 400.0)
    sigma_psf: float = 0.0
    background: float = 0.01
    rng_seed: int = 0

    def __post_init__(self):
        lo, hi = self.intensity_range
        if not (hi > lo >= 0):
            raise ConfigError("intensity range must satisfy hi > lo >= 0")
        if self.scale < 8:
            raise ConfigError("scale must be at least 8")
        if self.sigma_psf < 0:
            raise ConfigError("sigma_psf must be nonnegative")
        if self.background <= 0:
            raise ConfigError("background must be positive")


# ---------------------------------------------------------------------------
# phantoms
# ---------------------------------------------------------------------------

def phantom_piecewise(n: int) -> np.ndarray:
    """Nested-ellipse piecewise-constant phantom with values in [0, 1]."""
    yy, xx = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n),
                         indexing="ij")
    img = np.zeros((n, n))
    ellipses = [
        (0.0, 0.0, 0.78, 0.92, 0.50),
        (0.0, -0.05, 0.60, 0.72, 0.25),
        (-0.25, 0.22, 0.22, 0.24, 0.25),
        (-0.25, -0.30, 0.18, 0.22, -0.20),
        (0.35, 0.0, 0.18, 0.32, 0.25),
    ]
    for cy, cx, ry, rx, val in ellipses:
        mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        img[mask] += val
    return np.clip(img, 0.0, 1.0)


def phantom_blobs(n: int) -> np.ndarray:
    """Cell-like disk phantom on a dim background, values in [0, 1]."""
    yy, xx = np.meshgrid(np.linspace(-1, 1, n), np.linspace(-1, 1, n),
                         indexing="ij")
    img = np.full((n, n), 0.05)
    disks = [
        (-0.45, -0.40, 0.22, 0.95),
        (-0.35, 0.42, 0.17, 0.75),
        (0.10, 0.00, 0.26, 0.85),
        (0.48, -0.42, 0.15, 0.65),
        (0.42, 0.45, 0.20, 1.00),
    ]
    for cy, cx, r, val in disks:
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        img[mask] = val
    return img


def build_ground_truth(spec: ExperimentSpec) -> np.ndarray:
    """Phantom or PGM source, resampled to the target scale and rescaled to
    the requested intensity range."""
    if spec.source == "piecewise":
        img = phantom_piecewise(spec.scale)
    elif spec.source == "blobs":
        img = phantom_blobs(spec.scale)
    else:
        img = read_pgm(spec.source).astype(float)
        if img.shape != (spec.scale, spec.scale):
            factors = (spec.scale / img.shape[0], spec.scale / img.shape[1])
            img = ndimage.zoom(img, factors, order=1)
        lo, hi = float(img.min()), float(img.max())
        img = (img - lo) / (hi - lo) if hi > lo else np.zeros_like(img)
    lo, hi = spec.intensity_range
    return lo + (hi - lo) * img


def build_psf_operator(spec: ExperimentSpec) -> ConvolutionOperator:
    return ConvolutionOperator(gaussian_psf(spec.sigma_psf))


def simulate_acquisition(ground_truth: np.ndarray, spec: ExperimentSpec) -> np.ndarray:
    """One seeded Poisson draw per pixel with mean ``(H x + b)_i``."""
    op = build_psf_operator(spec)
    mean = op.apply(np.asarray(ground_truth, dtype=float)) + spec.background
    if np.any(mean < 0):
        raise ValueError("acquisition mean must be nonnegative")
    rng = np.random.default_rng(spec.rng_seed)
    return rng.poisson(mean).astype(float)


def make_experiment(spec: ExperimentSpec):
    """Ground truth, noisy data and blur operator for one spec."""
    gt = build_ground_truth(spec)
    z = simulate_acquisition(gt, spec)
    return gt, z, build_psf_operator(spec)


# ---------------------------------------------------------------------------
# PGM input / output
# ---------------------------------------------------------------------------

def read_pgm(path) -> np.ndarray:
    """Binary (P5) PGM reader, 8- or 16-bit (big-endian)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError("only binary P5 PGM files are supported")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = tokens
    if maxval <= 0 or maxval >= 65536:
        raise ValueError("unsupported PGM maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    arr = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    return arr.reshape(height, width).astype(float)


def write_pgm(path, image: np.ndarray, maxval: int = 65535) -> None:
    """Binary P5 writer; values are clipped and rounded to [0, maxval]."""
    if maxval <= 0 or maxval >= 65536:
        raise ValueError("unsupported PGM maxval")
    arr = np.clip(np.rint(image), 0, maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{image.shape[1]} {image.shape[0]}\n{maxval}\n".encode()
    Path(path).write_bytes(header + arr.astype(dtype).tobytes())


# ---------------------------------------------------------------------------
# reference solutions (cached)
# ---------------------------------------------------------------------------

def write_reference(path, x: np.ndarray, f_star: float) -> None:
    """Flat binary reference file: magic, dims, objective, checksum, data."""
    payload = np.ascontiguousarray(x, dtype=float).tobytes()
    header = _CACHE_MAGIC + struct.pack(
        "<BII d I", x.ndim, x.shape[0], x.shape[1] if x.ndim > 1 else 1,
        f_star, zlib.crc32(payload))
    Path(path).write_bytes(header + payload)


def read_reference(path) -> Tuple[np.ndarray, float]:
    raw = Path(path).read_bytes()
    if not raw.startswith(_CACHE_MAGIC):
        raise ValueError("bad reference file magic")
    offset = len(_CACHE_MAGIC)
    ndim, d0, d1, f_star, crc = struct.unpack_from("<BII d I", raw, offset)
    payload = raw[offset + struct.calcsize("<BII d I"):]
    if zlib.crc32(payload) != crc:
        raise ValueError("reference file checksum mismatch")
    shape = (d0,) if ndim == 1 else (d0, d1)
    return np.frombuffer(payload, dtype=float).reshape(shape).copy(), f_star


def plain_reference_config(L0: float, iters: int = 5000) -> SolverConfig:
    """Momentum-only configuration used for reference runs: Euclidean metric,
    Armijo backtracking, tight prefixed accuracy with a scale-aware floor."""
    return SolverConfig(
        L0=L0, rho=0.8, delta=1.0, t0=1.0, mu_f=0.0, mu_g=0.0,
        max_outer=iters, max_bt=60,
        eps=EpsilonSchedule(mode="quadratic-schedule", c=1.0, p=2.1),
        inner_max=20000)


def reference_solution(problem: CompositeProblem, config_plain: SolverConfig,
                       x0: np.ndarray, cache_dir: Optional[Path] = None
                       ) -> Tuple[np.ndarray, float, Optional[SolveResult]]:
    """High-accuracy minimizer and objective for ``problem``.

    Results are cached under a content hash of the problem data and the
    reference configuration.  Returns the cached pair (with ``None`` result)
    on a hit.
    """
    # scale-aware accuracy floor keeps the inner certificates attainable
    f0 = problem.value(np.asarray(x0, dtype=float))
    base_floor = config_plain.eps_min if config_plain.eps_min is not None else 0.0
    floored = replace(config_plain,
                      eps_min=max(base_floor, 1e-10 * max(1.0, abs(f0))))
    material = problem.digest_material()
    path = None
    if cache_dir is not None and material is not None:
        h = hashlib.sha256()
        for part in material:
            h.update(part)
        for val in (floored.L0, floored.rho, floored.max_outer,
                    floored.eps.c, floored.eps.p, floored.eps_min):
            h.update(np.float64(val).tobytes())
        h.update(np.ascontiguousarray(x0, dtype=float).tobytes())
        h.update(np.float64(problem.nonsmooth.mu_g).tobytes())
        cache_dir = Path(cache_dir)
        cache_dir.mkdir(parents=True, exist_ok=True)
        path = cache_dir / f"{h.hexdigest()}.ref"
        if path.exists():
            try:
                x, f_star = read_reference(path)
                return x, f_star, None
            except ValueError:
                path.unlink()
    result = solve(problem, floored, x0)
    x_star, f_star = result.x_best, result.F_best
    if path is not None:
        write_reference(path, x_star, f_star)
    return x_star, f_star, result
