"""Image I/O, salt-and-pepper corruption, and DCT-domain inpainting.

Images are 8-bit grayscale or RGB rasters read from and written to binary
portable graymap/pixmap files (P5/P6, maxval 255). Inpainting casts
restoration as demixing the image from the sparse corruption: the clean
image is modeled as sparse in the 2-D DCT domain (dictionary = separable
inverse DCT over the pixel grid) while the corruption is pixel-sparse
(dictionary = identity). The corruption mask is never given to the solver;
it is only used by the evaluation metrics.
"""

from dataclasses import dataclass

import numpy as np

from . import linops
from .experiments import solve_with_protocol
from .solvers import SolveResult, SolverConfig

__all__ = (
    "Image",
    "InpaintTask",
    "read_image",
    "write_image",
    "salt_pepper_corrupt",
    "synthetic_sparse_image",
    "inpaint",
    "psnr",
    "PSNR_CAP_DB",
)

PSNR_CAP_DB = 999.0


@dataclass(frozen=True)
class Image:
    """Raster with pixels as a (height*width, channels) float array in [0, 255]."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if self.channels not in (1, 3):
            raise ValueError("channels must be 1 or 3")
        px = np.asarray(self.pixels, dtype=float)
        if px.shape != (self.height * self.width, self.channels):
            raise ValueError(
                f"pixels must have shape {(self.height * self.width, self.channels)}, "
                f"got {px.shape}"
            )
        if px.min() < 0.0 or px.max() > 255.0:
            raise ValueError("pixel values must lie in [0, 255]")
        object.__setattr__(self, "pixels", px)

    def as_grid(self):
        """Pixels reshaped to (height, width, channels)."""
        return self.pixels.reshape(self.height, self.width, self.channels)

    @classmethod
    def from_grid(cls, grid):
        grid = np.asarray(grid, dtype=float)
        if grid.ndim == 2:
            grid = grid[:, :, None]
        h, w, ch = grid.shape
        return cls(width=w, height=h, channels=ch, pixels=grid.reshape(h * w, ch))


@dataclass(frozen=True)
class InpaintTask:
    corrupted: Image
    q1: float = 0.7
    q2: float = 0.4
    mu: float = 1.0
    joint: bool = True

    def __post_init__(self):
        if not 0.0 <= self.q1 <= 1.0 or not 0.0 <= self.q2 <= 1.0:
            raise ValueError("q1 and q2 must lie in [0, 1]")
        if self.mu <= 0.0:
            raise ValueError("mu must be positive")


def _read_token(data, pos):
    """Next whitespace-delimited header token, skipping # comments."""
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ValueError(f"unexpected end of header at byte offset {start}")
    return data[start:pos], pos


def read_image(path):
    """Read a binary P5 graymap or P6 pixmap with maxval 255."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic, pos = _read_token(data, 0)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported magic {magic!r} at byte offset 0 (want P5 or P6)")
    fields = []
    for _ in range(3):
        token, pos = _read_token(data, pos)
        try:
            fields.append(int(token))
        except ValueError:
            raise ValueError(f"malformed header token {token!r} near byte offset {pos}")
    width, height, maxval = fields
    if width <= 0 or height <= 0:
        raise ValueError(f"invalid dimensions {width}x{height} in header")
    if maxval != 255:
        raise ValueError(f"unsupported depth: maxval {maxval} (only 8-bit supported)")
    # exactly one whitespace byte separates the header from the raster
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ValueError(f"missing raster separator at byte offset {pos}")
    pos += 1
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise ValueError(
            f"truncated raster: expected {expected} bytes at offset {pos}, "
            f"found {len(raster)}"
        )
    px = np.frombuffer(raster, dtype=np.uint8).astype(float)
    return Image(width=width, height=height, channels=channels,
                 pixels=px.reshape(height * width, channels))


def write_image(image: Image, path):
    """Write a binary P5/P6 raster; pixels are rounded to 8 bits."""
    magic = b"P5" if image.channels == 1 else b"P6"
    header = magic + f"\n{image.width} {image.height}\n255\n".encode("ascii")
    raster = np.clip(np.rint(image.pixels), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(raster.reshape(image.height * image.width * image.channels).tobytes())


def salt_pepper_corrupt(image: Image, fraction, seed):
    """Set an exact fraction of pixel locations to 0 or 255.

    The corrupted locations are shared across channels (a hit pixel is hit
    in all channels) with the 0/255 polarity drawn independently per
    channel. Returns the corrupted image and the boolean location mask.
    """
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    n_pixels = image.height * image.width
    count = int(round(fraction * n_pixels))
    rng = np.random.default_rng(seed)
    locations = rng.choice(n_pixels, size=count, replace=False)
    mask = np.zeros(n_pixels, dtype=bool)
    mask[locations] = True
    pixels = image.pixels.copy()
    polarity = rng.integers(0, 2, size=(count, image.channels))
    pixels[locations] = 255.0 * polarity
    corrupted = Image(width=image.width, height=image.height,
                      channels=image.channels, pixels=pixels)
    return corrupted, mask


def synthetic_sparse_image(height, width, channels, k, seed):
    """Image whose channels have exactly k nonzero 2-D DCT coefficients.

    The nonzero support (including the DC bin) is shared across channels;
    amplitudes are Gaussian, rescaled so pixels stay well inside [0, 255].
    Returns the image and its coefficient matrix (height*width, channels).
    """
    if k < 1:
        raise ValueError("k must be at least 1 (the DC bin)")
    rng = np.random.default_rng(seed)
    n = height * width
    support = 1 + rng.choice(n - 1, size=k - 1, replace=False)  # non-DC bins
    coefs = np.zeros((n, channels))
    coefs[support] = rng.standard_normal((k - 1, channels))
    op = linops.idct2d(height, width)
    spatial = op.apply(coefs)
    peak = np.abs(spatial).max()
    scale = 80.0 / peak if peak > 0 else 1.0
    coefs *= scale
    # shift the mean to mid-gray through the DC coefficient
    coefs[0] = 128.0 * np.sqrt(n)
    pixels = op.apply(coefs)
    image = Image(width=width, height=height, channels=channels, pixels=pixels)
    return image, coefs


def inpaint(task: InpaintTask, cfg: SolverConfig, solver="mt-admm"):
    """Restore an image from sparse corruption without knowing the mask.

    Builds the demixing problem y = A1 x1 + x2 with A1 the separable
    inverse-DCT dictionary over the pixel grid, runs the requested solver
    under the standard warm-start protocol, and clamps A1 x1 back to
    [0, 255]. Joint mode recovers all channels in one multitask solve;
    otherwise channels are solved independently and their traces summed
    (shorter traces padded with their final value).

    The solve itself runs on pixels scaled to [0, 1] so that the
    continuation schedule's shrinkage thresholds are commensurate with the
    data; the returned iterates are scaled back to the 8-bit range, while
    the result's traces refer to the unit-scale objective.

    Returns (restored image, DCT coefficient estimate, solve result).
    """
    img = task.corrupted
    multitask = solver.startswith("mt-")
    if task.joint and not multitask:
        raise ValueError(f"joint recovery requires a multitask solver, got {solver!r}")
    if not task.joint and multitask:
        raise ValueError(f"per-channel recovery requires a single-task solver, got {solver!r}")

    a1 = linops.idct2d(img.height, img.width)
    a2 = linops.identity(img.height * img.width)
    run_cfg = SolverConfig(
        q1=task.q1, q2=task.q2, mu=task.mu,
        beta_target=cfg.beta_target, beta_start=cfg.beta_start,
        beta_decay=cfg.beta_decay, max_iters=cfg.max_iters, tol=cfg.tol,
        eta1=cfg.eta1, eta2=cfg.eta2, rho1=cfg.rho1, rho2=cfg.rho2,
    )

    from .solvers import DemixProblem

    scale = 255.0
    y = img.pixels / scale
    if task.joint:
        problem = DemixProblem(a1, a2, y)
        result = solve_with_protocol(problem, solver, run_cfg)
    else:
        results = []
        for j in range(img.channels):
            problem = DemixProblem(a1, a2, y[:, j])
            results.append(solve_with_protocol(problem, solver, run_cfg))
        result = _combine_channel_results(results)

    result.x1 = np.asarray(result.x1) * scale
    result.x2 = np.asarray(result.x2) * scale
    coefs = result.x1 if result.x1.ndim == 2 else result.x1[:, None]
    restored_pixels = np.clip(a1.apply(coefs), 0.0, 255.0)
    restored = Image(width=img.width, height=img.height,
                     channels=img.channels, pixels=restored_pixels)
    return restored, coefs, result


def _combine_channel_results(results):
    """Stack per-channel solves into one result; traces add across channels."""
    iterations = max(r.iterations for r in results)

    def padded(values):
        out = np.zeros((len(results), iterations))
        for i, r in enumerate(results):
            v = np.asarray(values(r))
            out[i, : len(v)] = v
            out[i, len(v):] = v[-1] if len(v) else 0.0
        return out

    return SolveResult(
        x1=np.column_stack([r.x1 for r in results]),
        x2=np.column_stack([r.x2 for r in results]),
        objective_trace=padded(lambda r: r.objective_trace).sum(axis=0),
        residual_trace=np.sqrt((padded(lambda r: r.residual_trace) ** 2).sum(axis=0)),
        iterate_gap_trace=padded(lambda r: r.iterate_gap_trace).max(axis=0),
        iterations=iterations,
        converged=all(r.converged for r in results),
        warnings=[w for r in results for w in r.warnings],
    )


def psnr(restored: Image, reference: Image):
    """Peak signal-to-noise ratio in dB against an 8-bit peak of 255.

    Identical images return the serialization cap (999 dB) rather than
    infinity.
    """
    if (restored.width, restored.height, restored.channels) != (
        reference.width, reference.height, reference.channels
    ):
        raise ValueError("image dimensions do not match")
    mse = float(np.mean((restored.pixels - reference.pixels) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(255.0**2 / mse), PSNR_CAP_DB)
