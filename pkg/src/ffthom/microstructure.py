"""Periodic phase maps: lattice and random fiber packings, image I/O.

A pixel belongs to a fiber iff its coordinate (the DFT sampling point) lies
inside the shape, with all geometry measured in the periodic metric: a fiber
crossing a cell edge reappears on the opposite edge with exact pixel
alignment. Random packings are sequential additions with a fixed retry
budget per fiber; impenetrability and minimal spacing are exact
(boundary-to-boundary) for circles and approximated by margin-dilated
rasterization for ellipses and triangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .tensor_field import GridSpec

CIRCLE = "circle"
ELLIPSE = "ellipse"
TRIANGLE = "triangle"

RETRY_BUDGET = 10_000

DEFAULT_ASPECT_RATIO = 3.333


@dataclass
class PhaseMap:
    """Grid of small-integer phase ids; id 0 is the matrix by convention."""

    grid: GridSpec
    phase: np.ndarray  # (n1, n2) ints

    def __post_init__(self):
        if self.phase.shape != (self.grid.n1, self.grid.n2):
            raise ValueError("phase array shape does not match grid")
        if self.phase.min() < 0:
            raise ValueError("phase ids must be nonnegative")
        present = np.unique(self.phase)
        if not np.array_equal(present, np.arange(present.size)):
            raise ValueError("phase ids must be contiguous from 0, each present")

    @property
    def n_phases(self) -> int:
        return int(self.phase.max()) + 1

    def volume_fractions(self) -> np.ndarray:
        return np.bincount(self.phase.ravel(), minlength=self.n_phases) / self.grid.n_pixels


@dataclass(frozen=True)
class FiberSpec:
    """Parameters of one random fiber arrangement."""

    shape: str = CIRCLE
    count: int = 1
    volume_fraction: float = 0.475
    penetrable: bool = False
    min_spacing_px: float = 0.0
    rng_seed: int = 0
    aspect_ratio: float = DEFAULT_ASPECT_RATIO

    def __post_init__(self):
        if self.shape not in (CIRCLE, ELLIPSE, TRIANGLE):
            raise ValueError(f"unknown fiber shape {self.shape!r}")
        if not 0.0 <= self.volume_fraction < 1.0:
            raise ValueError("volume fraction must lie in [0, 1)")
        if self.count < 1:
            raise ValueError("need at least one fiber")
        if self.min_spacing_px < 0.0:
            raise ValueError("minimal spacing must be nonnegative")


def _min_image(delta, period):
    """Minimum-image displacement for a periodic axis."""
    return delta - period * np.round(delta / period)


class _Shape:
    """One fiber instance: inside test with optional margin, on local windows."""

    def __init__(self, kind, cx, cy, theta, area, aspect_ratio):
        self.kind = kind
        self.cx = cx
        self.cy = cy
        self.theta = theta
        if kind == CIRCLE:
            self.r = math.sqrt(area / math.pi)
            self.bound = self.r
        elif kind == ELLIPSE:
            self.b = math.sqrt(area / (math.pi * aspect_ratio))
            self.a = aspect_ratio * self.b
            self.bound = self.a
        else:
            self.side = math.sqrt(4.0 * area / math.sqrt(3.0))
            self.circum = self.side / math.sqrt(3.0)
            self.bound = self.circum

    def inside(self, dx, dy, margin=0.0):
        """Membership of displacement vectors (dx, dy) from the center."""
        if self.kind == CIRCLE:
            return dx**2 + dy**2 <= (self.r + margin) ** 2
        c, s = math.cos(self.theta), math.sin(self.theta)
        u = c * dx + s * dy
        v = -s * dx + c * dy
        if self.kind == ELLIPSE:
            return (u / (self.a + margin)) ** 2 + (v / (self.b + margin)) ** 2 <= 1.0
        # Equilateral triangle: inradius offset of three half-planes. The
        # max-of-half-planes distance under-estimates true distance past the
        # corners, so the margin test is slightly conservative there.
        inradius = self.side / (2.0 * math.sqrt(3.0))
        d = None
        for ang in (math.pi / 6.0, 5.0 * math.pi / 6.0, 3.0 * math.pi / 2.0):
            dk = u * math.cos(ang) + v * math.sin(ang)
            d = dk if d is None else np.maximum(d, dk)
        return d <= inradius + margin


def _window_indices(center, bound, n, t):
    """Pixel index range covering [center-bound, center+bound], wrapped."""
    dx = t / n
    lo = math.floor((center - bound) / dx)
    hi = math.ceil((center + bound) / dx)
    if hi - lo + 1 >= n:
        return np.arange(n)
    return np.arange(lo, hi + 1) % n


def _rasterize(shape: _Shape, grid: GridSpec, target, value=True, margin=0.0,
               query=None):
    """Set pixels inside the shape, or test overlap against ``query``."""
    r = shape.bound + margin
    i1 = _window_indices(shape.cx, r, grid.n1, grid.t1)
    i2 = _window_indices(shape.cy, r, grid.n2, grid.t2)
    dx = _min_image(i1 * grid.dx1 - shape.cx, grid.t1)[:, None]
    dy = _min_image(i2 * grid.dx2 - shape.cy, grid.t2)[None, :]
    ins = shape.inside(dx, dy, margin)
    if query is not None:
        return bool(np.any(query[np.ix_(i1, i2)] & ins))
    block = target[np.ix_(i1, i2)]
    block[ins] = value
    target[np.ix_(i1, i2)] = block
    return None


def square_lattice(grid: GridSpec, volume_fraction: float) -> PhaseMap:
    """One circular fiber centered in a square unit cell."""
    if not 0.0 <= volume_fraction < math.pi / 4.0:
        raise ValueError("square lattice fraction must be below pi/4")
    if abs(grid.t1 - grid.t2) > 1e-12 * grid.t1:
        raise ValueError("square lattice requires a square cell")
    phase = np.zeros((grid.n1, grid.n2), dtype=np.int64)
    if volume_fraction > 0.0:
        radius = grid.t1 * math.sqrt(volume_fraction / math.pi)
        shape = _Shape(CIRCLE, grid.t1 / 2.0, grid.t2 / 2.0, 0.0, math.pi * radius**2, 1.0)
        _rasterize(shape, grid, phase, value=1)
    return PhaseMap(grid, phase)


HEX_ASPECT = math.sqrt(3.0)
HEX_PACKING_LIMIT = math.pi / (2.0 * math.sqrt(3.0))


def hexagonal_lattice(grid: GridSpec, volume_fraction: float) -> PhaseMap:
    """Rectangular cell of a hexagonal arrangement: center fiber + corner quarters.

    Requires n1 = 2 n2 with t1 = sqrt(3) t2, so the two fibers in the cell
    have six equidistant neighbors each under the periodic metric.
    """
    if grid.n1 != 2 * grid.n2:
        raise ValueError("hexagonal cell requires 2:1 pixel grid")
    if abs(grid.t1 - HEX_ASPECT * grid.t2) > 1e-9 * grid.t1:
        raise ValueError("hexagonal cell requires periods t1 = sqrt(3) * t2")
    if not 0.0 <= volume_fraction < HEX_PACKING_LIMIT:
        raise ValueError("fraction exceeds hexagonal close packing")
    phase = np.zeros((grid.n1, grid.n2), dtype=np.int64)
    if volume_fraction > 0.0:
        area = volume_fraction * grid.t1 * grid.t2 / 2.0
        for cx, cy in ((0.0, 0.0), (grid.t1 / 2.0, grid.t2 / 2.0)):
            _rasterize(_Shape(CIRCLE, cx, cy, 0.0, area, 1.0), grid, phase, value=1)
    return PhaseMap(grid, phase)


def random_fibers(grid: GridSpec, spec: FiberSpec) -> PhaseMap:
    """Sequential random addition of identical fibers with periodic wrap.

    Impenetrable mode rejects candidates closer than the minimal spacing
    (boundary to boundary); the orientation of ellipses and triangles is
    uniform on [0, 2pi). Deterministic for a fixed seed. Exhausting the
    retry budget raises, reporting the fraction achieved so far.
    """
    rng = np.random.default_rng(spec.rng_seed)
    cell_area = grid.t1 * grid.t2
    if spec.penetrable:
        # Overlaps shrink coverage; size fibers so the expected covered
        # fraction of Poisson-placed shapes matches the request.
        total = -math.log(1.0 - spec.volume_fraction) * cell_area
    else:
        total = spec.volume_fraction * cell_area
    area = total / spec.count
    px = min(grid.dx1, grid.dx2)
    spacing = spec.min_spacing_px * px

    placed: list[_Shape] = []
    blocked = None
    if not spec.penetrable and spec.shape != CIRCLE:
        blocked = np.zeros((grid.n1, grid.n2), dtype=bool)

    for k in range(spec.count):
        for _ in range(RETRY_BUDGET):
            cx = rng.uniform(0.0, grid.t1)
            cy = rng.uniform(0.0, grid.t2)
            theta = rng.uniform(0.0, 2.0 * math.pi) if spec.shape != CIRCLE else 0.0
            cand = _Shape(spec.shape, cx, cy, theta, area, spec.aspect_ratio)
            if spec.penetrable:
                ok = True
            elif spec.shape == CIRCLE:
                ok = True
                for other in placed:
                    d1 = _min_image(cx - other.cx, grid.t1)
                    d2 = _min_image(cy - other.cy, grid.t2)
                    if math.hypot(d1, d2) < cand.r + other.r + spacing:
                        ok = False
                        break
            else:
                ok = not _rasterize(cand, grid, None, margin=spacing / 2.0, query=blocked)
            if ok:
                break
        else:
            phase = _rasterize_all(placed, grid)
            achieved = phase.mean()
            raise ValueError(
                f"fiber packing failed: placed {k} of {spec.count} fibers "
                f"(pixel fraction {achieved:.4f}) within {RETRY_BUDGET} attempts each")
        placed.append(cand)
        if blocked is not None:
            _rasterize(cand, grid, blocked, value=True, margin=spacing / 2.0)

    phase = _rasterize_all(placed, grid)
    return PhaseMap(grid, phase.astype(np.int64))


def _rasterize_all(shapes, grid):
    phase = np.zeros((grid.n1, grid.n2), dtype=np.int64)
    for shape in shapes:
        _rasterize(shape, grid, phase, value=1)
    return phase


def percolates(mask: np.ndarray) -> bool:
    """Whether the True phase contains a periodically connected loop.

    Union-find over pixels with displacement tracking: joining two pixels
    that are already connected but whose recorded displacements disagree
    means the cluster wraps around the cell.
    """
    n1, n2 = mask.shape
    count = int(mask.sum())
    if count == 0:
        return False
    ids = -np.ones((n1, n2), dtype=np.int64)
    ids[mask] = np.arange(count)
    parent = list(range(count))
    disp = [(0, 0)] * count  # displacement to parent, in unwrapped pixel units

    def find(a):
        # Root plus the total displacement from a to it, with path compression.
        path = []
        while parent[a] != a:
            path.append(a)
            a = parent[a]
        dx = dy = 0
        for node in reversed(path):
            dx += disp[node][0]
            dy += disp[node][1]
            parent[node] = a
            disp[node] = (dx, dy)
        if path:
            return a, disp[path[0]][0], disp[path[0]][1]
        return a, 0, 0

    idx1, idx2 = np.nonzero(mask)
    for i, j in zip(idx1.tolist(), idx2.tolist()):
        a = ids[i, j]
        for step, (ni, nj) in (((1, 0), ((i + 1) % n1, j)), ((0, 1), (i, (j + 1) % n2))):
            b = ids[ni, nj]
            if b < 0:
                continue
            ra, dax, day = find(a)
            rb, dbx, dby = find(b)
            if ra != rb:
                # position(b) = position(a) + step fixes rb's offset to ra
                parent[rb] = ra
                disp[rb] = (dax + step[0] - dbx, day + step[1] - dby)
            elif (dax + step[0], day + step[1]) != (dbx, dby):
                return True
    return False


# ---------------------------------------------------------------------------
# Image I/O
# ---------------------------------------------------------------------------

def write_gray_image(path, gray: np.ndarray) -> None:
    """Write a (n1, n2) uint8 array as PGM (P5) or PNG, x1 horizontal."""
    path = Path(path)
    rows = np.ascontiguousarray(gray.T)  # (n2, n1): image rows scan x2
    if path.suffix.lower() == ".png":
        Image.fromarray(rows, mode="L").save(path)
    else:
        with open(path, "wb") as fh:
            fh.write(f"P5\n{gray.shape[0]} {gray.shape[1]}\n255\n".encode())
            fh.write(rows.tobytes())


def read_gray_image(path) -> np.ndarray:
    """Read a grayscale image into a (n1, n2) uint8 array."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr.T.copy()


def save_phase_map(pm: PhaseMap, path) -> None:
    """Write a phase map as a grayscale image plus a gray->phase sidecar."""
    n = pm.n_phases
    levels = np.array([0] if n == 1 else [round(i * 255 / (n - 1)) for i in range(n)],
                      dtype=np.uint8)
    write_gray_image(path, levels[pm.phase])
    sidecar = Path(str(path) + ".txt")
    lines = [f"{int(levels[i])} {i}" for i in range(n)]
    sidecar.write_text("\n".join(lines) + "\n")


def load_phase_image(path, thresholds, t1: float = 1.0, t2: float = 1.0) -> PhaseMap:
    """Threshold a grayscale image into a phase map.

    ``thresholds`` are strictly increasing gray levels; a pixel's phase id is
    the number of thresholds at or below its gray value, so k thresholds
    produce k+1 phases. Every phase must end up non-empty.
    """
    thresholds = np.asarray(thresholds, dtype=float)
    if thresholds.ndim != 1 or thresholds.size == 0:
        raise ValueError("need at least one threshold")
    if np.any(np.diff(thresholds) <= 0.0):
        raise ValueError("thresholds must be strictly increasing")
    gray = read_gray_image(path)
    ids = np.searchsorted(thresholds, gray, side="right")
    present = np.unique(ids)
    if present.size != thresholds.size + 1:
        raise ValueError("thresholds do not split the gray range into non-empty phases")
    grid = GridSpec(gray.shape[0], gray.shape[1], t1, t2)
    return PhaseMap(grid, ids.astype(np.int64))
