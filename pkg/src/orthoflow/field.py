"""Matrix-valued fields over periodic grids and surface point clouds.

A field stores one n x n matrix per sample point.  Grid-backed fields live on
a uniform periodic lattice (flat torus, cell weight dx^d); cloud-backed fields
live on a list of 3D points with per-point surface-measure weights.

Also here: the determinant-sign diagnostics (plus volume, interface cells,
winding indices), the iteration log, and the binary snapshot format.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .errors import SnapshotFormatError, UnderResolvedError

__all__ = [
    "GridSpec",
    "MatrixField",
    "EnergyLog",
    "EnergyRow",
    "PlusRegionStats",
    "plus_volume",
    "winding_pair",
    "interface_cells",
    "plus_region_stats",
    "write_snapshot",
    "read_snapshot",
]

ORTHOGONALITY_TOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: sizes per axis, extent per axis, spacing derived.

    Sample points along axis a sit at -extent/2 + i*dx, i = 0..size-1, so the
    default extent (1, 1) is the flat torus [-1/2, 1/2)^2.
    """

    sizes: tuple[int, ...]
    extent: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.extent:
            object.__setattr__(self, "extent", (1.0,) * len(self.sizes))
        if len(self.extent) != len(self.sizes):
            raise ValueError("sizes and extent must have equal length")
        if any(s < 8 for s in self.sizes):
            raise ValueError("grid sizes must be >= 8 per axis")

    @property
    def d(self) -> int:
        return len(self.sizes)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / s for e, s in zip(self.extent, self.sizes))

    @property
    def dx(self) -> float:
        sp = self.spacing
        if any(abs(s - sp[0]) > 1e-15 for s in sp):
            raise ValueError("dx is only defined for isotropic grids")
        return sp[0]

    @property
    def cell_weight(self) -> float:
        w = 1.0
        for s in self.spacing:
            w *= s
        return w

    def axis_coords(self, axis: int) -> np.ndarray:
        e, s = self.extent[axis], self.sizes[axis]
        return -e / 2 + (e / s) * np.arange(s)

    def meshgrid(self):
        return np.meshgrid(*(self.axis_coords(a) for a in range(self.d)), indexing="ij")


class MatrixField:
    """One n x n matrix per point, grid- or cloud-backed.

    data shape is (*grid.sizes, n, n) for grids and (npoints, n, n) for
    clouds.  Cloud fields carry points (npoints, 3) and weights (npoints,).
    """

    def __init__(self, n, data, grid=None, points=None, weights=None):
        self.n = int(n)
        self.data = np.asarray(data, dtype=float)
        self.grid = grid
        self.points = None if points is None else np.asarray(points, dtype=float)
        self._weights = None if weights is None else np.asarray(weights, dtype=float)
        if self.data.shape[-2:] != (self.n, self.n):
            raise ValueError("data must end in (n, n) axes")
        if grid is not None:
            if self.data.shape[:-2] != grid.sizes:
                raise ValueError("grid data shape does not match grid sizes")
        else:
            if self.points is None or self._weights is None:
                raise ValueError("cloud fields need points and weights")
            if self.data.ndim != 3 or len(self.points) != self.data.shape[0]:
                raise ValueError("cloud data must be (npoints, n, n)")
            if np.any(self._weights <= 0):
                raise ValueError("cloud weights must be positive")

    # -- construction helpers ------------------------------------------------

    @classmethod
    def grid_field(cls, grid: GridSpec, data) -> "MatrixField":
        data = np.asarray(data, dtype=float)
        return cls(n=data.shape[-1], data=data, grid=grid)

    @classmethod
    def cloud_field(cls, points, weights, data) -> "MatrixField":
        data = np.asarray(data, dtype=float)
        return cls(n=data.shape[-1], data=data, points=points, weights=weights)

    # -- basic queries ---------------------------------------------------------

    @property
    def is_grid(self) -> bool:
        return self.grid is not None

    @property
    def npoints(self) -> int:
        return int(np.prod(self.data.shape[:-2]))

    @property
    def weights(self) -> np.ndarray:
        """Per-point integration weights, flattened to (npoints,)."""
        if self.is_grid:
            return np.full(self.npoints, self.grid.cell_weight)
        return self._weights

    @property
    def total_measure(self) -> float:
        if self.is_grid:
            m = 1.0
            for e in self.grid.extent:
                m *= e
            return m
        return float(np.sum(self._weights))

    def flat(self) -> np.ndarray:
        """View of the data as (npoints, n, n)."""
        return self.data.reshape(-1, self.n, self.n)

    def copy_with(self, data) -> "MatrixField":
        return MatrixField(self.n, data, grid=self.grid, points=self.points,
                           weights=self._weights)

    def dets(self) -> np.ndarray:
        return np.linalg.det(self.data)

    def orthogonality_defect(self) -> float:
        """max_x || A^t A - I ||_F over the field."""
        a = self.data
        g = np.einsum("...ji,...jk->...ik", a, a)
        g = g - np.eye(self.n)
        return float(np.sqrt(np.sum(g * g, axis=(-2, -1))).max())

    def require_orthogonal(self, tol: float = ORTHOGONALITY_TOL):
        defect = self.orthogonality_defect()
        if defect > tol:
            raise ValueError(f"field is not orthogonal: defect {defect:.3e} > {tol:g}")

    def max_deviation_from_mean(self) -> float:
        mean = self.flat().mean(axis=0)
        return float(np.abs(self.data - mean).max())


# ---------------------------------------------------------------------------
# Determinant-sign diagnostics
# ---------------------------------------------------------------------------

def plus_volume(f: MatrixField) -> float:
    """Measure of the region where det A > 0 (weights of plus points)."""
    f.require_orthogonal()
    d = f.dets().reshape(-1)
    return float(np.sum(f.weights[d > 0]))


def winding_pair(f: MatrixField) -> tuple[int, int]:
    """Winding indices of the first column vector along the two center loops.

    i_x follows the grid row y = 0, i_y the column x = 0 (the loops through
    the domain center), accumulating principal-branch angle increments of
    v = (A_00, A_10).  Every single step must turn by less than pi/2,
    otherwise the field is declared under-resolved.
    """
    if not f.is_grid or f.grid.d != 2 or f.n != 2:
        raise ValueError("winding_pair needs a 2x2 field on a 2D grid")
    f.require_orthogonal()
    center = tuple(s // 2 for s in f.grid.sizes)
    out = []
    for axis in range(2):
        if axis == 0:
            v = f.data[:, center[1], :, 0]
        else:
            v = f.data[center[0], :, :, 0]
        theta = np.arctan2(v[:, 1], v[:, 0])
        d = np.diff(np.concatenate([theta, theta[:1]]))
        d = (d + np.pi) % (2.0 * np.pi) - np.pi
        step = float(np.abs(d).max())
        if step >= np.pi / 2:
            raise UnderResolvedError(
                f"angle step {step:.3f} >= pi/2 along axis {axis}")
        out.append(int(round(d.sum() / (2.0 * np.pi))))
    return out[0], out[1]


def _sign_changes(det: np.ndarray):
    """Boolean masks of +axis sign changes (periodic wrap), one per axis."""
    s = det > 0
    return [s != np.roll(s, -1, axis=a) for a in range(det.ndim)]


def interface_cells(f: MatrixField) -> np.ndarray:
    """Grid cells where det changes sign across any +axis neighbor.

    Returns an (ncells, d) integer array of cell indices.  Empty iff the
    determinant has constant sign.
    """
    if not f.is_grid:
        raise ValueError("interface_cells needs a grid field")
    f.require_orthogonal()
    det = f.dets()
    changed = np.zeros(det.shape, dtype=bool)
    for mask in _sign_changes(det):
        changed |= mask
    return np.argwhere(changed)


@dataclass(frozen=True)
class PlusRegionStats:
    area: float
    perimeter_estimate: float
    isoperimetric_ratio: float | None  # None when area or perimeter vanish


def plus_region_stats(f: MatrixField) -> PlusRegionStats:
    """Area, perimeter estimate, and isoperimetric ratio of the plus region.

    The perimeter uses the Cauchy-Crofton line-intercept count: (pi/4) times
    the number of +axis sign-change crossings times dx.  First-order, no
    sub-cell reconstruction; calibrated so digital circles score ratio ~= 1.
    An empty or full plus region has no interface and the ratio is signalled
    as None.
    """
    if not f.is_grid or f.grid.d != 2:
        raise ValueError("plus_region_stats needs a 2D grid field")
    area = plus_volume(f)
    det = f.dets()
    crossings = sum(int(np.count_nonzero(m)) for m in _sign_changes(det))
    perimeter = (np.pi / 4.0) * crossings * f.grid.dx
    if area <= 0.0 or perimeter <= 0.0:
        return PlusRegionStats(area, perimeter, None)
    ratio = perimeter**2 / (4.0 * np.pi * area)
    return PlusRegionStats(area, perimeter, float(ratio))


# ---------------------------------------------------------------------------
# Energy log
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnergyRow:
    iteration: int
    energy: float
    plus_volume: float
    max_change: float
    sign_flips: int


@dataclass
class EnergyLog:
    rows: list = dataclass_field(default_factory=list)

    CSV_HEADER = "iter,energy,plus_volume,max_change,sign_flips"

    def append(self, iteration, energy, plus_vol, max_change, sign_flips):
        if self.rows and iteration <= self.rows[-1].iteration:
            raise ValueError("iteration indices must be strictly increasing")
        self.rows.append(EnergyRow(iteration, energy, plus_vol, max_change, sign_flips))

    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(self.CSV_HEADER + "\n")
        w = csv.writer(buf, lineterminator="\n")
        for r in self.rows:
            w.writerow([r.iteration, repr(r.energy), repr(r.plus_volume),
                        repr(r.max_change), r.sign_flips])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, path) -> "EnergyLog":
        log = cls()
        with open(path) as fh:
            header = fh.readline().strip()
            if header != cls.CSV_HEADER:
                raise ValueError(f"unexpected energy log header: {header!r}")
            for row in csv.reader(fh):
                if not row:
                    continue
                log.append(int(row[0]), float(row[1]), float(row[2]),
                           float(row[3]), int(row[4]))
        return log


# ---------------------------------------------------------------------------
# Snapshot format (MBOF)
# ---------------------------------------------------------------------------
#
# magic "MBOF", u32 version=1, u32 n, u8 flavor (0 grid / 1 cloud)
# grid:  u32 d, d x u64 sizes, d x f64 extents
# cloud: u64 npoints, then per point 3 x f64 position + f64 weight
# then per point n^2 f64 matrix entries, row-major, little-endian throughout.

_MAGIC = b"MBOF"
_VERSION = 1


def write_snapshot(f: MatrixField, path):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIB", _VERSION, f.n, 0 if f.is_grid else 1))
        if f.is_grid:
            g = f.grid
            fh.write(struct.pack("<I", g.d))
            fh.write(struct.pack(f"<{g.d}Q", *g.sizes))
            fh.write(struct.pack(f"<{g.d}d", *g.extent))
        else:
            fh.write(struct.pack("<Q", f.npoints))
            pw = np.concatenate([f.points, f._weights[:, None]], axis=1)
            fh.write(pw.astype("<f8").tobytes())
        fh.write(f.flat().astype("<f8").tobytes())


def _read_exact(fh, count, what):
    buf = fh.read(count)
    if len(buf) != count:
        raise SnapshotFormatError(f"truncated snapshot while reading {what}")
    return buf


def read_snapshot(path) -> MatrixField:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, "magic") != _MAGIC:
            raise SnapshotFormatError("bad magic bytes (not an MBOF snapshot)")
        version, n, flavor = struct.unpack("<IIB", _read_exact(fh, 9, "header"))
        if version != _VERSION:
            raise SnapshotFormatError(f"unsupported snapshot version {version}")
        if flavor == 0:
            (d,) = struct.unpack("<I", _read_exact(fh, 4, "dimension"))
            sizes = struct.unpack(f"<{d}Q", _read_exact(fh, 8 * d, "sizes"))
            extent = struct.unpack(f"<{d}d", _read_exact(fh, 8 * d, "extents"))
            npts = int(np.prod(sizes))
            data = np.frombuffer(
                _read_exact(fh, npts * n * n * 8, "matrix data"), dtype="<f8")
            grid = GridSpec(sizes=tuple(int(s) for s in sizes), extent=extent)
            return MatrixField.grid_field(
                grid, data.reshape(*sizes, n, n).copy())
        if flavor == 1:
            (npts,) = struct.unpack("<Q", _read_exact(fh, 8, "point count"))
            pw = np.frombuffer(
                _read_exact(fh, npts * 4 * 8, "points"), dtype="<f8")
            pw = pw.reshape(npts, 4)
            data = np.frombuffer(
                _read_exact(fh, npts * n * n * 8, "matrix data"), dtype="<f8")
            return MatrixField.cloud_field(
                pw[:, :3].copy(), pw[:, 3].copy(), data.reshape(npts, n, n).copy())
        raise SnapshotFormatError(f"unknown flavor byte {flavor}")
