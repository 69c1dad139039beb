"""Spatial machinery for the white-box chain: projection, upsampling, grid sampling.

Conventions used throughout:
  - Sampling coordinates are source pixel units, (x, y) with x along width.
    There is no normalized [-1, 1] coordinate API.
  - All resampling is corner-aligned bilinear: endpoint samples coincide with
    the source extent's corners.
  - Coordinates outside [0, W-1] x [0, H-1] are clamped to the border.
  - Derivatives at integer (knot) coordinates are right-sided.

Feature maps are (H, W, C) arrays; grids and displacement fields are
(h, w, 2) arrays with [..., 0] = x and [..., 1] = y.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trajectory import BoundingBox


@dataclass(frozen=True)
class SpatialProjection:
    """Fixed random projection from control codes to coarse velocity fields.

    Rows are standard-normal draws (row-major from a PCG64 generator seeded
    with `seed`) normalized to unit Euclidean norm; the matrix is frozen and
    bitwise reproducible per (code_dim, grid_side, seed).
    """

    code_dim: int
    grid_side: int
    seed: int
    matrix: np.ndarray


def build_projection(code_dim: int, grid_side: int, seed: int) -> SpatialProjection:
    if code_dim < 1:
        raise ValueError(f"code_dim must be >= 1, got {code_dim}")
    if grid_side < 1:
        raise ValueError(f"grid_side must be >= 1, got {grid_side}")
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((code_dim, grid_side * grid_side * 2))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    return SpatialProjection(code_dim=code_dim, grid_side=grid_side, seed=seed, matrix=matrix)


def project_code(code: np.ndarray, projection: SpatialProjection) -> np.ndarray:
    """Project a d-vector control code to an (s, s, 2) coarse velocity field.

    The flat product is reshaped row-major over (row, col, axis).
    """
    code = np.asarray(code, dtype=float)
    if code.shape != (projection.code_dim,):
        raise ValueError(
            f"code shape {code.shape} does not match projection code_dim "
            f"({projection.code_dim},)"
        )
    s = projection.grid_side
    return (code @ projection.matrix).reshape(s, s, 2)


def _bilinear_parts(features: np.ndarray, grid: np.ndarray):
    """Clamped corner indices and interpolation fractions for each grid point."""
    h_src, w_src = features.shape[:2]
    x = np.clip(grid[..., 0], 0.0, float(w_src - 1))
    y = np.clip(grid[..., 1], 0.0, float(h_src - 1))
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w_src - 1)
    y1 = np.minimum(y0 + 1, h_src - 1)
    fx = x - x0
    fy = y - y0
    return x0, x1, y0, y1, fx, fy


def grid_sample(features: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Bilinearly sample (H, W, C) features at (h, w, 2) coordinates.

    Out-of-range coordinates are border-clamped; exact pixel-center
    coordinates reproduce that pixel's value exactly.
    """
    features = np.asarray(features, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if features.size == 0:
        raise ValueError("features must be non-empty")
    x0, x1, y0, y1, fx, fy = _bilinear_parts(features, grid)
    v00 = features[y0, x0]
    v01 = features[y0, x1]
    v10 = features[y1, x0]
    v11 = features[y1, x1]
    fx = fx[..., None]
    fy = fy[..., None]
    top = (1.0 - fx) * v00 + fx * v01
    bottom = (1.0 - fx) * v10 + fx * v11
    return (1.0 - fy) * top + fy * bottom


def grid_sample_jacobian(features: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Partial derivatives of `grid_sample` with respect to the sample coordinates.

    Returns (h, w, C, 2) with [..., c, 0] = d(sample_c)/dx and [..., c, 1] =
    d(sample_c)/dy. The derivative is piecewise constant; integer coordinates
    take the right-sided value, and coordinates clamped at the border
    contribute zero in the clamped axis.
    """
    features = np.asarray(features, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if features.size == 0:
        raise ValueError("features must be non-empty")
    x0, x1, y0, y1, fx, fy = _bilinear_parts(features, grid)
    v00 = features[y0, x0]
    v01 = features[y0, x1]
    v10 = features[y1, x0]
    v11 = features[y1, x1]
    fx = fx[..., None]
    fy = fy[..., None]
    ddx = (1.0 - fy) * (v01 - v00) + fy * (v11 - v10)
    ddy = (1.0 - fx) * (v10 - v00) + fx * (v11 - v01)
    # left of the clamp range the sample is constant; the right/bottom edges
    # are already zero because the corner indices collapse there
    ddx = ddx * (grid[..., 0] >= 0.0)[..., None]
    ddy = ddy * (grid[..., 1] >= 0.0)[..., None]
    return np.stack([ddx, ddy], axis=-1)


def _corner_aligned_coords(src_h: int, src_w: int, out_h: int, out_w: int) -> np.ndarray:
    """Sampling grid mapping an out_h x out_w raster onto the source extent.

    Size-1 output axes sample the source center.
    """
    if out_h > 1:
        ys = np.arange(out_h) * ((src_h - 1) / (out_h - 1))
    else:
        ys = np.array([(src_h - 1) / 2.0])
    if out_w > 1:
        xs = np.arange(out_w) * ((src_w - 1) / (out_w - 1))
    else:
        xs = np.array([(src_w - 1) / 2.0])
    grid = np.empty((out_h, out_w, 2))
    grid[..., 0] = xs[None, :]
    grid[..., 1] = ys[:, None]
    return grid


def upsample_to_roi(field: np.ndarray, roi_height: int, roi_width: int) -> np.ndarray:
    """Corner-aligned bilinear upsampling of an (s, s, 2) field to (roi_height, roi_width, 2)."""
    field = np.asarray(field, dtype=float)
    if roi_height < 1 or roi_width < 1:
        raise ValueError(f"roi dimensions must be >= 1, got {roi_height}x{roi_width}")
    coords = _corner_aligned_coords(field.shape[0], field.shape[1], roi_height, roi_width)
    return grid_sample(field, coords)


def upsample_adjoint(grad: np.ndarray, src_height: int, src_width: int) -> np.ndarray:
    """Exact transpose of `upsample_to_roi`: scatter an output-space gradient back.

    Uses the same corner weights as the forward pass, so <upsample(u), g> ==
    <u, upsample_adjoint(g)> to float precision.
    """
    grad = np.asarray(grad, dtype=float)
    out_h, out_w = grad.shape[:2]
    coords = _corner_aligned_coords(src_height, src_width, out_h, out_w)
    x0, x1, y0, y1, fx, fy = _bilinear_parts(np.empty((src_height, src_width, 1)), coords)
    fx = fx[..., None]
    fy = fy[..., None]
    out = np.zeros((src_height, src_width) + grad.shape[2:])
    np.add.at(out, (y0, x0), (1.0 - fy) * (1.0 - fx) * grad)
    np.add.at(out, (y0, x1), (1.0 - fy) * fx * grad)
    np.add.at(out, (y1, x0), fy * (1.0 - fx) * grad)
    np.add.at(out, (y1, x1), fy * fx * grad)
    return out


def make_roi_grid(box: BoundingBox, grid_height: int, grid_width: int) -> np.ndarray:
    """Regular sampling grid spanning the box interior, corners included.

    Size-1 axes sample the box midpoint.
    """
    if grid_height < 1 or grid_width < 1:
        raise ValueError(f"grid dimensions must be >= 1, got {grid_height}x{grid_width}")
    if grid_width > 1:
        xs = np.linspace(box.x0, box.x1, grid_width)
    else:
        xs = np.array([(box.x0 + box.x1) / 2.0])
    if grid_height > 1:
        ys = np.linspace(box.y0, box.y1, grid_height)
    else:
        ys = np.array([(box.y0 + box.y1) / 2.0])
    grid = np.empty((grid_height, grid_width, 2))
    grid[..., 0] = xs[None, :]
    grid[..., 1] = ys[:, None]
    return grid


def modulate_grid(grid: np.ndarray, displacement: np.ndarray) -> np.ndarray:
    """Shift sampling coordinates by a displacement field of the same shape."""
    grid = np.asarray(grid, dtype=float)
    displacement = np.asarray(displacement, dtype=float)
    if grid.shape != displacement.shape:
        raise ValueError(
            f"grid shape {grid.shape} does not match displacement shape {displacement.shape}"
        )
    return grid + displacement
