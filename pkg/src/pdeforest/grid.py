"""Gridded observations, finite-difference stencils, and tree evaluation.

A :class:`Dataset` holds the observed field ``u(x, t)`` on a uniform grid
together with cached first derivatives in time (the regression target) and
space (the ``ux`` operand).  Trees evaluate to one column of the feature
matrix: the term's value at every retained grid point, flattened row-major
after trimming ``BOUNDARY_TRIM`` lines from each spatial and temporal edge
(one-sided-stencil rows are the noisiest, and composed derivatives touch two
neighbours).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Forest, Node, to_display_string

BOUNDARY_TRIM = 2

# Denominator entries smaller than this in magnitude are replaced by the
# guard value (sign kept; exact zero counts as positive) so division never
# produces Inf from a vanishing denominator.
DIV_GUARD = 1e-10


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable gridded field with cached derivative fields.

    ``u`` has shape (nx, nt): rows are spatial lines, columns time slices.
    ``ut``/``ux`` are recomputable from ``u`` with the module's stencils and
    are bit-equal to what :func:`make_dataset` produces.
    """

    u: np.ndarray
    x: np.ndarray
    t: np.ndarray
    ut: np.ndarray
    ux: np.ndarray

    @property
    def nx(self) -> int:
        return self.u.shape[0]

    @property
    def nt(self) -> int:
        return self.u.shape[1]

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


@dataclass(frozen=True, eq=False)
class FieldColumn:
    """One evaluated term over the retained grid points."""

    values: np.ndarray
    finite_fraction: float

    @property
    def is_finite(self) -> bool:
        return self.finite_fraction == 1.0


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Evaluated forest: one column per tree, in forest order."""

    columns: tuple[FieldColumn, ...]
    n_rows: int
    term_labels: tuple[str, ...]

    @property
    def all_finite(self) -> bool:
        return all(c.is_finite for c in self.columns)

    def matrix(self) -> np.ndarray:
        return np.column_stack([c.values for c in self.columns])


def _check_axis(name: str, v: np.ndarray) -> None:
    if v.ndim != 1 or v.size < 5:
        raise ValueError(f"{name} axis must be 1-D with at least 5 points")
    steps = np.diff(v)
    if np.any(steps <= 0):
        raise ValueError(f"{name} axis must be strictly increasing")
    h = steps[0]
    if np.abs(steps - h).max() > 1e-9 * abs(h):
        raise ValueError(f"{name} axis spacing is not uniform")


def make_dataset(u: np.ndarray, x: np.ndarray, t: np.ndarray) -> Dataset:
    """Build a Dataset, computing ``ut`` along t and ``ux`` along x.

    Both use second-order central differences in the interior and
    second-order one-sided differences on the two boundary lines.
    """
    u = np.array(u, dtype=float)
    x = np.array(x, dtype=float)
    t = np.array(t, dtype=float)
    if u.ndim != 2:
        raise ValueError("u must be a 2-D (nx, nt) array")
    if u.shape != (x.size, t.size):
        raise ValueError(
            f"shape mismatch: u is {u.shape}, axes give ({x.size}, {t.size})"
        )
    _check_axis("x", x)
    _check_axis("t", t)
    ut = _diff1(u.T, float(t[1] - t[0])).T
    ux = _diff1(u, float(x[1] - x[0]))
    for arr in (u, x, t, ut, ux):
        arr.flags.writeable = False
    return Dataset(u=u, x=x, t=t, ut=ut, ux=ux)


def _diff1(f: np.ndarray, h: float) -> np.ndarray:
    """First derivative along axis 0, second-order everywhere."""
    out = np.empty_like(f, dtype=float)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * h)
    out[0] = (-1.5 * f[0] + 2.0 * f[1] - 0.5 * f[2]) / h
    out[-1] = (1.5 * f[-1] - 2.0 * f[-2] + 0.5 * f[-3]) / h
    return out


def _diff2(f: np.ndarray, h: float) -> np.ndarray:
    """Second derivative along axis 0, second-order everywhere."""
    out = np.empty_like(f, dtype=float)
    h2 = h * h
    out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h2
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2
    out[-1] = (2.0 * f[-1] - 5.0 * f[-2] + 4.0 * f[-3] - f[-4]) / h2
    return out


def diff_x(field: np.ndarray, dx: float, order: int) -> np.ndarray:
    """Spatial derivative of ``field`` (rows are spatial lines).

    Order 1 is the central stencil ``(f[i+1]-f[i-1])/(2 dx)``, order 2 is
    ``(f[i+1]-2 f[i]+f[i-1])/dx**2``, both with second-order one-sided
    stencils on the edge rows; applied columnwise, one time slice at a time.
    """
    field = np.asarray(field, dtype=float)
    if field.shape[0] < 5:
        raise ValueError("need at least 5 spatial points for the edge stencils")
    if order == 1:
        return _diff1(field, dx)
    if order == 2:
        return _diff2(field, dx)
    raise ValueError("order must be 1 or 2")


def guard_denominator(den: np.ndarray) -> np.ndarray:
    """Replace near-zero denominator entries by the signed guard value.

    Entries with ``|v| < DIV_GUARD`` become ``+-DIV_GUARD`` matching their
    sign; exact zero counts as positive.
    """
    small = np.abs(den) < DIV_GUARD
    if not small.any():
        return den
    return np.where(small, np.where(den < 0, -DIV_GUARD, DIV_GUARD), den)


def evaluate_tree(tree: Node, ds: Dataset, trim: int = BOUNDARY_TRIM) -> FieldColumn:
    """Evaluate one tree over the full grid, trim, and flatten row-major.

    Operands map to the field, the x coordinate broadcast over time, the
    cached ``ux``, and zero; arithmetic is pointwise with the division guard;
    ``d``/``d2`` apply :func:`diff_x` to the evaluated left subtree.  Never
    raises: non-finite entries (overflow etc.) are left in place and reported
    through ``finite_fraction`` so the caller can reject the column.
    """
    if ds.nx - 2 * trim < 1 or ds.nt - 2 * trim < 1:
        raise ValueError("dataset too small for the requested boundary trim")
    with np.errstate(all="ignore"):
        field = _eval_node(tree, ds)
    values = np.ascontiguousarray(field[trim : ds.nx - trim, trim : ds.nt - trim]).ravel()
    return FieldColumn(
        values=values, finite_fraction=float(np.isfinite(values).mean())
    )


def _eval_node(node: Node, ds: Dataset) -> np.ndarray:
    sym = node.symbol
    if sym == "u":
        return ds.u
    if sym == "x":
        return np.broadcast_to(ds.x[:, None], ds.u.shape)
    if sym == "ux":
        return ds.ux
    if sym == "0":
        return np.zeros_like(ds.u)
    if sym == "^2":
        v = _eval_node(node.children[0], ds)
        return v * v
    if sym == "^3":
        v = _eval_node(node.children[0], ds)
        return v * v * v
    if sym == "d":
        return _diff1(_eval_node(node.children[0], ds), ds.dx)
    if sym == "d2":
        return _diff2(_eval_node(node.children[0], ds), ds.dx)
    left = _eval_node(node.children[0], ds)
    right = _eval_node(node.children[1], ds)
    if sym == "+":
        return left + right
    if sym == "-":
        return left - right
    if sym == "*":
        return left * right
    if sym == "/":
        return left / guard_denominator(right)
    raise ValueError(f"unknown symbol {sym!r}")


def build_feature_matrix(
    forest: Forest, ds: Dataset, trim: int = BOUNDARY_TRIM
) -> FeatureMatrix:
    """One column per tree, labelled with the tree's display string."""
    columns = tuple(evaluate_tree(t, ds, trim) for t in forest.trees)
    return FeatureMatrix(
        columns=columns,
        n_rows=columns[0].values.size,
        term_labels=tuple(to_display_string(t) for t in forest.trees),
    )


def ut_vector(ds: Dataset, trim: int = BOUNDARY_TRIM) -> FieldColumn:
    """The regression target: cached ``ut`` trimmed and flattened exactly
    like :func:`evaluate_tree` output (same row ordering)."""
    if ds.nx - 2 * trim < 1 or ds.nt - 2 * trim < 1:
        raise ValueError("dataset too small for the requested boundary trim")
    values = np.ascontiguousarray(ds.ut[trim : ds.nx - trim, trim : ds.nt - trim]).ravel()
    return FieldColumn(
        values=values, finite_fraction=float(np.isfinite(values).mean())
    )
