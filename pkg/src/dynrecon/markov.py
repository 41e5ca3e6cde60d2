"""Ulam-style Markov approximation and finite-rank Koopman matrices.

A box partition of the sampled region turns a long orbit into a
finite-state chain; counting consecutive cell-to-cell transitions gives
the column-stochastic transition matrix (column = source cell).  The
same counts, written as empirical inner products of indicator functions
with their one-step images, are the finite-rank Koopman matrix on the
indicator basis -- the two constructions agree exactly after column
normalization, which is what ``koopman_to_markov`` exploits.

The stationary distribution comes from power iteration with a Cesaro
fallback for periodic chains.  ``reconstruct_law`` reads the dynamics
law back off the matrix as the image of the identity observable: cell j
maps to the transition-weighted mean of the destination centroids.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

__all__ = [
    "BoxPartition",
    "TransitionMatrix",
    "StationaryDistribution",
    "build_partition",
    "transition_matrix",
    "empirical_koopman_matrix",
    "koopman_to_markov",
    "stationary_distribution",
    "simulate_markov",
    "reconstruct_law",
    "mixing_diagnostic",
    "write_coo",
    "read_coo",
]


@dataclass
class BoxPartition:
    """Disjoint half-open boxes tiling an inflated bounding box.

    Cells are indexed row-major over the per-coordinate resolutions.
    ``circular`` marks angle coordinates (used for circular means in
    diagnostics, not for the indexing itself).
    """

    lo: np.ndarray
    hi: np.ndarray
    resolution: tuple[int, ...]
    occupied: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))
    circular: tuple[bool, ...] = ()

    def __post_init__(self):
        if not self.circular:
            self.circular = tuple(False for _ in self.resolution)

    @property
    def dim(self) -> int:
        return len(self.resolution)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.resolution))

    @property
    def widths(self) -> np.ndarray:
        return (self.hi - self.lo) / np.asarray(self.resolution)

    def cell_index(self, points: np.ndarray) -> np.ndarray:
        """Row-major cell id per point; every point of the source data maps
        into a valid cell because the box was inflated around it."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ij = ((pts - self.lo) / self.widths).astype(int)
        ij = np.clip(ij, 0, np.asarray(self.resolution) - 1)
        return np.ravel_multi_index(tuple(ij.T), self.resolution)

    def centroids(self, cells: np.ndarray | None = None) -> np.ndarray:
        cells = np.arange(self.n_cells) if cells is None else np.asarray(cells, dtype=int)
        ij = np.column_stack(np.unravel_index(cells, self.resolution))
        return self.lo + (ij + 0.5) * self.widths


def build_partition(
    points: np.ndarray,
    resolution: int | tuple[int, ...],
    circular: tuple[bool, ...] = (),
) -> BoxPartition:
    """Partition the data's bounding box (inflated by 1%) into a grid."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("empty trajectory")
    if isinstance(resolution, int):
        resolution = (resolution,) * pts.shape[1]
    if any(r < 2 for r in resolution):
        raise ValueError("resolution must be >= 2 per coordinate")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    center, half = (lo + hi) / 2.0, (hi - lo) / 2.0
    half = np.where(half == 0.0, 0.5, half)  # degenerate coordinate
    lo, hi = center - 1.01 * half, center + 1.01 * half
    part = BoxPartition(lo=lo, hi=hi, resolution=tuple(resolution), circular=tuple(circular))
    part.occupied = np.unique(part.cell_index(pts))
    return part


@dataclass
class TransitionMatrix:
    """Column-stochastic sparse transition matrix over partition cells.

    ``matrix[i, j]`` estimates P(next cell = i | current cell = j);
    ``counts[j]`` is the number of observed transitions out of cell j.
    Columns with zero samples are left as zero columns and listed in
    ``zero_columns`` rather than silently uniformized.
    """

    matrix: sparse.csc_matrix
    counts: np.ndarray
    partition: BoxPartition | None = None
    clipped_columns: np.ndarray = field(default_factory=lambda: np.array([], dtype=int))

    @property
    def n_cells(self) -> int:
        return self.matrix.shape[0]

    @property
    def zero_columns(self) -> np.ndarray:
        return np.nonzero(self.counts == 0)[0]

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def eigenvalues(self, k: int | None = None) -> np.ndarray:
        """Spectrum of the matrix (diagnostic only; no claim that it
        approximates the Koopman spectrum)."""
        vals = np.linalg.eigvals(self.matrix.toarray())
        vals = vals[np.argsort(-np.abs(vals))]
        return vals if k is None else vals[:k]


def transition_matrix(points: np.ndarray, partition: BoxPartition) -> TransitionMatrix:
    """Ulam counts from a single orbit: entry (i, j) is the fraction of
    visits to cell j (among non-terminal points) that moved to cell i."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] < 2:
        raise ValueError("need at least two points to count transitions")
    cells = partition.cell_index(pts)
    src, dst = cells[:-1], cells[1:]
    m = partition.n_cells
    counts = np.bincount(src, minlength=m).astype(float)
    raw = sparse.coo_matrix(
        (np.ones(src.shape[0]), (dst, src)), shape=(m, m)
    ).tocsc()
    inv = np.zeros(m)
    nz = counts > 0
    inv[nz] = 1.0 / counts[nz]
    P = raw @ sparse.diags(inv)
    return TransitionMatrix(matrix=P.tocsc(), counts=counts, partition=partition)


def empirical_koopman_matrix(points: np.ndarray, partition: BoxPartition) -> np.ndarray:
    """Finite-rank Koopman matrix on the indicator basis.

    Entry (i, j) is the time-average estimate of <1_i, U 1_j>: the
    fraction of consecutive pairs with the current point in cell i and
    the next in cell j.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    cells = partition.cell_index(pts)
    src, dst = cells[:-1], cells[1:]
    m = partition.n_cells
    U = sparse.coo_matrix(
        (np.full(src.shape[0], 1.0 / src.shape[0]), (src, dst)), shape=(m, m)
    )
    return U.tocsc().toarray()


def koopman_to_markov(
    u_hat: np.ndarray, partition: BoxPartition | None = None, clip_report: float = 0.01
) -> TransitionMatrix:
    """Column-stochastic transition matrix from a Koopman matrix on indicators.

    With U_hat[i, j] ~ <1_i, U 1_j> = mu(cell i now, cell j next), the
    matrix of forward transition probabilities out of cell j is the
    column normalization of the transpose.  Negative entries (sampling
    noise in general estimators) are clipped to zero first; columns
    whose clipped mass exceeds ``clip_report`` of their total are
    flagged.
    """
    U = np.asarray(
        u_hat.toarray() if sparse.issparse(u_hat) else u_hat, dtype=float
    )
    joint = U.T.copy()
    neg = np.clip(-joint, 0.0, None)
    joint = np.clip(joint, 0.0, None)
    col_mass = joint.sum(axis=0)
    clipped_mass = neg.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(col_mass + clipped_mass > 0, clipped_mass / (col_mass + clipped_mass), 0.0)
    clipped_cols = np.nonzero(frac > clip_report)[0]
    nz = col_mass > 0
    P = np.zeros_like(joint)
    P[:, nz] = joint[:, nz] / col_mass[nz]
    counts = nz.astype(float)  # occupancy indicator; true sample counts unknown here
    return TransitionMatrix(
        matrix=sparse.csc_matrix(P),
        counts=counts,
        partition=partition,
        clipped_columns=clipped_cols,
    )


@dataclass
class StationaryDistribution:
    """Probability vector with the residual of stationarity."""

    probs: np.ndarray
    residual: float
    converged: bool
    method: str  # "power" | "cesaro"


def stationary_distribution(
    tm: TransitionMatrix, tol: float = 1e-10, max_iters: int = 20000
) -> StationaryDistribution:
    """Power iteration from uniform (over occupied cells), with a Cesaro
    average fallback when the chain is periodic and power iteration
    cannot settle."""
    P = tm.matrix
    m = P.shape[0]
    support = np.nonzero(tm.counts > 0)[0]
    if support.size == 0:
        raise ValueError("transition matrix has no occupied columns")
    x = np.zeros(m)
    x[support] = 1.0 / support.size
    avg = np.zeros(m)
    for it in range(1, max_iters + 1):
        x_new = P @ x
        s = x_new.sum()
        if s <= 0:
            raise ValueError("all mass absorbed by zero columns")
        x_new /= s
        avg += x_new
        resid = float(np.abs(x_new - x).sum())
        x = x_new
        if resid <= tol:
            return StationaryDistribution(
                probs=x, residual=float(np.abs(P @ x - x).sum()), converged=True, method="power"
            )
    avg /= avg.sum()
    return StationaryDistribution(
        probs=avg,
        residual=float(np.abs(P @ avg - avg).sum()),
        converged=False,
        method="cesaro",
    )


def simulate_markov(
    tm: TransitionMatrix, start_cell: int, n: int, seed: int
) -> tuple[np.ndarray, int | None]:
    """Seeded categorical simulation of the chain.

    Returns (cells, halted_at); ``halted_at`` is the step index where an
    absorbing zero column stopped the run (None when it completed).
    """
    P = tm.matrix
    rng = np.random.default_rng(seed)
    indptr, indices, data = P.indptr, P.indices, P.data
    cells = np.empty(n + 1, dtype=int)
    cells[0] = start_cell
    cur = int(start_cell)
    draws = rng.random(n)
    for step_i in range(n):
        a, b = indptr[cur], indptr[cur + 1]
        if a == b:
            return cells[: step_i + 1], step_i
        cum = np.cumsum(data[a:b])
        j = int(np.searchsorted(cum, draws[step_i] * cum[-1], side="right"))
        cur = int(indices[a + min(j, b - a - 1)])
        cells[step_i + 1] = cur
    return cells, None


def _circular_mean(weights: np.ndarray, angles: np.ndarray) -> float:
    return float(np.arctan2(weights @ np.sin(angles), weights @ np.cos(angles))) % (2 * np.pi)


def reconstruct_law(
    tm: TransitionMatrix, partition: BoxPartition | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Image of the identity observable under the Markov matrix.

    For each occupied cell j, the reconstructed map sends the centroid
    of j to the transition-weighted mean of the destination centroids
    (circular mean on angle coordinates).  The per-cell dispersion (the
    weighted spread of the destinations) measures how deterministic the
    matrix is there.  Returns (cells, images, dispersion).
    """
    part = partition or tm.partition
    if part is None:
        raise ValueError("a partition is required to reconstruct the law")
    occupied = np.nonzero(tm.counts > 0)[0]
    cents = part.centroids()
    P = tm.matrix
    D = part.dim
    images = np.empty((occupied.size, D))
    disp = np.empty(occupied.size)
    for out_i, j in enumerate(occupied):
        col = P[:, [j]].toarray().ravel()
        dests = np.nonzero(col)[0]
        w = col[dests]
        dc = cents[dests]
        img = np.empty(D)
        for c in range(D):
            if part.circular[c]:
                img[c] = _circular_mean(w, dc[:, c])
            else:
                img[c] = float(w @ dc[:, c])
        diff = dc - img
        for c in range(D):
            if part.circular[c]:
                diff[:, c] = np.angle(np.exp(1j * diff[:, c]))
        disp[out_i] = float(np.sqrt(w @ np.sum(diff**2, axis=1)))
        images[out_i] = img
    return occupied, images, disp


def mixing_diagnostic(
    psi: np.ndarray, chi: np.ndarray, n_max: int
) -> tuple[np.ndarray, np.ndarray]:
    """Correlations <U^n psi, chi> and their running Cesaro averages.

    Both series must be mean-removed and of equal length.  Returns
    (corr, cesaro) with corr[n] the lag-n time average for n = 0..n_max
    and cesaro[k] = mean(corr[0..k]); weak decay of correlations shows
    as cesaro -> 0 even when corr itself only oscillates.
    """
    a = np.asarray(psi, dtype=float)
    b = np.asarray(chi, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ValueError(f"series shapes differ: {a.shape} vs {b.shape}")
    n = a.shape[0]
    if n <= n_max:
        raise ValueError("series too short for requested number of lags")
    corr = np.empty(n_max + 1)
    for lag in range(n_max + 1):
        corr[lag] = np.einsum("td,td->", a[lag:], b[: n - lag]) / (n - lag)
    cesaro = np.cumsum(corr) / np.arange(1, n_max + 2)
    return corr, cesaro


def write_coo(tm: TransitionMatrix | sparse.spmatrix, path) -> None:
    """Coordinate-list text format: '# rows cols nnz' header, then
    'row col value' per line (row-major order)."""
    M = tm.matrix if isinstance(tm, TransitionMatrix) else tm
    coo = M.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{r} {c} {float(v)!r}\n")


def read_coo(path) -> sparse.csc_matrix:
    with open(path) as fh:
        header = fh.readline().split()
        rows, cols = int(header[1]), int(header[2])
        r, c, v = [], [], []
        for line in fh:
            parts = line.split()
            r.append(int(parts[0]))
            c.append(int(parts[1]))
            v.append(float(parts[2]))
    return sparse.coo_matrix((v, (r, c)), shape=(rows, cols)).tocsc()
