"""Classical multidimensional scaling of squared-distance matrices.

Double centering B = -1/2 H D H with H = I - (1/N) 1 1^T turns squared
distances into a Gram matrix; coordinates are eigenvector columns scaled
by the square roots of the d algebraically largest eigenvalues.
Negative eigenvalues (possible for estimated, non-Euclidean inputs)
contribute zero coordinates and are reported as negative tail mass
rather than producing imaginary axes.  A fixed sign convention (first
nonzero eigenvector entry positive) makes output deterministic.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionOutOfRange
from .matrixio import DistanceMatrix

_SIGN_TOL = 1e-12


def double_center(values: np.ndarray) -> np.ndarray:
    """B = -1/2 H D H without forming H; B annihilates the ones vector."""
    row = values.mean(axis=1, keepdims=True)
    col = values.mean(axis=0, keepdims=True)
    return -0.5 * (values - row - col + values.mean())


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        nz = np.nonzero(np.abs(col) > _SIGN_TOL)[0]
        if nz.size and col[nz[0]] < 0:
            out[:, k] = -col
    return out


@dataclass(frozen=True)
class Embedding:
    """MDS coordinates plus the retained spectrum.

    ``eigenvalues`` holds the d algebraically largest eigenvalues of B in
    nonincreasing order (negative ones are kept for reporting but give
    zero coordinates).  ``spectrum_energy`` is the retained fraction of
    the total singular-value mass of B; ``negative_tail_mass`` is the
    fraction carried by negative eigenvalues.
    """

    coords: np.ndarray
    eigenvalues: np.ndarray
    spectrum_energy: float
    negative_tail_mass: float
    dimension: int

    def to_metadata(self) -> dict:
        return {
            "dimension": self.dimension,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "spectrum_energy": self.spectrum_energy,
            "negative_tail_mass": self.negative_tail_mass,
        }


def mds(matrix: DistanceMatrix, d: int) -> Embedding:
    """Embed a squared-distance matrix into R^d by classical MDS.

    Coordinate column k is v_k * sqrt(max(lambda_k, 0)) for the d
    algebraically largest eigenpairs of the double-centered matrix.
    """
    n = matrix.size
    if not 1 <= d <= n - 1:
        raise DimensionOutOfRange(f"need 1 <= d <= {n - 1}, got {d}")
    B = double_center(matrix.values)
    evals, evecs = np.linalg.eigh(B)
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evecs = _fix_signs(evecs[:, order])
    retained = evals[:d]
    coords = evecs[:, :d] * np.sqrt(np.maximum(retained, 0.0))
    total = float(np.abs(evals).sum())
    energy = float(np.abs(retained).sum() / total) if total > 0 else 1.0
    negative = float(np.abs(evals[evals < 0]).sum() / total) if total > 0 else 0.0
    return Embedding(coords=coords, eigenvalues=retained,
                     spectrum_energy=energy, negative_tail_mass=negative,
                     dimension=d)


def choose_dimension(matrix: DistanceMatrix, energy: float) -> int:
    """Smallest d whose top-d singular values of B reach ``energy`` of
    the total singular-value sum."""
    if not 0.0 < energy < 1.0:
        raise ValueError(f"energy must lie in (0, 1), got {energy}")
    B = double_center(matrix.values)
    sigma = np.linalg.svd(B, compute_uv=False)
    total = sigma.sum()
    if total <= 0.0:
        return 1
    fractions = np.cumsum(sigma) / total
    # cumsum/total can fall an ulp short of 1 at the end; cap at N
    return int(min(np.searchsorted(fractions, energy) + 1, matrix.size))


def squared_distances_of(coords: np.ndarray) -> np.ndarray:
    """Pairwise squared distances of embedding rows (round-trip checks)."""
    g = np.einsum("ij,ij->i", coords, coords)
    d = g[:, None] + g[None, :] - 2.0 * coords @ coords.T
    np.maximum(d, 0.0, out=d)
    np.fill_diagonal(d, 0.0)
    return d


def save_embedding(embedding: Embedding, path, labels=None) -> None:
    """CSV export ``index,z1,..,zd[,label]`` plus a JSON metadata sidecar."""
    path = Path(path)
    n, d = embedding.coords.shape
    header = ["index"] + [f"z{k + 1}" for k in range(d)]
    if labels is not None:
        header.append("label")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(n):
            row = [i] + [repr(float(v)) for v in embedding.coords[i]]
            if labels is not None:
                row.append(int(labels[i]))
            writer.writerow(row)
    meta_path = path.with_suffix(path.suffix + ".meta.json")
    meta_path.write_text(json.dumps(embedding.to_metadata(), sort_keys=True) + "\n")


def load_embedding_coords(path) -> np.ndarray:
    """Read back the coordinate block of a saved embedding CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    zcols = [k for k, name in enumerate(header) if name.startswith("z")]
    return np.array([[float(r[k]) for k in zcols] for r in rows[1:]])
