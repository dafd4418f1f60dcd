"""Nonparametric learning of a Lipschitz uncertainty function.

Each recorded pair (x_i, d_i) pins the unknown function's graph inside a
quadratic-constraint envelope: any admissible (x, d) satisfies
||d - d_i|| <= L ||x - x_i||.  At a query state the envelope slice is a
Euclidean ball (the sampled range set); the pointwise uncertainty set is
the intersection of all such balls and only ever shrinks as data accrues.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelInconsistent

LIPSCHITZ_TOL = 1e-9
DUPLICATE_TOL = 1e-12


@dataclass(frozen=True)
class LipschitzModel:
    """Known linear part (A, B) plus the uncertainty's Lipschitz constant."""

    A: np.ndarray
    B: np.ndarray
    L_d: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("A must be square")
        if B.shape[0] != A.shape[0]:
            raise ValueError("B row count must match the state dimension")
        if self.L_d < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "L_d", float(self.L_d))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


@dataclass(frozen=True)
class Measurement:
    """One recorded (state, uncertainty realization) pair."""

    x: np.ndarray
    d: np.ndarray
    t: int

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        d = np.asarray(self.d, dtype=float).ravel()
        if not (np.isfinite(x).all() and np.isfinite(d).all()):
            raise ValueError("measurement entries must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "t", int(self.t))


def realize_uncertainty(model, x, u, x_next):
    """Back out the realized uncertainty d = x_next - A x - B u."""
    x = np.asarray(x, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    x_next = np.asarray(x_next, dtype=float).ravel()
    return x_next - model.A @ x - model.B @ u


class Dataset:
    """Append-only store of measurements, kept Lipschitz-consistent.

    Insertions that contradict the assumed Lipschitz constant raise
    ModelInconsistent; duplicates (same state within 1e-12) are dropped,
    keeping the first.  An optional cap keeps a greedy max-min-distance
    subsample in state space.  Single-writer: appends must be serialized
    by the owner; `snapshot()` hands out an immutable view for readers.
    """

    def __init__(self, L_d, cap=None):
        if L_d < 0:
            raise ValueError("Lipschitz constant must be nonnegative")
        if cap is not None and cap < 1:
            raise ValueError("cap must be >= 1")
        self.L_d = float(L_d)
        self.cap = cap
        self._measurements: list[Measurement] = []

    def __len__(self):
        return len(self._measurements)

    def __iter__(self):
        return iter(self._measurements)

    def __getitem__(self, i):
        return self._measurements[i]

    def append(self, meas):
        """Insert one measurement; returns False when dropped as duplicate."""
        for old in self._measurements:
            if np.linalg.norm(old.x - meas.x) <= DUPLICATE_TOL:
                return False
            gap = np.linalg.norm(old.d - meas.d) - self.L_d * np.linalg.norm(
                old.x - meas.x
            )
            if gap > LIPSCHITZ_TOL:
                raise ModelInconsistent(
                    f"pair (t={old.t}, t={meas.t}) violates the Lipschitz bound "
                    f"by {gap:.3e}; the assumed L_d={self.L_d} is too small"
                )
        self._measurements.append(meas)
        if self.cap is not None and len(self._measurements) > self.cap:
            self._measurements = _maxmin_subsample(self._measurements, self.cap)
        return True

    def extend(self, measurements):
        for m in measurements:
            self.append(m)

    def snapshot(self):
        """Immutable view (tuple) of the current measurements."""
        return tuple(self._measurements)

    def xs(self):
        return np.array([m.x for m in self._measurements])

    def ds(self):
        return np.array([m.d for m in self._measurements])

    def restricted(self, before_t):
        """New dataset with only the measurements acquired before index before_t."""
        out = Dataset(self.L_d, cap=None)
        out._measurements = [m for m in self._measurements if m.t < before_t]
        return out

    def to_jsonl(self):
        import json

        return "\n".join(
            json.dumps({"t": m.t, "x": m.x.tolist(), "d": m.d.tolist()})
            for m in self._measurements
        ) + ("\n" if self._measurements else "")

    @classmethod
    def from_jsonl(cls, text, L_d, cap=None):
        import json

        ds = cls(L_d, cap=cap)
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            ds.append(Measurement(np.array(obj["x"]), np.array(obj["d"]), obj["t"]))
        return ds


def _maxmin_subsample(measurements, cap):
    """Greedy farthest-point subsample in x-space (deterministic)."""
    if len(measurements) <= cap:
        return list(measurements)
    xs = np.array([m.x for m in measurements])
    chosen = [0]
    dist = np.linalg.norm(xs - xs[0], axis=1)
    while len(chosen) < cap:
        idx = int(np.argmax(dist))
        chosen.append(idx)
        dist = np.minimum(dist, np.linalg.norm(xs - xs[idx], axis=1))
    chosen.sort()
    return [measurements[i] for i in chosen]


@dataclass(frozen=True)
class EnvelopeQC:
    """Quadratic constraint [x; d; 1]' Qc [x; d; 1] <= 0 from one measurement."""

    Qc: np.ndarray

    def evaluate(self, x, d):
        z = np.concatenate([np.ravel(x), np.ravel(d), [1.0]])
        return float(z @ self.Qc @ z)


def qc_matrix(model, meas):
    """Envelope QC of one measurement.

    Block structure (n = state dim, L = Lipschitz constant):

        [ -L^2 I    0      L^2 x_i                  ]
        [  0        I      -d_i                     ]
        [  L^2 x_i' -d_i'  -L^2 x_i'x_i + d_i'd_i   ]

    The quadratic form equals ||d - d_i||^2 - L^2 ||x - x_i||^2, so it is
    nonpositive exactly on the Lipschitz-consistent pairs.
    """
    n = model.n
    L2 = model.L_d**2
    xi, di = meas.x, meas.d
    Qc = np.zeros((2 * n + 1, 2 * n + 1))
    Qc[:n, :n] = -L2 * np.eye(n)
    Qc[n : 2 * n, n : 2 * n] = np.eye(n)
    Qc[:n, -1] = L2 * xi
    Qc[-1, :n] = L2 * xi
    Qc[n : 2 * n, -1] = -di
    Qc[-1, n : 2 * n] = -di
    Qc[-1, -1] = -L2 * (xi @ xi) + di @ di
    return EnvelopeQC(Qc)


def sampled_range_set(model, meas, x):
    """Ball of possible d-values at state x implied by one measurement.

    Returns (center, radius) = (d_i, L ||x - x_i||): the slice of the
    measurement's envelope at the query state.
    """
    x = np.asarray(x, dtype=float).ravel()
    return meas.d.copy(), float(model.L_d * np.linalg.norm(x - meas.x))


@dataclass(frozen=True)
class PointUncertaintySet:
    """Intersection of sampled-range balls at a fixed query state.

    Kept lazily as the list of (center, radius) pairs; membership is the
    conjunction of the ball tests.  Construction certifies non-emptiness
    with the pairwise ball-distance check (sufficient, not necessary).
    """

    x: np.ndarray
    centers: np.ndarray  # (t, n)
    radii: np.ndarray  # (t,)

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())
        object.__setattr__(self, "centers", np.atleast_2d(np.asarray(self.centers, dtype=float)))
        object.__setattr__(self, "radii", np.asarray(self.radii, dtype=float).ravel())

    def contains(self, points, tol=1e-9):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        ok = np.ones(pts.shape[0], dtype=bool)
        for c, r in zip(self.centers, self.radii):
            ok &= np.linalg.norm(pts - c, axis=1) <= r + tol
        return bool(ok[0]) if np.asarray(points).ndim == 1 else ok

    def enclosing_box(self):
        """Tightest axis-aligned box from single-ball bounds (may be empty)."""
        lo = (self.centers - self.radii[:, None]).max(axis=0)
        hi = (self.centers + self.radii[:, None]).min(axis=0)
        return lo, hi


def point_uncertainty_set(dataset, x):
    """All sampled-range balls at query state x, as a membership oracle.

    Raises ModelInconsistent when two balls provably fail to intersect
    (the assumed Lipschitz constant is too small for the data).
    """
    if len(dataset) == 0:
        raise ValueError("dataset must be nonempty")
    x = np.asarray(x, dtype=float).ravel()
    xs = dataset.xs()
    centers = dataset.ds()
    radii = dataset.L_d * np.linalg.norm(xs - x, axis=1)
    t = len(radii)
    for i in range(t):
        for j in range(i + 1, t):
            if np.linalg.norm(centers[i] - centers[j]) > radii[i] + radii[j] + LIPSCHITZ_TOL:
                raise ModelInconsistent(
                    f"sampled range sets {i} and {j} at x={x} cannot intersect"
                )
    return PointUncertaintySet(x=x, centers=centers, radii=radii)
