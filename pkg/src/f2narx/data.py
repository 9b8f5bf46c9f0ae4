"""Trajectories, parameter samples and experimental-design datasets.

All numeric payloads are float64 and frozen (``writeable=False``) after
construction so that objects can be shared freely between workers.

Binary container layout (little-endian)::

    b"F2NXDS01"
    u64 n_records, u64 n_t, u64 n_s, u64 n_phi
    f64 t0, f64 dt
    per record: theta (n_s f64) | phi (n_phi f64) | excitation (n_t f64) | response (n_t f64)
"""

from __future__ import annotations

import csv
import os
import struct
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

DATASET_MAGIC = b"F2NXDS01"
_HEADER = struct.Struct("<8sQQQQdd")


class DatasetFormatError(ValueError):
    """Raised when a dataset file is malformed."""


def _frozen(values, ndim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValueError(f"{name}: expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name}: non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``t0 + j*dt`` for ``j = 0..n_t-1``."""

    t0: float
    dt: float
    n_t: int

    def __post_init__(self):
        if not (np.isfinite(self.t0) and np.isfinite(self.dt)):
            raise ValueError("t0 and dt must be finite")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.n_t) != self.n_t or self.n_t < 2:
            raise ValueError(f"n_t must be an integer >= 2, got {self.n_t}")
        object.__setattr__(self, "n_t", int(self.n_t))
        object.__setattr__(self, "t0", float(self.t0))
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_t)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.n_t - 1)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One uniformly sampled signal."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values, 1, "Trajectory.values")
        if values.shape[0] != self.grid.n_t:
            raise ValueError(
                f"Trajectory has {values.shape[0]} samples but grid expects {self.grid.n_t}"
            )
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.grid.n_t

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class ParamSample:
    """System parameters ``theta`` and excitation randomness ``phi``."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", _frozen(self.theta, 1, "ParamSample.theta"))
        object.__setattr__(self, "phi", _frozen(self.phi, 1, "ParamSample.phi"))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamSample):
            return NotImplemented
        return np.array_equal(self.theta, other.theta) and np.array_equal(self.phi, other.phi)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Aligned experimental design: parameters, excitations and responses.

    Stored column-wise as 2-d arrays (one row per record); the ``params``,
    ``excitations`` and ``responses`` properties give per-record views.
    """

    grid: TimeGrid
    theta: np.ndarray
    phi: np.ndarray
    excitation: np.ndarray
    response: np.ndarray

    def __post_init__(self):
        theta = _frozen(self.theta, 2, "Dataset.theta")
        phi = _frozen(self.phi, 2, "Dataset.phi")
        u = _frozen(self.excitation, 2, "Dataset.excitation")
        y = _frozen(self.response, 2, "Dataset.response")
        n = theta.shape[0]
        if not (phi.shape[0] == u.shape[0] == y.shape[0] == n):
            raise ValueError(
                "Dataset lists differ in length: "
                f"theta={n}, phi={phi.shape[0]}, excitation={u.shape[0]}, response={y.shape[0]}"
            )
        if u.shape[1] != self.grid.n_t or y.shape[1] != self.grid.n_t:
            raise ValueError("Dataset trajectories do not match the grid length")
        for name, arr in (("theta", theta), ("phi", phi), ("excitation", u), ("response", y)):
            object.__setattr__(self, name, arr)

    @classmethod
    def from_records(
        cls,
        grid: TimeGrid,
        params: Sequence[ParamSample],
        excitations: Sequence[Trajectory],
        responses: Sequence[Trajectory],
    ) -> "Dataset":
        if not (len(params) == len(excitations) == len(responses)):
            raise ValueError("params, excitations and responses must have equal length")
        for tr in list(excitations) + list(responses):
            if tr.grid != grid:
                raise ValueError("all trajectories must share the dataset grid")
        if params:
            theta = np.stack([p.theta for p in params])
            phi = np.stack([p.phi for p in params])
        else:
            theta = np.zeros((0, 0))
            phi = np.zeros((0, 0))
        u = np.stack([t.values for t in excitations]) if excitations else np.zeros((0, grid.n_t))
        y = np.stack([t.values for t in responses]) if responses else np.zeros((0, grid.n_t))
        return cls(grid, theta, phi, u, y)

    @classmethod
    def empty(cls, grid: TimeGrid, n_s: int = 0, n_phi: int = 0) -> "Dataset":
        z = np.zeros((0, grid.n_t))
        return cls(grid, np.zeros((0, n_s)), np.zeros((0, n_phi)), z, z)

    def __len__(self) -> int:
        return self.theta.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.grid == other.grid and all(
            a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(
                (self.theta, self.phi, self.excitation, self.response),
                (other.theta, other.phi, other.excitation, other.response),
            )
        )

    @property
    def n_s(self) -> int:
        return self.theta.shape[1]

    @property
    def n_phi(self) -> int:
        return self.phi.shape[1]

    @property
    def params(self) -> list[ParamSample]:
        return [ParamSample(t, p) for t, p in zip(self.theta, self.phi)]

    @property
    def excitations(self) -> list[Trajectory]:
        return [Trajectory(self.grid, u) for u in self.excitation]

    @property
    def responses(self) -> list[Trajectory]:
        return [Trajectory(self.grid, y) for y in self.response]

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.grid, self.theta[index], self.phi[index], self.excitation[index], self.response[index]
        )

    def concat(self, other: "Dataset") -> "Dataset":
        if other.grid != self.grid:
            raise ValueError("cannot concatenate datasets on different grids")
        return Dataset(
            self.grid,
            np.vstack([self.theta, other.theta]),
            np.vstack([self.phi, other.phi]),
            np.vstack([self.excitation, other.excitation]),
            np.vstack([self.response, other.response]),
        )

    def __iter__(self) -> Iterator[tuple[ParamSample, Trajectory, Trajectory]]:
        for i in range(len(self)):
            yield (
                ParamSample(self.theta[i], self.phi[i]),
                Trajectory(self.grid, self.excitation[i]),
                Trajectory(self.grid, self.response[i]),
            )


def save_dataset(ds: Dataset, path: str | os.PathLike) -> None:
    """Write ``ds`` to ``path`` in the binary container format."""
    # Dataset construction already validated shapes and finiteness; re-check in
    # case the caller built one with object.__setattr__ tricks.
    for name in ("theta", "phi", "excitation", "response"):
        if not np.all(np.isfinite(getattr(ds, name))):
            raise ValueError(f"dataset {name} has non-finite entries; nothing written")
    n = len(ds)
    header = _HEADER.pack(DATASET_MAGIC, n, ds.grid.n_t, ds.n_s, ds.n_phi, ds.grid.t0, ds.grid.dt)
    payload = np.hstack([ds.theta, ds.phi, ds.excitation, ds.response]).astype("<f8", copy=False)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload.tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"failed to write dataset to {os.fspath(path)!r}: {exc}") from exc


def load_dataset(path: str | os.PathLike) -> Dataset:
    """Read a dataset written by :func:`save_dataset`."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"failed to read dataset {os.fspath(path)!r}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise DatasetFormatError(f"{os.fspath(path)}: truncated header")
    magic, n, n_t, n_s, n_phi, t0, dt = _HEADER.unpack_from(raw)
    if magic != DATASET_MAGIC:
        raise DatasetFormatError(f"{os.fspath(path)}: bad magic {magic!r}")
    width = n_s + n_phi + 2 * n_t
    expected = _HEADER.size + 8 * n * width
    if len(raw) != expected:
        raise DatasetFormatError(
            f"{os.fspath(path)}: payload is {len(raw) - _HEADER.size} bytes, "
            f"expected {expected - _HEADER.size} for {n} records of n_t={n_t}"
        )
    grid = TimeGrid(t0, dt, n_t)
    block = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(n, width)
    if not np.all(np.isfinite(block)):
        raise DatasetFormatError(f"{os.fspath(path)}: non-finite entries in payload")
    a, b, c = n_s, n_s + n_phi, n_s + n_phi + n_t
    return Dataset(grid, block[:, :a], block[:, a:b], block[:, b:c], block[:, c:])


def save_trajectories_csv(trajectories: Sequence[Trajectory], path: str | os.PathLike) -> None:
    """One trajectory per row; header row holds the time stamps."""
    if not trajectories:
        raise ValueError("nothing to write")
    grid = trajectories[0].grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([repr(float(t)) for t in grid.times])
        for tr in trajectories:
            if tr.grid != grid:
                raise ValueError("all trajectories must share one grid")
            writer.writerow([repr(float(v)) for v in tr.values])


def load_trajectories_csv(path: str | os.PathLike) -> list[Trajectory]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError(f"{os.fspath(path)}: empty CSV")
    times = np.array([float(v) for v in rows[0]])
    if times.size < 2:
        raise DatasetFormatError(f"{os.fspath(path)}: need at least two time stamps")
    dt = (times[-1] - times[0]) / (times.size - 1)
    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise DatasetFormatError(f"{os.fspath(path)}: time stamps are not uniformly spaced")
    grid = TimeGrid(times[0], dt, times.size)
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != grid.n_t:
            raise DatasetFormatError(f"{os.fspath(path)}:{lineno}: expected {grid.n_t} values")
        out.append(Trajectory(grid, np.array([float(v) for v in row])))
    return out
