"""Binary model file.

Layout (little-endian)::

    b"F2NXMD01"
    u32 version, u32 n_entries
    per entry: u16 name length | name (utf-8) | u8 ndim | u64 shape[ndim] | f64 data

Everything a model needs is stored as named float64 arrays; the GP factors
are recomputed on load from the stored training data and hyperparameters.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .data import TimeGrid
from .gpr import GpModel, Normalizer
from .model import F2NarxModel
from .pca import PcaProjector
from .sgp import SgpModel
from .ut import KAPPA_POLICIES, UT_COVARIANCES
from .windowing import WindowGeometry

MODEL_MAGIC = b"F2NXMD01"
MODEL_VERSION = 1


class ModelFormatError(ValueError):
    pass


def write_arrays(path, arrays: dict[str, np.ndarray], magic: bytes = MODEL_MAGIC, version: int = MODEL_VERSION):
    parts = [magic, struct.pack("<II", version, len(arrays))]
    for name, arr in arrays.items():
        a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
        key = name.encode("utf-8")
        parts.append(struct.pack("<H", len(key)) + key + struct.pack("<B", a.ndim))
        parts.append(struct.pack(f"<{a.ndim}Q", *a.shape))
        parts.append(a.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_arrays(path, magic: bytes = MODEL_MAGIC) -> tuple[int, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        raw = fh.read()
    name = os.fspath(path)
    if raw[:8] != magic:
        raise ModelFormatError(f"{name}: bad magic {raw[:8]!r}")
    try:
        version, n = struct.unpack_from("<II", raw, 8)
        pos = 16
        out = {}
        for _ in range(n):
            (klen,) = struct.unpack_from("<H", raw, pos)
            key = raw[pos + 2 : pos + 2 + klen].decode("utf-8")
            pos += 2 + klen
            (ndim,) = struct.unpack_from("<B", raw, pos)
            shape = struct.unpack_from(f"<{ndim}Q", raw, pos + 1)
            pos += 1 + 8 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 8 * size > len(raw):
                raise ModelFormatError(f"{name}: truncated entry {key!r}")
            out[key] = np.frombuffer(raw, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
            pos += 8 * size
    except struct.error as exc:
        raise ModelFormatError(f"{name}: truncated file") from exc
    if pos != len(raw):
        raise ModelFormatError(f"{name}: {len(raw) - pos} trailing bytes")
    return version, out


def _put_norm(d, prefix, norm: Normalizer):
    d[prefix + "x_mean"] = norm.x_mean
    d[prefix + "x_std"] = norm.x_std
    d[prefix + "y_scale"] = np.array([norm.y_mean, norm.y_std])


def _get_norm(d, prefix) -> Normalizer:
    ym, ys = d[prefix + "y_scale"]
    return Normalizer(d[prefix + "x_mean"], d[prefix + "x_std"], float(ym), float(ys))


def _put_hyp(d, prefix, g):
    d[prefix + "log_lengthscales"] = g.log_lengthscales
    d[prefix + "log_variances"] = np.array([g.log_signal_variance, g.log_noise_variance])
    d[prefix + "X"] = g.X
    d[prefix + "y"] = g.y
    _put_norm(d, prefix, g.norm)


def save_model(model: F2NarxModel, path: str | os.PathLike) -> None:
    d: dict[str, np.ndarray] = {}
    g = model.grid
    d["grid"] = np.array([g.t0, g.dt, g.n_t])
    geo = model.geo
    d["geometry"] = np.array([geo.T, geo.n_T, geo.n_W, float(geo.overlap_last), geo.n_t])
    d["meta"] = np.array([model.n_s, KAPPA_POLICIES.index(model.kappa_policy), len(model.f_bank),
                          UT_COVARIANCES.index(model.ut_covariance)])
    for tag, p in (("pca_u", model.pca_u), ("pca_y", model.pca_y)):
        d[f"{tag}.mu"] = p.mu
        d[f"{tag}.sigma"] = p.sigma
        d[f"{tag}.V"] = p.V
        d[f"{tag}.lambdas"] = p.lambdas
        d[f"{tag}.eps"] = np.array([p.eps_lambda])
    for k, gp in enumerate(model.f0_bank):
        _put_hyp(d, f"f0.{k}.", gp)
        d[f"f0.{k}.jitter"] = np.array([gp.jitter])
    for k, sg in enumerate(model.f_bank):
        _put_hyp(d, f"f.{k}.", sg)
        d[f"f.{k}.Z"] = sg.Z
        d[f"f.{k}.kuu_jitter"] = np.array([sg.kuu_jitter])
    write_arrays(path, d)


def load_model(path: str | os.PathLike) -> F2NarxModel:
    version, d = read_arrays(path)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model file version {version}")
    try:
        t0, dt, n_t = d["grid"]
        grid = TimeGrid(float(t0), float(dt), int(n_t))
        T, n_T, n_W, overlap, n_tg = d["geometry"]
        geo = WindowGeometry(float(T), int(n_T), int(n_W), bool(overlap), int(n_tg))
        n_s, policy, n_f, cov = (int(v) for v in d["meta"])
        pcas = {
            tag: PcaProjector(
                d[f"{tag}.mu"], d[f"{tag}.sigma"], d[f"{tag}.V"], d[f"{tag}.lambdas"], float(d[f"{tag}.eps"][0])
            )
            for tag in ("pca_u", "pca_y")
        }
        m_y = pcas["pca_y"].m
        f0 = []
        for k in range(m_y):
            pre = f"f0.{k}."
            ls, ln = d[pre + "log_variances"]
            gp = GpModel(d[pre + "X"], d[pre + "y"], _get_norm(d, pre), d[pre + "log_lengthscales"], float(ls), float(ln))
            f0.append(gp)
        fb = []
        for k in range(n_f):
            pre = f"f.{k}."
            ls, ln = d[pre + "log_variances"]
            fb.append(
                SgpModel(
                    Z=d[pre + "Z"],
                    norm=_get_norm(d, pre),
                    log_lengthscales=d[pre + "log_lengthscales"],
                    log_signal_variance=float(ls),
                    log_noise_variance=float(ln),
                    X=d[pre + "X"],
                    y=d[pre + "y"],
                    kuu_jitter=float(d[pre + "kuu_jitter"][0]),
                )
            )
    except KeyError as exc:
        raise ModelFormatError(f"{os.fspath(path)}: missing entry {exc}") from exc
    return F2NarxModel(grid, geo, pcas["pca_u"], pcas["pca_y"], f0, fb, n_s, KAPPA_POLICIES[policy],
                       UT_COVARIANCES[cov])
