"""Binary PLY serialization in the de-facto Gaussian-splatting vertex layout."""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

from .cloud import GaussianCloud
from .sh import MAX_DEGREE, num_coeffs


class PlyFormatError(ValueError):
    """Raised for malformed headers, missing properties, or bad payloads."""


def _property_names(sh_degree: int) -> list[str]:
    m = num_coeffs(sh_degree) - 1
    names = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(3 * m)]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    return names


def save_ply(cloud: GaussianCloud, path: str | Path) -> None:
    """Write float32 little-endian binary PLY; layout is stable across runs."""
    path = Path(path)
    names = _property_names(cloud.sh_degree)
    n = len(cloud)
    m = num_coeffs(cloud.sh_degree) - 1

    data = np.empty((n, len(names)), dtype="<f4")
    data[:, 0:3] = cloud.mu
    data[:, 3:6] = cloud.sh[:, :, 0]
    # f_rest is channel-major: all of R's higher coefficients, then G, then B
    data[:, 6:6 + 3 * m] = cloud.sh[:, :, 1:].reshape(n, 3 * m)
    col = 6 + 3 * m
    data[:, col] = cloud.opacity_logit
    data[:, col + 1:col + 4] = cloud.log_scale
    data[:, col + 4:col + 8] = cloud.rot

    header_lines = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header_lines += [f"property float {name}" for name in names]
    header_lines.append("end_header")
    header = "\n".join(header_lines) + "\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        f.write(data.tobytes())


def _parse_header(raw: bytes, path: Path) -> tuple[int, list[tuple[str, str]], int]:
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply\n") or end < 0:
        raise PlyFormatError(f"{path}: not a PLY file (missing magic or end_header)")
    offset = end + len(b"end_header\n")
    lines = raw[:end].decode("ascii", errors="replace").splitlines()
    if "format binary_little_endian 1.0" not in lines:
        raise PlyFormatError(f"{path}: only binary little-endian 1.0 PLY is supported")
    count = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    for line in lines:
        if line.startswith("element "):
            parts = line.split()
            in_vertex = len(parts) == 3 and parts[1] == "vertex"
            if in_vertex:
                if not re.fullmatch(r"\d+", parts[2]):
                    raise PlyFormatError(f"{path}: bad vertex count {parts[2]!r}")
                count = int(parts[2])
        elif line.startswith("property ") and in_vertex:
            parts = line.split()
            if len(parts) != 3:
                raise PlyFormatError(f"{path}: unsupported property line {line!r}")
            props.append((parts[1], parts[2]))
    if count is None:
        raise PlyFormatError(f"{path}: no vertex element in header")
    return count, props, offset


_TYPE_MAP = {"float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8",
             "uchar": "u1", "uint8": "u1", "int": "<i4", "int32": "<i4",
             "uint": "<u4", "uint32": "<u4", "short": "<i2", "ushort": "<u2"}


def load_ply(path: str | Path) -> GaussianCloud:
    """Load a Gaussian cloud; extra vertex properties (e.g. normals) are ignored.

    Stored float32 values are preserved exactly (quaternions are kept as
    written and only normalized when used in computations).
    """
    path = Path(path)
    raw = path.read_bytes()
    count, props, offset = _parse_header(raw, path)

    dtype = []
    for ptype, name in props:
        if ptype not in _TYPE_MAP:
            raise PlyFormatError(f"{path}: unsupported property type {ptype!r} for {name!r}")
        dtype.append((name, _TYPE_MAP[ptype]))
    dtype = np.dtype(dtype)
    need = count * dtype.itemsize
    if len(raw) - offset < need:
        raise PlyFormatError(f"{path}: truncated payload ({len(raw) - offset} < {need} bytes)")
    rows = np.frombuffer(raw, dtype=dtype, count=count, offset=offset)

    names = {name for _, name in props}
    rest_count = sum(1 for name in names if name.startswith("f_rest_"))
    if rest_count % 3 != 0:
        raise PlyFormatError(f"{path}: f_rest count {rest_count} is not divisible by 3")
    k = rest_count // 3 + 1
    degree = int(round(np.sqrt(k))) - 1
    if degree > MAX_DEGREE or num_coeffs(max(degree, 0)) != k:
        raise PlyFormatError(f"{path}: f_rest count {rest_count} does not match an SH degree <= {MAX_DEGREE}")

    for name in _property_names(degree):
        if name not in names:
            raise PlyFormatError(f"{path}: missing property {name!r}")

    def col(name: str) -> np.ndarray:
        a = np.asarray(rows[name], dtype=np.float64)
        if not np.all(np.isfinite(a)):
            raise PlyFormatError(f"{path}: non-finite values in property {name!r}")
        return a

    mu = np.stack([col("x"), col("y"), col("z")], axis=1)
    sh = np.empty((count, 3, k))
    for ch in range(3):
        sh[:, ch, 0] = col(f"f_dc_{ch}")
    m = k - 1
    for ch in range(3):
        for j in range(m):
            sh[:, ch, 1 + j] = col(f"f_rest_{ch * m + j}")
    opacity = col("opacity")
    log_scale = np.stack([col(f"scale_{i}") for i in range(3)], axis=1)
    rot = np.stack([col(f"rot_{i}") for i in range(4)], axis=1)
    norms = np.linalg.norm(rot, axis=1)
    if np.any(norms == 0.0):
        raise PlyFormatError(f"{path}: zero-norm quaternion in property 'rot_*'")
    # mainstream exports store unnormalized quaternions; bring them near unit
    # while keeping already-unit rows bit-exact for round trips
    off = np.abs(norms - 1.0) > 1e-3
    if np.any(off):
        rot = rot.copy()
        rot[off] /= norms[off, None]

    return GaussianCloud(mu=mu, rot=rot, log_scale=log_scale, opacity_logit=opacity,
                         sh=sh, sh_degree=degree, frame_label=path.stem)
