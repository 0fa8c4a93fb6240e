"""Bit-exact reader/writer for the de-facto 3DGS binary PLY layout."""

import numpy as np

from .splats import SplatCloud

_BASE = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
_TAIL = ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
_REST = [f"f_rest_{i}" for i in range(45)]

SCHEMA_NO_SH = _BASE + _TAIL
SCHEMA_SH3 = _BASE + _REST + _TAIL

_MAX_HEADER = 64 * 1024


class PlyParseError(ValueError):
    """Malformed PLY input; carries the byte offset where parsing failed."""

    def __init__(self, message, offset=0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


def _header(n, with_sh):
    props = SCHEMA_SH3 if with_sh else SCHEMA_NO_SH
    lines = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    lines += [f"property float {p}" for p in props]
    lines.append("end_header")
    return ("\n".join(lines) + "\n").encode("ascii")


def write_ply(cloud):
    """Serialize a cloud as binary little-endian PLY (normals written as zeros)."""
    n = cloud.n
    with_sh = cloud.sh_degree == 3
    records = np.empty((n, len(SCHEMA_SH3 if with_sh else SCHEMA_NO_SH)), dtype="<f4")
    records[:, 0:3] = cloud.positions
    records[:, 3:6] = 0.0
    records[:, 6:9] = cloud.sh_dc
    cursor = 9
    if with_sh:
        records[:, 9:54] = cloud.sh_rest
        cursor = 54
    records[:, cursor] = cloud.opacity_logit
    records[:, cursor + 1:cursor + 4] = cloud.scale_log
    records[:, cursor + 4:cursor + 8] = cloud.rotation
    return _header(n, with_sh) + records.tobytes()


def read_ply(data):
    """Parse a 3DGS PLY byte stream into a SplatCloud.

    Accepts only the binary little-endian layout written by write_ply (with
    or without the f_rest block). Normal values are ignored. NaN/Inf in any
    used field is rejected.
    """
    marker = b"end_header\n"
    end = data[:_MAX_HEADER].find(marker)
    if not data.startswith(b"ply\n"):
        raise PlyParseError("not a PLY file (missing 'ply' magic)", 0)
    if end < 0:
        raise PlyParseError("header end marker not found", len(data[:_MAX_HEADER]))
    body_start = end + len(marker)
    lines = data[:end].decode("ascii", errors="replace").split("\n")

    n = None
    props = []
    for line in lines[1:]:
        parts = line.split()
        if not parts or parts[0] == "comment":
            continue
        if parts[0] == "format":
            if parts[1:] != ["binary_little_endian", "1.0"]:
                raise PlyParseError(f"unsupported format {' '.join(parts[1:])!r}", 4)
        elif parts[0] == "element":
            if parts[1] != "vertex" or n is not None:
                raise PlyParseError(f"unexpected element {' '.join(parts[1:])!r}", 4)
            try:
                n = int(parts[2])
            except (IndexError, ValueError):
                raise PlyParseError("bad vertex count", 4) from None
        elif parts[0] == "property":
            if len(parts) != 3 or parts[1] != "float":
                raise PlyParseError(f"unsupported property {line!r}", 4)
            props.append(parts[2])
        else:
            raise PlyParseError(f"unexpected header line {line!r}", 4)
    if n is None or n < 1:
        raise PlyParseError("missing or empty vertex element", 4)
    if props == SCHEMA_SH3:
        with_sh = True
    elif props == SCHEMA_NO_SH:
        with_sh = False
    else:
        unknown = [p for p in props if p not in SCHEMA_SH3]
        detail = f"unknown property {unknown[0]!r}" if unknown else "property order mismatch"
        raise PlyParseError(f"schema mismatch: {detail}", 4)

    width = len(props)
    expected = n * width * 4
    payload = data[body_start:]
    if len(payload) < expected:
        raise PlyParseError(
            f"truncated payload: expected {expected} bytes, found {len(payload)}",
            body_start + len(payload))
    if len(payload) > expected:
        raise PlyParseError("trailing bytes after vertex data", body_start + expected)
    records = np.frombuffer(payload, dtype="<f4").reshape(n, width)

    used = np.delete(records, [3, 4, 5], axis=1)  # drop normals
    if not np.all(np.isfinite(used)):
        bad_row = int(np.argwhere(~np.isfinite(used))[0][0])
        raise PlyParseError("NaN/Inf in vertex data", body_start + bad_row * width * 4)

    cursor = 54 if with_sh else 9
    return SplatCloud(
        positions=records[:, 0:3],
        sh_dc=records[:, 6:9],
        sh_rest=records[:, 9:54] if with_sh else np.zeros((n, 0)),
        opacity_logit=records[:, cursor],
        scale_log=records[:, cursor + 1:cursor + 4],
        rotation=records[:, cursor + 4:cursor + 8],
    )
