"""Self-describing compressed bundle: manifest + per-attribute plane images.

A bundle is a stored (uncompressed) ZIP holding ``manifest.json`` and one
encoded image per attribute plane group. Quantized indices are written
directly as pixel values, so a lossless codec makes the half-step error
bound of the quantizer exact end to end.
"""

import io
import json
import zipfile

import cv2
import numpy as np

from . import plas
from .quantization import contract, default_quant_spec, dequantize, expand, quantize
from .splats import (ATTRIBUTES, SplatCloud, build_grid_layout, normalize_for_sorting,
                     prune_to_grid)

FORMAT_VERSION = "sogs/1"
MANIFEST_NAME = "manifest.json"

# Channel layout of the encoded images, per attribute: (channels per image,
# number of images). Multi-image attributes slice their channels in order.
PLANE_GROUPS = {
    "position": (3, 1),
    "sh_dc": (3, 1),
    "opacity": (1, 1),
    "scale": (3, 1),
    "rotation": (1, 4),
    "sh_rest": (3, 15),
}


class BundleError(Exception):
    """Bundle cannot be decoded (corrupt, truncated, or inconsistent)."""


class UnsupportedCodecError(BundleError):
    """The requested codec tag or capability is not available."""


class PngCodec:
    """Lossless PNG backing (8- and 16-bit, 1 or 3 channels)."""

    tag = "png"
    extension = "png"
    lossless = True
    bit_depths = (8, 16)
    channels = (1, 3)

    def encode(self, plane):
        ok, buf = cv2.imencode(".png", plane)
        if not ok:
            raise BundleError("PNG encoding failed")
        return buf.tobytes()

    def decode(self, data):
        image = cv2.imdecode(np.frombuffer(data, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
        if image is None:
            raise BundleError("PNG decoding failed")
        return image


CODECS = {"png": PngCodec()}


def get_codec(tag):
    try:
        return CODECS[tag]
    except KeyError:
        raise UnsupportedCodecError(
            f"codec {tag!r} is not available (have: {sorted(CODECS)})") from None


def encode_plane(plane, bit_depth, codec_tag="png"):
    """Encode one integer plane ((H, W) or (H, W, 3)) at the given bit depth."""
    codec = get_codec(codec_tag)
    if bit_depth not in codec.bit_depths:
        raise UnsupportedCodecError(f"codec {codec_tag!r} lacks {bit_depth}-bit support")
    channels = 1 if plane.ndim == 2 else plane.shape[2]
    if channels not in codec.channels:
        raise UnsupportedCodecError(f"codec {codec_tag!r} lacks {channels}-channel support")
    if plane.size and (plane.min() < 0 or plane.max() >= 2 ** bit_depth):
        raise ValueError(f"plane values do not fit {bit_depth} bits")
    dtype = np.uint16 if bit_depth == 16 else np.uint8
    return codec.encode(np.ascontiguousarray(plane, dtype=dtype))


def decode_plane(data, codec_tag="png"):
    """Decode plane bytes back to an integer array."""
    return get_codec(codec_tag).decode(data)


def _plane_names(name, count, extension):
    if count == 1:
        return [f"{name}.{extension}"]
    return [f"{name}_{i}.{extension}" for i in range(count)]


def _quantize_attribute(values, spec):
    """Per-channel quantization; returns (indices, per-channel lo/hi lists)."""
    channels = values.shape[1]
    if spec.data_driven:
        lo = values.min(axis=0)
        hi = values.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)  # constant channel: exact at index 0
    else:
        lo = np.full(channels, spec.clip_min)
        hi = np.full(channels, spec.clip_max)
    indices = np.empty(values.shape, dtype=np.int64)
    for c in range(channels):
        indices[:, c] = quantize(values[:, c], lo[c], hi[c], spec.levels)
    return indices, lo.tolist(), hi.tolist()


def compress(cloud, sort_config=None, quant=None, threads=1, sort=True):
    """Compress a cloud into bundle bytes.

    Pipeline: fit the largest square grid (pruning lowest-opacity extras),
    sort the normalized activated attributes into the grid, then quantize
    the un-activated attributes (positions contracted) per plane and encode
    each plane group. With ``sort=False`` the grid order is the seeded
    random permutation instead (same quantization and codecs).
    """
    if cloud.n < 4:
        raise ValueError("need at least 4 Gaussians to compress")
    config = sort_config or plas.SortConfig()
    quant = dict(default_quant_spec(), **(quant or {}))

    layout = build_grid_layout(cloud.n)
    pruned = prune_to_grid(cloud, layout)
    if sort:
        features, _ = normalize_for_sorting(pruned, config.weights)
        perm = plas.sort_grid(features, config, threads=threads)
    else:
        rng = np.random.Generator(np.random.Philox(config.rng_seed))
        perm = rng.permutation(layout.cells)

    side = layout.side
    manifest = {
        "format": FORMAT_VERSION,
        "side": side,
        "count": layout.cells,
        "sh_degree": pruned.sh_degree,
        "sort": {
            "enabled": bool(sort),
            "seed": int(config.rng_seed),
            "improvement_threshold": config.improvement_threshold,
            "radius_decay": config.radius_decay,
            "min_block_size": config.min_block_size,
            "weights": config.weights,
        },
        "attributes": {},
    }

    files = []
    for name in ATTRIBUTES:
        values = pruned.attribute(name)[perm]
        if values.shape[1] == 0:
            continue
        if name == "position":
            values = contract(values)
        spec = quant[name]
        codec = get_codec(spec.codec)
        indices, lo, hi = _quantize_attribute(values, spec)

        per_image, image_count = PLANE_GROUPS[name]
        needed = values.shape[1] // per_image
        names = _plane_names(name, image_count, codec.extension)[:needed]
        for i, filename in enumerate(names):
            block = indices[:, i * per_image:(i + 1) * per_image]
            plane = block.reshape(side, side, per_image)
            if per_image == 1:
                plane = plane.reshape(side, side)
            files.append((filename, encode_plane(plane, spec.bit_depth, spec.codec)))

        manifest["attributes"][name] = {
            "levels": spec.levels,
            "space": spec.space,
            "min": lo,
            "max": hi,
            "channels": values.shape[1],
            "codec": spec.codec,
            "bit_depth": spec.bit_depth,
            "planes": names,
        }

    payload = io.BytesIO()
    with zipfile.ZipFile(payload, "w", compression=zipfile.ZIP_STORED) as archive:
        entries = [(MANIFEST_NAME, json.dumps(manifest, sort_keys=True, indent=1).encode())]
        entries += sorted(files)
        for filename, data in entries:
            info = zipfile.ZipInfo(filename, date_time=(1980, 1, 1, 0, 0, 0))
            archive.writestr(info, data)
    return payload.getvalue()


def read_manifest(data):
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as archive:
            manifest = json.loads(archive.read(MANIFEST_NAME))
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, OSError) as exc:
        raise BundleError(f"unreadable bundle: {exc}") from exc
    if manifest.get("format") != FORMAT_VERSION:
        raise BundleError(f"unsupported bundle format {manifest.get('format')!r}")
    return manifest


def decompress(data):
    """Decode a bundle back into a SplatCloud (row-major grid order)."""
    manifest = read_manifest(data)
    side = int(manifest["side"])
    cells = side * side
    sh_degree = int(manifest["sh_degree"])

    try:
        with zipfile.ZipFile(io.BytesIO(data)) as archive:
            blobs = {n: archive.read(n) for n in archive.namelist() if n != MANIFEST_NAME}
    except (zipfile.BadZipFile, OSError) as exc:
        raise BundleError(f"unreadable bundle: {exc}") from exc

    recovered = {}
    for name in ATTRIBUTES:
        entry = manifest["attributes"].get(name)
        if entry is None:
            if name == "sh_rest" and sh_degree == 0:
                recovered[name] = np.zeros((cells, 0))
                continue
            raise BundleError(f"manifest missing attribute {name!r}")
        channels = int(entry["channels"])
        lo, hi = entry["min"], entry["max"]
        if len(lo) != channels or len(hi) != channels:
            raise BundleError(f"attribute {name!r}: min/max length mismatch")

        columns = []
        for filename in entry["planes"]:
            if filename not in blobs:
                raise BundleError(f"plane {filename!r} missing from bundle")
            try:
                plane = decode_plane(blobs[filename], entry["codec"])
            except BundleError as exc:
                raise BundleError(f"plane {filename!r}: {exc}") from exc
            if plane.ndim == 2:
                plane = plane[..., None]
            if plane.shape[:2] != (side, side):
                raise BundleError(
                    f"plane {filename!r}: decoded size {plane.shape[:2]}, expected {(side, side)}")
            columns.append(plane.reshape(cells, -1))
        stacked = np.concatenate(columns, axis=1) if columns else np.zeros((cells, 0))
        if stacked.shape[1] != channels:
            raise BundleError(
                f"attribute {name!r}: {stacked.shape[1]} decoded channels, expected {channels}")

        values = np.empty((cells, channels))
        levels = int(entry["levels"])
        for c in range(channels):
            if stacked[:, c].max(initial=0) > levels - 1:
                raise BundleError(f"attribute {name!r}: index exceeds {levels} levels")
            values[:, c] = dequantize(stacked[:, c], float(lo[c]), float(hi[c]), levels)
        if name == "position":
            values = expand(values)
        recovered[name] = values

    return SplatCloud(
        positions=recovered["position"],
        sh_dc=recovered["sh_dc"],
        sh_rest=recovered["sh_rest"],
        opacity_logit=recovered["opacity"].reshape(-1),
        scale_log=recovered["scale"],
        rotation=recovered["rotation"],
    )
