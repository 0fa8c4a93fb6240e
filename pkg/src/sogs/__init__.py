"""Self-organizing Gaussian grids: PLAS sorting and splat-scene compression."""

from .bundle import BundleError, UnsupportedCodecError, compress, decompress
from .metrics import SortReport, attribute_psnr, bench_sort, vad
from .plas import SortConfig, blur_target, grid_distance, partition_blocks, sort_grid, sort_grid_report
from .ply_io import PlyParseError, read_ply, write_ply
from .quantization import AttributeQuant, contract, default_quant_spec, dequantize, expand, quantize
from .smoothness import SmoothnessParams, huber, smoothness_loss
from .splats import (GridLayout, GridStack, NormalizationSpec, SplatCloud, build_grid_layout,
                     cloud_from_stack, normalize_for_sorting, prune_to_grid, stack_from_cloud)

__version__ = "0.1.0"

__all__ = [
    "AttributeQuant", "BundleError", "GridLayout", "GridStack", "NormalizationSpec",
    "PlyParseError", "SmoothnessParams", "SortConfig", "SortReport", "SplatCloud",
    "UnsupportedCodecError", "attribute_psnr", "bench_sort", "blur_target",
    "build_grid_layout", "cloud_from_stack", "compress", "contract", "decompress",
    "default_quant_spec", "dequantize", "expand", "grid_distance", "huber",
    "normalize_for_sorting", "partition_blocks", "prune_to_grid", "quantize",
    "read_ply", "smoothness_loss", "sort_grid", "sort_grid_report",
    "stack_from_cloud", "vad", "write_ply",
]
