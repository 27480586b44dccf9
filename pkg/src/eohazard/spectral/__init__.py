from .backends import (
    DRY,
    FLOOD,
    PERMANENT_WATER,
    BackendError,
    DelayedSegmenter,
    RemoteSegmenter,
    SegmenterBackend,
    ThresholdFireSegmenter,
    ThresholdFloodSegmenter,
)
from .config import ConfigError, ThresholdConfig
from .indices import (
    IndexKind,
    IndexRaster,
    bai,
    compute_bai,
    compute_mndwi,
    compute_nhi_swir,
    compute_nhi_swnir,
    normalized_difference,
)
from .masks import above, connected_components, mask_area_km2, water_mask
from .tiling import MergeError, TileWindow, TilingError, merge_tile_masks, tile_segment
from .tools import (
    ToolName,
    ToolResult,
    burned_area_masks,
    hotspot_mask,
    tool_burned_area,
    tool_index_fire,
    tool_ml_fire,
    tool_ml_flood,
)
