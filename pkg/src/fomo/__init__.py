"""First-order motion kernels for keypoint-driven image animation.

Sparse keypoint descriptors (position + 2x2 Jacobian) are combined through
an abstract reference frame into per-keypoint local affine motions, blended
into a dense backward flow, and applied by occlusion-weighted bilinear
warping. Thin plate splines supply known deformations for equivariance
checks, and synthetic scenes provide analytic ground truth.
"""

from .dense import (
    DenseFlow,
    HeatmapStack,
    MaskPolicyConfig,
    MaskStack,
    OcclusionMap,
    dense_flow,
    heatmaps,
    masks_from_file,
    occlusion_from_file_or_default,
    soft_masks,
    warp_source_by_keypoint,
)
from .equivariance import (
    EquivarianceReport,
    equivariance_jacobian,
    equivariance_position,
    evaluate_equivariance,
    ideal_equivariant_frame,
)
from .errors import (
    DimensionMismatchError,
    FileFormatError,
    FomoError,
    KeypointMismatchError,
    PyramidSpecError,
    SingularMatrixError,
    ValueRangeError,
)
from .geometry import (
    DEFAULT_KEYPOINT_COUNT,
    FrameDescriptor,
    KeypointDescriptor,
    LocalAffine,
    Mat2,
    Point2,
    frame_from_arrays,
    local_affine_compose,
    local_affine_eval,
    local_affine_invert,
    mat2_invert,
)
from .motion import (
    PairwiseLocalMotion,
    approx_flow_at,
    approx_flow_grid,
    pairwise_motion,
    relative_transfer,
)
from .raster import (
    FeatureMap,
    RasterImage,
    backwarp,
    bilinear_sample,
    coordinate_grid,
    load_png,
    pixel_centers,
    pyramid,
    pyramid_l1,
    save_png,
)
from .scenes import (
    AffineMap,
    SceneSpec,
    TpsMap,
    flow_error_profile,
    ideal_descriptors,
    keypoint_grid,
    render_pattern,
    rotation_map,
    scene_from_json_dict,
)
from .tps import (
    TpsSampleConfig,
    TpsTransform,
    tps_eval,
    tps_eval_grid,
    tps_jacobian,
    tps_jacobian_grid,
    tps_sample,
    tps_warp_image,
)
from .tracks import DescriptorTrack, load_frame, save_frame

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
