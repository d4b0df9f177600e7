"""fresco-forge: fragment-dataset synthesis and evaluation toolkit."""

__version__ = "0.1.0"

from .dataset import (  # noqa: F401
    AreaStats,
    FragmentRecord,
    StyleLabel,
    area_statistics,
    assign_splits,
    build_manifest,
    read_manifest,
    write_manifest,
)
from .fragmenters import (  # noqa: F401
    Fragment,
    FragmentationConfig,
    FragmentationMethod,
    FragmentSet,
    fragment_crossing_cuts,
    fragment_eroded_voronoi,
    fragment_image,
    fragment_nonconvex_partition,
    fragment_square_grid,
)
from .geometry import (  # noqa: F401
    Point2,
    Polygon,
    Triangulation,
    delaunay_triangulate,
    is_convex,
    merge_polygons,
    polygon_area,
    random_convex_polygon,
    split_polygon_by_line,
    voronoi_labels,
)
from .metrics import (  # noqa: F401
    ConfusionCounts,
    MetricsReport,
    confusion_counts,
    f1_from_pr,
    macro_precision,
    macro_recall,
    metrics_report,
    overall_accuracy,
    recall_from_precision_f1,
)
from .raster import (  # noqa: F401
    FragmentImage,
    RasterMask,
    erode_mask,
    extract_fragment,
    rasterize_polygon,
    rotate_fragment,
    smooth_mask,
)
