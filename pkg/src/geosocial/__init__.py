"""Geo-social region discovery and inter-region communication analytics.

Pipeline: ingest located posts -> grid-tile mention network -> Louvain
communities -> vocabulary, flow and sentiment comparisons between the
discovered regions.
"""

__version__ = "0.1.0"

from .ingest import (  # noqa: F401
    DEFAULT_BBOX,
    DEFAULT_RESOLUTION,
    GridSpec,
    PostRecord,
    TileId,
    UserLocationMap,
    locate_users,
    parse_posts,
    tile_of,
)
from .network import (  # noqa: F401
    TileNetwork,
    UndirectedTileNetwork,
    build_mention_network,
    filter_tiles,
    network_stats,
    symmetrize,
)
from .community import (  # noqa: F401
    Partition,
    SweepRow,
    best_of_restarts,
    louvain,
    modularity,
    resolution_sweep,
)
