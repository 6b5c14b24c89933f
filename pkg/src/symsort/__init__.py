"""Symbol-comparison cost laws for QuickSort over probabilistic sources."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DepthCapExceeded,
    FrontierOverflow,
    InsufficientSamples,
    InvalidSpec,
    TailBoundUnavailable,
)
from .sources import (  # noqa: E402
    IntermittentSpec,
    Key,
    MarkovSpec,
    MemorylessSpec,
    enumerate_prefixes,
    load_source,
    make_source,
)

__all__ = [
    "DepthCapExceeded",
    "FrontierOverflow",
    "InsufficientSamples",
    "IntermittentSpec",
    "InvalidSpec",
    "Key",
    "MarkovSpec",
    "MemorylessSpec",
    "TailBoundUnavailable",
    "__version__",
    "enumerate_prefixes",
    "load_source",
    "make_source",
]
