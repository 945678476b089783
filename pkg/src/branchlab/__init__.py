"""Finite-level computations for self-similar p-groups acting on rooted trees."""

__version__ = "0.1.0"

from branchlab.kernels import BACKEND  # noqa: E402
from branchlab.permgroup import PermGroup, SubgroupHandle  # noqa: E402
from branchlab.selfsim import (  # noqa: E402
    SelfSimilarGroup,
    Vertex,
    builtin_group,
    distinguished_subgroup,
    level_quotient,
    parse_group_def,
)

__all__ = [
    "BACKEND",
    "PermGroup",
    "SelfSimilarGroup",
    "SubgroupHandle",
    "Vertex",
    "builtin_group",
    "distinguished_subgroup",
    "level_quotient",
    "parse_group_def",
    "__version__",
]
