"""Garment-tag fabric attributes to cloth-simulator physics parameters.

Modules
-------
tagparse   controlled-vocabulary parsing of composition, family and structure
dataset    tag-to-physics records, features and stratified splits
retrieval  hierarchical density/thickness retrieval
forest     multi-output MAE random forests and randomized search
physmap    full parameter prediction with bounds and provenance
metrics    attribute, scalar and geometry metrics
clothsim   mass-spring cloth simulator
"""
__version__ = "0.1.0"

from .errors import TagPhysError  # noqa: E402
from .params import PhysicsParams  # noqa: E402
from .tagparse import FabricAttributes, FiberComposition, parse_tag  # noqa: E402

__all__ = ["__version__", "TagPhysError", "PhysicsParams", "FabricAttributes", "FiberComposition", "parse_tag"]
