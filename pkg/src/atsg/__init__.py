"""Compile part detections from graphical assembly manuals into assembly task graphs."""

from .catalog import Catalog, PartType, compare_precedence, load_catalog, lookup_action
from .core import Atsg, HandPolicy, PartInstance, canonical_form, children_closure, validate
from .ingest import DetectionSeries, parse_manual
from .pipeline import BuildResult, compile_manual

__all__ = [
    "Atsg",
    "BuildResult",
    "Catalog",
    "DetectionSeries",
    "HandPolicy",
    "PartInstance",
    "PartType",
    "canonical_form",
    "children_closure",
    "compare_precedence",
    "compile_manual",
    "load_catalog",
    "lookup_action",
    "parse_manual",
    "validate",
]
