"""Modular FOM toolkit.

Module documents (:mod:`fomforge.document`), the object model
(:mod:`fomforge.model`), merging into a Current FOM (:mod:`fomforge.merge`)
and an in-process federation runtime (:mod:`fomforge.federation`).
"""

from .document import ModuleParseError, ParseDiagnostic, check_module, parse_module, serialize_module
from .federation import FederationError, Rti
from .merge import (
    CurrentFom,
    MergeRejection,
    MergeReport,
    check_extension_policy,
    classes_equivalent,
    diff_foms,
    initial_fom,
    merge_class_tree,
    merge_modules,
    merge_tables,
)
from .model import ModuleKind, ObjectModule, classify_module, default_mim, validate_module_closure

__all__ = [
    "CurrentFom",
    "FederationError",
    "MergeRejection",
    "MergeReport",
    "ModuleKind",
    "ModuleParseError",
    "ObjectModule",
    "ParseDiagnostic",
    "Rti",
    "check_extension_policy",
    "check_module",
    "classes_equivalent",
    "classify_module",
    "default_mim",
    "diff_foms",
    "initial_fom",
    "merge_class_tree",
    "merge_modules",
    "merge_tables",
    "parse_module",
    "serialize_module",
    "validate_module_closure",
]
