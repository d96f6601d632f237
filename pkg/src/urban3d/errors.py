"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, input/output problems with 3, and model failures with 4.
"""

from __future__ import annotations


class Urban3dError(Exception):
    """Base class for all package errors."""


class ConfigError(Urban3dError):
    """Invalid configuration value or flag combination."""


class GeometryError(Urban3dError):
    """Degenerate or inconsistent geometric input."""


class MeshNotWatertightError(GeometryError):
    """Mesh has boundary edges; carries the offending edges."""

    def __init__(self, open_edges: list[tuple[int, int]]):
        self.open_edges = open_edges
        shown = ", ".join(f"{a}-{b}" for a, b in open_edges[:8])
        more = "" if len(open_edges) <= 8 else f" (+{len(open_edges) - 8} more)"
        super().__init__(
            f"mesh is not watertight: {len(open_edges)} open edge(s): {shown}{more}"
        )


class FormatError(Urban3dError):
    """Malformed input file (bad schema, bad field, bad ordering)."""


class ModelError(Urban3dError):
    """A model fit or prediction failed."""
