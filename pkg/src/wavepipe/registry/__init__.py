"""Versioned component registry with hierarchical workspaces."""

from .store import (
    ComponentRecord,
    DuplicateName,
    MalformedBody,
    NotFound,
    Registry,
    UnknownParent,
    UnknownWorkspace,
    Workspace,
)

__all__ = [
    "ComponentRecord",
    "DuplicateName",
    "MalformedBody",
    "NotFound",
    "Registry",
    "UnknownParent",
    "UnknownWorkspace",
    "Workspace",
]
