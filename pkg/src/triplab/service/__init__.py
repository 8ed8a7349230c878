"""Annotation service: durable task store plus its HTTP app."""

from .app import create_app
from .store import (
    AlreadyAnsweredError,
    DealtQuery,
    DuplicateTaskError,
    LeaseConflictError,
    SubmitResult,
    TaskStore,
    UnknownAssetError,
    UnknownQueryError,
    UnknownTaskError,
    CHOICE_TO_W,
    GRACE_SECONDS,
)

__all__ = [
    "create_app",
    "TaskStore",
    "DealtQuery",
    "SubmitResult",
    "AlreadyAnsweredError",
    "DuplicateTaskError",
    "LeaseConflictError",
    "UnknownAssetError",
    "UnknownQueryError",
    "UnknownTaskError",
    "CHOICE_TO_W",
    "GRACE_SECONDS",
]
