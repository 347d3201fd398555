"""Pinned-revision text encoder producing EMB1 embedding files."""

__version__ = "0.1.0"

from .emb1 import write_emb1
from .encoder import (
    AdapterError,
    EmptyTextError,
    EncoderSpec,
    ModelUnavailableError,
    UnpinnedModelError,
    embed_file,
    local_revision,
)
