"""Export Adapters - Concrete implementations of ArtifactWriterPort."""

from .file_writer import FileArtifactWriter, encode_pgm

__all__ = [
    "FileArtifactWriter",
    "encode_pgm",
]
