from .main import ArchiveDataFrame, ingest_csv, load_archive

__all__ = ["ArchiveDataFrame", "ingest_csv", "load_archive"]
