"""Verification suites.  Submodules are imported on demand to keep import cycles out."""
from .report import VerificationReport

__all__ = ["VerificationReport"]
