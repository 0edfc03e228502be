"""Simulated ledger: core store, HTTP service, and client shims."""

from .client import HttpClient, InProcessClient, LedgerClient
from .core import InstanceMeta, Ledger, LedgerError, LedgerRecord
from .service import create_app

__all__ = [
    "HttpClient",
    "InProcessClient",
    "InstanceMeta",
    "Ledger",
    "LedgerClient",
    "LedgerError",
    "LedgerRecord",
    "create_app",
]
