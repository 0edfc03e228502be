"""Confidential BPMN collaboration orchestration over a commitment ledger."""

__version__ = "0.1.0"
