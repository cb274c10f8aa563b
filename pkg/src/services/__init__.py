"""
Services Module
"""

from .report_processor import CSV_COLUMNS, SLOPE_COLUMNS, ReportProcessor

__all__ = ["CSV_COLUMNS", "SLOPE_COLUMNS", "ReportProcessor"]
