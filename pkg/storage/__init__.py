"""Storage layer for benchmark results."""

from .database import Database
from .models import BenchmarkRecord, BenchmarkRun

__all__ = ['Database', 'BenchmarkRecord', 'BenchmarkRun']
