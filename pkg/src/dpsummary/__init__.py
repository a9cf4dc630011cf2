"""Differentially private, parsimonious data summarization across data owners."""

from ._numeric import backend
from .data import Dataset, DataError, OwnerSplit, load_csv, split_owners, two_gaussian_shift
from .kernel import KernelParams, mmd_sq, objective_j
from .protocol import ProtocolConfig, run_protocol

__all__ = [
    "Dataset", "DataError", "OwnerSplit", "load_csv", "split_owners", "two_gaussian_shift",
    "KernelParams", "mmd_sq", "objective_j", "ProtocolConfig", "run_protocol", "backend",
]
