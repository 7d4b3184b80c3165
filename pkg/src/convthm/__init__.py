"""Convolution theorem for regular estimators, checked numerically.

Modules:

- ``dist``: measures on lattices and atoms, convolution, transforms,
  inversion and deconvolution
- ``stats``: seeded parallel streams and empirical diagnostics
- ``lan``: locally asymptotically normal models and their checks
- ``conv``: estimators, regularity, convolution factors, kernels
- ``gshift``: Brownian motion with drift and path estimators
- ``extremes``: uniform endpoints and a shifted Gamma process
- ``nonuniq``: distinct laws with equal band-limited convolutions
- ``cli``: scenario runner
"""

from .dist import (AtomicMeasure, CharFn, GridMeasure, ProductGridMeasure, convolve,
                   deconvolve, distance_ks, distance_tv, to_charfn)
from .report import Check, Report
from .stats import RngSpec, SampleSet

__version__ = "0.1.0"

__all__ = ["AtomicMeasure", "CharFn", "GridMeasure", "ProductGridMeasure", "convolve",
           "deconvolve", "distance_ks", "distance_tv", "to_charfn", "Check", "Report",
           "RngSpec", "SampleSet"]
