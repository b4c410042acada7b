"""Kernel regression on curves with large-deviation rate functions.

The package is organized in five layers:

- ``funcdata``: curves on shared uniform grids, semi-metrics, kernels.
- ``estimator``: the index-weighted kernel regression estimator and its
  normalized component sums.
- ``ratefn``: limiting scaled log-MGF, Legendre conjugates, tilted means,
  ratio rates and two-sided deviation rates.
- ``simulate``: the linear factor curve model, small-ball probes,
  bandwidth schedules and Monte-Carlo rare-event ladders.
- ``covering``: curve-class samples, greedy covering numbers and entropy
  diagnostics.
"""

__version__ = "0.1.0"
