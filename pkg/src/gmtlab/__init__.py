"""Numerical laboratory for discrete measures, singular integrals and dyadic diagnostics."""

import os

__version__ = "0.1.0"

# GMTLAB_THREADS caps BLAS/OpenMP threads; it only takes effect before numpy is first imported
if os.environ.get("GMTLAB_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["GMTLAB_THREADS"])

from .measure import DiscreteMeasure, ball_mass, energy, load_measure, save_measure  # noqa: E402

__all__ = ["DiscreteMeasure", "ball_mass", "energy", "load_measure", "save_measure", "__version__"]
