"""Chiral Dirichlet energies on curved thin films.

Numerical library and CLI for perturbed Dirichlet energies on tubular
neighborhoods of curved surfaces: exact pull-back to the reference cylinder,
surface limit energies with the curvature-induced shape-anisotropy term,
manifold-constrained minimization, and a film-thickness sweep harness.
"""

import os

# Thread-count override must land before numpy/BLAS load anywhere in the
# package, which is why this module stays import-light.
_threads = os.environ.get("CHIRALFILM_THREADS")
if _threads:
    for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)
del os

__version__ = "0.1.0"
