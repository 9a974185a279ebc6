"""Dual-space (Euclidean + Lorentz hyperbolic) representation learning for
weakly supervised violence detection, at desk scale.

Subpackages and modules:

- ``manifold``: exact hyperboloid geometry (inner product, exp/log, distance, lift)
- ``tensor_diff``: a small reverse-mode autodiff engine with Adam
- ``hypernn``: hyperbolic linear layer and Lorentzian classifier
- ``graphs``: semantic/temporal graphs, Dirichlet energy, LSHAD, aggregation
- ``dsi``: cross-space attention and fusion
- ``pipeline``: model assembly, MIL training, evaluation, checkpoints
- ``data_eval``: synthetic data, feature files, AP / ROC-AUC
- ``cli``: the ``dsrl`` command
"""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
