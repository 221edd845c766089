"""Adversarial restoration of anisotropic EM volumes on a small numpy autodiff engine.

Subpackages by layer: ``tensor``/``conv`` (reverse-mode autodiff), ``optim``/
``losses``, ``volume`` (data model, sampling, VXV files), ``nets`` (the four
networks, VXCK checkpoints via ``checkpoint``), ``train``, ``phantom``,
``evaluate`` and the ``emgan`` command line in ``cli``.
"""

from .errors import EmganError
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["EmganError", "KERNEL_BACKEND", "__version__"]
