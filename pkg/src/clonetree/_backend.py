"""Select the compiled kernels when importable, else the pure-Python mirror.

Set ``CLONETREE_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

logger = logging.getLogger(__name__)

if os.environ.get("CLONETREE_PURE_PYTHON") == "1":
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        logger.debug("compiled kernels unavailable; using pure Python")
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND
LikelihoodTable = kernels.LikelihoodTable
