"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
implementation takes over. ``FUSION_FORGE_PURE=1`` forces the fallback.
Both backends expose ``dot_scores``, ``log_softmax``, ``divergence_terms``,
``loss_grad`` and ``refine`` with identical signatures.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels

COSINE = _pykernels.COSINE
MAXSIM = _pykernels.MAXSIM
KL_CONSENSUS = _pykernels.KL_CONSENSUS
JENSEN_SHANNON = _pykernels.JENSEN_SHANNON
KL_TARGET = _pykernels.KL_TARGET


def _load_compiled() -> ModuleType | None:
    if os.environ.get("FUSION_FORGE_PURE") == "1":
        return None
    try:
        from . import _ckernels
    except ImportError:
        return None
    return _ckernels


_compiled = _load_compiled()
backend: ModuleType = _compiled if _compiled is not None else _pykernels
BACKEND_NAME = "cython" if _compiled is not None else "numpy"


def available_backends() -> dict[str, ModuleType]:
    out = {"numpy": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out


dot_scores = backend.dot_scores
log_softmax = backend.log_softmax
divergence_terms = backend.divergence_terms
loss_grad = backend.loss_grad
refine = backend.refine
