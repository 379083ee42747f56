"""Kernel backend selection.

The compiled core is preferred when importable; set ``NEGSAMP_BACKEND=python``
or ``NEGSAMP_BACKEND=c`` to force a choice.  Both backends implement the same
four functions with identical contracts (agreement is tested to tight
tolerances but is not bitwise, since summation orders differ).
"""

from __future__ import annotations

import os

from .errors import ConfigError

_requested = os.environ.get("NEGSAMP_BACKEND", "").strip().lower()

if _requested in ("", "c", "compiled"):
    try:
        from . import _core as _impl
    except ImportError:
        if _requested:
            raise ConfigError(
                "NEGSAMP_BACKEND requested the compiled backend but negsamp._core "
                "is not built; reinstall with a C compiler or unset the variable"
            ) from None
        from . import _kernels_py as _impl
elif _requested == "python":
    from . import _kernels_py as _impl
else:
    raise ConfigError(f"unknown NEGSAMP_BACKEND value {_requested!r}; use 'c' or 'python'")

BACKEND = _impl.NAME

sigmoid = _impl.sigmoid
log1pexp = _impl.log1pexp
logistic_obj_grad_hess = _impl.logistic_obj_grad_hess
weighted_gram = _impl.weighted_gram
