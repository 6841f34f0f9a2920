"""Hot kernels, compiled when available.

``conv`` and ``quant`` resolve to the Cython modules when they were built and
to the numpy references otherwise. Set ``SUBBITSNN_PURE_PYTHON=1`` to force the
references. Both backends produce identical results; ``tests/test_kernels.py``
holds them to that.
"""

import importlib
import os

_FORCE_PURE = os.environ.get("SUBBITSNN_PURE_PYTHON", "") not in ("", "0")


def _load(name: str):
    if not _FORCE_PURE:
        try:
            return importlib.import_module(f"{__name__}._{name}_ext"), "cython"
        except ImportError:
            pass
    return importlib.import_module(f"{__name__}._{name}_py"), "python"


def compiled_available(name: str) -> bool:
    try:
        importlib.import_module(f"{__name__}._{name}_ext")
    except ImportError:
        return False
    return True


def set_num_threads(n: int) -> None:
    """Cap OpenMP workers used by the compiled kernels (no-op for numpy)."""
    for mod in (conv, quant):
        if hasattr(mod, "set_num_threads"):
            mod.set_num_threads(int(n))


conv, CONV_BACKEND = _load("conv")
quant, QUANT_BACKEND = _load("quant")

if os.environ.get("S2NN_THREADS"):
    set_num_threads(int(os.environ["S2NN_THREADS"]))
