"""Python bindings for the constraint-reasoning kernel.

The heavy lifting lives in the compiled ``_core`` extension; this package is
a thin re-export so ``import uckdsp`` works both from an installed wheel and
from an in-tree CMake build with the extension on ``PYTHONPATH``.
"""

try:
    from ._core import *  # noqa: F401,F403
    from ._core import __doc__ as _core_doc
except ImportError:  # in-tree build: extension sits next to the package
    from _core import *  # noqa: F401,F403
    from _core import __doc__ as _core_doc

__doc__ = _core_doc
__version__ = "1.0.0"
