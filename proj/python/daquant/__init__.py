"""Dataset-quantized SGD: exact data-point codec and training simulator."""

try:
    from ._daquant import *  # noqa: F401,F403  (installed layout)
    from ._daquant import __doc__ as _doc
except ImportError:  # build-tree layout: extension next to the package
    from _daquant import *  # noqa: F401,F403
    from _daquant import __doc__ as _doc

__doc__ = _doc
__version__ = "0.1.0"
