"""QoT estimation pipeline: network simulation, oracle labeling, graph encoding,
and a from-scratch graph-convolutional classifier."""

import glob as _glob
import os as _os

try:
    from ._core import *  # noqa: F401,F403
except ImportError:  # development tree: load the extension from the build dir
    _core_dir = _os.environ.get("QOTGNN_CORE_DIR")
    if _core_dir is None:
        raise
    import importlib.util as _ilu
    import sys as _sys

    _candidates = _glob.glob(_os.path.join(_core_dir, "_core*.so"))
    if not _candidates:
        raise ImportError(f"no _core extension found in {_core_dir}")
    _spec = _ilu.spec_from_file_location(__name__ + "._core", _candidates[0])
    _mod = _ilu.module_from_spec(_spec)
    _spec.loader.exec_module(_mod)
    _sys.modules[__name__ + "._core"] = _mod
    from ._core import *  # noqa: F401,F403

__version__ = "0.1.0"
