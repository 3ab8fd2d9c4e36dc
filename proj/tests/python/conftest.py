import os
import sys

# Build-tree layout: the extension lands in the CMake build directory and the
# pure package lives under python/.
for var in ("DAQUANT_EXT_DIR", "DAQUANT_PKG_DIR"):
    path = os.environ.get(var)
    if path and path not in sys.path:
        sys.path.insert(0, path)
