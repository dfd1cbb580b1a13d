"""Backend selection for the hot kernels.

The compiled extension is preferred; ``NET_SENTINEL_PURE=1`` forces the
pure-Python fallback (used by the benchmark and the parity tests).
"""

import os

from . import _pykernels

BACKEND = "python"
dissect_frame = _pykernels.dissect_frame
smo_solve = _pykernels.smo_solve

if os.environ.get("NET_SENTINEL_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        dissect_frame = _ckernels.dissect_frame
        smo_solve = _ckernels.smo_solve

ARP, IP, IPV6, TCP, UDP = _pykernels.ARP, _pykernels.IP, _pykernels.IPV6, _pykernels.TCP, _pykernels.UDP
