"""Backend selection for the per-step kernels.

The compiled extension is used when it was built; set
``DRONEPATROL_KERNELS=python`` to force the pure-Python fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DRONEPATROL_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        pass

step_idleness = _impl.step_idleness
neighborhood_sums = _impl.neighborhood_sums
build_states = _impl.build_states
joint_exhaustive = _impl.joint_exhaustive

__all__ = ["BACKEND", "step_idleness", "neighborhood_sums", "build_states", "joint_exhaustive"]
