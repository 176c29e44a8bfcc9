"""Reference-free removal coherence metrics and evaluation protocols."""

from .config import RunConfig
from .features import BackendSpec, make_backend
from .rc_core import rc_s, rc_s_global, rc_t

__version__ = "0.1.0"

__all__ = [
    "RunConfig",
    "BackendSpec",
    "make_backend",
    "rc_s",
    "rc_s_global",
    "rc_t",
    "__version__",
]
