import jax

# phase bookkeeping needs float64 / complex128
jax.config.update("jax_enable_x64", True)

from . import geometry
from . import interp
from . import abstract
from . import echo_sim
from . import pfa
from . import error_model
from . import metrics
from . import autofocus
from . import refocus
from . import io
