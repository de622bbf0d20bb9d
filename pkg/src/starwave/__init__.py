"""Wave equation on a star graph with Dirac damping at the vertex, in closed form."""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .graphfun import (  # noqa: E402
    EdgeFunction,
    ExpPolyTerm,
    GraphFunction,
    StarGraph,
    StatePair,
    check_domain,
    energy_inner,
    energy_norm,
    form_pairing,
    in_domain,
    l2_inner,
    l2_norm,
    robin_residual,
)
from .resolvent import apply_generator, resolvent_apply, resolvent_apply_left, resolvent_residual  # noqa: E402
from .spectra import (  # noqa: E402
    c0_constant,
    eig_chain,
    pseudospectrum_scan,
    quasimode_axis,
    quasimode_eta,
    resolvent_norm_lower,
)
from .evolve import critical_family, energy, make_problem, solution_at  # noqa: E402
from .approx import DampingProfile, MeshProblem, convergence_study, fem_resolvent_apply  # noqa: E402
