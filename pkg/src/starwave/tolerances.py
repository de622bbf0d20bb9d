"""Default numerical tolerances, overridable from the command line."""

DEFAULT_TOL = {
    # relative tolerance for algebraic identities
    "identity": 1e-9,
    # absolute tolerance for continuity and Robin membership
    "domain": 1e-8,
    # relative tolerance for Jordan chain residuals
    "chain": 1e-10,
    # relative agreement between finite elements and the closed form
    "fem": 1e-3,
    # a-posteriori residual accepted before refusing a mesh
    "mesh": 0.5,
    # pointwise wave-equation residual
    "pde": 1e-10,
}
