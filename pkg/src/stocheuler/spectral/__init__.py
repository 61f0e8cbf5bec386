"""Lattice, basis, spectral fields and exact spectral calculus on the torus."""

from stocheuler.spectral.field import (
    FourierField,
    VectorField,
    biot_savart,
    curl,
    divergence,
    gradient,
    hessian_norm,
    laplacian,
    project,
    sigma_field,
    sobolev_norm,
    stream_function,
)
from stocheuler.spectral.grid import (
    GridOps,
    advect_field,
    from_grid,
    grid_ops,
    grid_points,
    grid_size,
    product_truncated,
    to_grid,
)
from stocheuler.spectral.lattice import basis_eval, in_upper_half, modes_up_to, perp
from stocheuler.spectral.snapshot import read_snapshot, write_snapshot

__all__ = [
    "FourierField",
    "GridOps",
    "VectorField",
    "advect_field",
    "basis_eval",
    "biot_savart",
    "curl",
    "divergence",
    "from_grid",
    "gradient",
    "grid_ops",
    "grid_points",
    "grid_size",
    "hessian_norm",
    "in_upper_half",
    "laplacian",
    "modes_up_to",
    "perp",
    "product_truncated",
    "project",
    "read_snapshot",
    "sigma_field",
    "sobolev_norm",
    "stream_function",
    "to_grid",
    "write_snapshot",
]
