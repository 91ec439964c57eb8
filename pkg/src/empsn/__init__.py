"""E(n) equivariant message passing on simplicial complexes lifted from point clouds."""
from .complex import (SimplicialComplex, build_adjacency, clique_lift, fully_connected, radius_graph,
                      vietoris_rips)
from .geometry import RigidMotion, apply_motion, dihedral_angle, distance, simplex_volume
from .model import EmpsnConfig, EmpsnModel

__version__ = "0.1.0"

__all__ = [
    "EmpsnConfig", "EmpsnModel", "RigidMotion", "SimplicialComplex", "apply_motion",
    "build_adjacency", "clique_lift", "dihedral_angle", "distance", "fully_connected",
    "radius_graph", "simplex_volume", "vietoris_rips",
]
