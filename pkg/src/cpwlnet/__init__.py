"""Exact ReLU network compilation and verification for CPwL functions on [0, 1]."""

from .compiler import CapacityError, compile_deep, compile_two_layer, deepen
from .cpwl import CpwlFunction, DomainError, Grid, eval_cpwl, interpolate, nodal_basis, sup_distance
from .network import AffineLayer, Architecture, ReluNetwork, eval_net, param_count, shatter_count
from .regions import BACKEND, to_cpwl

__all__ = [
    "AffineLayer",
    "Architecture",
    "BACKEND",
    "CapacityError",
    "CpwlFunction",
    "DomainError",
    "Grid",
    "ReluNetwork",
    "compile_deep",
    "compile_two_layer",
    "deepen",
    "eval_cpwl",
    "eval_net",
    "interpolate",
    "nodal_basis",
    "param_count",
    "shatter_count",
    "sup_distance",
    "to_cpwl",
]
