"""Constrained boundary control of monostable and bistable reaction-diffusion equations."""
from .reaction import Nonlinearity, classify, eval_F, eval_f, energy, region_halfwidth

__all__ = ["Nonlinearity", "classify", "eval_F", "eval_f", "energy", "region_halfwidth"]
