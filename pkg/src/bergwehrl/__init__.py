"""Numerical verification of sharp Wehrl-type and Faber-Krahn inequalities on weighted Bergman spaces of the unit ball."""

__version__ = "0.1.0"

from .bounds import (CheckReport, EuclideanAnnulus, GeodesicBall, Superlevel, check_entropy, check_faber_krahn,
                     check_mixture, check_pointwise, check_wehrl, closed_form_identities, wehrl_entropy)
from .extremize import ExtremalReport, SaaProblem, coherence_diagnostic, saa_maximize
from .geometry import BallSpec, Point, mobius
from .probes import ConvexProbe
from .quadrature import (Estimate, McConfig, draw_samples, entropy_lower_bound, j_prime, j_second, j_value,
                         theorem_a_rhs)
from .rearrange import LevelProfile, li_su_diagnostic, mu, superlevel_integral, u_star
from .space import (CoherentState, MixedState, PolyFunction, SpaceParams, gram_schmidt, husimi, inner_product,
                    random_mixed, random_poly)

__all__ = [
    "BallSpec", "CheckReport", "CoherentState", "ConvexProbe", "Estimate", "EuclideanAnnulus", "ExtremalReport",
    "GeodesicBall", "LevelProfile", "McConfig", "MixedState", "Point", "PolyFunction", "SaaProblem", "SpaceParams",
    "Superlevel", "check_entropy", "check_faber_krahn", "check_mixture", "check_pointwise", "check_wehrl",
    "closed_form_identities", "coherence_diagnostic", "draw_samples", "entropy_lower_bound", "gram_schmidt",
    "husimi", "inner_product", "j_prime", "j_second", "j_value", "li_su_diagnostic", "mobius", "mu",
    "random_mixed", "random_poly", "saa_maximize", "superlevel_integral", "theorem_a_rhs", "u_star", "wehrl_entropy",
]
