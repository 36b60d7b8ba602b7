"""Expanding curvature flows of star-shaped hypersurfaces in real, complex and quaternionic hyperbolic space."""
__version__ = "0.1.0"

from .ambient import make_ambient
from .speeds import parse_speed, validate_speed
from .geometry import RadialProfile, geometry_slice
from .flow import StepControl, run, geodesic_sphere_ode
from .trajectory import load, save
