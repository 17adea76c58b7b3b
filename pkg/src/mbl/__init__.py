"""Moving-mesh solver and travelling-wave analysis for the MBL equation."""

from .errors import (AnalysisError, ConfigError, DomainError, IntegrationError, MBLError,
                     MeshError, SingularityError)
from .model import (BrooksCoreyModel, GravityModel, ModelSpec, SymmetricModel, Variant,
                    boundary_saturation)

__version__ = "0.1.0"
