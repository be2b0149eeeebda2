"""Detection probabilities for absorbing-boundary-condition screens versus
scattering theory, with closed-form 1D/2D Gaussian solutions and an
independent finite-difference oracle."""

__version__ = "0.1.0"
