"""Laminate metamaterial dispersion, homogenization, and interface scattering."""

from lamwave import finescale, homsolve, laminate, nonlocal_limit, ratfit

__all__ = ["laminate", "finescale", "ratfit", "homsolve", "nonlocal_limit"]
__version__ = "0.1.0"
