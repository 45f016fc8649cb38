"""climagen: climate data characterization, model fitting, and weather sequence generation."""

__version__ = "0.1.0"
