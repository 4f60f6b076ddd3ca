"""Mine wireless sensor network simulator, gateway, and monitoring server."""

__version__ = "0.1.0"
