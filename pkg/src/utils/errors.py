"""
Error types raised by the simulator.

Everything the library raises on purpose derives from IRSSimError so the
CLI can tell domain failures apart from programming errors.
"""


class IRSSimError(Exception):
    """Base class for simulator errors"""


class DegenerateGeometryError(IRSSimError, ValueError):
    """|cos(phi_sr) + cos(phi_rd)| is too small for aligned element positions"""


class LayoutMismatchError(IRSSimError, ValueError):
    """Element count of a layout, draw or shift vector does not match N"""


class QuadratureError(IRSSimError, RuntimeError):
    """Numerical integration produced a non-finite or non-normalized result"""


class ConfigError(IRSSimError, ValueError):
    """Config file is missing, unreadable or malformed"""
