"""nirhub: host, train, and query miniaturized NIRS identification apps."""

__version__ = "0.1.0"

PROTOCOL_VERSION = 1
