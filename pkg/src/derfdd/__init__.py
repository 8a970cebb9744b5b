"""Grid-fault simulation and ML fault diagnosis / fault-tolerant control for DER inverters."""

__version__ = "0.1.0"
