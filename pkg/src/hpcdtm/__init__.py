"""Model-in-the-loop simulator for power and thermal control of a many-core chiplet."""

__version__ = "0.1.0"
