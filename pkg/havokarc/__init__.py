"""Arc-fault waveform simulation and HAVOK forcing-operator detection."""

__version__ = "0.1.0"
