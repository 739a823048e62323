"""hivec - hierarchical offloading simulator for UAV-assisted vehicular edge computing."""

__version__ = "1.0.0"
