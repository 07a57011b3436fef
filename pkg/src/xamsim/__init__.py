"""Cycle-approximate simulator for a reconfigurable RAM/CAM resistive stack."""

__version__ = "0.1.0"
