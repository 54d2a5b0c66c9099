"""Typed value objects: beamline specs and simulation results."""
