"""Physics engines: propagation, quantum and classical beamlines, fringe analysis."""
