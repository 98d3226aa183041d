"""Energy-minimal fixed-wing UAV trajectories for maritime buoy data collection in wind."""
__version__ = "0.1.0"
