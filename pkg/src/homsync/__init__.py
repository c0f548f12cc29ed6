"""Simulator for two-photon-interference clock synchronization over
segmented fiber links: fiber thermo-optic drift, joint-spectral photon-pair
model, coincidence-dip computation, detection timing chains, a dip-locked
path-balance loop, and time-deviation statistics.
"""

__version__ = "0.1.0"
