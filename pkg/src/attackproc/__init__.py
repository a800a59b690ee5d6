"""Statistical analysis of honeypot-captured attack traffic.

Flows are assembled from packet captures, counted into attack-rate series at
several resolutions, and examined for long-range dependence, Poisson arrivals
and heavy tails; FARIMA and ARMA models forecast the rates.
"""
__version__ = "0.1.0"
