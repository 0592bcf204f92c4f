"""
peergeo: peer effects in network norm games with nonlinear peer norms,
transport-operator geometry instruments and Monte Carlo evaluation.
"""

__version__ = "0.1.0"
