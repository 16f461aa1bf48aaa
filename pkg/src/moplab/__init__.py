"""moplab: a desk-scale lab for meta-output prediction.

Trains a small decoder-only transformer to predict the outputs of unseen
dynamical systems purely from their observed trajectory, and benchmarks it
against model-aware filters (Kalman / extended Kalman) and an online
autoregressive baseline.
"""

__version__ = "0.1.0"
