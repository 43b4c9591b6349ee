"""Trajectory similarity toolkit.

Exact dynamic-programming distance measures, a dual-branch convolutional
trajectory encoder trained with a triplet + distance-regression loss,
empirical verification of the convolution/pooling distance bounds, and a
kNN evaluation harness.
"""

__version__ = "0.1.0"
