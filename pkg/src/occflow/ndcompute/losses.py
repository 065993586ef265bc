"""Scalar losses, each returning ``(value, gradient w.r.t. prediction)``."""

import numpy as np

BCE_EPS = 1e-7


def mse(pred, target):
    diff = pred - target
    return float(np.mean(diff**2)), 2.0 * diff / diff.size


def bce(prob, target):
    """Binary cross-entropy on probabilities, clipped away from 0 and 1."""
    p = np.clip(prob, BCE_EPS, 1.0 - BCE_EPS)
    loss = -np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p))
    grad = (p - target) / (p * (1.0 - p)) / p.size
    return float(loss), grad


def squared_distance(features, center):
    """Per-sample ``||f - c||^2``."""
    diff = features - center
    return np.einsum("ij,ij->i", diff, diff)
