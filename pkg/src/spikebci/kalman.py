"""Velocity-state Kalman filter decoder fit by least squares.

State is the 2D velocity; the observation matrix maps velocity to channel
activity. Transition and observation matrices come from least-squares
regression on training pairs; noise covariances and the initial state
covariance are fixed hyperparameters rather than estimated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SingularFitError(ValueError):
    """Raised when the regression data cannot identify the model."""


@dataclass
class KalmanModel:
    A: np.ndarray  # 2x2 state transition, column convention x_{t+1} = A x_t
    H: np.ndarray  # N x 2 observation matrix, obs = H x
    Q: np.ndarray  # 2x2 process noise
    Rm: np.ndarray  # N x N observation noise
    P: np.ndarray  # 2x2 state covariance
    x: np.ndarray  # current velocity estimate
    P0: float = 100.0

    def reset(self) -> None:
        self.x = np.zeros_like(self.x)
        self.P = self.P0 * np.eye(len(self.x))


def kf_fit(
    X: np.ndarray,
    Y: np.ndarray,
    q: float = 0.1,
    r: float = 1.0,
    p0: float = 100.0,
) -> KalmanModel:
    """Fit transition and observation matrices from rates X (T x N) and
    velocities Y (T x 2) by least squares; covariances are fixed at the
    configured values."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("X must be T x N and Y must be T x d with matching T")
    T, n_obs = X.shape
    d = Y.shape[1]
    if T < 3:
        raise ValueError("need at least 3 timesteps to fit")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
        raise ValueError("training data must be finite")

    # Row convention in the solves: Y2 ~ Y1 M and X ~ Y Ht, transposed into
    # column-convention A and H.
    m, _, rank_a, _ = np.linalg.lstsq(Y[:-1], Y[1:], rcond=None)
    if rank_a < d:
        raise SingularFitError("state regression is rank deficient")
    ht, _, rank_h, _ = np.linalg.lstsq(Y, X, rcond=None)
    if rank_h < d:
        raise SingularFitError("observation regression is rank deficient")
    return KalmanModel(
        A=m.T,
        H=ht.T,
        Q=q * np.eye(d),
        Rm=r * np.eye(n_obs),
        P=p0 * np.eye(d),
        x=np.zeros(d),
        P0=p0,
    )


def random_model(
    n_obs: int,
    rng: np.random.Generator,
    q: float = 0.1,
    r: float = 1.0,
    p0: float = 100.0,
) -> KalmanModel:
    """Uncalibrated filter with a random observation matrix, used as the
    fixed 'random weights' baseline before any fitting."""
    return KalmanModel(
        A=0.9 * np.eye(2),
        H=rng.normal(0.0, 1.0, size=(n_obs, 2)),
        Q=q * np.eye(2),
        Rm=r * np.eye(n_obs),
        P=p0 * np.eye(2),
        x=np.zeros(2),
        P0=p0,
    )


def kf_step(model: KalmanModel, obs: np.ndarray) -> np.ndarray:
    """Standard predict/update cycle; returns the posterior velocity estimate.

    P is symmetrized after the update to keep it positive semi-definite under
    roundoff.
    """
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (model.H.shape[0],):
        raise ValueError(f"observation has shape {obs.shape}, expected ({model.H.shape[0]},)")
    x = model.A @ model.x
    P = model.A @ model.P @ model.A.T + model.Q
    S = model.H @ P @ model.H.T + model.Rm
    try:
        K = np.linalg.solve(S.T, (P @ model.H.T).T).T
    except np.linalg.LinAlgError as exc:
        raise ValueError("innovation covariance is not invertible") from exc
    x = x + K @ (obs - model.H @ x)
    P = (np.eye(len(x)) - K @ model.H) @ P
    model.P = 0.5 * (P + P.T)
    model.x = x
    return x.copy()
