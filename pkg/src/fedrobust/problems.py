"""Per-client quadratic loss families with analytically known constants.

Every family uses a curvature shared by all clients and all coordinates,
so the smoothness constant L, the gradient-dominance constant mu, the
honest-gradient dispersion G^2 and the minimum value l_star all have exact
closed forms, and the dispersion is independent of the evaluation point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionError, ParameterError


@dataclass(frozen=True)
class ClientLoss:
    """Quadratic loss sum_j a_j ([w]_j - [b]_j)^2 with gradient 2 a (w - b)."""

    curvature: np.ndarray  # (d,), positive
    center: np.ndarray     # (d,)

    def __post_init__(self):
        object.__setattr__(self, "curvature", np.atleast_1d(np.asarray(self.curvature, dtype=np.float64)))
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=np.float64)))
        if self.curvature.shape != self.center.shape:
            raise ConstructionError("curvature and center must have matching shapes")
        if not np.all(self.curvature > 0):
            raise ConstructionError("curvature must be positive")
        if not np.all(np.isfinite(self.center)):
            raise ConstructionError("centers must be finite")

    def value(self, w) -> float:
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        return float(np.sum(self.curvature * (w - self.center) ** 2))

    def gradient(self, w) -> np.ndarray:
        w = np.atleast_1d(np.asarray(w, dtype=np.float64))
        return 2.0 * self.curvature * (w - self.center)

    def descend(self, w, gamma: float, steps: int) -> np.ndarray:
        """Run ``steps`` plain gradient-descent updates from ``w``."""
        w = np.atleast_1d(np.asarray(w, dtype=np.float64)).copy()
        for _ in range(steps):
            w = w - gamma * self.gradient(w)
        return w


@dataclass(frozen=True)
class Problem:
    """n client losses, of which the clients outside ``honest_set`` are
    Byzantine, plus the closed-form constants of the honest objective."""

    n: int
    f: int
    honest_set: tuple
    losses: tuple
    L: float
    mu: float
    G2: float
    l_star: float
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0 <= self.f < self.n / 2:
            raise ParameterError(f"require 0 <= f < n/2, got f={self.f}, n={self.n}")
        if len(self.honest_set) != self.n - self.f:
            raise ParameterError("honest set must have size n - f")
        if len(self.losses) != self.n:
            raise ParameterError("need one loss per client")
        _verify_constants(self)

    @property
    def d(self) -> int:
        return self.losses[0].center.shape[0]

    @property
    def byzantine_set(self) -> tuple:
        return tuple(k for k in range(self.n) if k not in set(self.honest_set))


def _verify_constants(p: Problem) -> None:
    """Recompute every constant from the losses and compare; catches
    construction bugs at the source."""
    a = p.losses[0].curvature
    for loss in p.losses:
        if not np.array_equal(loss.curvature, a):
            raise ConstructionError("all clients must share the same curvature")
    centers = np.stack([p.losses[k].center for k in p.honest_set])
    center_mean = centers.mean(axis=0)
    spread = centers - center_mean
    l_star = float(np.sum(a * (spread ** 2).mean(axis=0)))
    g2 = float(np.sum(4.0 * a ** 2 * (spread ** 2).mean(axis=0)))
    checks = {
        "L": (p.L, 2.0 * float(a.max())),
        "mu": (p.mu, 2.0 * float(a.min())),
        "G2": (p.G2, g2),
        "l_star": (p.l_star, l_star),
    }
    for name, (given, computed) in checks.items():
        tol = 1e-9 * (1.0 + abs(computed))
        if abs(given - computed) > tol:
            raise ConstructionError(
                f"constant {name}={given} does not match value {computed} recomputed from the losses"
            )


def _default_honest_set(n: int, f: int) -> tuple:
    # Byzantine clients default to the last f indices.
    return tuple(range(n - f))


def two_group_quadratic_problem(n: int, f: int, f_hat: int, G: float, honest_set=None) -> Problem:
    """Scalar worst-case family: f_hat clients hold c*G*(w+1)^2, the other
    n - f_hat hold c*G*w^2, with c chosen so the honest-gradient dispersion
    equals G^2 exactly.

    Under any aggregator that collapses on the n - f_hat identical uploads,
    runs on this family converge to a point whose gradient metric equals the
    heterogeneity floor f_hat*G^2/(n - f - f_hat).
    """
    if f_hat < 1:
        raise ParameterError("construction needs f_hat >= 1")
    if not 0 <= f <= f_hat < n / 2:
        raise ParameterError(f"require 0 <= f <= f_hat < n/2, got f={f}, f_hat={f_hat}, n={n}")
    if G <= 0:
        raise ParameterError("G must be positive")
    c = (n - f) / (2.0 * np.sqrt(f_hat * (n - f - f_hat)))
    a = c * G
    losses = tuple(
        ClientLoss(curvature=a, center=-1.0 if k < f_hat else 0.0) for k in range(n)
    )
    if honest_set is None:
        honest_set = _default_honest_set(n, f)
    return Problem(
        n=n,
        f=f,
        honest_set=tuple(honest_set),
        losses=losses,
        L=2.0 * a,
        mu=2.0 * a,
        G2=G * G,
        l_star=c * G * f_hat * (n - f - f_hat) / (n - f) ** 2,
        descriptor={"kind": "two_group_quadratic", "n": n, "f": f, "f_hat": f_hat, "G": G},
    )


def homogeneous_quadratic_problem(n: int, f: int = 0, honest_set=None) -> Problem:
    """Every client holds w^2/2; zero heterogeneity, L = mu = 1, l_star = 0."""
    if n < 1:
        raise ParameterError("need n >= 1")
    losses = tuple(ClientLoss(curvature=0.5, center=0.0) for _ in range(n))
    if honest_set is None:
        honest_set = _default_honest_set(n, f)
    return Problem(
        n=n,
        f=f,
        honest_set=tuple(honest_set),
        losses=losses,
        L=1.0,
        mu=1.0,
        G2=0.0,
        l_star=0.0,
        descriptor={"kind": "homogeneous_quadratic", "n": n, "f": f},
    )


def random_quadratic_problem(
    n: int, f: int, d: int, G_target: float, radius: float, seed: int, honest_set=None
) -> Problem:
    """Seeded fuzz family: one shared curvature drawn from [0.5, 2], client
    centers drawn in a ball of the given radius, then rescaled about the
    honest mean so the honest-gradient dispersion equals G_target^2 exactly.

    The curvature is a single scalar across coordinates so that the
    gradient-dominance identity hot path stays an exact equality.
    """
    if not 0 <= f < n / 2:
        raise ParameterError(f"require 0 <= f < n/2, got f={f}, n={n}")
    if d < 1:
        raise ParameterError("need d >= 1")
    if G_target < 0:
        raise ParameterError("G_target must be >= 0")
    rng = np.random.default_rng(seed)
    a = float(rng.uniform(0.5, 2.0))
    directions = rng.standard_normal((n, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.random(n) ** (1.0 / d)
    centers = radii[:, None] * directions

    if honest_set is None:
        honest_set = _default_honest_set(n, f)
    honest_set = tuple(honest_set)
    honest_centers = centers[list(honest_set)]
    center_mean = honest_centers.mean(axis=0)
    dispersion = float(np.sum(4.0 * a * a * ((honest_centers - center_mean) ** 2).mean(axis=0)))
    if G_target == 0.0:
        centers = np.tile(center_mean, (n, 1))
    else:
        if dispersion == 0.0:
            raise ConstructionError("all honest centers coincide; cannot rescale to G_target > 0")
        s = G_target / np.sqrt(dispersion)
        centers = center_mean + s * (centers - center_mean)

    losses = tuple(ClientLoss(curvature=np.full(d, a), center=centers[k]) for k in range(n))
    honest_centers = centers[list(honest_set)]
    spread = honest_centers - honest_centers.mean(axis=0)
    return Problem(
        n=n,
        f=f,
        honest_set=honest_set,
        losses=losses,
        L=2.0 * a,
        mu=2.0 * a,
        G2=float(np.sum(4.0 * a * a * (spread ** 2).mean(axis=0))),
        l_star=float(np.sum(a * (spread ** 2).mean(axis=0))),
        descriptor={
            "kind": "random_quadratic",
            "n": n,
            "f": f,
            "d": d,
            "G_target": G_target,
            "radius": radius,
            "seed": seed,
        },
    )


def honest_objective(p: Problem, w) -> tuple[float, np.ndarray]:
    """Value and gradient of the average honest loss at ``w``."""
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    value = 0.0
    grad = np.zeros_like(w)
    for k in p.honest_set:
        value += p.losses[k].value(w)
        grad += p.losses[k].gradient(w)
    m = len(p.honest_set)
    return value / m, grad / m


def heterogeneity_at(p: Problem, w) -> float:
    """Mean squared deviation of honest gradients from their average at ``w``."""
    w = np.atleast_1d(np.asarray(w, dtype=np.float64))
    grads = np.stack([p.losses[k].gradient(w) for k in p.honest_set])
    return float(((grads - grads.mean(axis=0)) ** 2).sum(axis=1).mean())
