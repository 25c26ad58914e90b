"""Seeded synthetic datasets with known ground truth.

The latent response on the modelling (log) scale is a frozen nonlinear
function of the informative features: a sine interaction, a quadratic bump,
a tail of linear terms with descending coefficients, plus an additive offset
per landcover class so the classes genuinely differ.  Landcover itself is
assigned by quantile bands of the last informative feature (lowest values to
the first sorted class), which keeps the class offset a function of the
features: a model that never sees the label can still account for every bit
of non-noise variance, so the reported R-squared ceiling is achievable.
Gaussian noise is added on the same scale and the result is mapped through
exp(z)/100, so stored targets are strictly positive original-scale values.

The latent function and its constants are deliberately part of the public
contract: verification derives expected scores from them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, FeatureTable, TargetScale, TargetVector, inverse_transform_values
from .errors import InvalidSpecError

INTERCEPT = 1.0
SINE_COEF = 1.1
QUAD_COEF = 2.4
LINEAR_HIGH = 0.9
LINEAR_LOW = 0.45
CLASS_OFFSET_STEP = 0.55

DEFAULT_CLASS_MIX = {"cropland": 13937 / 21244, "grassland": 7307 / 21244}
DEFAULT_NOISE_SD = 0.32  # puts the default spec's R-squared ceiling at ~0.85

_CEILING_SIM_ROWS = 400_000
_CEILING_SIM_SEED = 20240917


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 21244
    n_informative: int = 10
    n_noise: int = 74
    noise_sd: float = DEFAULT_NOISE_SD
    class_mix: dict = field(default_factory=lambda: dict(DEFAULT_CLASS_MIX))
    missing_rate: float = 0.0
    seed: int = 0

    def validate(self) -> None:
        if self.n_rows < 1:
            raise InvalidSpecError(f"n_rows must be >= 1, got {self.n_rows}")
        if self.n_informative < 1:
            raise InvalidSpecError("need at least one informative feature")
        if self.n_noise < 0:
            raise InvalidSpecError("n_noise must be >= 0")
        if self.noise_sd < 0:
            raise InvalidSpecError("noise_sd must be >= 0")
        if not (0.0 <= self.missing_rate < 1.0):
            raise InvalidSpecError("missing_rate must be in [0, 1)")
        if not self.class_mix:
            raise InvalidSpecError("class_mix must name at least one class")
        if any(not str(c) for c in self.class_mix):
            raise InvalidSpecError("class names must be non-empty")
        total = sum(self.class_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise InvalidSpecError(f"class_mix fractions sum to {total}, expected 1")
        if self.n_rows < len(self.class_mix) * 2:
            raise InvalidSpecError("need at least two rows per class")


def linear_coefficients(n_informative: int) -> np.ndarray:
    """Coefficients of the linear tail (features 3..m-1), descending 0.9 to 0.45."""
    out = np.zeros(n_informative)
    for j in range(3, n_informative):
        out[j] = LINEAR_HIGH - (LINEAR_HIGH - LINEAR_LOW) * (j - 3) / max(1, n_informative - 4)
    return out


def latent_response(x_informative: np.ndarray, landcover, class_names=None) -> np.ndarray:
    """Noiseless response on the modelling scale for given informative features.

    ``landcover`` is a sequence of labels; offsets are CLASS_OFFSET_STEP times
    the label's index among the sorted class names (taken from the labels
    themselves unless class_names pins the universe).
    """
    x = np.asarray(x_informative, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 1:
        raise InvalidSpecError("latent_response needs a 2-D informative block")
    m = x.shape[1]
    z = np.full(x.shape[0], INTERCEPT)
    if m == 1:
        z += SINE_COEF * np.sin(np.pi * x[:, 0])
    else:
        z += SINE_COEF * np.sin(np.pi * x[:, 0] * x[:, 1])
    if m >= 3:
        z += QUAD_COEF * (x[:, 2] - 0.5) ** 2
    coefs = linear_coefficients(m)
    for j in range(3, m):
        z += coefs[j] * x[:, j]
    universe = sorted(set(landcover)) if class_names is None else sorted(class_names)
    offset_of = {c: CLASS_OFFSET_STEP * i for i, c in enumerate(universe)}
    z += np.asarray([offset_of[c] for c in landcover])
    return z


def _class_counts(class_mix: dict, n_rows: int) -> list[tuple[str, int]]:
    """Largest-remainder apportionment of n_rows over class_mix."""
    classes = sorted(class_mix)
    exact = [n_rows * class_mix[c] for c in classes]
    counts = [int(np.floor(e)) for e in exact]
    short = n_rows - sum(counts)
    remainders = sorted(range(len(classes)), key=lambda i: (-(exact[i] - counts[i]), classes[i]))
    for i in remainders[:short]:
        counts[i] += 1
    return list(zip(classes, counts))


def _assign_labels(class_mix: dict, banding_values: np.ndarray) -> list[str]:
    """Rank-band rows into classes: lowest values go to the first sorted class."""
    order = np.argsort(banding_values, kind="stable")
    labels = [""] * banding_values.size
    pos = 0
    for c, cnt in _class_counts(class_mix, banding_values.size):
        for i in order[pos:pos + cnt]:
            labels[i] = c
        pos += cnt
    return labels


def generate(spec: SynthSpec) -> Dataset:
    """Deterministically generate a dataset per the spec."""
    spec.validate()
    rng = np.random.default_rng(int(spec.seed))
    n, m = spec.n_rows, spec.n_informative

    x_inf = rng.uniform(size=(n, m))
    x_noise = rng.uniform(size=(n, spec.n_noise))
    labels = _assign_labels(spec.class_mix, x_inf[:, m - 1])
    z = latent_response(x_inf, labels, class_names=spec.class_mix.keys())
    if spec.noise_sd > 0:
        z = z + rng.normal(0.0, spec.noise_sd, size=n)
    y = inverse_transform_values(z)

    values = np.concatenate([x_inf, x_noise], axis=1)
    if spec.missing_rate > 0.0:
        mask = rng.uniform(size=values.shape) < spec.missing_rate
        values = values.copy()
        values[mask] = np.nan

    width = max(2, len(str(m - 1)), len(str(max(spec.n_noise - 1, 0))))
    names = [f"sig_{j:0{width}d}" for j in range(m)]
    names += [f"noise_{j:0{width}d}" for j in range(spec.n_noise)]
    ids = tuple(f"r{i:06d}" for i in range(n))
    return Dataset(
        FeatureTable(values, tuple(names)),
        TargetVector(y, TargetScale.ORIGINAL),
        tuple(labels),
        ids,
    )


def informative_names(spec: SynthSpec) -> tuple[str, ...]:
    width = max(2, len(str(spec.n_informative - 1)), len(str(max(spec.n_noise - 1, 0))))
    return tuple(f"sig_{j:0{width}d}" for j in range(spec.n_informative))


def oracle_r2_ceiling(spec: SynthSpec) -> float:
    """Population R-squared ceiling implied by noise_sd and the signal variance.

    Estimated by large-sample simulation with a fixed internal seed, so the
    value is deterministic per spec.
    """
    spec.validate()
    if spec.noise_sd == 0.0:
        return 1.0
    rng = np.random.default_rng(_CEILING_SIM_SEED)
    n = _CEILING_SIM_ROWS
    x = rng.uniform(size=(n, spec.n_informative))
    labels = _assign_labels(spec.class_mix, x[:, spec.n_informative - 1])
    z = latent_response(x, labels, class_names=spec.class_mix.keys())
    vs = float(np.var(z))
    return vs / (vs + spec.noise_sd ** 2)
