"""Two-way rater-bias model ``rating = rater_bias + clip_effect + noise``.

Fitting is ordinary least squares under a fixed sum of rater biases (zero by
default), solved as a sparse bordered normal-equations system.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

RATING_MIN, RATING_MAX = 1.0, 7.0


class IdentifiabilityError(ValueError):
    """The rater-clip incidence graph splits into several components."""

    def __init__(self, components):
        self.components = components
        parts = []
        for n, comp in enumerate(components, start=1):
            parts.append(f"component {n}: raters {sorted(comp['raters'])}, clips {sorted(comp['clips'])}")
        super().__init__("rater-clip graph is disconnected; " + "; ".join(parts))


@dataclass(frozen=True)
class Rating:
    rater: str
    clip: str
    rating: float


@dataclass
class RatingsTable:
    observations: list[Rating]
    #: optional clip -> channel mapping, used for channel-level splits
    channels: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.observations = [
            o if isinstance(o, Rating) else Rating(str(o[0]), str(o[1]), float(o[2]))
            for o in self.observations
        ]
        seen = set()
        for o in self.observations:
            if not RATING_MIN <= o.rating <= RATING_MAX:
                raise ValueError(f"rating {o.rating} by {o.rater} on {o.clip} outside [1, 7]")
            key = (o.rater, o.clip)
            if key in seen:
                raise ValueError(f"duplicate rating by {o.rater} on {o.clip}")
            seen.add(key)

    def __len__(self):
        return len(self.observations)

    @property
    def raters(self) -> list[str]:
        return sorted({o.rater for o in self.observations})

    @property
    def clips(self) -> list[str]:
        return sorted({o.clip for o in self.observations})

    @property
    def ratings(self) -> np.ndarray:
        return np.array([o.rating for o in self.observations])

    def subset(self, indices) -> "RatingsTable":
        obs = [self.observations[i] for i in indices]
        keep = {o.clip for o in obs}
        return RatingsTable(obs, {c: ch for c, ch in self.channels.items() if c in keep})

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        with_channel = bool(self.channels)
        writer.writerow(["rater_id", "clip_id", "rating"] + (["channel_id"] if with_channel else []))
        for o in self.observations:
            row = [o.rater, o.clip, repr(o.rating)]
            if with_channel:
                row.append(self.channels.get(o.clip, ""))
            writer.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RatingsTable":
        reader = csv.DictReader(io.StringIO(text))
        fields = reader.fieldnames or []
        if fields[:3] != ["rater_id", "clip_id", "rating"]:
            raise ValueError("ratings CSV header must start with rater_id,clip_id,rating")
        obs, channels = [], {}
        for row in reader:
            try:
                value = float(row["rating"])
            except (TypeError, ValueError):
                raise ValueError(f"line {reader.line_num}: bad rating {row['rating']!r}") from None
            obs.append(Rating(row["rater_id"], row["clip_id"], value))
            if row.get("channel_id"):
                channels[row["clip_id"]] = row["channel_id"]
        return cls(obs, channels)

    @classmethod
    def read(cls, path) -> "RatingsTable":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))


@dataclass
class RaterModel:
    alpha: dict[str, float]
    beta: dict[str, float]
    residual_variance: float
    grand_mean: float

    def predict(self, rater: str, clip: str) -> float:
        # Unseen clips fall back to the training grand mean.
        beta = self.beta.get(clip, self.grand_mean)
        return self.alpha.get(rater, 0.0) + beta

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "residual_variance": self.residual_variance,
            "grand_mean": self.grand_mean,
        }


def incidence_components(table: RatingsTable) -> list[dict]:
    raters, clips = table.raters, table.clips
    ri = {r: i for i, r in enumerate(raters)}
    ci = {c: len(raters) + j for j, c in enumerate(clips)}
    n = len(raters) + len(clips)
    rows = [ri[o.rater] for o in table.observations]
    cols = [ci[o.clip] for o in table.observations]
    graph = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, labels = connected_components(graph, directed=False)
    comps = [{"raters": [], "clips": []} for _ in range(n_comp)]
    for r, i in ri.items():
        comps[labels[i]]["raters"].append(r)
    for c, i in ci.items():
        comps[labels[i]]["clips"].append(c)
    return comps


def fit(table: RatingsTable, alpha_sum: float = 0.0) -> RaterModel:
    """Least-squares rater biases and clip effects.

    ``alpha_sum`` fixes the gauge; predictions do not depend on it.
    """
    if len(table) == 0:
        raise ValueError("cannot fit an empty ratings table")
    comps = incidence_components(table)
    if len(comps) > 1:
        raise IdentifiabilityError(comps)
    raters, clips = table.raters, table.clips
    nr, nc = len(raters), len(clips)
    ri = {r: i for i, r in enumerate(raters)}
    ci = {c: nr + j for j, c in enumerate(clips)}
    m = len(table)
    rows = np.repeat(np.arange(m), 2)
    cols = np.empty(2 * m, dtype=int)
    cols[0::2] = [ri[o.rater] for o in table.observations]
    cols[1::2] = [ci[o.clip] for o in table.observations]
    X = sp.csr_matrix((np.ones(2 * m), (rows, cols)), shape=(m, nr + nc))
    y = table.ratings
    # bordered system [[X^T X, c], [c^T, 0]] [theta; lam] = [X^T y; alpha_sum]
    c = np.zeros(nr + nc)
    c[:nr] = 1.0
    K = sp.bmat([[X.T @ X, sp.csc_matrix(c).T], [sp.csc_matrix(c), None]], format="csc")
    rhs = np.concatenate([X.T @ y, [alpha_sum]])
    sol = spsolve(K, rhs)
    theta = sol[: nr + nc]
    resid = y - X @ theta
    return RaterModel(
        alpha={r: float(theta[i]) for r, i in ri.items()},
        beta={cl: float(theta[i]) for cl, i in ci.items()},
        residual_variance=float(resid @ resid / m),
        grand_mean=float(y.mean()),
    )


def standardize(table: RatingsTable, model: RaterModel) -> RatingsTable:
    """Subtract each rater's bias from their ratings.

    Standardized values may leave [1, 7] slightly, so the bounds check is
    skipped for the returned table.
    """
    obs = []
    for o in table.observations:
        if o.rater not in model.alpha:
            raise KeyError(f"rater {o.rater!r} not in model")
        obs.append(Rating(o.rater, o.clip, o.rating - model.alpha[o.rater]))
    out = RatingsTable.__new__(RatingsTable)
    out.observations = obs
    out.channels = dict(table.channels)
    return out


def evaluate(model: RaterModel, table: RatingsTable) -> dict:
    if len(table) == 0:
        raise ValueError("cannot evaluate on an empty table")
    y = table.ratings
    pred = np.array([model.predict(o.rater, o.clip) for o in table.observations])
    sse = float(((y - pred) ** 2).sum())
    sst = float(((y - y.mean()) ** 2).sum())
    per_clip: dict[str, list[float]] = {}
    for o in table.observations:
        per_clip.setdefault(o.clip, []).append(o.rating)
    stds = [float(np.std(v, ddof=1)) for v in per_clip.values() if len(v) > 1]
    return {
        "n": len(y),
        "rmse": math.sqrt(sse / len(y)),
        "r_squared": None if sst == 0.0 else 1.0 - sse / sst,
        "median_per_clip_std": float(np.median(stds)) if stds else None,
        "baseline_rmse": math.sqrt(float(((y - model.grand_mean) ** 2).mean())),
    }


def split(table: RatingsTable, train_fraction: float, rng: np.random.Generator,
          by: str = "observation"):
    """Random train/validation partition.

    ``by`` is ``"observation"``, ``"clip"`` or ``"channel"``; grouped modes keep
    every rating of a group on one side.  The train share is
    ``floor(fraction * n_units)``, kept within ``[1, n_units - 1]``.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if by == "observation":
        keys = list(range(len(table)))
    elif by == "clip":
        keys = [o.clip for o in table.observations]
    elif by == "channel":
        missing = {o.clip for o in table.observations} - set(table.channels)
        if missing:
            raise ValueError(f"no channel for clips {sorted(missing)}")
        keys = [table.channels[o.clip] for o in table.observations]
    else:
        raise ValueError(f"unknown split mode {by!r}")
    units = sorted(set(keys), key=str) if by != "observation" else keys
    n = len(units)
    if n < 2:
        raise ValueError("need at least two units to split")
    n_train = min(max(math.floor(train_fraction * n), 1), n - 1)
    perm = rng.permutation(n)
    train_units = {units[i] for i in perm[:n_train]}
    train_idx = [i for i, k in enumerate(keys) if k in train_units]
    val_idx = [i for i, k in enumerate(keys) if k not in train_units]
    return table.subset(train_idx), table.subset(val_idx)


def synthetic_table(rng: np.random.Generator, n_raters: int = 20, n_clips: int = 50,
                    observed_fraction: float = 0.6, noise_std: float = 0.1,
                    bias_std: float = 0.5, clip_range=(2.5, 5.5)):
    """Ratings drawn from known biases and clip effects.

    Each clip keeps at least one rating and each rater rates at least one clip.
    Ratings are clipped to [1, 7].  Returns ``(table, true_alpha, true_beta)``
    with ``true_alpha`` centred to sum to zero.
    """
    raters = [f"r{i:02d}" for i in range(n_raters)]
    clips = [f"c{j:03d}" for j in range(n_clips)]
    alpha = rng.normal(0.0, bias_std, n_raters)
    alpha -= alpha.mean()
    beta = rng.uniform(*clip_range, n_clips)
    mask = rng.random((n_raters, n_clips)) < observed_fraction
    for j in range(n_clips):
        if not mask[:, j].any():
            mask[rng.integers(n_raters), j] = True
    for i in range(n_raters):
        if not mask[i].any():
            mask[i, rng.integers(n_clips)] = True
    noise = rng.normal(0.0, noise_std, (n_raters, n_clips))
    obs = []
    for i in range(n_raters):
        for j in range(n_clips):
            if mask[i, j]:
                r = min(RATING_MAX, max(RATING_MIN, alpha[i] + beta[j] + noise[i, j]))
                obs.append(Rating(raters[i], clips[j], float(r)))
    return (RatingsTable(obs),
            dict(zip(raters, alpha.tolist())),
            dict(zip(clips, beta.tolist())))


def vlog_shaped_table(rng: np.random.Generator, n_channels: int = 19, n_raters: int = 17,
                       raters_per_clip: int = 3, noise_std: float = 0.9, bias_std: float = 0.5):
    """Synthetic ratings shaped like a small vlog study.

    ``n_channels`` channels of 9-11 clips each; each channel is rated by the same
    ``raters_per_clip`` raters, drawn so that rater sets overlap across channels.
    Ratings are rounded to the 1-7 integer scale.
    """
    raters = [f"rater{i:02d}" for i in range(n_raters)]
    alpha = rng.normal(0.0, bias_std, n_raters)
    obs, channels = [], {}
    for ch in range(n_channels):
        channel = f"ch{ch:02d}"
        level = rng.uniform(2.0, 6.0)
        # consecutive rater windows guarantee a connected incidence graph
        first = (ch * (raters_per_clip - 1)) % n_raters
        panel = [(first + k) % n_raters for k in range(raters_per_clip)]
        for c in range(int(rng.integers(9, 12))):
            clip = f"{channel}_clip{c:02d}"
            channels[clip] = channel
            beta = level + rng.normal(0.0, 0.5)
            for i in panel:
                r = round(alpha[i] + beta + rng.normal(0.0, noise_std))
                obs.append(Rating(raters[i], clip, float(min(RATING_MAX, max(RATING_MIN, r)))))
    return RatingsTable(obs, channels)
