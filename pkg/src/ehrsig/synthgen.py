"""Synthetic cohorts with known latent sources.

Each patient carries ``k`` independent Laplace source trajectories that are
piecewise constant on 30-day steps and occasionally jump to a fresh
Laplace draw, so the marginal at any day is exactly Laplace. Channels are
driven by a sparse mixing matrix:

* codes: Poisson events with log-intensity ``mu + A s``
* measurements: ``m0 + sd * (A s) + noise`` observed at visits
* medications: exposure ``A s > threshold`` noted on visit lists

The binary label is ``Bernoulli(sigmoid(beta . s_designated))`` evaluated on
the record's last day.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from ._util import atomic_write_bytes, atomic_write_text, derive_rng

LAPLACE_SCALE = 1.0 / math.sqrt(2.0)  # unit variance
STEP_DAYS = 30
RACES = ("white", "black", "asian")
RACE_P = (0.75, 0.18, 0.07)


@dataclass
class GroundTruth:
    mixing: np.ndarray  # p x k
    channels: list  # [(kind, name)]
    designated: tuple
    beta: np.ndarray
    intercept: float
    trajectories: dict  # patient_id -> (start_day, levels[n_steps, k])
    labels: dict
    seed: int
    step_days: int = STEP_DAYS
    bayes_auroc: float = float("nan")
    params: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.mixing.shape[1]

    def sources_at(self, patient_id: str, days) -> np.ndarray:
        start, levels = self.trajectories[patient_id]
        steps = (np.asarray(days, dtype=np.int64) - start) // self.step_days
        return levels[np.clip(steps, 0, levels.shape[0] - 1)]

    def save(self, path) -> None:
        path = Path(path)
        pids = sorted(self.trajectories)
        buf = io.BytesIO()
        np.savez(
            buf,
            mixing=self.mixing,
            beta=self.beta,
            levels=np.vstack([self.trajectories[p][1] for p in pids]),
            n_steps=np.array([self.trajectories[p][1].shape[0] for p in pids]),
            starts=np.array([self.trajectories[p][0] for p in pids]),
        )
        atomic_write_bytes(path.with_suffix(".npz"), buf.getvalue())
        meta = {
            "patients": pids, "channels": self.channels, "designated": list(self.designated),
            "intercept": self.intercept, "labels": self.labels, "seed": self.seed,
            "step_days": self.step_days, "bayes_auroc": self.bayes_auroc, "params": self.params,
        }
        atomic_write_text(path.with_suffix(".json"), json.dumps(meta, indent=1))

    @classmethod
    def load(cls, path) -> "GroundTruth":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        with np.load(path.with_suffix(".npz")) as z:
            mixing, beta, levels = z["mixing"], z["beta"], z["levels"]
            n_steps, starts = z["n_steps"], z["starts"]
        traj = {}
        offs = np.concatenate([[0], np.cumsum(n_steps)])
        for i, pid in enumerate(meta["patients"]):
            traj[pid] = (int(starts[i]), levels[offs[i]:offs[i + 1]])
        return cls(mixing, [tuple(c) for c in meta["channels"]], tuple(meta["designated"]), beta,
                   meta["intercept"], traj, meta["labels"], meta["seed"], meta["step_days"],
                   meta["bayes_auroc"], meta["params"])


@dataclass
class SyntheticCohort:
    events: list  # event-log lines
    demographics_csv: str
    truth: GroundTruth

    def labels_csv(self) -> str:
        return "patient_id,label\n" + "".join(f"{p},{y}\n" for p, y in sorted(self.truth.labels.items()))

    def write(self, directory) -> dict:
        d = Path(directory)
        paths = {
            "events": d / "events.jsonl",
            "demographics": d / "demographics.csv",
            "labels": d / "labels.csv",
            "truth": d / "truth",
        }
        atomic_write_text(paths["events"], "".join(line + "\n" for line in self.events))
        atomic_write_text(paths["demographics"], self.demographics_csv)
        atomic_write_text(paths["labels"], self.labels_csv())
        self.truth.save(paths["truth"])
        return paths


def _mixing(p: int, k: int, rng) -> np.ndarray:
    A = np.zeros((p, k))
    for c in range(p):
        j = c % k
        A[c, j] = rng.uniform(0.6, 1.0) * rng.choice((-1.0, 1.0))
        if rng.random() < 0.3:
            j2 = (j + 1 + rng.integers(k - 1)) % k if k > 1 else j
            A[c, j2] += rng.uniform(0.2, 0.5) * rng.choice((-1.0, 1.0))
    return A


def _trajectory(n_steps: int, k: int, switch_prob: float, rng) -> np.ndarray:
    draws = rng.laplace(0.0, LAPLACE_SCALE, size=(n_steps, k))
    switch = rng.random((n_steps, k)) < switch_prob
    switch[0] = True
    # forward-fill the most recent redraw
    idx = np.where(switch, np.arange(n_steps)[:, None], 0)
    idx = np.maximum.accumulate(idx, axis=0)
    return np.take_along_axis(draws, idx, axis=0)


def bayes_auroc(beta, intercept: float = 0.0, n: int = 200_000, seed: int = 0) -> float:
    """AUROC of the true label probability, by simulation."""
    from .evaluation import auroc

    rng = np.random.default_rng(seed)
    s = rng.laplace(0.0, LAPLACE_SCALE, size=(n, len(beta)))
    eta = intercept + s @ np.asarray(beta)
    prob = 1.0 / (1.0 + np.exp(-eta))
    y = (rng.random(n) < prob).astype(int)
    return auroc(prob, y)


def generate_cohort(
    p: int = 60,
    k: int = 10,
    n_patients: int = 500,
    years_mean: float = 8.0,
    seed: int = 0,
    *,
    n_designated: int = 3,
    beta: float = 2.5,
    visits_per_year: float = 4.0,
    switch_years: float = 1.5,
    measure_prob: float = 0.4,
    noise: float = 0.2,
) -> SyntheticCohort:
    """Simulate an event log, demographics table, labels and ground truth.

    ``beta`` is the label log-odds weight magnitude per designated source
    (signs alternate); ``beta = 0`` gives uninformative labels.
    """
    if k > p:
        raise ValueError("k must be <= p")
    if n_patients < 1:
        raise ValueError("n_patients must be >= 1")
    if n_designated > k:
        raise ValueError("n_designated must be <= k")
    grng = derive_rng(seed, "global")
    n_codes = int(round(0.5 * p))
    n_meas = int(round(0.3 * p))
    n_meds = p - n_codes - n_meas
    kinds = ["code"] * n_codes + ["measurement"] * n_meas + ["medication"] * n_meds
    names = [f"C{i:03d}" for i in range(n_codes)] + [f"M{i:03d}" for i in range(n_meas)] + \
            [f"R{i:03d}" for i in range(n_meds)]
    # each kind cycles through all sources so every source reaches every modality
    A = np.zeros((p, k))
    row = 0
    for count in (n_codes, n_meas, n_meds):
        A[row:row + count] = _mixing(count, k, grng)
        row += count
    mu = np.log(grng.uniform(1.0, 6.0, size=n_codes))
    m0 = grng.uniform(1.0, 100.0, size=n_meas)
    msd = m0 * grng.uniform(0.1, 0.3, size=n_meas)
    thresh = np.full(n_meds, 0.5)
    designated = tuple(range(n_designated))
    betas = np.array([beta * (1 if i % 2 == 0 else -1) for i in range(n_designated)], dtype=np.float64)
    switch_prob = STEP_DAYS / (switch_years * 365.25)

    code_rows = slice(0, n_codes)
    med_rows = slice(n_codes + n_meas, p)

    events: list[str] = []
    demo_lines = ["patient_id,sex,race,birth_day"]
    traj = {}
    labels = {}
    width = len(str(n_patients - 1))
    for i in range(n_patients):
        pid = f"P{i:0{width}d}"
        rng = derive_rng(seed, "patient", i)
        start = int(rng.integers(0, 3650))
        years = max(1.0, rng.gamma(4.0, years_mean / 4.0))
        tau = int(round(years * 365.25))
        n_steps = (tau - 1) // STEP_DAYS + 1
        levels = _trajectory(n_steps, k, switch_prob, rng)
        traj[pid] = (start, levels)
        daily = levels[np.arange(tau) // STEP_DAYS]  # tau x k
        drive = daily @ A.T  # tau x p

        lines = []
        # codes
        rate = np.exp(mu[None, :] + drive[:, code_rows]) / 365.25
        counts = rng.poisson(rate)
        for d, c in zip(*np.nonzero(counts)):
            for _ in range(counts[d, c]):
                lines.append((d, 0, names[c], None))
        # visits: first and last day plus a Poisson process in between
        n_vis = rng.poisson(visits_per_year * tau / 365.25)
        vdays = np.unique(np.concatenate([[0, tau - 1], rng.integers(0, tau, size=n_vis)]))
        for d in vdays:
            prob = 0.9 if d == tau - 1 else measure_prob
            for j in np.flatnonzero(rng.random(n_meas) < prob):
                val = m0[j] + msd[j] * (drive[d, n_codes + j] + noise * rng.standard_normal())
                lines.append((d, 1, names[n_codes + j], round(float(val), 6)))
            exposed = drive[d, med_rows] > thresh
            flip = rng.random(n_meds) < 0.03
            noted = np.flatnonzero(exposed ^ flip)
            if noted.size == 0:
                lines.append((d, 2, "", None))
            for j in noted:
                lines.append((d, 2, names[n_codes + n_meas + j], None))
        kind_name = ("code", "measurement", "medication")
        for d, kind, ch, val in sorted(lines, key=lambda e: (e[0], e[1], e[2])):
            obj = {"patient_id": pid, "kind": kind_name[kind], "channel": ch, "day": int(start + d)}
            if val is not None:
                obj["value"] = val
            events.append(json.dumps(obj, sort_keys=True))

        sex = int(rng.random() < 0.6)
        race = RACES[int(rng.choice(len(RACES), p=RACE_P))]
        age0 = rng.uniform(20.0, 70.0)
        birth = int(start - math.ceil(age0 * 365.25))
        demo_lines.append(f"{pid},{sex},{race},{birth}")

        eta = float(daily[-1, list(designated)] @ betas) if n_designated else 0.0
        labels[pid] = int(rng.random() < 1.0 / (1.0 + math.exp(-eta)))

    truth = GroundTruth(
        mixing=A,
        channels=[(kd, nm) for kd, nm in zip(kinds, names)],
        designated=designated,
        beta=betas,
        intercept=0.0,
        trajectories=traj,
        labels=labels,
        seed=seed,
        bayes_auroc=bayes_auroc(betas) if n_designated and beta != 0 else 0.5,
        params={"p": p, "k": k, "n_patients": n_patients, "years_mean": years_mean, "beta": beta,
                "visits_per_year": visits_per_year, "switch_years": switch_years,
                "measure_prob": measure_prob, "noise": noise, "code_log_rate": mu.tolist()},
    )
    return SyntheticCohort(events, "\n".join(demo_lines) + "\n", truth)


def generate_cross_sections(p: int = 50, k: int = 10, n: int = 20000, seed: int = 0,
                            noise: float = 0.0, edge_prob: float = 0.1):
    """Direct LiNGAM-style samples ``X = (I - B)^-1 (M S) + noise``.

    ``B`` is a sparse strictly lower-triangular (acyclic) channel graph and
    the columns of ``S`` hold independent unit-variance Laplace sources.
    Returns ``(X, S, A_true)`` with ``A_true = (I - B)^-1 M``.
    """
    rng = derive_rng(seed, "cross_sections")
    S = rng.laplace(0.0, LAPLACE_SCALE, size=(k, n))
    M = rng.standard_normal((p, k))
    B = np.tril(rng.uniform(-0.5, 0.5, size=(p, p)) * (rng.random((p, p)) < edge_prob), k=-1)
    A = np.linalg.solve(np.eye(p) - B, M)
    X = A @ S
    if noise > 0:
        X = X + noise * rng.standard_normal((p, n))
    return X, S, A


def recovery_score(recovered, true) -> float:
    """Mean |corr| over the Hungarian matching of recovered to true sources.

    Both inputs are (k, n) source matrices over the same samples.
    """
    R = np.atleast_2d(np.asarray(recovered, dtype=np.float64))
    T = np.atleast_2d(np.asarray(true, dtype=np.float64))
    if R.shape[1] != T.shape[1]:
        raise ValueError("recovered and true sources must cover the same samples")
    if R.shape[0] != T.shape[0]:
        warnings.warn(f"matching {min(R.shape[0], T.shape[0])} of {R.shape[0]} vs {T.shape[0]} sources",
                      RuntimeWarning, stacklevel=2)
    C = np.abs(np.corrcoef(R, T)[: R.shape[0], R.shape[0]:])
    C = np.nan_to_num(C)
    rows, cols = linear_sum_assignment(-C)
    return float(C[rows, cols].mean())


def model_recovery_score(model, X_std, true_sources) -> float:
    """:func:`recovery_score` of a fitted ICA model's sources on ``X_std``."""
    from .ica import source_matrix

    return recovery_score(source_matrix(model, X_std), true_sources)
