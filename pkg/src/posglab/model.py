"""Finite zero-sum partially observable game models.

A model is a joint transition/observation tensor ``kernel[x][u][v][z][y]``
(probability of moving to hidden state ``z`` while emitting observation ``y``,
given current state ``x`` and the two players' actions ``u``, ``v``), a payoff
tensor ``cost[x][u][v]`` (what player 2 pays player 1), and an initial belief
over hidden states.  Models are treated as immutable after construction.
"""

import json
from dataclasses import dataclass, field

import numpy as np

STOCHASTIC_TOL = 1e-9
_RENORM_SKIP = 1e-14


class ModelFormatError(ValueError):
    """Model file is missing fields or contains malformed data."""


class ModelValidationError(ValueError):
    """Model tensors violate the probabilistic invariants."""


@dataclass
class LyapunovCert:
    """Drift certificate: expected V decreases by at least h outside K."""

    V: np.ndarray          # (nx,)
    h: np.ndarray          # (nx,), h >= 1
    K: np.ndarray          # sorted state indices, nonempty
    drift_c: float

    def __post_init__(self):
        self.V = np.asarray(self.V, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        self.K = np.asarray(sorted(set(int(k) for k in np.atleast_1d(self.K))), dtype=int)
        self.drift_c = float(self.drift_c)
        if self.K.size == 0:
            raise ModelValidationError("Lyapunov certificate: K must be nonempty")
        if np.any(self.h < 1.0):
            raise ModelValidationError("Lyapunov certificate: h must be >= 1 everywhere")
        if self.drift_c < 0.0:
            raise ModelValidationError("Lyapunov certificate: drift_c must be nonnegative")


@dataclass
class GameModel:
    name: str
    kernel: np.ndarray          # (nx, nu, nv, nx, ny)
    cost: np.ndarray            # (nx, nu, nv)
    initial_belief: np.ndarray  # (nx,)
    lyapunov: LyapunovCert | None = None

    nx: int = field(init=False)
    ny: int = field(init=False)
    nu: int = field(init=False)
    nv: int = field(init=False)

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=float)
        self.cost = np.asarray(self.cost, dtype=float)
        self.initial_belief = np.asarray(self.initial_belief, dtype=float)
        if self.kernel.ndim != 5:
            raise ModelValidationError("kernel must be a 5-d tensor [x][u][v][z][y]")
        nx, nu, nv, nz, ny = self.kernel.shape
        if nz != nx:
            raise ModelValidationError("kernel next-state axis must match state axis")
        self.nx, self.ny, self.nu, self.nv = nx, ny, nu, nv
        if self.cost.shape != (nx, nu, nv):
            raise ModelValidationError(f"cost must have shape {(nx, nu, nv)}, got {self.cost.shape}")
        if self.initial_belief.shape != (nx,):
            raise ModelValidationError(f"initial_belief must have shape {(nx,)}")
        for arr in (self.kernel, self.cost, self.initial_belief):
            arr.setflags(write=False)

    @property
    def c_max(self) -> float:
        return float(np.max(np.abs(self.cost)))

    @property
    def strict_positive(self) -> bool:
        return bool(np.all(self.kernel > 0.0))

    def state_marginal(self) -> np.ndarray:
        """p_marg[x,u,v,z] = P(next state z | x, u, v), observations summed out."""
        return self.kernel.sum(axis=4)

    def phi(self) -> np.ndarray:
        """Observation-density form of the kernel (kernel rescaled by ny)."""
        return self.kernel * self.ny


@dataclass
class ValidationReport:
    violations: list[str]
    strict_positive: bool
    c_max: float

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        lines = [f"strict_positive={self.strict_positive} c_max={self.c_max}"]
        if self.ok:
            lines.append("no violations")
        else:
            lines.extend(self.violations)
        return "\n".join(lines)


def validate(model: GameModel) -> ValidationReport:
    """Check stochasticity, nonnegativity and finiteness of all model tensors."""
    violations = []
    if np.any(model.kernel < 0.0):
        idx = np.argwhere(model.kernel < 0.0)[0]
        violations.append(
            f"kernel entry (x={idx[0]},u={idx[1]},v={idx[2]},z={idx[3]},y={idx[4]}) "
            f"is negative: {model.kernel[tuple(idx)]}"
        )
    row_sums = model.kernel.sum(axis=(3, 4))
    bad = np.argwhere(np.abs(row_sums - 1.0) > STOCHASTIC_TOL)
    for x, u, v in bad:
        violations.append(f"row (x={x},u={u},v={v}) sums to {row_sums[x, u, v]!r}")
    if not np.all(np.isfinite(model.kernel)):
        violations.append("kernel contains non-finite entries")
    if not np.all(np.isfinite(model.cost)):
        violations.append("cost contains non-finite entries")
    if np.any(model.initial_belief < 0.0):
        x = int(np.argwhere(model.initial_belief < 0.0)[0])
        violations.append(f"initial_belief[{x}] is negative: {model.initial_belief[x]}")
    s = model.initial_belief.sum()
    if abs(s - 1.0) > STOCHASTIC_TOL:
        violations.append(f"initial_belief sums to {s!r}")
    return ValidationReport(violations, model.strict_positive, model.c_max)


def _renormalize_rows(kernel: np.ndarray) -> np.ndarray:
    """Rescale each (x,u,v) slice to sum exactly-ish to 1; idempotent in practice."""
    kernel = np.array(kernel, dtype=float)
    sums = kernel.sum(axis=(3, 4), keepdims=True)
    fix = np.abs(sums - 1.0) > _RENORM_SKIP
    if np.any(fix):
        kernel = np.where(fix, kernel / sums, kernel)
    return kernel


def build(name, kernel, cost, initial_belief, lyapunov=None) -> GameModel:
    """Construct a validated model; rows are renormalized after validation so
    downstream code may assume exact stochasticity."""
    raw = GameModel(name, kernel, cost, initial_belief, lyapunov)
    report = validate(raw)
    if not report.ok:
        raise ModelValidationError(f"model {name!r} failed validation:\n" + "\n".join(report.violations))
    belief = np.asarray(initial_belief, dtype=float)
    s = belief.sum()
    if abs(s - 1.0) > _RENORM_SKIP:
        belief = belief / s
    return GameModel(name, _renormalize_rows(raw.kernel), raw.cost, belief, lyapunov)


_FIELDS = ("name", "num_states", "num_obs", "num_actions_p1", "num_actions_p2",
           "kernel", "cost", "initial_belief")


def save(model: GameModel, path) -> None:
    doc = {
        "name": model.name,
        "num_states": model.nx,
        "num_obs": model.ny,
        "num_actions_p1": model.nu,
        "num_actions_p2": model.nv,
        "kernel": model.kernel.tolist(),
        "cost": model.cost.tolist(),
        "initial_belief": model.initial_belief.tolist(),
    }
    if model.lyapunov is not None:
        doc["lyapunov"] = {
            "V": model.lyapunov.V.tolist(),
            "h": model.lyapunov.h.tolist(),
            "K": model.lyapunov.K.tolist(),
            "drift_c": model.lyapunov.drift_c,
        }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, allow_nan=False)
        f.write("\n")


def load(path) -> GameModel:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ModelFormatError(f"{path}: top level must be an object")
    missing = [k for k in _FIELDS if k not in doc]
    if missing:
        raise ModelFormatError(f"{path}: missing field(s): {', '.join(missing)}")
    try:
        kernel = np.asarray(doc["kernel"], dtype=float)
        cost = np.asarray(doc["cost"], dtype=float)
        belief = np.asarray(doc["initial_belief"], dtype=float)
    except (TypeError, ValueError) as e:
        raise ModelFormatError(f"{path}: malformed tensor data: {e}") from e
    shape = (doc["num_states"], doc["num_actions_p1"], doc["num_actions_p2"],
             doc["num_states"], doc["num_obs"])
    if kernel.shape != shape:
        raise ModelFormatError(f"{path}: kernel has shape {kernel.shape}, declared {shape}")
    lyap = None
    if "lyapunov" in doc and doc["lyapunov"] is not None:
        ly = doc["lyapunov"]
        for k in ("V", "h", "K", "drift_c"):
            if k not in ly:
                raise ModelFormatError(f"{path}: lyapunov missing field {k!r}")
        lyap = LyapunovCert(np.asarray(ly["V"], float), np.asarray(ly["h"], float),
                            np.asarray(ly["K"], int), float(ly["drift_c"]))
    return build(doc["name"], kernel, cost, belief, lyap)


def _factored_kernel(P: np.ndarray, Q: np.ndarray, nu: int, nv: int) -> np.ndarray:
    """Action-independent kernel p(z,y|x,u,v) = P[x,z] * Q[z,y]."""
    nx = P.shape[0]
    ny = Q.shape[1]
    joint = P[:, :, None] * Q[None, :, :]                   # (x, z, y)
    kernel = np.broadcast_to(joint[:, None, None, :, :], (nx, nu, nv, nx, ny))
    return np.array(kernel)


_PENNY = [[1.0, -1.0], [-1.0, 1.0]]
_SEP_COST = [[3.0, 1.0], [0.0, 2.0]]


def canonical_models() -> dict[str, GameModel]:
    """Built-in desk-scale fixtures used throughout the test batteries."""
    out = {}

    P = np.array([[0.8, 0.2], [0.3, 0.7]])
    Q = np.array([[0.9, 0.1], [0.2, 0.8]])
    cost = np.broadcast_to(np.array(_PENNY)[None, :, :], (2, 2, 2)).copy()
    out["CANON2"] = build(
        "CANON2", _factored_kernel(P, Q, 2, 2), cost, [0.5, 0.5],
        lyapunov=LyapunovCert(V=[0.0, 0.0], h=[1.0, 1.0], K=[0, 1], drift_c=1.0),
    )

    # Fully observed: observation is deterministically the next state.  Some
    # transitions carry zero mass, so no state subset admits a minorization.
    trans3 = {
        (0, 0): [[0.7, 0.3, 0.0], [0.1, 0.7, 0.2], [0.2, 0.1, 0.7]],
        (0, 1): [[0.3, 0.4, 0.3], [0.3, 0.3, 0.4], [0.4, 0.3, 0.3]],
        (1, 0): [[0.5, 0.25, 0.25], [0.0, 0.6, 0.4], [0.3, 0.3, 0.4]],
        (1, 1): [[0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.25, 0.25, 0.5]],
    }
    kern3 = np.zeros((3, 2, 2, 3, 3))
    for (u, v), trans in trans3.items():
        trans = np.asarray(trans)
        for z in range(3):
            kern3[:, u, v, z, z] = trans[:, z]
    cost3 = np.array([
        [[1.0, -1.0], [-1.0, 1.0]],
        [[3.0, 1.0], [0.0, 2.0]],
        [[0.0, 2.0], [3.0, 1.0]],
    ])
    out["FULLOBS3"] = build("FULLOBS3", kern3, cost3, [1.0, 0.0, 0.0])

    Pu = np.array([[0.9, 0.1], [0.4, 0.6]])
    cost_u = np.array([[[0.0]], [[1.0]]])
    out["UNCTRL2"] = build("UNCTRL2", _factored_kernel(Pu, Q, 1, 1), cost_u, [0.5, 0.5])

    sep_cost = np.broadcast_to(np.array(_SEP_COST)[None, :, :], (2, 2, 2)).copy()
    out["SEPARABLE2"] = build("SEPARABLE2", _factored_kernel(P, Q, 2, 2), sep_cost, [0.5, 0.5])
    return out
