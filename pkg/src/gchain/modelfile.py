"""JSON model files: parsing and fail-closed validation.

A model file is a JSON document with a required ``model`` section and
optional ``allocation``, ``solver`` and ``sim`` sections:

    {
      "model": {
        "n": 3,
        "lambda": [25.0, 20.0, 15.0],
        "mu": [1.0, 2.0, 3.0],
        "gamma": 300.0,
        "batch": {"type": "geometric", "u": 0.3},
        "cost": {"c0": 3.0, "a": -0.01}
      },
      "allocation": {"P": [0.2711, 0.3521, 0.3768]},
      "solver": {"tol": 1e-12, "max_iters": 100000, "damping": 0.5},
      "sim": {"horizon": 1e5, "warmup": 1e4, "replications": 10, "seed": 1}
    }

Batch types: ``geometric`` (key ``u``), ``deterministic`` (key ``size``),
``pmf`` (key ``probs`` as a list of ``[r, prob]`` pairs). Unknown keys are
rejected so typos in rate names fail loudly; every error message starts
with the dotted path of the offending field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .batch import BatchDistribution
from .errors import ModelFileError
from .gnet import SolverOptions
from .simulate import SimConfig
from .supply import Allocation, SupplyChainInstance


def _require_keys(section: dict, path: str, required: tuple, optional: tuple = ()):
    if not isinstance(section, dict):
        raise ModelFileError(f"{path}: must be an object")
    for key in section:
        if key not in required and key not in optional:
            raise ModelFileError(f"{path}.{key}: unknown key")
    for key in required:
        if key not in section:
            raise ModelFileError(f"{path}.{key}: missing required key")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelFileError(f"{path}: must be a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelFileError(f"{path}: must be an integer, got {value!r}")
    return value


def _vector(value, path: str, length: int) -> list:
    if not isinstance(value, list) or len(value) != length:
        raise ModelFileError(f"{path}: must be a list of {length} numbers")
    return [_number(v, f"{path}[{k}]") for k, v in enumerate(value)]


def _parse_batch(section, path: str) -> BatchDistribution:
    _require_keys(section, path, ("type",), ("u", "size", "probs"))
    kind = section["type"]
    try:
        if kind == "geometric":
            _require_keys(section, path, ("type", "u"))
            return BatchDistribution.geometric(_number(section["u"], f"{path}.u"))
        if kind == "deterministic":
            _require_keys(section, path, ("type", "size"))
            return BatchDistribution.deterministic(_integer(section["size"], f"{path}.size"))
        if kind == "pmf":
            _require_keys(section, path, ("type", "probs"))
            probs = section["probs"]
            if not isinstance(probs, list) or not all(
                isinstance(p, list) and len(p) == 2 for p in probs
            ):
                raise ModelFileError(f"{path}.probs: must be a list of [r, prob] pairs")
            pairs = [
                (_integer(r, f"{path}.probs[{k}][0]"), _number(p, f"{path}.probs[{k}][1]"))
                for k, (r, p) in enumerate(probs)
            ]
            return BatchDistribution.explicit(pairs)
    except ValueError as err:
        raise ModelFileError(f"{path}: {err}") from None
    raise ModelFileError(f"{path}.type: must be geometric, deterministic or pmf, got {kind!r}")


@dataclass(frozen=True, eq=False)
class ModelFile:
    """Parsed model file: the instance plus any optional sections."""

    instance: SupplyChainInstance
    allocation: Allocation | None
    solver: SolverOptions
    sim: dict | None            # raw sim section; combine with an allocation
    text: str                    # exact bytes parsed, for output hashing

    def sim_config(self, allocation: Allocation | None = None,
                   seed: int | None = None) -> SimConfig:
        """Build a SimConfig from the sim section (and overrides)."""
        if self.sim is None:
            raise ModelFileError("sim: section missing")
        alloc = allocation or self.allocation
        if alloc is None:
            raise ModelFileError("allocation: section missing (needed to simulate)")
        sim = dict(self.sim)
        if seed is not None:
            sim["seed"] = seed
        return SimConfig(instance=self.instance, allocation=alloc, **sim)


def parse_model(text: str) -> ModelFile:
    """Parse and validate a model document; raises ModelFileError."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ModelFileError(f"document: invalid JSON ({err})") from None
    _require_keys(doc, "document", ("model",), ("allocation", "solver", "sim"))
    model = doc["model"]
    _require_keys(model, "model", ("n", "lambda", "mu", "gamma", "batch", "cost"))
    n = _integer(model["n"], "model.n")
    if n < 1:
        raise ModelFileError(f"model.n: must be >= 1, got {n}")
    lam = _vector(model["lambda"], "model.lambda", n)
    mu = _vector(model["mu"], "model.mu", n)
    gamma = _number(model["gamma"], "model.gamma")
    batch = _parse_batch(model["batch"], "model.batch")
    _require_keys(model["cost"], "model.cost", ("c0", "a"))
    c0 = _number(model["cost"]["c0"], "model.cost.c0")
    a = _number(model["cost"]["a"], "model.cost.a")
    try:
        instance = SupplyChainInstance(
            arrival=lam, perish=mu, order_rate=gamma, batch=batch,
            base_price=c0, price_slope=a,
        )
    except ValueError as err:
        raise ModelFileError(f"model: {err}") from None

    allocation = None
    if "allocation" in doc:
        _require_keys(doc["allocation"], "allocation", ("P",))
        try:
            allocation = Allocation(_vector(doc["allocation"]["P"], "allocation.P", n))
        except ValueError as err:
            raise ModelFileError(f"allocation.P: {err}") from None

    solver = SolverOptions()
    if "solver" in doc:
        section = doc["solver"]
        _require_keys(section, "solver", (), ("tol", "max_iters", "damping"))
        solver = SolverOptions(
            tol=_number(section.get("tol", solver.tol), "solver.tol"),
            max_iters=_integer(section.get("max_iters", solver.max_iters), "solver.max_iters"),
            damping=_number(section.get("damping", solver.damping), "solver.damping"),
        )

    sim = None
    if "sim" in doc:
        section = doc["sim"]
        _require_keys(section, "sim", ("horizon",), ("warmup", "replications", "seed"))
        sim = {"horizon": _number(section["horizon"], "sim.horizon")}
        if "warmup" in section:
            sim["warmup"] = _number(section["warmup"], "sim.warmup")
        if "replications" in section:
            sim["replications"] = _integer(section["replications"], "sim.replications")
        if "seed" in section:
            sim["seed"] = _integer(section["seed"], "sim.seed")

    return ModelFile(instance=instance, allocation=allocation, solver=solver,
                     sim=sim, text=text)


def load_model(path) -> ModelFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())
