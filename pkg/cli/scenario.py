"""
Scenario files for the UD filter runner.

A scenario is a YAML document.  Scalars are plain keys; matrices are literal
block scalars with one row per line, or a flat list meaning a diagonal::

    schema: udkf-scenario/1
    name: cv-demo
    model: constant-velocity       # scalar | constant-velocity | range-bearing | custom-linear
    dims: {n: 2, q: 1, m: 1}
    steps: 50
    seed: 42
    mode: both                     # ud | dense | both
    relinearize: false
    dt: 1.0
    x0: [0.0, 1.0]
    P0: |
      1.0 0.0
      0.0 1.0
    Q: [0.01]
    R: [0.25]
    output:
      csv: cv.csv
      report: cv.json

custom-linear additionally takes F (n×n), G (n×q) and H (m×n).  Optional
keys: ``truth_x0`` (defaults to x0), ``a`` (scalar model coefficient),
``measure_every`` (measure on every k-th epoch, default 1),
``enforce_psd``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import yaml

from version import SCHEMA_VERSION


MODELS = ("scalar", "constant-velocity", "range-bearing", "custom-linear")
MODES = ("ud", "dense", "both")

# (n, q, m) fixed by each built-in model
MODEL_DIMS: Dict[str, Tuple[int, int, int]] = {
    "scalar": (1, 1, 1),
    "constant-velocity": (2, 1, 1),
    "range-bearing": (4, 2, 2),
}


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class ScenarioError(Exception):
    """Any problem with a scenario file."""


class ScenarioParseError(ScenarioError):
    """Malformed content, with the field and line it was found at."""

    def __init__(self, message: str, field_name: str = "", line: Optional[int] = None) -> None:
        where = []
        if field_name:
            where.append(f"field '{field_name}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field_name = field_name
        self.line = line


class ScenarioValidationError(ScenarioError):
    """Well-formed content that breaks a scenario invariant."""


# ---------------------------------------------------------------------------
# Config container
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class ScenarioConfig:
    """Everything needed to reproduce one run."""

    model: str
    n: int
    q: int
    m: int
    x0: np.ndarray
    p0: np.ndarray
    q_cov: np.ndarray
    r_cov: np.ndarray
    steps: int
    seed: int
    mode: str = "ud"
    relinearize: bool = False
    enforce_psd: bool = False
    name: str = ""
    schema: str = SCHEMA_VERSION

    dt: float = 1.0
    """Sample interval for the kinematic models."""

    a: float = 1.0
    """Transition coefficient of the scalar model."""

    measure_every: int = 1
    """Measurements arrive on epochs k with k % measure_every == 0."""

    f: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    h: Optional[np.ndarray] = None

    truth_x0: Optional[np.ndarray] = None
    """Initial true state; x0 when absent."""

    output: Dict[str, str] = field(default_factory=dict)
    """Output paths: 'csv' and/or 'report'."""


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class ScenarioParser:
    """Turns scenario text into a validated ScenarioConfig."""

    def __init__(self, source: str = "<scenario>") -> None:
        self._source = source
        self._lines: Dict[str, int] = {}

    def parse(self, text: str) -> ScenarioConfig:
        try:
            root = yaml.compose(text)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            raise ScenarioParseError(f"{self._source}: invalid YAML: {exc}", line=line) from exc
        if not isinstance(data, dict):
            raise ScenarioParseError(f"{self._source}: top level must be a mapping", line=1)
        self._lines = self._key_lines(root)

        cfg = self._build(data)
        validate_scenario(cfg)
        return cfg

    # ------------------------------------------------------------------
    def _build(self, data: Dict[str, Any]) -> ScenarioConfig:
        for key in ("schema", "model", "dims", "steps", "seed", "x0", "P0", "R"):
            if key not in data:
                raise ScenarioParseError("missing required key", key)

        dims = data["dims"]
        if not isinstance(dims, dict) or not {"n", "q", "m"} <= set(dims):
            raise ScenarioParseError("dims needs n, q and m", "dims", self._lines.get("dims"))
        n = self._int(dims["n"], "dims.n")
        q = self._int(dims["q"], "dims.q")
        if "Q" not in data and q != 0:
            raise ScenarioParseError("missing required key", "Q")

        output = data.get("output") or {}
        if not isinstance(output, dict):
            raise ScenarioParseError("output must be a mapping", "output", self._lines.get("output"))

        return ScenarioConfig(
            schema=str(data["schema"]),
            name=str(data.get("name", "")),
            model=str(data["model"]),
            n=n,
            q=q,
            m=self._int(dims["m"], "dims.m"),
            steps=self._int(data["steps"], "steps"),
            seed=self._int(data["seed"], "seed"),
            mode=str(data.get("mode", "ud")),
            relinearize=self._bool(data.get("relinearize", False), "relinearize"),
            enforce_psd=self._bool(data.get("enforce_psd", False), "enforce_psd"),
            dt=self._float(data.get("dt", 1.0), "dt"),
            a=self._float(data.get("a", 1.0), "a"),
            measure_every=self._int(data.get("measure_every", 1), "measure_every"),
            x0=self._vector(data["x0"], "x0"),
            truth_x0=self._vector(data["truth_x0"], "truth_x0") if "truth_x0" in data else None,
            p0=self._matrix(data["P0"], "P0"),
            q_cov=self._matrix(data["Q"], "Q") if "Q" in data else np.zeros((0, 0)),
            r_cov=self._matrix(data["R"], "R"),
            f=self._matrix(data["F"], "F") if "F" in data else None,
            g=self._noise_map(data.get("G"), n, q),
            h=self._matrix(data["H"], "H") if "H" in data else None,
            output={str(k): str(v) for k, v in output.items()},
        )

    # ------------------------------------------------------------------
    @staticmethod
    def _key_lines(root: Any) -> Dict[str, int]:
        """1-based line of each top-level key."""
        lines: Dict[str, int] = {}
        if isinstance(root, yaml.MappingNode):
            for key_node, _ in root.value:
                lines[str(key_node.value)] = key_node.start_mark.line + 1
        return lines

    def _fail(self, message: str, name: str, row: int = 0) -> ScenarioParseError:
        line = self._lines.get(name.split(".")[0])
        if line is not None and row:
            line += row
        return ScenarioParseError(message, name, line)

    def _int(self, value: Any, name: str) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self._fail(f"expected an integer, got {value!r}", name)
        return value

    def _float(self, value: Any, name: str) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self._fail(f"expected a number, got {value!r}", name)
        return float(value)

    def _bool(self, value: Any, name: str) -> bool:
        if not isinstance(value, bool):
            raise self._fail(f"expected true/false, got {value!r}", name)
        return value

    def _vector(self, value: Any, name: str) -> np.ndarray:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return np.array([float(value)])
        if not isinstance(value, list):
            raise self._fail("expected a list of numbers", name)
        return np.array([self._float(v, name) for v in value])

    def _matrix(self, value: Any, name: str) -> np.ndarray:
        """Block text (one row per line), list of rows, flat list (diagonal) or a number."""
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return np.array([[float(value)]])
        if isinstance(value, list):
            if value and all(isinstance(row, list) for row in value):
                rows = [[self._float(v, name) for v in row] for row in value]
                return self._rectangular(rows, name)
            return np.diag([self._float(v, name) for v in value])
        if isinstance(value, str):
            rows = []
            for row_no, line in enumerate(value.splitlines(), start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                try:
                    rows.append([float(tok) for tok in line.replace(",", " ").split()])
                except ValueError:
                    raise self._fail(f"row {row_no} is not numeric: {line!r}", name, row_no) from None
            return self._rectangular(rows, name)
        raise self._fail(f"expected a matrix, got {type(value).__name__}", name)

    def _noise_map(self, value: Any, n: int, q: int) -> Optional[np.ndarray]:
        """G; with no process-noise channels (q = 0) it may be omitted or empty."""
        if q == 0 and (value is None or value == []):
            return np.zeros((n, 0))
        return None if value is None else self._matrix(value, "G")

    def _rectangular(self, rows: list, name: str) -> np.ndarray:
        if not rows:
            raise self._fail("matrix is empty", name)
        width = len(rows[0])
        for row_no, row in enumerate(rows, start=1):
            if len(row) != width:
                raise self._fail(f"row {row_no} has {len(row)} entries, expected {width}", name, row_no)
        return np.array(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# Validation and serialisation
# ---------------------------------------------------------------------------

def validate_scenario(cfg: ScenarioConfig) -> None:
    """Raise ScenarioValidationError naming the first violated invariant."""

    def need(cond: bool, message: str) -> None:
        if not cond:
            raise ScenarioValidationError(message)

    need(cfg.schema == SCHEMA_VERSION, f"unsupported schema {cfg.schema!r} (expected {SCHEMA_VERSION!r})")
    need(cfg.model in MODELS, f"unknown model {cfg.model!r}")
    need(cfg.mode in MODES, f"unknown mode {cfg.mode!r}")
    need(min(cfg.n, cfg.m) >= 1 and cfg.q >= 0, "dimensions must be positive")
    need(cfg.q >= 1 or cfg.model == "custom-linear", "only custom-linear scenarios may have q = 0")
    need(cfg.steps >= 0, "steps must be non-negative")
    need(cfg.measure_every >= 1, "measure_every must be at least 1")
    need(cfg.dt > 0.0, "dt must be positive")
    if cfg.model in MODEL_DIMS:
        need((cfg.n, cfg.q, cfg.m) == MODEL_DIMS[cfg.model],
             f"model {cfg.model} has dims n,q,m = {MODEL_DIMS[cfg.model]}")

    n, q, m = cfg.n, cfg.q, cfg.m
    need(cfg.x0.shape == (n,), "x0 dimension mismatch")
    need(cfg.truth_x0 is None or cfg.truth_x0.shape == (n,), "truth_x0 dimension mismatch")
    need(cfg.p0.shape == (n, n), "P0 dimension mismatch")
    need(cfg.q_cov.shape == (q, q), "Q dimension mismatch")
    need(cfg.r_cov.shape == (m, m), "R dimension mismatch")
    for name, mat in (("P0", cfg.p0), ("Q", cfg.q_cov), ("R", cfg.r_cov)):
        need(bool(np.all(np.isfinite(mat))), f"{name} has non-finite entries")
        need(bool(np.allclose(mat, mat.T, rtol=1e-12, atol=0.0)), f"{name} is not symmetric")
        need(bool(np.all(np.diag(mat) >= 0.0)), f"{name} has a negative diagonal entry")

    if cfg.model == "custom-linear":
        need(cfg.f is not None and cfg.f.shape == (n, n), "F dimension mismatch")
        need(cfg.g is not None and cfg.g.shape == (n, q), "G dimension mismatch")
        need(cfg.h is not None and cfg.h.shape == (m, n), "H dimension mismatch")


def parse_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    return ScenarioParser(str(path)).parse(text)


def parse_scenario_text(text: str, source: str = "<scenario>") -> ScenarioConfig:
    return ScenarioParser(source).parse(text)


def _block(mat: np.ndarray) -> str:
    return "|\n" + "\n".join("  " + " ".join(repr(float(v)) for v in row) for row in mat)


def _flow(vec: np.ndarray) -> str:
    return "[" + ", ".join(repr(float(v)) for v in vec) + "]"


def serialize_scenario(cfg: ScenarioConfig) -> str:
    """Scenario text that parses back to an equal config."""
    out = [
        f"schema: {cfg.schema}",
        f"name: {json_str(cfg.name)}",
        f"model: {cfg.model}",
        f"dims: {{n: {cfg.n}, q: {cfg.q}, m: {cfg.m}}}",
        f"steps: {cfg.steps}",
        f"seed: {cfg.seed}",
        f"mode: {cfg.mode}",
        f"relinearize: {str(cfg.relinearize).lower()}",
        f"enforce_psd: {str(cfg.enforce_psd).lower()}",
        f"dt: {cfg.dt!r}",
        f"a: {cfg.a!r}",
        f"measure_every: {cfg.measure_every}",
        f"x0: {_flow(cfg.x0)}",
    ]
    if cfg.truth_x0 is not None:
        out.append(f"truth_x0: {_flow(cfg.truth_x0)}")
    for key, mat in (("P0", cfg.p0), ("Q", cfg.q_cov), ("R", cfg.r_cov),
                     ("F", cfg.f), ("G", cfg.g), ("H", cfg.h)):
        if mat is not None and mat.size:
            out.append(f"{key}: {_block(mat)}")
    if cfg.output:
        out.append("output:")
        out.extend(f"  {k}: {json_str(v)}" for k, v in sorted(cfg.output.items()))
    return "\n".join(out) + "\n"


def json_str(value: str) -> str:
    """Double-quoted YAML scalar (JSON string syntax is valid YAML)."""
    return json.dumps(value)
