""" Snapshot data model, on-disk format and assembly of
    per-parameter trajectories into the global data matrix.

    On disk a snapshot set is a directory holding
        manifest.json   human-readable description (parameter, layout, grid)
        states.bin      raw little-endian float64, column-major, shape=(N,K)
        inputs.bin      raw little-endian float64, column-major, shape=(m,K)
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional, Sequence

import numpy as np
import torch
from torch import Tensor

from .base import DTYPE, ArrayLike, as_tensor
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    LayoutMismatchError,
    SnapshotIOError,
    UnknownVariableError,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
STATES_NAME = "states.bin"
INPUTS_NAME = "inputs.bin"
PAYLOAD_DTYPE = np.dtype("<f8")
UNIFORM_RTOL = 1e-12


@dataclass(frozen=True)
class Variable:
    """One state variable occupying a contiguous block of n_x rows."""

    name: str
    units: str = ""


@dataclass(frozen=True)
class VariableGroup:
    """
    Grouping of variables used for error reporting.

    A group with a single member reports that variable on its own. A group
    with several members is a norm combination: the members are combined
    pointwise into their Euclidean norm before any error is computed.
    """

    name: str
    members: tuple[str, ...]

    @property
    def is_norm_combination(self) -> bool:
        return len(self.members) > 1


@dataclass(frozen=True)
class VariableLayout:
    """
    Variable-major layout of a full state vector: all n_x values of the
    first variable, then all n_x values of the second one, and so on.

    Args:
        variables: ordered (name, units) pairs of the n_v state variables
        n_x: spatial degrees of freedom per variable
        variable_groups: error-reporting groups, defaults to one group per
            variable
    """

    variables: tuple[Variable, ...]
    n_x: int
    variable_groups: tuple[VariableGroup, ...] = ()

    def __post_init__(self):
        if self.n_x < 1:
            raise ConfigError(f"n_x must be positive, got {self.n_x}")
        if len(self.variables) == 0:
            raise ConfigError("layout needs at least one variable")
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate variable names in {names}")

        if not self.variable_groups:
            groups = tuple(VariableGroup(v.name, (v.name,)) for v in self.variables)
            object.__setattr__(self, "variable_groups", groups)

        combined = set()
        for group in self.variable_groups:
            if len(group.members) == 0:
                raise ConfigError(f"group '{group.name}' has no members")
            for member in group.members:
                if member not in names:
                    raise UnknownVariableError(
                        f"group '{group.name}' references unknown variable '{member}'"
                    )
                if group.is_norm_combination:
                    if member in combined:
                        raise ConfigError(
                            f"variable '{member}' belongs to more than one "
                            "norm-combination group"
                        )
                    combined.add(member)

    @property
    def n_v(self) -> int:
        return len(self.variables)

    @property
    def N(self) -> int:
        return self.n_x * self.n_v

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownVariableError(
                f"unknown variable '{name}', layout has {self.names}"
            ) from None

    def block(self, name: str) -> slice:
        """Row slice occupied by the variable ``name``"""
        i = self.index(name)
        return slice(i * self.n_x, (i + 1) * self.n_x)

    def blocks(self) -> Iterator[tuple[str, slice]]:
        for v in self.variables:
            yield v.name, self.block(v.name)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_x": self.n_x,
            "variables": [{"name": v.name, "units": v.units} for v in self.variables],
            "variable_groups": [
                {"name": g.name, "members": list(g.members)}
                for g in self.variable_groups
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> VariableLayout:
        try:
            variables = tuple(
                Variable(v["name"], v.get("units", "")) for v in data["variables"]
            )
            groups = tuple(
                VariableGroup(g["name"], tuple(g["members"]))
                for g in data.get("variable_groups", [])
            )
            return cls(variables, int(data["n_x"]), groups)
        except (KeyError, TypeError) as err:
            raise ConfigError(f"malformed layout description: {err}") from None


def uniform_grid(t0: float, delta: float, K: int) -> Tensor:
    """Uniform time grid t_k = t0 + k * delta with shape=(K,)"""
    return t0 + delta * torch.arange(K, dtype=DTYPE)


def check_uniform(times: Tensor) -> float:
    """Validates a strictly increasing uniform grid and returns its step"""
    if times.ndim != 1:
        raise DimensionMismatchError(f"times must be 1D, got shape {tuple(times.shape)}")
    if times.numel() < 2:
        return 0.0
    steps = times[1:] - times[:-1]
    if torch.any(steps <= 0):
        raise ConfigError("time grid must be strictly increasing")
    delta = (times[-1] - times[0]).item() / (times.numel() - 1)
    deviation = (steps - delta).abs().max().item()
    if deviation > UNIFORM_RTOL * delta:
        raise ConfigError(
            f"time grid is not uniform: step deviation {deviation:.3e} "
            f"exceeds {UNIFORM_RTOL:g} * delta"
        )
    return delta


@dataclass(frozen=True, eq=False)
class SnapshotSet:
    """
    Full-state trajectory of one parameter.

    Args:
        parameter: parameter vector mu with shape=(d_p,)
        times: uniform time grid with shape=(K,)
        states: full states with shape=(N,K), column k is s(t_k; mu)
        inputs: input signals with shape=(m,K)
        layout: variable layout of the state rows
        metadata: free-form JSON-serializable information (e.g. FOM timings)
    """

    parameter: Tensor
    times: Tensor
    states: Tensor
    inputs: Tensor
    layout: VariableLayout
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("parameter", "times", "states", "inputs"):
            object.__setattr__(self, name, as_tensor(getattr(self, name)))
        if self.parameter.ndim != 1:
            raise DimensionMismatchError("parameter must be a 1D vector")
        if self.states.ndim != 2 or self.inputs.ndim != 2:
            raise DimensionMismatchError("states and inputs must be matrices")
        K = self.times.numel()
        if self.states.shape[1] != K or self.inputs.shape[1] != K:
            raise DimensionMismatchError(
                f"states {tuple(self.states.shape)} and inputs "
                f"{tuple(self.inputs.shape)} must have K={K} columns"
            )
        if self.states.shape[0] != self.layout.N:
            raise DimensionMismatchError(
                f"states have {self.states.shape[0]} rows, layout expects "
                f"N={self.layout.N}"
            )
        check_uniform(self.times)

    @property
    def K(self) -> int:
        return self.times.numel()

    @property
    def N(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return self.inputs.shape[0]

    @property
    def delta(self) -> float:
        return check_uniform(self.times)

    def variable(self, name: str) -> Tensor:
        """States of one variable with shape=(n_x,K)"""
        return self.states[self.layout.block(name)]


@dataclass(frozen=True, eq=False)
class GlobalDataMatrix:
    """
    Column concatenation [S(mu_1) S(mu_2) ... S(mu_d)] of training states.

    Args:
        matrix: concatenated states with shape=(N, sum_l K_l)
        column_map: (parameter index l, time index k) of every column with
            shape=(sum_l K_l, 2)
        spans: column range [start, stop) of every parameter
        layout: shared variable layout
    """

    matrix: Tensor
    column_map: Tensor
    spans: tuple[tuple[int, int], ...]
    layout: VariableLayout

    @property
    def d(self) -> int:
        return len(self.spans)

    def columns_of(self, index: int) -> Tensor:
        """States of parameter ``index`` with shape=(N,K_l)"""
        start, stop = self.spans[index]
        return self.matrix[:, start:stop]


def assemble_global(sets: Sequence[SnapshotSet]) -> GlobalDataMatrix:
    """Concatenates the states of ``sets`` in list order

    Args:
        sets (Sequence[SnapshotSet]): training trajectories sharing one layout

    Returns:
        GlobalDataMatrix: matrix with shape=(N, sum_l K_l) and its column map
    """
    if len(sets) == 0:
        raise ConfigError("cannot assemble an empty list of snapshot sets")
    layout = sets[0].layout
    for i, sset in enumerate(sets):
        if sset.layout != layout:
            raise LayoutMismatchError(
                f"snapshot set {i} has layout {sset.layout.names} "
                f"(n_x={sset.layout.n_x}), expected {layout.names} "
                f"(n_x={layout.n_x})"
            )

    spans, maps = [], []
    start = 0
    for ell, sset in enumerate(sets):
        spans.append((start, start + sset.K))
        start += sset.K
        k = torch.arange(sset.K, dtype=torch.int64)
        maps.append(torch.stack([torch.full_like(k, ell), k], dim=1))

    matrix = torch.cat([sset.states for sset in sets], dim=1)
    column_map = torch.cat(maps, dim=0)
    logger.debug("assembled global data matrix with shape %s", tuple(matrix.shape))
    return GlobalDataMatrix(matrix, column_map, tuple(spans), layout)


# ------------------------------------------
# Reader and writer
# ------------------------------------------


def _read_payload(path: str, rows: int, cols: int, what: str) -> Tensor:
    if not os.path.isfile(path):
        raise SnapshotIOError(f"missing {what} payload '{path}'")
    flat = np.fromfile(path, dtype=PAYLOAD_DTYPE)
    if rows == 0:
        if flat.size != 0:
            raise DimensionMismatchError(f"{what} payload '{path}' should be empty")
        return torch.zeros((0, cols), dtype=DTYPE)
    if flat.size % rows != 0 or flat.size // rows != cols:
        found = flat.size / rows
        raise DimensionMismatchError(
            f"{what} payload '{path}' holds {found:g} columns of {rows} rows, "
            f"manifest declares K={cols}"
        )
    # column-major on disk: K consecutive blocks of ``rows`` values
    array = flat.reshape(cols, rows).T.astype(np.float64)
    return torch.from_numpy(np.ascontiguousarray(array))


def _write_payload(path: str, matrix: Tensor):
    array = matrix.detach().cpu().numpy().astype(PAYLOAD_DTYPE, copy=False)
    np.ascontiguousarray(array.T).tofile(path)


def _resolve_manifest(manifest_path: str) -> str:
    if os.path.isdir(manifest_path):
        manifest_path = os.path.join(manifest_path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise SnapshotIOError(f"missing manifest '{manifest_path}'")
    return manifest_path


def read_manifest(manifest_path: str) -> dict[str, Any]:
    """Parses a manifest file (or the manifest inside a directory)"""
    manifest_path = _resolve_manifest(manifest_path)
    try:
        with open(manifest_path, "r") as f:
            return json.load(f)
    except json.JSONDecodeError as err:
        raise ConfigError(f"manifest '{manifest_path}' is not valid JSON: {err}")


def load_snapshot_set(manifest_path: str) -> SnapshotSet:
    """Loads and validates one snapshot set

    Args:
        manifest_path (str): manifest file, or directory containing ``manifest.json``

    Returns:
        SnapshotSet: validated trajectory
    """
    manifest_path = _resolve_manifest(manifest_path)
    manifest = read_manifest(manifest_path)
    root = os.path.dirname(os.path.abspath(manifest_path))

    try:
        layout = VariableLayout.from_dict(manifest)
        K = int(manifest["K"])
        m = int(manifest["m"])
        delta = float(manifest["delta"])
        parameter = manifest["parameter"]
        states_file = manifest.get("states", STATES_NAME)
        inputs_file = manifest.get("inputs", INPUTS_NAME)
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"manifest '{manifest_path}' is incomplete: {err}") from None

    if "times" in manifest:
        times = as_tensor(manifest["times"])
        if times.numel() != K:
            raise DimensionMismatchError(
                f"manifest lists {times.numel()} times but declares K={K}"
            )
        step = check_uniform(times)
        if K > 1 and abs(step - delta) > UNIFORM_RTOL * delta:
            raise ConfigError(f"time grid step {step} disagrees with delta={delta}")
    else:
        times = uniform_grid(float(manifest.get("t0", 0.0)), delta, K)

    states = _read_payload(os.path.join(root, states_file), layout.N, K, "states")
    inputs = _read_payload(os.path.join(root, inputs_file), m, K, "inputs")

    sset = SnapshotSet(
        parameter=parameter,
        times=times,
        states=states,
        inputs=inputs,
        layout=layout,
        metadata=dict(manifest.get("metadata", {})),
    )
    logger.debug("loaded snapshot set %s with N=%d, K=%d", manifest_path, sset.N, K)
    return sset


def write_snapshot_set(
    sset: SnapshotSet,
    directory: str,
    metadata: Optional[dict[str, Any]] = None,
) -> str:
    """Writes ``sset`` as manifest + binary payloads into ``directory``

    Returns:
        str: path of the written manifest
    """
    os.makedirs(directory, exist_ok=True)
    _write_payload(os.path.join(directory, STATES_NAME), sset.states)
    _write_payload(os.path.join(directory, INPUTS_NAME), sset.inputs)

    manifest = {
        "parameter": sset.parameter.tolist(),
        **sset.layout.to_dict(),
        "m": sset.m,
        "K": sset.K,
        "t0": sset.times[0].item(),
        "delta": sset.delta,
        "times": sset.times.tolist(),
        "states": STATES_NAME,
        "inputs": INPUTS_NAME,
        "metadata": {**sset.metadata, **(metadata or {})},
    }
    path = os.path.join(directory, MANIFEST_NAME)
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
    return path


def parameter_key(parameter: ArrayLike) -> str:
    """Directory-friendly name of a parameter vector, e.g. ``mu_0.5000_1.2500``"""
    values = as_tensor(parameter).reshape(-1).tolist()
    return "mu_" + "_".join(f"{v:.4f}" for v in values)
