""" Evaluation quantities: per-group relative state errors,
    pointwise normalized absolute errors and their tabular exports.

    Groups come from the VariableLayout. A group with several members is
    compared through the pointwise Euclidean norm of its member blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import pandas as pd
import torch
from torch import Tensor

from .base import as_tensor
from .exceptions import ConfigError, DegenerateInputError, DimensionMismatchError
from .snapshots import VariableGroup, VariableLayout


@dataclass(frozen=True)
class PointwiseMax:
    """Largest normalized absolute error of a group and where it occurs"""

    value: float
    j: int
    k: int


@dataclass(frozen=True)
class ErrorReport:
    """
    Relative state errors of one FOM/ROM pair.

    Args:
        per_group: relative error per variable group
        average: uniform mean over groups
        pointwise_max: worst normalized absolute error per group
    """

    per_group: dict[str, float]
    average: float
    pointwise_max: dict[str, PointwiseMax] = field(default_factory=dict)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"group": list(self.per_group), "error": list(self.per_group.values())}
        )

    def to_csv(self, path: str) -> pd.DataFrame:
        table = self.to_frame()
        table.to_csv(path, index=False)
        return table


def _check_pair(fom: Tensor, rom: Tensor, layout: VariableLayout):
    if fom.shape != rom.shape:
        raise DimensionMismatchError(
            f"FOM states {tuple(fom.shape)} and ROM states {tuple(rom.shape)} differ"
        )
    if fom.shape[0] != layout.N:
        raise DimensionMismatchError(
            f"states have {fom.shape[0]} rows, layout expects N={layout.N}"
        )


def group_field(states: Tensor, layout: VariableLayout, group: VariableGroup) -> Tensor:
    """Field of one group with shape=(n_x,K), the pointwise norm for combinations"""
    if not group.is_norm_combination:
        return states[layout.block(group.members[0])]
    blocks = torch.stack([states[layout.block(name)] for name in group.members])
    return torch.linalg.vector_norm(blocks, dim=0)


def _group_errors(fom: Tensor, rom: Tensor, layout: VariableLayout, rows=None):
    # pointwise maxima are normalized by the peak of the whole field and
    # report spatial indices of the full grid, also under a mask
    per_group, worst = {}, {}
    for group in layout.variable_groups:
        f = group_field(fom, layout, group)
        g = group_field(rom, layout, group)
        peak = f.abs().max()
        if rows is not None:
            f, g = f[rows], g[rows]
        norm = torch.linalg.norm(f)
        if norm == 0:
            raise DegenerateInputError(
                f"FOM field of group '{group.name}' is identically zero"
            )
        diff = (f - g).abs()
        per_group[group.name] = (torch.linalg.norm(f - g) / norm).item()

        flat = torch.argmax(diff)
        j, k = divmod(int(flat.item()), diff.shape[1])
        value = (diff[j, k] / peak).item()
        if rows is not None:
            j = int(rows[j])
        worst[group.name] = PointwiseMax(value, j, k)
    average = sum(per_group.values()) / len(per_group)
    return ErrorReport(per_group, average, worst)


def relative_state_error(
    fom: Tensor, rom: Tensor, layout: VariableLayout
) -> ErrorReport:
    """||S_fom - S_rom||_F / ||S_fom||_F per variable group, averaged over groups

    Args:
        fom (Tensor): reference states in physical units with shape=(N,K)
        rom (Tensor): approximate states with shape=(N,K)
        layout (VariableLayout): variable layout defining the groups

    Returns:
        ErrorReport: per-group errors, their mean and pointwise maxima
    """
    fom, rom = as_tensor(fom), as_tensor(rom)
    _check_pair(fom, rom, layout)
    return _group_errors(fom, rom, layout)


def pointwise_error(
    fom: Tensor, rom: Tensor, layout: VariableLayout
) -> dict[str, Tensor]:
    """|fom - rom| / max|fom| per group, fields with shape=(n_x,K)"""
    fom, rom = as_tensor(fom), as_tensor(rom)
    _check_pair(fom, rom, layout)
    fields = {}
    for group in layout.variable_groups:
        f = group_field(fom, layout, group)
        g = group_field(rom, layout, group)
        peak = f.abs().max()
        if peak == 0:
            raise DegenerateInputError(
                f"FOM field of group '{group.name}' is identically zero"
            )
        fields[group.name] = (f - g).abs() / peak
    return fields


def masked_error(
    fom: Tensor, rom: Tensor, layout: VariableLayout, mask: Iterable[int]
) -> ErrorReport:
    """Relative state error restricted to the spatial indices in ``mask``

    Pointwise maxima keep full-grid indices j and are normalized by the
    peak of the unmasked FOM field, as in :func:`pointwise_error`.
    """
    rows = sorted(set(int(j) for j in mask))
    if not rows:
        raise ConfigError("mask selects no spatial indices")
    if rows[0] < 0 or rows[-1] >= layout.n_x:
        raise ConfigError(f"mask indices must lie in [0, {layout.n_x})")
    fom, rom = as_tensor(fom), as_tensor(rom)
    _check_pair(fom, rom, layout)
    return _group_errors(fom, rom, layout, torch.tensor(rows, dtype=torch.int64))


def sweep_table(
    parameters: Sequence[Tensor],
    reports: Sequence[ErrorReport],
    names: Sequence[str] = ("mu_q", "mu_p"),
) -> pd.DataFrame:
    """One row per parameter: parameter entries, average and per-group errors,
    and the pointwise maxima"""
    rows = []
    for mu, report in zip(parameters, reports):
        values = as_tensor(mu).reshape(-1).tolist()
        if len(values) > len(names):
            names = [f"mu_{i}" for i in range(len(values))]
        row = dict(zip(names, values))
        row["average_error"] = report.average
        row.update({f"error_{g}": e for g, e in report.per_group.items()})
        row.update(
            {f"max_pointwise_{g}": p.value for g, p in report.pointwise_max.items()}
        )
        rows.append(row)
    return pd.DataFrame(rows)
