""" Command-line front end

    paramrom generate   synthetic snapshot grid
    paramrom train      scaling, POD, regression, interpolant -> model archive
    paramrom sweep      regularization grid search -> sweep.csv
    paramrom predict    interpolate, integrate, reconstruct -> snapshot dirs
    paramrom evaluate   predictions against truth -> errors.csv
    paramrom report     offline / online costs -> costs.csv

    Every command accepts ``--config file.json`` whose keys are the option
    names with underscores (e.g. ``{"n_x": 500, "lambdas": [1e-3, 1e2, 1e-3]}``);
    flags given on the command line win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
import torch

from .archive import load_model, save_model
from .base import DTYPE, as_tensor
from .exceptions import (
    ConfigError,
    DimensionMismatchError,
    ParamRomError,
    SnapshotIOError,
)
from .metrics import relative_state_error, sweep_table
from .opinf import (
    RegularizationConfig,
    grid_search,
    learn_operators,
    logspace_grid,
    prepare_training,
    training_errors,
    write_sweep,
)
from .parametric import (
    ParametricRom,
    Triangulation,
    build_interpolant,
    interpolate_operators,
)
from .pod import (
    SvdConfig,
    compute_basis,
    cumulative_energy,
    projection_error,
    residual_energy,
    write_spectrum,
)
from .rom import (
    RampSignal,
    RomSolution,
    initial_reduced_state,
    integrate,
    reconstruct,
    to_snapshot_set,
)
from .scaling import apply_scaling, default_mean_subtract, fit_scaling
from .snapshots import (
    MANIFEST_NAME,
    SnapshotSet,
    assemble_global,
    load_snapshot_set,
    parameter_key,
    uniform_grid,
    write_snapshot_set,
)
from .synthfom import SynthConfig, generate_grid

logger = logging.getLogger(__name__)

DEFAULT_ENERGY = 0.99998
INDEX_NAME = "index.csv"
MODEL_NAME = "model.h5"
SPECTRUM_NAME = "spectrum.csv"
SWEEP_NAME = "sweep.csv"
TRAINING_ERRORS_NAME = "training_errors.csv"
TIMING_NAME = "timing.csv"
ERRORS_NAME = "errors.csv"
COSTS_NAME = "costs.csv"
PARAMETER_NAMES = ("mu_q", "mu_p")
MATCH_TOL = 1e-9


# ------------------------------------------
# Run configuration
# ------------------------------------------


def parse_vector(text) -> tuple[float, ...]:
    """'0.5,1.25' or a sequence of numbers -> tuple of floats"""
    if isinstance(text, str):
        try:
            return tuple(float(v) for v in text.split(","))
        except ValueError:
            raise ConfigError(f"cannot read parameter vector '{text}'") from None
    return tuple(float(v) for v in text)


def parse_grid(text: str) -> tuple[int, int]:
    """'5x5' -> (5, 5)"""
    try:
        n_q, n_p = (int(v) for v in str(text).lower().split("x"))
    except ValueError:
        raise ConfigError(f"grid shape must look like 5x5, got '{text}'") from None
    if n_q < 1 or n_p < 1:
        raise ConfigError(f"grid shape must be positive, got '{text}'")
    return n_q, n_p


@dataclass(frozen=True)
class RunConfig:
    """
    Settings of one train / sweep / predict run, resolved from flags and
    the optional config file.

    Exactly one of ``energy_threshold`` and ``rank`` selects the basis size
    and at most one of ``lambdas`` and a custom ``grid`` is given; without
    ``lambdas`` the weights come from the grid search.
    """

    datasets: tuple[str, ...] = ()
    train_params: tuple[tuple[float, ...], ...] = ()
    subgrid: Optional[tuple[int, int]] = None
    energy_threshold: Optional[float] = None
    rank: Optional[int] = None
    lambdas: Optional[tuple[float, float, float]] = None
    grid: RegularizationConfig = field(default_factory=RegularizationConfig)
    custom_grid: bool = False
    mean_subtract: Optional[tuple[str, ...]] = None
    svd: SvdConfig = SvdConfig()
    out: str = "."
    seed: int = 0

    def __post_init__(self):
        if self.energy_threshold is not None and self.rank is not None:
            raise ConfigError("give either an energy threshold or a rank, not both")
        if self.energy_threshold is None and self.rank is None:
            object.__setattr__(self, "energy_threshold", DEFAULT_ENERGY)
        if self.lambdas is not None and self.custom_grid:
            raise ConfigError("give either explicit lambdas or a lambda grid, not both")
        if self.lambdas is not None and len(self.lambdas) != 3:
            raise ConfigError(f"lambdas must be a triple, got {self.lambdas}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        grid_spec = getattr(args, "lambda_grid", None)
        points = getattr(args, "grid_points", None)
        if grid_spec is not None:
            try:
                grid = RegularizationConfig(**grid_spec)
            except TypeError as err:
                raise ConfigError(f"malformed lambda grid: {err}") from None
        elif points is not None:
            grid = RegularizationConfig(
                grid1=logspace_grid(1e-3, 1e3, points),
                grid2=logspace_grid(1e0, 1e6, points),
                grid3=logspace_grid(1e-3, 1e3, points),
            )
        else:
            grid = RegularizationConfig()
        lambdas = getattr(args, "lambdas", None)
        svd = SvdConfig(
            oversample=args.oversample,
            power_iters=args.power_iters,
            seed=args.seed,
            deterministic_max_columns=args.deterministic_max_columns,
        )
        return cls(
            datasets=tuple(args.data),
            train_params=tuple(parse_vector(v) for v in (args.train_params or ())),
            subgrid=parse_grid(args.subgrid) if args.subgrid else None,
            energy_threshold=args.energy,
            rank=args.rank,
            lambdas=tuple(float(v) for v in lambdas) if lambdas is not None else None,
            grid=grid,
            custom_grid=grid_spec is not None or points is not None,
            mean_subtract=tuple(args.mean_subtract) if args.mean_subtract is not None else None,
            svd=svd,
            out=args.out,
            seed=args.seed,
        )


# ------------------------------------------
# Dataset discovery and selection
# ------------------------------------------


def discover_datasets(paths: Sequence[str]) -> list[str]:
    """Snapshot directories named directly or one level below ``paths``"""
    found = []
    for path in paths:
        if os.path.isfile(os.path.join(path, MANIFEST_NAME)):
            found.append(path)
        elif os.path.isdir(path):
            for child in sorted(os.listdir(path)):
                candidate = os.path.join(path, child)
                if os.path.isfile(os.path.join(candidate, MANIFEST_NAME)):
                    found.append(candidate)
        else:
            raise SnapshotIOError(f"no snapshot data at '{path}'")
    if not found:
        raise SnapshotIOError(f"no snapshot manifests found under {list(paths)}")
    return found


def load_datasets(paths: Sequence[str]) -> list[SnapshotSet]:
    """Loads every discovered snapshot set, ordered by parameter"""
    sets = [load_snapshot_set(p) for p in discover_datasets(paths)]
    return sorted(sets, key=lambda s: tuple(s.parameter.tolist()))


def _matches(mu: torch.Tensor, target: Sequence[float]) -> bool:
    target = as_tensor(target)
    return mu.shape == target.shape and bool(torch.all((mu - target).abs() <= MATCH_TOL))


def select_training(sets: list[SnapshotSet], config: RunConfig) -> list[SnapshotSet]:
    """Datasets picked by explicit parameters, by an evenly spaced sub-grid,
    or all of them"""
    if config.train_params:
        chosen = []
        for target in config.train_params:
            hits = [s for s in sets if _matches(s.parameter, target)]
            if not hits:
                raise ConfigError(f"no dataset with training parameter {list(target)}")
            chosen.append(hits[0])
        return chosen
    if config.subgrid is not None:
        params = np.array([s.parameter.tolist() for s in sets])
        keep = []
        for axis, count in enumerate(config.subgrid):
            values = np.unique(params[:, axis])
            positions = np.linspace(0, len(values) - 1, count)
            if count > len(values) or not np.allclose(positions, np.round(positions)):
                raise ConfigError(
                    f"cannot take {count} evenly spaced values from the "
                    f"{len(values)} values along parameter axis {axis}"
                )
            keep.append(values[np.round(positions).astype(int)])
        return [
            s
            for s in sets
            if all(np.any(np.isclose(v, keep[i])) for i, v in enumerate(s.parameter.tolist()))
        ]
    return list(sets)


# ------------------------------------------
# Input signals of predictions
# ------------------------------------------


def signal_template(sset: SnapshotSet) -> dict[str, Any]:
    """Ramp description of a training set with its final levels per unit parameter"""
    described = sset.metadata.get("input_signal")
    if described is None:
        return {}
    ramp = RampSignal.from_dict(described)
    template = ramp.to_dict()
    template["parameter_scaled"] = ramp.m == sset.parameter.numel()
    if template["parameter_scaled"]:
        template["final"] = (ramp.final / sset.parameter).tolist()
    return template


def signal_for(template: dict[str, Any], mu: torch.Tensor) -> RampSignal:
    """Ramp of a prediction at ``mu`` from a template"""
    if not template:
        raise ConfigError("no input signal given and the model records none")
    ramp = RampSignal.from_dict(template)
    if template.get("parameter_scaled", False):
        if ramp.m != mu.numel():
            raise DimensionMismatchError(
                f"parameter-scaled ramp has {ramp.m} inputs for d_p={mu.numel()}"
            )
        return RampSignal(ramp.initial, ramp.final * mu, ramp.t_start, ramp.t_end)
    return ramp


# ------------------------------------------
# Commands
# ------------------------------------------


def cmd_generate(args: argparse.Namespace) -> str:
    """Synthetic snapshot grid written below ``args.out``"""
    n_q, n_p = parse_grid(args.grid)
    low, high = args.mu_range
    base = SynthConfig(n_x=args.n_x, n_v=args.n_v, K=args.K, delta=args.delta)
    mu_q = np.linspace(low, high, n_q) if n_q > 1 else np.array([(low + high) / 2])
    mu_p = np.linspace(low, high, n_p) if n_p > 1 else np.array([(low + high) / 2])
    sets = generate_grid(base, mu_q.tolist(), mu_p.tolist(), workers=args.workers)

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for sset in sets:
        key = parameter_key(sset.parameter)
        write_snapshot_set(sset, os.path.join(args.out, key))
        rows.append(
            {
                **dict(zip(PARAMETER_NAMES, sset.parameter.tolist())),
                "directory": key,
                "fom_seconds": sset.metadata["fom_seconds"],
            }
        )
    pd.DataFrame(rows).to_csv(os.path.join(args.out, INDEX_NAME), index=False)
    print(f"wrote {len(sets)} snapshot sets to {args.out}")
    return args.out


def _fit_basis(sets: list[SnapshotSet], config: RunConfig):
    global_data = assemble_global(sets)
    mean_subtract = config.mean_subtract
    if mean_subtract is None:
        mean_subtract = default_mean_subtract(global_data.layout)
    scaling = fit_scaling(global_data, mean_subtract)
    X = apply_scaling(scaling, global_data.matrix)
    basis = compute_basis(X, config.rank, config.energy_threshold, config.svd)
    return scaling, basis


def cmd_train(args: argparse.Namespace) -> str:
    """Trains a parametric model and writes its archive"""
    config = RunConfig.from_args(args)
    start = time.perf_counter()
    sets = select_training(load_datasets(config.datasets), config)
    params = torch.stack([s.parameter for s in sets])
    Triangulation(params)
    logger.info("training on %d parameters", len(sets))

    scaling, basis = _fit_basis(sets, config)
    os.makedirs(config.out, exist_ok=True)
    write_spectrum(basis.singular_values, os.path.join(config.out, SPECTRUM_NAME))
    training = prepare_training(sets, basis, scaling)

    if config.lambdas is not None:
        reg = config.grid.with_triple(config.lambdas)
    else:
        best, table = grid_search(training, basis, scaling, config.grid)
        write_sweep(table, os.path.join(config.out, SWEEP_NAME))
        reg = config.grid.with_triple(best)
    operator_sets = learn_operators(training, reg)
    rom = build_interpolant(params, operator_sets)
    offline = time.perf_counter() - start

    reports = training_errors(operator_sets, training, basis, scaling)
    first = sets[0]
    metadata = {
        "regularization": list(reg.triple),
        "t0": first.times[0].item(),
        "delta": first.delta,
        "K": first.K,
        "input_signal": signal_template(first),
        "offline_seconds": offline,
        "energy_threshold": config.energy_threshold,
        "cumulative_energy": cumulative_energy(basis.singular_values, basis.r),
        "residual_energy": residual_energy(basis.singular_values, basis.r),
        "training_errors": [rep.average for rep in reports],
    }
    rom = rom.with_model(
        basis=basis,
        scaling=scaling,
        layout=first.layout,
        reference_state=first.states[:, 0],
        metadata=metadata,
    )
    path = save_model(rom, os.path.join(config.out, MODEL_NAME))

    table = sweep_table([s.parameter for s in sets], reports, PARAMETER_NAMES)
    table.to_csv(os.path.join(config.out, TRAINING_ERRORS_NAME), index=False)
    print(f"r = {basis.r}")
    print(f"cumulative energy = {metadata['cumulative_energy']:.8f}")
    print(f"residual energy = {metadata['residual_energy']:.3e}")
    print("lambdas = ({:.3g}, {:.3g}, {:.3g})".format(*reg.triple))
    for sset, report in zip(sets, reports):
        print(f"training error at {sset.parameter.tolist()}: {report.average:.4e}")
    print(f"offline time = {offline:.3f} s")
    return path


def cmd_sweep(args: argparse.Namespace) -> str:
    """Regularization grid search on the training data"""
    config = RunConfig.from_args(args)
    if config.lambdas is not None:
        raise ConfigError("sweep searches the lambda grid, drop the explicit lambdas")
    sets = select_training(load_datasets(config.datasets), config)
    scaling, basis = _fit_basis(sets, config)
    training = prepare_training(sets, basis, scaling)
    best, table = grid_search(training, basis, scaling, config.grid)
    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, SWEEP_NAME)
    write_sweep(table, path)
    row = table[
        (table.lambda1 == best[0]) & (table.lambda2 == best[1]) & (table.lambda3 == best[2])
    ].iloc[0]
    print(f"{len(table)} candidates, {int(table.diverged.sum())} diverged")
    print("best lambdas = ({:.3g}, {:.3g}, {:.3g})".format(*best))
    print(f"best training error = {row.average_error:.4e}")
    return path


def prediction_parameters(args: argparse.Namespace) -> list[torch.Tensor]:
    params = [as_tensor(parse_vector(v)) for v in (args.mu or ())]
    if args.mu_from:
        params += [s.parameter for s in load_datasets(args.mu_from)]
    if args.mu_grid:
        n_q, n_p = parse_grid(args.mu_grid)
        low, high = args.mu_range
        for q in np.linspace(low, high, n_q):
            for p in np.linspace(low, high, n_p):
                params.append(torch.tensor([q, p], dtype=DTYPE))
    if not params:
        raise ConfigError("no prediction parameters, use --mu, --mu-from or --mu-grid")
    return params


def cmd_predict(args: argparse.Namespace) -> str:
    """Predicts full states at new parameters"""
    rom = load_model(args.model)
    meta = rom.metadata
    K = args.K or int(meta["K"])
    times = uniform_grid(float(meta["t0"]), float(meta["delta"]), K)
    template = meta.get("input_signal", {})
    if args.signal:
        with open(args.signal, "r") as f:
            template = json.load(f)

    if args.initial:
        s0_full = load_snapshot_set(args.initial).states[:, 0]
    else:
        s0_full = rom.reference_state
    s0 = initial_reduced_state(s0_full, rom.basis, rom.scaling)

    params = prediction_parameters(args)
    # refuse out-of-hull parameters before any integration
    for mu in params:
        rom.triangulation.locate(mu)

    os.makedirs(args.out, exist_ok=True)
    rows = []
    for mu in params:
        signal = signal_for(template, mu)
        start = time.perf_counter()
        ops = interpolate_operators(rom, mu)
        solution = integrate(ops, s0, signal, times)
        online = time.perf_counter() - start

        start = time.perf_counter()
        states = reconstruct(solution, rom.basis, rom.scaling)
        recon = time.perf_counter() - start

        solution = RomSolution(
            times,
            solution.reduced_states,
            states,
            {
                "input_signal": signal.to_dict(),
                "online_seconds": online,
                "reconstruct_seconds": recon,
            },
        )
        sset = to_snapshot_set(solution, mu, signal.sample(times), rom.layout)
        write_snapshot_set(sset, os.path.join(args.out, parameter_key(mu)))
        rows.append(
            {
                **dict(zip(PARAMETER_NAMES, mu.tolist())),
                "online_seconds": online,
                "reconstruct_seconds": recon,
            }
        )
        logger.info("predicted %s in %.4f s (+%.4f s reconstruction)", mu.tolist(), online, recon)
    pd.DataFrame(rows).to_csv(os.path.join(args.out, TIMING_NAME), index=False)
    print(f"wrote {len(params)} predictions to {args.out}")
    return args.out


def cmd_evaluate(args: argparse.Namespace) -> str:
    """Error sweep of predictions against reference data"""
    predictions = load_datasets([args.predictions])
    truth = {parameter_key(s.parameter): s for s in load_datasets(args.truth)}
    rom: Optional[ParametricRom] = load_model(args.model) if args.model else None

    params, reports, roles, proj = [], [], [], []
    for pred in predictions:
        key = parameter_key(pred.parameter)
        if key not in truth:
            raise ConfigError(f"no reference data for prediction {pred.parameter.tolist()}")
        ref = truth[key]
        if ref.layout != pred.layout or ref.K != pred.K:
            raise ConfigError(
                f"prediction {pred.parameter.tolist()} does not match its reference "
                f"(layout or K={pred.K} vs {ref.K})"
            )
        params.append(pred.parameter)
        reports.append(relative_state_error(ref.states, pred.states, ref.layout))
        if rom is not None:
            is_train = any(_matches(mu, pred.parameter.tolist()) for mu in rom.train_params)
            roles.append("train" if is_train else "test")
            scaled = apply_scaling(rom.scaling, ref.states)
            proj.append(projection_error(scaled, rom.basis))

    table = sweep_table(params, reports, PARAMETER_NAMES)
    os.makedirs(args.out, exist_ok=True)
    if rom is not None:
        table.insert(len(PARAMETER_NAMES), "role", roles)
        table["projection_error"] = proj
        if args.spectrum:
            write_spectrum(rom.basis.singular_values, os.path.join(args.out, SPECTRUM_NAME))
    path = os.path.join(args.out, ERRORS_NAME)
    table.to_csv(path, index=False)

    print(f"max average error = {table.average_error.max():.4e}")
    if rom is not None:
        test = table[table.role == "test"]
        train = table[table.role == "train"]
        if len(test):
            worst, best = test.average_error.idxmax(), test.average_error.idxmin()
            print(f"max test error = {test.average_error[worst]:.4e} at {params[worst].tolist()}")
            print(f"min test error = {test.average_error[best]:.4e} at {params[best].tolist()}")
        if len(train):
            print(f"max training error = {train.average_error.max():.4e}")
        print(f"max projection error = {table.projection_error.max():.4e}")
    return path


def cmd_report(args: argparse.Namespace) -> str:
    """Offline / online cost table"""
    sets = load_datasets(args.data)
    fom = [s.metadata["fom_seconds"] for s in sets if "fom_seconds" in s.metadata]
    if not fom:
        raise ConfigError("the datasets record no FOM timings")
    rom = load_model(args.model)
    timing_path = os.path.join(args.predictions, TIMING_NAME)
    if not os.path.isfile(timing_path):
        raise SnapshotIOError(f"missing prediction timings '{timing_path}'")
    timing = pd.read_csv(timing_path)

    fom_seconds = float(np.mean(fom))
    offline = float(rom.metadata["offline_seconds"])
    online = float(timing.online_seconds.mean())
    costs = pd.DataFrame(
        [
            {
                "fom_seconds": fom_seconds,
                "offline_seconds": offline,
                "online_seconds": online,
                "speedup": fom_seconds / online,
                "breakeven_runs": offline / fom_seconds,
            }
        ]
    )
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, COSTS_NAME)
    costs.to_csv(path, index=False)
    print(costs.to_string(index=False))
    return path


# ------------------------------------------
# Parser
# ------------------------------------------


# checked after the config file is merged, so either source may supply them
REQUIRED = {
    "train": ("data",),
    "sweep": ("data",),
    "predict": ("model",),
    "evaluate": ("predictions", "truth"),
    "report": ("data", "model", "predictions"),
}
LIST_OPTIONS = ("data", "truth")


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed of randomized steps")
    common.add_argument("--threads", type=int, default=None, help="torch threads")
    common.add_argument("-v", "--verbose", action="count", default=0)
    return common


def _training_options(parser: argparse.ArgumentParser):
    parser.add_argument("--data", nargs="+", help="snapshot directories")
    parser.add_argument("--train-params", nargs="+", help="training parameters like 0.5,1.0")
    parser.add_argument("--subgrid", help="evenly spaced training sub-grid like 3x3")
    parser.add_argument("--energy", type=float, help=f"energy threshold (default {DEFAULT_ENERGY})")
    parser.add_argument("--rank", type=int, help="explicit POD rank")
    parser.add_argument("--lambdas", type=float, nargs=3, help="explicit lambda1 lambda2 lambda3")
    parser.add_argument("--lambda-grid", type=json.loads, help="JSON with grid1, grid2, grid3")
    parser.add_argument("--grid-points", type=int, help="log-spaced values per lambda")
    parser.add_argument("--mean-subtract", nargs="*", help="mean-subtracted variables")
    parser.add_argument("--oversample", type=int, default=SvdConfig.oversample)
    parser.add_argument("--power-iters", type=int, default=SvdConfig.power_iters)
    parser.add_argument(
        "--deterministic-max-columns", type=int, default=SvdConfig.deterministic_max_columns
    )


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="paramrom", description="Parametric operator inference reduced-order models"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    commands = {}

    p = sub.add_parser("generate", parents=[common], help="synthetic snapshot grid")
    p.add_argument("--grid", default="5x5", help="parameter grid like 5x5")
    p.add_argument("--mu-range", type=float, nargs=2, default=(0.5, 1.5))
    p.add_argument("--n-x", type=int, default=SynthConfig.n_x)
    p.add_argument("--n-v", type=int, default=SynthConfig.n_v)
    p.add_argument("--K", type=int, default=SynthConfig.K)
    p.add_argument("--delta", type=float, default=SynthConfig.delta)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_generate)
    commands["generate"] = p

    p = sub.add_parser("train", parents=[common], help="train a parametric model")
    _training_options(p)
    p.set_defaults(handler=cmd_train)
    commands["train"] = p

    p = sub.add_parser("sweep", parents=[common], help="regularization grid search")
    _training_options(p)
    p.set_defaults(handler=cmd_sweep)
    commands["sweep"] = p

    p = sub.add_parser("predict", parents=[common], help="predict at new parameters")
    p.add_argument("--model", help="model archive")
    p.add_argument("--mu", nargs="+", help="parameters like 0.75,1.25")
    p.add_argument("--mu-from", nargs="+", help="predict at the parameters of these datasets")
    p.add_argument("--mu-grid", help="parameter grid like 5x5 over --mu-range")
    p.add_argument("--mu-range", type=float, nargs=2, default=(0.5, 1.5))
    p.add_argument("--signal", help="JSON ramp description of the inputs")
    p.add_argument("--initial", help="snapshot set whose first column starts the prediction")
    p.add_argument("--K", type=int, help="output count, the training K by default")
    p.set_defaults(handler=cmd_predict)
    commands["predict"] = p

    p = sub.add_parser("evaluate", parents=[common], help="errors against reference data")
    p.add_argument("--predictions")
    p.add_argument("--truth", nargs="+")
    p.add_argument("--model", help="model archive for roles and projection errors")
    p.add_argument("--spectrum", action="store_true", help="also write the spectrum CSV")
    p.set_defaults(handler=cmd_evaluate)
    commands["evaluate"] = p

    p = sub.add_parser("report", parents=[common], help="offline and online costs")
    p.add_argument("--data", nargs="+")
    p.add_argument("--model")
    p.add_argument("--predictions")
    p.set_defaults(handler=cmd_report)
    commands["report"] = p
    return parser, commands


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parses flags, merging an optional JSON config file underneath them"""
    parser, commands = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config, "r") as f:
                config = json.load(f)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file '{args.config}' is not valid JSON: {err}") from None
        if not isinstance(config, dict):
            raise ConfigError(f"config file '{args.config}' must hold a JSON object")
        unknown = sorted(set(config) - set(vars(args)) - {"handler", "command"})
        if unknown:
            raise ConfigError(f"unknown keys in config file '{args.config}': {unknown}")
        commands[args.command].set_defaults(**config)
        args = parser.parse_args(argv)
    for name in REQUIRED.get(args.command, ()):
        value = getattr(args, name)
        if value is None or value == []:
            raise ConfigError(
                f"'{args.command}' needs --{name.replace('_', '-')} on the command line "
                "or in the config file"
            )
        if name in LIST_OPTIONS and isinstance(value, str):
            setattr(args, name, [value])
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
        logging.basicConfig(
            level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
        )
        if args.threads:
            torch.set_num_threads(args.threads)
        start = time.perf_counter()
        args.handler(args)
        logger.info("%s finished in %.3f s", args.command, time.perf_counter() - start)
    except ParamRomError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
