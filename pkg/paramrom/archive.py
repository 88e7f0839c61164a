""" HDF5 model archive of a trained ParametricRom.

    Layout of the file:
        /                 header attributes: format, version, ordering,
                          r, m, d_p, d, N, layout (JSON), metadata (JSON)
        /basis            V_r with shape=(N,r)
        /singular_values  retained spectrum
        /scaling_shifts   shift per variable
        /scaling_scales   scale per variable
        /train_params     training parameters with shape=(d,d_p)
        /operators        operator matrices [c A H B] with shape=(d,r,d(r,m))
        /reference_state  initial physical state with shape=(N,)
    Every array carries the sha256 digest of its little-endian float64 bytes.
"""

import hashlib
import json
import logging
import os

import numpy as np
import tables
import torch

from .exceptions import ArchiveCorruptedError, ArchiveError, ArchiveVersionError
from .functional.features import FEATURE_ORDERING, FeatureDims
from .operators import ReducedOperatorSet
from .parametric import ParametricRom, Triangulation
from .pod import PodBasis
from .scaling import ScalingTransform
from .snapshots import VariableLayout

logger = logging.getLogger(__name__)

FORMAT_TAG = "paramrom-model"
FORMAT_VERSION = 1
ARRAY_DTYPE = np.dtype("<f8")


def _digest(array: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(array, dtype=ARRAY_DTYPE).tobytes()).hexdigest()


def _put(h5, name: str, tensor: torch.Tensor):
    array = np.ascontiguousarray(tensor.detach().cpu().numpy(), dtype=ARRAY_DTYPE)
    node = h5.create_array(h5.root, name, obj=array)
    node.attrs.sha256 = _digest(array)


def _get(h5, name: str) -> torch.Tensor:
    try:
        node = h5.get_node(h5.root, name)
        array = np.asarray(node.read(), dtype=ARRAY_DTYPE)
        digest = str(node.attrs.sha256)
    except (tables.NoSuchNodeError, AttributeError) as err:
        raise ArchiveCorruptedError(f"archive lacks array '{name}': {err}") from None
    if _digest(array) != digest:
        raise ArchiveCorruptedError(f"checksum mismatch of array '{name}'")
    return torch.from_numpy(array.astype(np.float64))


def save_model(rom: ParametricRom, path: str) -> str:
    """Writes ``rom`` into a single HDF5 file at ``path``"""
    if rom.basis is None or rom.scaling is None or rom.layout is None:
        raise ArchiveError("only complete models with basis and scaling are archived")
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)

    reference = rom.reference_state
    if reference is None:
        reference = rom.scaling.shift_field

    with tables.open_file(path, mode="w", title=FORMAT_TAG) as h5:
        attrs = h5.root._v_attrs
        attrs.format = FORMAT_TAG
        attrs.version = FORMAT_VERSION
        attrs.ordering = FEATURE_ORDERING
        attrs.r = rom.r
        attrs.m = rom.m
        attrs.d_p = rom.d_p
        attrs.d = rom.d
        attrs.N = rom.basis.N
        attrs.layout = json.dumps(rom.layout.to_dict())
        attrs.mean_subtracted = json.dumps(list(rom.scaling.mean_subtracted))
        attrs.metadata = json.dumps(rom.metadata)

        _put(h5, "basis", rom.basis.basis)
        _put(h5, "singular_values", rom.basis.singular_values)
        _put(h5, "scaling_shifts", rom.scaling.shifts)
        _put(h5, "scaling_scales", rom.scaling.scales)
        _put(h5, "train_params", rom.train_params)
        _put(
            h5,
            "operators",
            torch.stack([ops.operator_matrix() for ops in rom.operator_sets]),
        )
        _put(h5, "reference_state", reference)
    logger.info("wrote model archive %s (d=%d, r=%d)", path, rom.d, rom.r)
    return path


def load_model(path: str) -> ParametricRom:
    """Reads and validates an archive written by :func:`save_model`"""
    if not os.path.isfile(path):
        raise ArchiveError(f"missing model archive '{path}'")
    if os.path.getsize(path) == 0:
        raise ArchiveCorruptedError(f"model archive '{path}' is empty")
    try:
        h5 = tables.open_file(path, mode="r")
    except (tables.HDF5ExtError, OSError) as err:
        raise ArchiveCorruptedError(f"cannot open model archive '{path}': {err}") from None

    with h5:
        attrs = h5.root._v_attrs
        try:
            tag = str(attrs.format)
            version = int(attrs.version)
            ordering = str(attrs.ordering)
        except AttributeError:
            raise ArchiveCorruptedError(f"archive '{path}' has no header") from None
        if tag != FORMAT_TAG or version != FORMAT_VERSION:
            raise ArchiveVersionError(
                f"archive '{path}' is {tag} v{version}, expected "
                f"{FORMAT_TAG} v{FORMAT_VERSION}"
            )
        if ordering != FEATURE_ORDERING:
            raise ArchiveVersionError(
                f"archive '{path}' uses feature ordering '{ordering}', "
                f"expected '{FEATURE_ORDERING}'"
            )
        try:
            r, m, d, N = int(attrs.r), int(attrs.m), int(attrs.d), int(attrs.N)
            layout = VariableLayout.from_dict(json.loads(str(attrs.layout)))
            mean_subtracted = json.loads(str(attrs.mean_subtracted))
            metadata = json.loads(str(attrs.metadata))
        except (AttributeError, ValueError) as err:
            raise ArchiveCorruptedError(f"archive '{path}' header: {err}") from None

        basis = _get(h5, "basis")
        sigma = _get(h5, "singular_values")
        shifts = _get(h5, "scaling_shifts")
        scales = _get(h5, "scaling_scales")
        train_params = _get(h5, "train_params")
        operators = _get(h5, "operators")
        reference = _get(h5, "reference_state")

    if basis.shape != (N, r) or operators.shape[:2] != (d, r):
        raise ArchiveCorruptedError(
            f"archive '{path}' arrays disagree with its header (N={N}, r={r}, d={d})"
        )
    dims = FeatureDims(r, m)
    operator_sets = tuple(ReducedOperatorSet.from_matrix(O, dims) for O in operators)
    return ParametricRom(
        train_params=train_params,
        operator_sets=operator_sets,
        triangulation=Triangulation(train_params),
        basis=PodBasis(basis, sigma),
        scaling=ScalingTransform(layout, shifts, scales, mean_subtracted),
        layout=layout,
        reference_state=reference,
        metadata=metadata,
    )
