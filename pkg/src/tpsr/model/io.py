"""Reading and writing model files.

A model is stored as two files: a binary container holding the numbers
and a JSON sidecar holding everything needed to use them (the feature
map, action labels and provenance). The container is the magic string
`TPSR1`, four little-endian u32 dimensions `(n, actions, kernels,
feature_dim)` and then the little-endian float64 arrays `b1`, `b_inf`,
`U` and the operators, each row-major.
"""

import json
import logging
from pathlib import Path

import numpy as np

from tpsr.errors import FeatureMapMismatch, FormatError
from tpsr.features.kernels import FeatureMap
from tpsr.model.tpsr import TpsrModel

MAGIC = b"TPSR1"


def sidecar_path(path: str | Path) -> Path:
    """Return the location of the JSON sidecar for a binary artefact."""

    path = Path(path)

    return path.with_name(path.name + ".json")


def write_json(payload: dict, path: str | Path) -> None:
    """Write JSON deterministically: sorted keys, fixed indentation."""

    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, indent=2)
        f.write("\n")


def read_json(path: str | Path) -> dict:
    """Read a JSON sidecar, raising `FormatError` if it is unreadable."""

    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise FormatError(f"Cannot read sidecar {path}: {e}") from e


def model_to_bytes(model: TpsrModel) -> bytes:
    """Pack the numbers of a model into the binary container."""

    dims = np.array(
        [model.rank_n, model.num_actions, model.num_kernels, model.feature_dim], dtype="<u4"
    )
    arrays = (model.b1, model.b_inf, model.projection_u, model.operators)

    return MAGIC + dims.tobytes() + b"".join(a.astype("<f8").tobytes() for a in arrays)


def model_from_bytes(payload: bytes, actions=(), feature_map_ref: str = "") -> TpsrModel:
    """Unpack a binary container written by `model_to_bytes`."""

    if payload[: len(MAGIC)] != MAGIC:
        raise FormatError("Not a model file: bad magic string")

    offset = len(MAGIC)
    if len(payload) < offset + 16:
        raise FormatError("Model file is truncated in its header")
    n, num_actions, num_kernels, feature_dim = np.frombuffer(
        payload, dtype="<u4", count=4, offset=offset
    ).astype(int)
    offset += 16

    sizes = {
        "b1": (n,),
        "b_inf": (n,),
        "projection_u": (feature_dim, n),
        "operators": (num_actions, num_kernels, n, n),
    }
    expected = offset + 8 * sum(int(np.prod(shape)) for shape in sizes.values())
    if len(payload) != expected:
        raise FormatError(f"Model file has {len(payload)} bytes; expected {expected}")

    arrays = {}
    for name, shape in sizes.items():
        count = int(np.prod(shape))
        arrays[name] = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        arrays[name] = arrays[name].reshape(shape)
        offset += 8 * count

    return TpsrModel(**arrays, actions=tuple(actions), feature_map_ref=feature_map_ref)


def save_model(
    model: TpsrModel,
    path: str | Path,
    feature_map: FeatureMap | None = None,
    provenance: dict | None = None,
) -> None:
    """
    Write a model and its sidecar to disk.

    Parameters
    ----------
    model : TpsrModel
        Model to save.
    path : str or pathlib.Path
        Location of the binary container. The sidecar is written next
        to it with a `.json` suffix appended.
    feature_map : FeatureMap, optional
        Feature map the model was trained with. Its checksum must equal
        `model.feature_map_ref`.
    provenance : dict, optional
        Free-form metadata, such as seeds and configuration values.
    """

    if feature_map is not None and feature_map.ref != model.feature_map_ref:
        raise FeatureMapMismatch("The feature map does not match the model's reference")

    with open(path, "wb") as f:
        f.write(model_to_bytes(model))

    sidecar = {
        "actions": list(model.actions),
        "feature_map": None if feature_map is None else feature_map.to_dict(),
        "feature_map_ref": model.feature_map_ref,
        "provenance": provenance or {},
    }
    write_json(sidecar, sidecar_path(path))

    logging.info(f"Saved rank-{model.rank_n} model to {path}")


def load_model(path: str | Path) -> tuple[TpsrModel, FeatureMap | None, dict]:
    """
    Read a model written by `save_model`.

    Parameters
    ----------
    path : str or pathlib.Path
        Location of the binary container.

    Returns
    -------
    model : TpsrModel
        The model.
    feature_map : FeatureMap or None
        The feature map stored in the sidecar, if any.
    sidecar : dict
        The full sidecar contents.

    Raises
    ------
    FormatError
        If either file is malformed.
    FeatureMapMismatch
        If the stored feature map does not match the stored checksum.
    """

    try:
        with open(path, "rb") as f:
            payload = f.read()
    except OSError as e:
        raise FormatError(f"Cannot read model file {path}: {e}") from e

    sidecar = read_json(sidecar_path(path))
    ref = sidecar.get("feature_map_ref", "")
    model = model_from_bytes(payload, sidecar.get("actions", ()), ref)

    feature_map = None
    if sidecar.get("feature_map") is not None:
        feature_map = FeatureMap.from_dict(sidecar["feature_map"])
        if feature_map.ref != ref:
            raise FeatureMapMismatch(f"Feature map checksum in {path} does not match its payload")

    return model, feature_map, sidecar
