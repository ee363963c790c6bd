"""Single-file .npz artifact bundling the whole fitted pipeline.

One JSON metadata blob plus exact float64 arrays: every parameter round
trips bit-exactly, so detection results are reproducible across hosts.
"""

import json

import numpy as np

from .dataio import ChannelSchema, MinMaxScaler
from .detectors import detector_from_state, detector_state
from .forecaster import model_from_state, model_state
from .pipeline import FittedPipeline, PipelineSettings

FORMAT_VERSION = 1


def _settings_to_dict(s: PipelineSettings) -> dict:
    return {
        "window": s.window,
        "conv_filters": list(s.conv_filters),
        "kernel_size": s.kernel_size,
        "dense_units": list(s.dense_units),
        "dropout": s.dropout,
        "learning_rate": s.learning_rate,
        "detector": s.detector,
        "beta": s.beta,
        "lag": s.lag,
        "nu": s.nu,
        "gamma": s.gamma,
        "augment_fraction": s.augment_fraction,
    }


def settings_from_dict(d: dict) -> PipelineSettings:
    return PipelineSettings(
        window=int(d["window"]),
        conv_filters=tuple(d["conv_filters"]),
        kernel_size=int(d["kernel_size"]),
        dense_units=tuple(d["dense_units"]),
        dropout=float(d["dropout"]),
        learning_rate=float(d["learning_rate"]),
        detector=d["detector"],
        beta=float(d["beta"]),
        lag=int(d["lag"]),
        nu=float(d["nu"]),
        gamma=float(d["gamma"]),
        augment_fraction=float(d["augment_fraction"]),
    )


def save_pipeline(path, fitted: FittedPipeline) -> None:
    model_meta, model_arrays = model_state(fitted.model)
    det_meta, det_arrays = detector_state(fitted.detector)
    meta = {
        "format_version": FORMAT_VERSION,
        "settings": _settings_to_dict(fitted.settings),
        "schema": {"names": list(fitted.schema.names), "kinds": list(fitted.schema.kinds)},
        "train_delta": fitted.train_delta,
        "train_sigma": fitted.train_sigma,
        "model": model_meta,
        "detector": det_meta,
    }
    arrays = {
        "scaler_mins": fitted.scaler.mins,
        "scaler_maxs": fitted.scaler.maxs,
    }
    for k, v in model_arrays.items():
        arrays[f"model_{k}"] = v
    for k, v in det_arrays.items():
        arrays[f"det_{k}"] = v
    np.savez(path, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)


def load_pipeline(path) -> FittedPipeline:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"unsupported artifact format version {meta.get('format_version')}"
            )
        arrays = {k: data[k] for k in data.files if k != "meta"}
    model_arrays = {
        k[len("model_") :]: v for k, v in arrays.items() if k.startswith("model_")
    }
    det_arrays = {k[len("det_") :]: v for k, v in arrays.items() if k.startswith("det_")}
    model = model_from_state(meta["model"], model_arrays)
    detector = detector_from_state(meta["detector"], det_arrays)
    schema = ChannelSchema(
        names=tuple(meta["schema"]["names"]), kinds=tuple(meta["schema"]["kinds"])
    )
    return FittedPipeline(
        settings=settings_from_dict(meta["settings"]),
        schema=schema,
        scaler=MinMaxScaler(mins=arrays["scaler_mins"], maxs=arrays["scaler_maxs"]),
        model=model,
        detector=detector,
        train_delta=float(meta["train_delta"]),
        train_sigma=float(meta["train_sigma"]),
        history=None,
    )
