"""Model files: UTF-8 JSON holding both networks and the anchor state.

Layout (format tag "MPMNET1", version 1):
  dim, latent_dim, particle_count
  decoder: layer list (activation, weight rows, bias)
  encoder: conv list (weight, bias, stride) + dense head
  scaling: x_min / x_max / out_mean / out_std
  x_hat0, v_hat0, lambda_f, lambda_v, metadata

Floats are emitted by Python's shortest-round-trip repr, which preserves
every float64 bit pattern on read-back (up to 17 significant digits).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, FormatError, ShapeError
from .decoder import CorrectionFields, DecoderNetwork, ScalingSpec
from .encoder import ConvLayer, EncoderNetwork
from .mlp import ACT_CODES, DenseLayer

MAGIC = "MPMNET1"
VERSION = 1


@dataclass
class ModelBundle:
    decoder: DecoderNetwork
    encoder: EncoderNetwork
    corrections: CorrectionFields
    particle_count: int
    lambda_f: float
    lambda_v: float
    metadata: dict


def _dense_to_json(l: DenseLayer) -> dict:
    return {"activation": l.activation, "weight": l.weight.tolist(), "bias": l.bias.tolist()}


def _dense_from_json(obj: dict) -> DenseLayer:
    try:
        act = obj["activation"]
        if act not in ACT_CODES:
            raise FormatError(f"unknown activation tag {act!r}")
        return DenseLayer(np.array(obj["weight"], dtype=np.float64), np.array(obj["bias"], dtype=np.float64), act)
    except KeyError as e:
        raise FormatError(f"dense layer missing field {e}") from e


def save_model(path, bundle: ModelBundle) -> None:
    dec, enc, corr = bundle.decoder, bundle.encoder, bundle.corrections
    if corr.vbar is not None:
        raise ConfigError("prescribed initial-velocity fields are not serializable; bake them into v_hat0")
    doc = {
        "format": MAGIC,
        "version": VERSION,
        "dim": dec.dim,
        "latent_dim": dec.latent_dim,
        "particle_count": int(bundle.particle_count),
        "decoder": {"layers": [_dense_to_json(l) for l in dec.layers]},
        "encoder": {
            "in_len": enc.in_len,
            "conv": [{"weight": c.weight.tolist(), "bias": c.bias.tolist(), "stride": c.stride} for c in enc.conv_layers],
            "fc": [_dense_to_json(l) for l in enc.fc_layers],
        },
        "scaling": {
            "x_min": dec.scaling.x_min.tolist(),
            "x_max": dec.scaling.x_max.tolist(),
            "out_mean": dec.scaling.out_mean.tolist(),
            "out_std": dec.scaling.out_std.tolist(),
        },
        "x_hat0": corr.x_hat0.tolist(),
        "v_hat0": corr.v_hat0.tolist(),
        "lambda_f": float(bundle.lambda_f),
        "lambda_v": float(bundle.lambda_v),
        "metadata": bundle.metadata,
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def load_model(path) -> ModelBundle:
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise FormatError(f"not a model file: {e}") from e
    if not isinstance(doc, dict) or doc.get("format") != MAGIC:
        raise FormatError("missing MPMNET1 format tag")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported model version {doc.get('version')!r}")
    try:
        s = doc["scaling"]
        scaling = ScalingSpec(
            np.array(s["x_min"], dtype=np.float64),
            np.array(s["x_max"], dtype=np.float64),
            np.array(s["out_mean"], dtype=np.float64),
            np.array(s["out_std"], dtype=np.float64),
        )
        dec = DecoderNetwork(
            [_dense_from_json(o) for o in doc["decoder"]["layers"]],
            int(doc["dim"]),
            int(doc["latent_dim"]),
            scaling,
        )
        e = doc["encoder"]
        enc = EncoderNetwork(
            [
                ConvLayer(np.array(c["weight"], dtype=np.float64), np.array(c["bias"], dtype=np.float64), int(c["stride"]))
                for c in e["conv"]
            ],
            [_dense_from_json(o) for o in e["fc"]],
            int(e["in_len"]),
            int(doc["latent_dim"]),
        )
        corr = CorrectionFields(
            np.array(doc["x_hat0"], dtype=np.float64),
            np.array(doc["v_hat0"], dtype=np.float64),
        )
        return ModelBundle(
            decoder=dec,
            encoder=enc,
            corrections=corr,
            particle_count=int(doc["particle_count"]),
            lambda_f=float(doc["lambda_f"]),
            lambda_v=float(doc["lambda_v"]),
            metadata=doc.get("metadata", {}),
        )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError, ConfigError, ShapeError) as err:
        raise FormatError(f"malformed model file: {err}") from err
