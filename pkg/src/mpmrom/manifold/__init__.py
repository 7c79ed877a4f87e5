from .anchor import fit_anchor_latent, gauss_newton, initial_latent_fit
from .checkpoint import ModelBundle, load_model, save_model
from .decoder import (
    CorrectionFields,
    DecoderNetwork,
    ScalingSpec,
    decode,
    decode_with_gradient,
    default_decoder,
    deformation_gradient,
    latent_jacobian,
    manifold_velocity,
)
from .encoder import EncoderNetwork, build_encoder, encode, encoder_forward, flatten_snapshots
from .invert import invert_map, invert_map_batch
from .mlp import DenseLayer

__all__ = [
    "CorrectionFields",
    "DecoderNetwork",
    "DenseLayer",
    "EncoderNetwork",
    "ScalingSpec",
    "build_encoder",
    "decode",
    "decode_with_gradient",
    "default_decoder",
    "deformation_gradient",
    "encode",
    "encoder_forward",
    "fit_anchor_latent",
    "flatten_snapshots",
    "gauss_newton",
    "initial_latent_fit",
    "invert_map",
    "invert_map_batch",
    "latent_jacobian",
    "load_model",
    "manifold_velocity",
    "ModelBundle",
    "save_model",
]
