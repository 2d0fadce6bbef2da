"""
dkmpc Checkpoints

Versioned binary container for both model families. Layout (little-endian):

    header   4s magic b"KPMC", uint16 version, uint16 family (1 deep, 2 rbf)
    deep     uint32 state_dim, control_dim, latent_dim, n_encoder_layers,
             n_decoder_layers; uint32 widths of each net (layers + 1 each);
             per layer uint8 has_bias, uint8 activation (0 identity, 1 relu)
    rbf      uint32 state_dim, control_dim, n_rbf (0 = identity lifting)
    common   uint8 has_stats, uint64 payload_size
    payload  float64 values, row-major:
             deep: per layer weights then bias, A, B, stats
             rbf:  gamma, centers, A, B, stats
             stats: state_min, state_max, control_min, control_max

Loading distinguishes version, truncation and dimension errors.
"""

import struct
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from ..data.normalization import NormalizationStats
from ..exceptions import CheckpointVersionError, DimensionMismatchError, TruncatedCheckpointError
from ..nn import Activation, DenseLayer, Mlp
from ..utils import get_logger
from .base import LatentModel
from .deep import KoopmanModel
from .rbf import EdmdModel, IdentityLifting, RbfLifting

logger = get_logger(__name__)

MAGIC = b"KPMC"
FORMAT_VERSION = 1
FAMILY_DEEP = 1
FAMILY_RBF = 2

_HEADER = struct.Struct("<4sHH")
_DEEP_DIMS = struct.Struct("<IIIII")
_RBF_DIMS = struct.Struct("<III")
_TRAILER = struct.Struct("<BQ")


def _floats(*arrays: np.ndarray) -> bytes:
    return b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)


def _stats_arrays(stats: Optional[NormalizationStats]) -> List[np.ndarray]:
    if stats is None:
        return []
    return [stats.state_min, stats.state_max, stats.control_min, stats.control_max]


def _encode_deep(model: KoopmanModel) -> bytes:
    out = [_DEEP_DIMS.pack(
        model.state_dim, model.control_dim, model.latent_dim, len(model.encoder.layers), len(model.decoder.layers)
    )]
    arrays = []
    for net in (model.encoder, model.decoder):
        out.append(struct.pack(f"<{len(net.widths)}I", *net.widths))
    for net in (model.encoder, model.decoder):
        for layer in net.layers:
            out.append(struct.pack("<BB", int(layer.has_bias), layer.activation.code))
            arrays.append(layer.weights)
            if layer.has_bias:
                arrays.append(layer.bias)
    arrays += [model.A, model.B] + _stats_arrays(model.norm_stats)
    payload = _floats(*arrays)
    out.append(_TRAILER.pack(int(model.norm_stats is not None), len(payload)))
    out.append(payload)
    return b"".join(out)


def _encode_rbf(model: EdmdModel) -> bytes:
    lifting = model.lifting
    if isinstance(lifting, RbfLifting):
        n_rbf, arrays = lifting.n_rbf, [np.array([lifting.gamma]), lifting.centers]
    elif isinstance(lifting, IdentityLifting):
        n_rbf, arrays = 0, []
    else:
        raise TypeError(f"cannot serialize lifting {type(lifting).__name__}")
    arrays += [model.A, model.B] + _stats_arrays(model.norm_stats)
    payload = _floats(*arrays)
    return b"".join([
        _RBF_DIMS.pack(model.state_dim, model.control_dim, n_rbf),
        _TRAILER.pack(int(model.norm_stats is not None), len(payload)),
        payload,
    ])


def checkpoint_bytes(model: LatentModel) -> bytes:
    """Serialize a model to the checkpoint container."""
    if isinstance(model, KoopmanModel):
        family, body = FAMILY_DEEP, _encode_deep(model)
    elif isinstance(model, EdmdModel):
        family, body = FAMILY_RBF, _encode_rbf(model)
    else:
        raise TypeError(f"cannot checkpoint model of type {type(model).__name__}")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, family) + body


def save_checkpoint(model: LatentModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(model))
    logger.info(f"Saved {type(model).__name__} checkpoint to {path}")
    return path


class _Reader:
    """Sequential reader raising checkpoint errors that name the file."""

    def __init__(self, data: bytes, path: str):
        self.data = data
        self.path = path
        self.offset = 0

    @property
    def remaining(self) -> int:
        return len(self.data) - self.offset

    def unpack(self, fmt: Union[str, struct.Struct]) -> Tuple:
        st = fmt if isinstance(fmt, struct.Struct) else struct.Struct(fmt)
        if self.remaining < st.size:
            raise TruncatedCheckpointError(
                f"file ends at byte {len(self.data)} inside the header (need {st.size} more bytes at {self.offset})",
                path=self.path,
            )
        values = st.unpack_from(self.data, self.offset)
        self.offset += st.size
        return values

    def floats(self, *shape: int) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        values = np.frombuffer(self.data, dtype="<f8", count=count, offset=self.offset).astype(np.float64)
        self.offset += 8 * count
        return values.reshape(shape) if shape else values

    def payload(self, has_stats: bool, declared: int, expected_floats: int, state_dim: int, control_dim: int):
        if has_stats:
            expected_floats += 2 * (state_dim + control_dim)
        expected = 8 * expected_floats
        if declared != expected:
            raise DimensionMismatchError(
                f"payload declares {declared} bytes but the dimension header implies {expected}", path=self.path
            )
        if self.remaining < declared:
            raise TruncatedCheckpointError(
                f"payload truncated: {self.remaining} of {declared} bytes present", path=self.path
            )
        if self.remaining > declared:
            raise DimensionMismatchError(f"{self.remaining - declared} trailing bytes after payload", path=self.path)

    def stats(self, has_stats: bool, state_dim: int, control_dim: int) -> Optional[NormalizationStats]:
        if not has_stats:
            return None
        return NormalizationStats(
            self.floats(state_dim), self.floats(state_dim), self.floats(control_dim), self.floats(control_dim)
        )


def _decode_deep(reader: _Reader) -> KoopmanModel:
    state_dim, control_dim, latent_dim, n_enc, n_dec = reader.unpack(_DEEP_DIMS)
    if n_enc < 1 or n_dec < 1:
        raise DimensionMismatchError(f"layer counts {n_enc}/{n_dec} must be positive", path=reader.path)
    enc_widths = reader.unpack(f"<{n_enc + 1}I")
    dec_widths = reader.unpack(f"<{n_dec + 1}I")
    if (enc_widths[0], enc_widths[-1], dec_widths[0], dec_widths[-1]) != (
        state_dim, latent_dim, latent_dim, state_dim
    ):
        raise DimensionMismatchError(
            f"widths {list(enc_widths)} / {list(dec_widths)} disagree with state dim {state_dim} "
            f"and latent dim {latent_dim}",
            path=reader.path,
        )
    flags = [reader.unpack("<BB") for _ in range(n_enc + n_dec)]
    has_stats, declared = reader.unpack(_TRAILER)

    expected = latent_dim * latent_dim + latent_dim * control_dim
    shapes = []
    for widths in (enc_widths, dec_widths):
        for i in range(len(widths) - 1):
            shapes.append((widths[i + 1], widths[i]))
    for (out_dim, in_dim), (has_bias, _) in zip(shapes, flags):
        expected += out_dim * in_dim + (out_dim if has_bias else 0)
    reader.payload(bool(has_stats), declared, expected, state_dim, control_dim)

    layers = []
    for (out_dim, in_dim), (has_bias, code) in zip(shapes, flags):
        try:
            activation = Activation.from_code(code)
        except ValueError as exc:
            raise DimensionMismatchError(str(exc), path=reader.path) from exc
        weights = reader.floats(out_dim, in_dim)
        bias = reader.floats(out_dim) if has_bias else None
        layers.append(DenseLayer(weights, bias, activation))
    a = reader.floats(latent_dim, latent_dim)
    b = reader.floats(latent_dim, control_dim)
    stats = reader.stats(bool(has_stats), state_dim, control_dim)
    return KoopmanModel(Mlp(layers[:n_enc]), Mlp(layers[n_enc:]), Mlp.linear(a), Mlp.linear(b), stats)


def _decode_rbf(reader: _Reader) -> EdmdModel:
    state_dim, control_dim, n_rbf = reader.unpack(_RBF_DIMS)
    has_stats, declared = reader.unpack(_TRAILER)
    lifted = state_dim + n_rbf
    expected = lifted * lifted + lifted * control_dim + ((1 + n_rbf * state_dim) if n_rbf else 0)
    reader.payload(bool(has_stats), declared, expected, state_dim, control_dim)
    if n_rbf:
        gamma = float(reader.floats(1)[0])
        lifting = RbfLifting(reader.floats(n_rbf, state_dim), gamma)
    else:
        lifting = IdentityLifting(state_dim)
    a = reader.floats(lifted, lifted)
    b = reader.floats(lifted, control_dim)
    return EdmdModel(lifting, a, b, reader.stats(bool(has_stats), state_dim, control_dim))


def load_checkpoint(path: Union[str, Path]) -> LatentModel:
    """
    Load a model saved by save_checkpoint.

    Raises CheckpointVersionError, TruncatedCheckpointError or
    DimensionMismatchError; a missing file raises FileNotFoundError.
    """
    path = Path(path)
    reader = _Reader(path.read_bytes(), str(path))
    magic, version, family = reader.unpack(_HEADER)
    if magic != MAGIC:
        raise CheckpointVersionError(f"bad magic {magic!r}, expected {MAGIC!r}", path=str(path))
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"format version {version} is not supported (expected {FORMAT_VERSION})", path=str(path)
        )
    if family == FAMILY_DEEP:
        model = _decode_deep(reader)
    elif family == FAMILY_RBF:
        model = _decode_rbf(reader)
    else:
        raise CheckpointVersionError(f"unknown model family {family}", path=str(path))
    logger.debug(f"Loaded {type(model).__name__} from {path}")
    return model
