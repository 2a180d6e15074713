"""Map 299x299x3 image tensors to 1000-component feature vectors.

Two interchangeable backends implement the contract: a pretrained network
consumed as an opaque ONNX file, and a fully specified stub (block-average
pooling, a fixed LCG-generated projection, tanh) that stands in for the
network in offline tests. Feature vectors can be cached to CSV; values are
written with 9 significant digits, which round-trips float32 exactly.
"""

from __future__ import annotations

import functools
import hashlib
from pathlib import Path

import numpy as np

from .errors import (
    BackendFailure,
    CacheFormatError,
    ModelLoadError,
    ShapeMismatch,
    WrongInputShape,
)
from .preprocess import IMAGE_SIDE

FEATURE_DIM = 1000
FEATURE_DTYPE = np.float32

# Stub-backend constants: Knuth's 64-bit LCG and the pooled grid size.
_LCG_MULTIPLIER = 6364136223846793005
_LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1
STUB_POOL_SIDE = 16
STUB_POOL_DIM = STUB_POOL_SIDE * STUB_POOL_SIDE * 3

NORMALIZATION_MODES = ("unit_interval", "symmetric")


def validate_feature_vector(vec: np.ndarray) -> np.ndarray:
    arr = np.asarray(vec, dtype=FEATURE_DTYPE).reshape(-1)
    if arr.shape[0] != FEATURE_DIM:
        raise ShapeMismatch(f"feature vector must have {FEATURE_DIM} components, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise BackendFailure("feature vector contains non-finite components")
    return arr


def embed(backend, img: np.ndarray) -> np.ndarray:
    """Embed one image tensor; validates the 299x299x3 input contract and
    the 1000-component finite output contract."""
    arr = np.asarray(img, dtype=np.float32)
    if arr.shape != (IMAGE_SIDE, IMAGE_SIDE, 3):
        raise WrongInputShape(
            f"backend input must be {IMAGE_SIDE}x{IMAGE_SIDE}x3, got shape {arr.shape}"
        )
    return validate_feature_vector(backend.embed(arr))


def _lcg_uniform_stream(seed: int, count: int) -> np.ndarray:
    """The stub's fixed pseudo-random stream: step the 64-bit LCG and map
    each new state to [-1, 1) via the top 31 bits."""
    x = int(seed) & _MASK64
    out = np.empty(count, dtype=np.float64)
    for k in range(count):
        x = (_LCG_MULTIPLIER * x + _LCG_INCREMENT) & _MASK64
        out[k] = (x >> 33) / 2**30 - 1.0
    return out


@functools.lru_cache(maxsize=8)
def stub_projection_matrix(seed: int) -> np.ndarray:
    """The stub's fixed 1000x768 projection, entries generated row-major."""
    matrix = _lcg_uniform_stream(seed, FEATURE_DIM * STUB_POOL_DIM)
    matrix = matrix.reshape(FEATURE_DIM, STUB_POOL_DIM)
    matrix.flags.writeable = False
    return matrix


def block_average_pool(img: np.ndarray, out_side: int = STUB_POOL_SIDE) -> np.ndarray:
    """Average-pool (H, W, 3) down to (out_side, out_side, 3) using the
    uniform partition with block boundaries floor(i*size/out_side)."""
    arr = np.asarray(img, dtype=np.float64)
    h, w = arr.shape[:2]
    y_bounds = [h * i // out_side for i in range(out_side + 1)]
    x_bounds = [w * i // out_side for i in range(out_side + 1)]
    pooled = np.empty((out_side, out_side, 3), dtype=np.float64)
    for by in range(out_side):
        for bx in range(out_side):
            block = arr[y_bounds[by] : y_bounds[by + 1], x_bounds[bx] : x_bounds[bx + 1]]
            pooled[by, bx] = block.mean(axis=(0, 1))
    return pooled


class StubBackend:
    """Deterministic offline stand-in for the pretrained network.

    Pipeline: block-average pool to 16x16x3, flatten row-major, multiply
    by the fixed LCG projection matrix, tanh componentwise.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self.backend_id = f"stub:{self.seed}"
        self._matrix = stub_projection_matrix(self.seed)

    def embed(self, img: np.ndarray) -> np.ndarray:
        pooled = block_average_pool(img).reshape(-1)
        return np.tanh(self._matrix @ pooled).astype(FEATURE_DTYPE)


def stub_backend(seed: int) -> StubBackend:
    return StubBackend(seed)


def _static_dims(shape) -> list[int | None]:
    return [d if isinstance(d, int) and d > 0 else None for d in shape]


class PretrainedBackend:
    """Frozen pretrained network consumed as a single-input, single-output
    ONNX file with a 1000-component output head.

    ``normalization`` selects the pixel mapping fed to the network:
    ``symmetric`` maps v -> 2v-1 (the Inception convention),
    ``unit_interval`` passes [0, 1] through unchanged.
    """

    def __init__(self, model_file: str | Path, normalization: str = "symmetric"):
        if normalization not in NORMALIZATION_MODES:
            raise ValueError(f"normalization must be one of {NORMALIZATION_MODES}, got {normalization!r}")
        self.normalization = normalization

        path = Path(model_file)
        if not path.is_file():
            raise ModelLoadError(f"model file not found: {path}")
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.backend_id = f"pretrained:{digest}"

        try:
            import onnxruntime
        except ImportError as exc:
            raise ModelLoadError(
                "the pretrained backend needs onnxruntime; install the "
                "'lesionclf[pretrained]' extra"
            ) from exc
        try:
            self._session = onnxruntime.InferenceSession(
                str(path), providers=["CPUExecutionProvider"]
            )
        except Exception as exc:
            raise ModelLoadError(f"cannot load ONNX model {path}: {exc}") from exc

        inputs = self._session.get_inputs()
        outputs = self._session.get_outputs()
        if len(inputs) != 1 or len(outputs) != 1:
            raise ModelLoadError(
                f"model must have one input and one output, got {len(inputs)}/{len(outputs)}"
            )
        self._input_name = inputs[0].name
        self._output_name = outputs[0].name

        in_dims = _static_dims(inputs[0].shape)
        if len(in_dims) != 4:
            raise ModelLoadError(f"model input must be 4-D, got shape {inputs[0].shape}")
        if in_dims[3] == 3:
            self._channels_first = False
        elif in_dims[1] == 3:
            self._channels_first = True
        else:
            raise ModelLoadError(
                f"cannot detect channel layout from declared input shape {inputs[0].shape}"
            )

        out_dims = _static_dims(outputs[0].shape)
        known = [d for d in out_dims[1:] if d is not None]
        if len(known) == len(out_dims) - 1:
            declared = int(np.prod(known)) if known else 1
            if declared != FEATURE_DIM:
                raise ShapeMismatch(
                    f"model output has {declared} components, expected {FEATURE_DIM}"
                )

    def embed(self, img: np.ndarray) -> np.ndarray:
        x = np.asarray(img, dtype=np.float32)
        if self.normalization == "symmetric":
            x = np.float32(2.0) * x - np.float32(1.0)
        batch = x[None]
        if self._channels_first:
            batch = batch.transpose(0, 3, 1, 2)
        try:
            (out,) = self._session.run([self._output_name], {self._input_name: batch})
        except Exception as exc:
            raise BackendFailure(f"model inference failed: {exc}") from exc
        out = np.asarray(out).reshape(-1)
        if out.shape[0] != FEATURE_DIM:
            raise ShapeMismatch(f"model output has {out.shape[0]} components, expected {FEATURE_DIM}")
        return out.astype(FEATURE_DTYPE)


def pretrained_backend(model_file: str | Path, normalization: str = "symmetric") -> PretrainedBackend:
    return PretrainedBackend(model_file, normalization)


_CACHE_HEADER = "image_id," + ",".join(f"f{i}" for i in range(FEATURE_DIM))


def write_feature_cache(path: str | Path, entries, backend_id: str) -> None:
    """Write (image_id, vector) pairs as CSV behind a ``# backend=`` line."""
    seen: set[str] = set()
    rows = []
    for image_id, vec in entries:
        if image_id in seen:
            raise CacheFormatError(f"duplicate image_id {image_id!r} in cache entries")
        seen.add(image_id)
        arr = validate_feature_vector(vec)
        rows.append(image_id + "," + ",".join(f"{float(v):.9g}" for v in arr))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# backend={backend_id}\n")
        fh.write(_CACHE_HEADER + "\n")
        for row in rows:
            fh.write(row + "\n")


def read_feature_cache(path: str | Path) -> tuple[str, list[tuple[str, np.ndarray]]]:
    """Read a feature cache; exact inverse of :func:`write_feature_cache`."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\r\n")
        if not first.startswith("# backend="):
            raise CacheFormatError("line 1: expected a '# backend=<id>' comment line")
        backend_id = first[len("# backend=") :]
        header = fh.readline().rstrip("\r\n")
        if header != _CACHE_HEADER:
            raise CacheFormatError(f"line 2: expected header image_id,f0,...,f{FEATURE_DIM - 1}")

        entries: list[tuple[str, np.ndarray]] = []
        seen: set[str] = set()
        for line_num, line in enumerate(fh, start=3):
            line = line.rstrip("\r\n")
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != FEATURE_DIM + 1:
                raise CacheFormatError(
                    f"line {line_num}: expected {FEATURE_DIM + 1} columns, got {len(parts)}"
                )
            image_id = parts[0]
            if image_id in seen:
                raise CacheFormatError(f"line {line_num}: duplicate image_id {image_id!r}")
            seen.add(image_id)
            try:
                values = np.array(parts[1:], dtype=np.float64).astype(FEATURE_DTYPE)
            except ValueError as exc:
                raise CacheFormatError(f"line {line_num}: {exc}") from None
            if not np.isfinite(values).all():
                raise CacheFormatError(f"line {line_num}: non-finite feature value")
            entries.append((image_id, values))
    return backend_id, entries
