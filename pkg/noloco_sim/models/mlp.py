"""Stage-partitioned tanh MLP with hand-written reverse mode.

Parameters of a stage live in one flat vector so that optimizer state
(slow weights, fast weights, momentum) is a plain vector per worker. A
``StageLayout`` knows how to view that vector as per-block (W, b) pairs.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidParameterError, ShapeError, StateError
from ..numerics.rng import RngStream


class Activation(str, Enum):
  """Block activation."""
  TANH = "tanh"
  IDENTITY = "identity"


@dataclass(frozen=True)
class BlockSpec:
  """One dense layer: out = act(x @ W + b)."""
  in_dim: int
  out_dim: int
  activation: Activation = Activation.TANH

  @property
  def size(self) -> int:
    return self.in_dim * self.out_dim + self.out_dim


@dataclass(frozen=True)
class StageLayout:
  """Consecutive blocks evaluated by one pipeline stage."""
  blocks: Tuple[BlockSpec, ...]

  def __post_init__(self):
    if not self.blocks:
      raise InvalidParameterError("a stage needs at least one block")
    for prev, nxt in zip(self.blocks, self.blocks[1:]):
      if prev.out_dim != nxt.in_dim:
        raise ShapeError(f"block dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}")

  @property
  def size(self) -> int:
    return sum(block.size for block in self.blocks)

  @property
  def in_dim(self) -> int:
    return self.blocks[0].in_dim

  @property
  def out_dim(self) -> int:
    return self.blocks[-1].out_dim

  def unpack(self, params: np.ndarray) -> List[Tuple[np.ndarray, np.ndarray]]:
    """View a flat parameter vector as [(W, b), ...] (no copies)."""
    params = np.asarray(params)
    if params.shape != (self.size,):
      raise ShapeError(f"expected {self.size} parameters, got shape {params.shape}")
    views = []
    offset = 0
    for block in self.blocks:
      w_size = block.in_dim * block.out_dim
      weight = params[offset:offset + w_size].reshape(block.in_dim, block.out_dim)
      offset += w_size
      bias = params[offset:offset + block.out_dim]
      offset += block.out_dim
      views.append((weight, bias))
    return views

  def pack(self, pairs: Sequence[Tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Inverse of ``unpack``."""
    if len(pairs) != len(self.blocks):
      raise ShapeError(f"expected {len(self.blocks)} blocks, got {len(pairs)}")
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in pairs])

  def init_params(self, rng: RngStream, scale: float = 1.0) -> np.ndarray:
    """Gaussian weights with variance scale / in_dim, zero biases."""
    pairs = []
    for index, block in enumerate(self.blocks):
      std = scale / np.sqrt(block.in_dim)
      weight = std * rng.spawn(index).normal((block.in_dim, block.out_dim))
      pairs.append((weight, np.zeros(block.out_dim)))
    return self.pack(pairs)


@dataclass
class StageActivations:
  """Per-block inputs and outputs cached by a forward pass."""
  layout: StageLayout
  inputs: List[np.ndarray] = field(default_factory=list)
  outputs: List[np.ndarray] = field(default_factory=list)
  consumed: bool = False


@dataclass(frozen=True)
class StagedMLP:
  """MLP architecture split into pipeline stages.

  Hidden blocks use tanh; the final block is linear. ``partition`` gives the
  number of blocks per stage; by default hidden blocks are split as evenly as
  possible and the output block joins the last stage.
  """
  layer_sizes: Tuple[int, ...]
  num_stages: int = 1
  partition: Optional[Tuple[int, ...]] = None
  stages: Tuple[StageLayout, ...] = field(init=False, repr=False)

  def __post_init__(self):
    sizes = tuple(int(s) for s in self.layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
      raise InvalidParameterError(f"invalid layer sizes {sizes}")
    object.__setattr__(self, "layer_sizes", sizes)

    n_blocks = len(sizes) - 1
    blocks = [
      BlockSpec(
        sizes[i],
        sizes[i + 1],
        Activation.IDENTITY if i == n_blocks - 1 else Activation.TANH,
      )
      for i in range(n_blocks)
    ]

    if self.partition is None:
      partition = self.default_partition(n_blocks, self.num_stages)
    else:
      partition = tuple(int(p) for p in self.partition)
    if len(partition) != self.num_stages or sum(partition) != n_blocks or min(partition) < 1:
      raise InvalidParameterError(
        f"partition {partition} does not split {n_blocks} blocks into {self.num_stages} stages"
      )
    object.__setattr__(self, "partition", partition)

    stages = []
    start = 0
    for count in partition:
      stages.append(StageLayout(tuple(blocks[start:start + count])))
      start += count
    object.__setattr__(self, "stages", tuple(stages))

  @staticmethod
  def default_partition(n_blocks: int, num_stages: int) -> Tuple[int, ...]:
    hidden = n_blocks - 1
    if num_stages < 1 or (num_stages > 1 and hidden < num_stages):
      raise InvalidParameterError(
        f"cannot split {hidden} hidden layers into {num_stages} stages"
      )
    if num_stages == 1:
      return (n_blocks,)
    counts = [len(chunk) for chunk in np.array_split(np.arange(hidden), num_stages)]
    counts[-1] += 1
    return tuple(counts)

  @classmethod
  def build(
    cls,
    in_dim: int,
    hidden: Sequence[int],
    out_dim: int,
    num_stages: int = 1,
    partition: Optional[Sequence[int]] = None,
  ) -> "StagedMLP":
    return cls(
      layer_sizes=(in_dim, *hidden, out_dim),
      num_stages=num_stages,
      partition=tuple(partition) if partition is not None else None,
    )

  @property
  def in_dim(self) -> int:
    return self.layer_sizes[0]

  @property
  def out_dim(self) -> int:
    return self.layer_sizes[-1]

  def monolithic(self) -> StageLayout:
    """All blocks as a single stage."""
    return StageLayout(tuple(b for stage in self.stages for b in stage.blocks))

  def init_params(self, rng: RngStream, scale: float = 1.0) -> List[np.ndarray]:
    """Per-stage flat parameter vectors."""
    whole = self.monolithic().init_params(rng, scale)
    return self.split(whole)

  def split(self, params: np.ndarray) -> List[np.ndarray]:
    """Cut a monolithic parameter vector into per-stage vectors."""
    bounds = np.cumsum([stage.size for stage in self.stages])[:-1]
    return [p.copy() for p in np.split(np.asarray(params), bounds)]

  def join(self, stage_params: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate(list(stage_params))


def mlp_forward_stage(
  layout: StageLayout,
  params: np.ndarray,
  inputs: np.ndarray,
) -> Tuple[np.ndarray, StageActivations]:
  """Evaluate one stage on a (samples x features) input."""
  inputs = np.asarray(inputs, dtype=np.float64)
  if inputs.ndim != 2 or inputs.shape[1] != layout.in_dim:
    raise ShapeError(f"stage expects (n, {layout.in_dim}) input, got {inputs.shape}")

  cache = StageActivations(layout=layout)
  x = inputs
  for block, (weight, bias) in zip(layout.blocks, layout.unpack(params)):
    z = x @ weight + bias
    out = np.tanh(z) if block.activation == Activation.TANH else z
    cache.inputs.append(x)
    cache.outputs.append(out)
    x = out
  return x, cache


def mlp_backward_stage(
  layout: StageLayout,
  params: np.ndarray,
  cache: Optional[StageActivations],
  grad_out: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
  """Reverse-mode pass through one stage.

  Returns:
    (grad_in, param_grads) where param_grads is flat, in ``layout.unpack`` order.
  """
  if cache is None:
    raise StateError("backward called without a forward cache")
  if cache.consumed:
    raise StateError("forward cache was already used by a backward pass")
  if cache.layout != layout or len(cache.outputs) != len(layout.blocks):
    raise StateError("forward cache belongs to a different stage")

  grad = np.asarray(grad_out, dtype=np.float64)
  if grad.shape != cache.outputs[-1].shape:
    raise ShapeError(f"grad_out shape {grad.shape} != stage output {cache.outputs[-1].shape}")

  pairs = layout.unpack(params)
  grads: List[Tuple[np.ndarray, np.ndarray]] = [None] * len(pairs)  # type: ignore[list-item]
  for index in range(len(layout.blocks) - 1, -1, -1):
    block = layout.blocks[index]
    weight, _ = pairs[index]
    if block.activation == Activation.TANH:
      out = cache.outputs[index]
      grad = grad * (1.0 - out * out)
    grads[index] = (cache.inputs[index].T @ grad, grad.sum(axis=0))
    grad = grad @ weight.T

  cache.consumed = True
  return grad, layout.pack(grads)


def mse_loss(predictions: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
  """Mean squared error over all entries and its gradient."""
  predictions = np.asarray(predictions, dtype=np.float64)
  targets = np.asarray(targets, dtype=np.float64)
  if predictions.shape != targets.shape:
    raise ShapeError(f"prediction shape {predictions.shape} != target shape {targets.shape}")
  diff = predictions - targets
  return float(np.mean(diff * diff)), 2.0 * diff / diff.size


def mlp_forward(model: StagedMLP, stage_params: Sequence[np.ndarray], inputs: np.ndarray) -> np.ndarray:
  """Compose all stages (no caching)."""
  x = inputs
  for layout, params in zip(model.stages, stage_params):
    x, _ = mlp_forward_stage(layout, params, x)
  return x
