# Feed-forward policy network: architecture descriptors, parameter layout and
# a numpy forward pass.
#
# Parameter layout (flat weight vector): layer by layer, weights then biases.
#   conv weights: (kernel, kernel, channels_in, filters), row-major
#   dense weights: (inputs, units), row-major
# Conv inputs are channels-last (height, width, channels); convolutions are
# "valid" (no padding). Hidden layers use ReLU, the output layer is linear.

from dataclasses import dataclass
from functools import lru_cache
import math
import re
from typing import Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


WEIGHT_DTYPE = np.float32

# DQN-style architecture on stacked 84x84 frames (18 is the full Atari action set)
REFERENCE_ARCH = 'in:84x84x4;conv:32,8,4;conv:64,4,2;conv:64,3,1;dense:512;out:18'
DEFAULT_HIDDEN_LAYERS = 'dense:16;dense:16'

_NUM = r'[1-9][0-9]*'
_IN_RE = re.compile(rf'in:({_NUM}(?:x{_NUM})*)')
_CONV_RE = re.compile(rf'conv:({_NUM}),({_NUM}),({_NUM})')
_DENSE_RE = re.compile(rf'dense:({_NUM})')
_OUT_RE = re.compile(rf'out:({_NUM})')


class ArchitectureError(ValueError):
    """Malformed or impossible architecture descriptor."""

class ShapeError(ValueError):
    """Weights, observation or environment don't match the architecture."""


@dataclass(frozen=True)
class Conv:
    filters: int
    kernel: int
    stride: int

    def __str__(self) -> str:
        return f'conv:{self.filters},{self.kernel},{self.stride}'

@dataclass(frozen=True)
class Dense:
    units: int

    def __str__(self) -> str:
        return f'dense:{self.units}'


@dataclass(frozen=True)
class LayerShape:
    """Resolved shapes of one layer (including the output layer)."""
    index: int
    layer: object  # Conv or Dense
    weight_shape: Tuple[int, ...]
    bias_size: int
    fan_in: int
    fan_out: int
    output_shape: Tuple[int, ...]

    @property
    def weight_size(self) -> int:
        return math.prod(self.weight_shape)

    @property
    def parameter_count(self) -> int:
        return self.weight_size + self.bias_size

    def describe(self) -> str:
        return f'layer {self.index} ({self.layer})'


@dataclass(frozen=True)
class ArchitectureDescriptor:
    input_shape: Tuple[int, ...]
    layers: Tuple[object, ...]
    output_units: int

    def __post_init__(self):
        object.__setattr__(self, 'input_shape', tuple(self.input_shape))
        object.__setattr__(self, 'layers', tuple(self.layers))
        if not self.input_shape or any(d < 1 for d in self.input_shape):
            raise ArchitectureError(f'Input dimensions must be >= 1: {self.input_shape}')
        if self.output_units < 1:
            raise ArchitectureError(f'output_units must be >= 1, got {self.output_units}')
        for layer in self.layers:
            if isinstance(layer, Conv):
                if min(layer.filters, layer.kernel, layer.stride) < 1:
                    raise ArchitectureError(f'Invalid conv layer {layer}')
            elif isinstance(layer, Dense):
                if layer.units < 1:
                    raise ArchitectureError(f'Invalid dense layer {layer}')
            else:
                raise ArchitectureError(f'Unknown layer type: {layer!r}')
        # resolves every shape, raising for convs that don't fit
        layer_shapes(self)

    @property
    def input_size(self) -> int:
        return math.prod(self.input_shape)

    def __str__(self) -> str:
        return format_arch(self)


@lru_cache(maxsize=128)
def layer_shapes(arch: ArchitectureDescriptor) -> Tuple[LayerShape, ...]:
    """Resolve weight/bias/fan shapes of every layer, output layer last.

    Glorot fans: dense fan_in/fan_out are input/output widths; conv fans are
    channels_in * kernel_area and filters * kernel_area.
    """
    shape = tuple(arch.input_shape)
    out = []
    all_layers = list(arch.layers) + [Dense(arch.output_units)]
    for i, layer in enumerate(all_layers):
        if isinstance(layer, Conv):
            if len(shape) != 3:
                raise ArchitectureError(
                    f'layer {i} ({layer}): convolution needs a height x width x channels input, '
                    f'got shape {shape}')
            height, width, channels = shape
            if layer.kernel > height or layer.kernel > width:
                raise ArchitectureError(
                    f'layer {i} ({layer}): kernel larger than input {height}x{width}')
            out_h = (height - layer.kernel) // layer.stride + 1
            out_w = (width - layer.kernel) // layer.stride + 1
            area = layer.kernel * layer.kernel
            out.append(LayerShape(
                index=i,
                layer=layer,
                weight_shape=(layer.kernel, layer.kernel, channels, layer.filters),
                bias_size=layer.filters,
                fan_in=channels * area,
                fan_out=layer.filters * area,
                output_shape=(out_h, out_w, layer.filters)
            ))
            shape = (out_h, out_w, layer.filters)
        else:
            inputs = math.prod(shape)
            out.append(LayerShape(
                index=i,
                layer=layer,
                weight_shape=(inputs, layer.units),
                bias_size=layer.units,
                fan_in=inputs,
                fan_out=layer.units,
                output_shape=(layer.units,)
            ))
            shape = (layer.units,)
    return tuple(out)


def parameter_count(arch: ArchitectureDescriptor) -> int:
    return sum(s.parameter_count for s in layer_shapes(arch))


def parse_layers(text: str) -> Tuple[object, ...]:
    """Parse hidden layer specs, e.g. `conv:32,8,4;dense:16`. Empty string is no layers."""
    if text == '':
        return ()
    layers = []
    for token in text.split(';'):
        m = _CONV_RE.fullmatch(token)
        if m:
            layers.append(Conv(*(int(x) for x in m.groups())))
            continue
        m = _DENSE_RE.fullmatch(token)
        if m:
            layers.append(Dense(int(m.group(1))))
            continue
        raise ArchitectureError(f'Unrecognised layer spec "{token}"')
    return tuple(layers)


def parse_arch(text: str) -> ArchitectureDescriptor:
    """Parse `in:<d1>x<d2>...;conv:<f>,<k>,<s>;...;dense:<u>;out:<a>`.

    Only canonical strings are accepted (no spaces, no leading zeros), so
    `format_arch(parse_arch(s)) == s` always holds.
    """
    tokens = text.split(';')
    if len(tokens) < 2:
        raise ArchitectureError(f'Architecture needs at least "in:" and "out:" parts: "{text}"')

    m = _IN_RE.fullmatch(tokens[0])
    if not m:
        raise ArchitectureError(f'Bad input spec "{tokens[0]}" (expected in:<d1>x<d2>...)')
    input_shape = tuple(int(x) for x in m.group(1).split('x'))

    m = _OUT_RE.fullmatch(tokens[-1])
    if not m:
        raise ArchitectureError(f'Bad output spec "{tokens[-1]}" (expected out:<actions>)')
    output_units = int(m.group(1))

    layers = parse_layers(';'.join(tokens[1:-1]))
    return ArchitectureDescriptor(input_shape, layers, output_units)


def format_arch(arch: ArchitectureDescriptor) -> str:
    parts = ['in:' + 'x'.join(str(d) for d in arch.input_shape)]
    parts += [str(layer) for layer in arch.layers]
    parts.append(f'out:{arch.output_units}')
    return ';'.join(parts)


def arch_for_environment(observation_length, action_space_size, hidden_layers=DEFAULT_HIDDEN_LAYERS):
    """Build the policy architecture for an environment's flat observation."""
    return ArchitectureDescriptor(
        (observation_length,), parse_layers(hidden_layers), action_space_size)


def forward(weights, arch: ArchitectureDescriptor, obs) -> np.ndarray:
    """Compute action scores for one observation."""
    weights = np.asarray(weights)
    x = np.asarray(obs, dtype=WEIGHT_DTYPE)
    if x.size != arch.input_size:
        raise ShapeError(
            f'input layer: observation has {x.size} values, architecture expects '
            f'{arch.input_size} ({"x".join(str(d) for d in arch.input_shape)})')
    x = x.reshape(arch.input_shape)

    shapes = layer_shapes(arch)
    offset = 0
    for shape in shapes:
        needed = shape.parameter_count
        if offset + needed > weights.size:
            raise ShapeError(
                f'{shape.describe()}: needs {needed} parameters but only '
                f'{weights.size - offset} remain in a weight vector of {weights.size}')
        w = weights[offset:offset + shape.weight_size].reshape(shape.weight_shape)
        offset += shape.weight_size
        b = weights[offset:offset + shape.bias_size]
        offset += shape.bias_size

        layer = shape.layer
        if isinstance(layer, Conv):
            # (out_h, out_w, channels, k, k) windows, then contract against (k, k, channels, filters)
            windows = sliding_window_view(x, (layer.kernel, layer.kernel), axis=(0, 1))
            windows = windows[::layer.stride, ::layer.stride]
            x = np.tensordot(windows, w, axes=([2, 3, 4], [2, 0, 1])) + b
        else:
            x = x.reshape(-1) @ w + b

        if shape.index < len(shapes) - 1:
            x = np.maximum(x, 0)

    if offset != weights.size:
        raise ShapeError(
            f'{shapes[-1].describe()}: {weights.size - offset} trailing weights unused '
            f'(architecture has {offset} parameters)')
    return x


def select_action(scores) -> int:
    """Argmax over action scores, ties broken by lowest index."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError('Cannot select an action from empty scores.')
    if not np.all(np.isfinite(scores)):
        raise ValueError(f'Action scores must be finite: {scores}')
    return int(np.argmax(scores))
