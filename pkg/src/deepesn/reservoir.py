"""Deep echo state network reservoir: construction and state updates.

A stack of ``num_layers`` leaky-integrator tanh reservoirs. The first layer
is driven by the external input, every higher layer by the current-step
state of the layer below it (bottom-up update order within a time step):

    x_1(t) = (1 - a_1) x_1(t-1) + a_1 tanh(W_in u(t)   + Wr_1 x_1(t-1))
    x_l(t) = (1 - a_l) x_l(t-1) + a_l tanh(W_l x_{l-1}(t) + Wr_l x_l(t-1))

No bias term enters anywhere in the reservoir. Construction is fully
deterministic given the config's master seed:

- ``W_in`` is rescaled to spectral norm ``input_scaling``,
- each inter-layer ``W_l`` (l >= 2) to spectral norm ``inter_layer_scaling``,
- each recurrent ``Wr_l`` is rescaled indirectly so that the effective
  transition matrix ``M_l = (1 - a_l) I + a_l Wr_l`` has spectral radius
  exactly equal to ``spectral_radius``: the raw ``M`` is scaled to the
  target radius and ``Wr_l = (M - (1 - a_l) I) / a_l`` is recovered from it.

The whole-sequence feature is the mean over time of the concatenated
(layer-major) layer states, computed from a zero initial state with a
configurable washout that defaults to 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConstructionError, DimensionError
from .numerics import (
    DEFAULT_TOL,
    MatrixRole,
    SeedSpec,
    derive_seed,
    spectral_norm,
    spectral_radius,
    uniform_matrix,
)

__all__ = [
    "DeepEsnConfig",
    "ReservoirStack",
    "RunResult",
    "build_stack",
    "step_first_layer",
    "step_higher_layer",
    "run_sequence",
]

logger = logging.getLogger(__name__)

# mixed into redraw sub-seeds after a degenerate draw so the retry stream
# cannot collide with any first-attempt stream
_REDRAW_TAG = 0x7EDA

_MAX_REDRAWS = 8


@dataclass(frozen=True)
class DeepEsnConfig:
    """Full hyperparameterization of one reservoir stack.

    Parameters
    ----------
    num_layers : int
        Number of stacked reservoirs, >= 1.
    units_per_layer : int
        Recurrent units in each layer, >= 1.
    leak_rates : tuple of float
        Per-layer leaking rates, each in (0, 1]; length ``num_layers``.
    input_scaling : float
        Target spectral norm of ``W_in``, > 0.
    inter_layer_scaling : float
        Target spectral norm of each inter-layer matrix, > 0. Unused when
        ``num_layers == 1``.
    spectral_radius : float
        Target spectral radius of every effective transition matrix
        ``(1 - a) I + a Wr``, in (0, 1].
    input_dim : int
        External input channels, >= 1.
    master_seed : int
        Seed all weight draws derive from.
    """

    num_layers: int
    units_per_layer: int
    leak_rates: tuple[float, ...]
    input_scaling: float
    inter_layer_scaling: float
    spectral_radius: float
    input_dim: int
    master_seed: int

    def __post_init__(self):
        object.__setattr__(self, "leak_rates", tuple(float(a) for a in self.leak_rates))
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.units_per_layer < 1:
            raise ValueError(f"units_per_layer must be >= 1, got {self.units_per_layer}")
        if len(self.leak_rates) != self.num_layers:
            raise ValueError(
                f"need one leak rate per layer: got {len(self.leak_rates)} "
                f"for {self.num_layers} layers"
            )
        for a in self.leak_rates:
            if not 0.0 < a <= 1.0:
                raise ValueError(f"leak rates must lie in (0, 1], got {a}")
        if not self.input_scaling > 0.0:
            raise ValueError(f"input_scaling must be > 0, got {self.input_scaling}")
        if not self.inter_layer_scaling > 0.0:
            raise ValueError(
                f"inter_layer_scaling must be > 0, got {self.inter_layer_scaling}"
            )
        if not 0.0 < self.spectral_radius <= 1.0:
            raise ValueError(
                f"spectral_radius must lie in (0, 1], got {self.spectral_radius}"
            )
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")

    @property
    def state_dim(self) -> int:
        """Length of the concatenated state vector."""
        return self.num_layers * self.units_per_layer


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ReservoirStack:
    """Constructed weight matrices of a deep reservoir; immutable.

    ``recurrent`` has one matrix per layer; ``inter_layer`` has one matrix
    per layer from the second up (``inter_layer[l - 2]`` feeds layer ``l``).
    """

    config: DeepEsnConfig
    input_weights: np.ndarray
    recurrent: tuple[np.ndarray, ...] = field(repr=False)
    inter_layer: tuple[np.ndarray, ...] = field(repr=False)

    def effective_transition(self, layer: int) -> np.ndarray:
        """``(1 - a) I + a Wr`` for the given 1-based layer."""
        if not 1 <= layer <= self.config.num_layers:
            raise IndexError(f"layer must be in [1, {self.config.num_layers}], got {layer}")
        a = self.config.leak_rates[layer - 1]
        wr = self.recurrent[layer - 1]
        return (1.0 - a) * np.eye(wr.shape[0]) + a * wr


def _draw_recurrent(config: DeepEsnConfig, layer: int, tol: float) -> np.ndarray:
    """Recurrent matrix whose effective transition hits the target radius."""
    n = config.units_per_layer
    a = config.leak_rates[layer - 1]
    eye = np.eye(n)
    seed = config.master_seed
    for attempt in range(_MAX_REDRAWS + 1):
        if attempt > 0:
            seed = derive_seed(config.master_seed, _REDRAW_TAG, attempt)
            logger.warning(
                "degenerate recurrent draw at layer %d (attempt %d), redrawing", layer, attempt
            )
        raw = uniform_matrix(SeedSpec(seed, layer, MatrixRole.RECURRENT), n, n)
        m_raw = (1.0 - a) * eye + a * raw
        rho_raw = spectral_radius(m_raw, tol)
        if rho_raw > 0.0:
            m = m_raw * (config.spectral_radius / rho_raw)
            return (m - (1.0 - a) * eye) / a
    raise ConstructionError(
        f"layer {layer}: spectral radius of the raw transition stayed zero "
        f"after {_MAX_REDRAWS} redraws"
    )


def build_stack(config: DeepEsnConfig, tol: float = DEFAULT_TOL) -> ReservoirStack:
    """Construct all weight matrices for ``config``.

    Deterministic: equal configs yield bit-identical stacks. The returned
    arrays are marked read-only.
    """
    n = config.units_per_layer
    w_in_raw = uniform_matrix(
        SeedSpec(config.master_seed, 1, MatrixRole.INPUT), n, config.input_dim
    )
    w_in = w_in_raw * (config.input_scaling / spectral_norm(w_in_raw, tol))

    inter = []
    for layer in range(2, config.num_layers + 1):
        raw = uniform_matrix(
            SeedSpec(config.master_seed, layer, MatrixRole.INTER_LAYER), n, n
        )
        inter.append(_frozen(raw * (config.inter_layer_scaling / spectral_norm(raw, tol))))

    recurrent = [
        _frozen(_draw_recurrent(config, layer, tol))
        for layer in range(1, config.num_layers + 1)
    ]
    return ReservoirStack(
        config=config,
        input_weights=_frozen(w_in),
        recurrent=tuple(recurrent),
        inter_layer=tuple(inter),
    )


def step_first_layer(stack: ReservoirStack, x_prev: np.ndarray, u: np.ndarray) -> np.ndarray:
    """One update of layer 1 from its previous state and the input u(t)."""
    u = np.asarray(u, dtype=np.float64)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    cfg = stack.config
    if u.shape != (cfg.input_dim,):
        raise DimensionError(f"input must have shape ({cfg.input_dim},), got {u.shape}")
    if x_prev.shape != (cfg.units_per_layer,):
        raise DimensionError(
            f"state must have shape ({cfg.units_per_layer},), got {x_prev.shape}"
        )
    a = cfg.leak_rates[0]
    pre = stack.input_weights @ u + stack.recurrent[0] @ x_prev
    return (1.0 - a) * x_prev + a * np.tanh(pre)


def step_higher_layer(
    stack: ReservoirStack, layer: int, x_prev: np.ndarray, x_below: np.ndarray
) -> np.ndarray:
    """One update of layer ``layer`` (>= 2) from the current state below it.

    ``x_below`` must be the layer-below state at the *current* time step;
    the stack updates bottom-up within each step.
    """
    cfg = stack.config
    if not 2 <= layer <= cfg.num_layers:
        raise IndexError(f"layer must be in [2, {cfg.num_layers}], got {layer}")
    x_prev = np.asarray(x_prev, dtype=np.float64)
    x_below = np.asarray(x_below, dtype=np.float64)
    expected = (cfg.units_per_layer,)
    if x_prev.shape != expected or x_below.shape != expected:
        raise DimensionError(
            f"states must have shape {expected}, got {x_prev.shape} and {x_below.shape}"
        )
    a = cfg.leak_rates[layer - 1]
    pre = stack.inter_layer[layer - 2] @ x_below + stack.recurrent[layer - 1] @ x_prev
    return (1.0 - a) * x_prev + a * np.tanh(pre)


@dataclass(frozen=True)
class RunResult:
    """Outcome of driving a stack through one input sequence.

    ``mean_state`` is the time average of the concatenated layer states
    over the post-washout steps. ``states`` holds the full concatenated
    time course (n_steps x state_dim) when it was collected, else ``None``.
    """

    mean_state: np.ndarray
    states: np.ndarray | None = None


def run_sequence(
    stack: ReservoirStack,
    inputs,
    *,
    washout: int = 0,
    initial_state: np.ndarray | None = None,
    collect_states: bool = False,
) -> RunResult:
    """Drive the stack through ``inputs`` and average the states.

    Parameters
    ----------
    inputs : array_like, shape (input_dim, n_steps)
        One column per time step.
    washout : int
        Leading steps excluded from the mean; must leave at least one step.
    initial_state : array_like, optional
        Concatenated start state, shape ``(state_dim,)`` or
        ``(num_layers, units_per_layer)``. Defaults to all zeros, which is
        what the classification pipeline always uses.
    collect_states : bool
        Also return the full state time course (memory-heavy for long
        sequences; the evaluation engine leaves it off).
    """
    cfg = stack.config
    u = np.asarray(inputs, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] != cfg.input_dim:
        raise DimensionError(
            f"inputs must have shape ({cfg.input_dim}, n_steps), got {u.shape}"
        )
    n_steps = u.shape[1]
    if n_steps < 1:
        raise ValueError("inputs must contain at least one time step")
    if not 0 <= washout < n_steps:
        raise ValueError(
            f"washout must lie in [0, n_steps), got {washout} for {n_steps} steps"
        )

    layers, units = cfg.num_layers, cfg.units_per_layer
    if initial_state is None:
        current = [np.zeros(units) for _ in range(layers)]
    else:
        init = np.asarray(initial_state, dtype=np.float64).reshape(-1)
        if init.shape != (cfg.state_dim,):
            raise DimensionError(
                f"initial_state must have {cfg.state_dim} entries, got {init.shape}"
            )
        current = [init[l * units : (l + 1) * units].copy() for l in range(layers)]

    leaks = cfg.leak_rates
    recurrent = stack.recurrent
    inter = stack.inter_layer
    input_proj = stack.input_weights @ u  # (units, n_steps), hoisted out of the loop

    acc = np.zeros(cfg.state_dim)
    course = np.empty((n_steps, cfg.state_dim)) if collect_states else None
    for t in range(n_steps):
        below = None
        for l in range(layers):
            x = current[l]
            if l == 0:
                pre = input_proj[:, t] + recurrent[0] @ x
            else:
                pre = inter[l - 1] @ below + recurrent[l] @ x
            a = leaks[l]
            x = (1.0 - a) * x + a * np.tanh(pre)
            current[l] = x
            below = x
        if collect_states:
            for l in range(layers):
                course[t, l * units : (l + 1) * units] = current[l]
            if t >= washout:
                acc += course[t]
        elif t >= washout:
            for l in range(layers):
                acc[l * units : (l + 1) * units] += current[l]

    mean_state = acc / (n_steps - washout)
    return RunResult(mean_state=mean_state, states=course)
