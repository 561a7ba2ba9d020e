"""Architecture hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from twobody.errors import ConfigError

DEFAULT_CHANNELS = (3, 16, 16, 16, 16, 16, 16, 16, 3)


@dataclass(frozen=True)
class ModelConfig:
    T_obs: int = 50
    N_fut: int = 25
    J: int = 18
    bodies: int = 2
    channels: tuple[int, ...] = DEFAULT_CHANNELS
    adjacency_sharing: str = "shared"  # or "per_frame"
    connectivity: str = "learnable"  # or "kinematic_tree"
    separable: bool = True
    frequency: bool = True
    retain: int | None = None  # None keeps all T_obs coefficients
    decoder: str = "fc"  # or "tcn"
    tcn_kernel: int = 3
    tcn_layers: int = 2
    attention: bool = False
    hierarchy: int | None = None  # node count P of the coarse level
    activation: str = "relu"
    output_activation: bool = False  # activate the last encoder layer too
    leaky_slope: float = 0.2
    global_residual: bool = True
    layer_skip: bool = True
    encoder_skip: bool = True  # add the encoder input to its output (depth >= 2)
    init_scheme: str = "paper"
    init_bound: float = 1.0  # only used by naive_uniform

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        ch = self.channels
        if len(ch) < 2:
            raise ConfigError("channels needs at least two entries (depth >= 1)")
        if ch[0] != 3 or ch[-1] != 3:
            raise ConfigError(f"first and last channel counts must be 3, got {ch}")
        if min(ch) < 1:
            raise ConfigError("channel counts must be positive")
        if self.T_obs < 1 or self.N_fut < 1 or self.J < 1:
            raise ConfigError("T_obs, N_fut and J must be positive")
        if self.bodies not in (1, 2):
            raise ConfigError("bodies must be 1 or 2")
        if self.adjacency_sharing not in ("shared", "per_frame"):
            raise ConfigError(f"unknown adjacency_sharing {self.adjacency_sharing!r}")
        if self.connectivity not in ("learnable", "kinematic_tree"):
            raise ConfigError(f"unknown connectivity {self.connectivity!r}")
        if self.connectivity == "kinematic_tree" and not self.separable:
            raise ConfigError("kinematic_tree connectivity requires a separable encoder")
        if self.retain is not None:
            if not self.frequency:
                raise ConfigError("retain only applies with frequency encoding")
            if not 1 <= self.retain <= self.T_obs:
                raise ConfigError(f"retain must lie in [1, {self.T_obs}]")
        if self.decoder not in ("fc", "tcn"):
            raise ConfigError(f"unknown decoder {self.decoder!r}")
        if self.decoder == "tcn" and (self.tcn_kernel < 1 or self.tcn_kernel % 2 == 0 or self.tcn_layers < 1):
            raise ConfigError("tcn decoder needs an odd kernel and at least one layer")
        if self.activation not in ("relu", "tanh", "linear"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.attention and self.bodies != 2:
            raise ConfigError("cross attention needs two bodies")
        if self.hierarchy is not None:
            if self.depth < 2:
                raise ConfigError("hierarchy needs at least two layers")
            if not 1 <= self.hierarchy < self.nodes:
                raise ConfigError(f"hierarchy size must lie in [1, {self.nodes})")
            if self.attention and self.attention_at_coarse and self.hierarchy % 2:
                raise ConfigError("attention on the coarse level needs an even hierarchy size")

    @property
    def depth(self) -> int:
        return len(self.channels) - 1

    @property
    def nodes(self) -> int:
        return self.J * self.bodies

    @property
    def time_extent(self) -> int:
        """Length of the encoder's time axis (retained coefficients or frames)."""
        if self.frequency and self.retain is not None:
            return self.retain
        return self.T_obs

    @property
    def attention_after(self) -> int:
        """Number of layers applied before the attention block."""
        return self.depth // 2

    @property
    def attention_at_coarse(self) -> bool:
        return self.hierarchy is not None and 2 <= self.attention_after <= self.depth - 1

    @property
    def k(self) -> int:
        return 2 if self.activation == "relu" else 1

    def replace(self, **changes) -> "ModelConfig":
        data = self.to_dict()
        data.update(changes)
        return ModelConfig.from_dict(data)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["channels"] = list(self.channels)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model config keys: {unknown}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class ParamSpec:
    """Shape of one learnable tensor and the fans its initializer needs."""

    shape: tuple[int, ...]
    role: str  # weight | spatial | temporal | spacetime | bias
    fan_in: int
    fan_out: int
    masked: bool = field(default=False)
