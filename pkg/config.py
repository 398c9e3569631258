import hashlib
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigError


class AugConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    jitter_prob: float = Field(0.8, ge=0, le=1)
    brightness: float = Field(0.4, ge=0, le=1)
    contrast: float = Field(0.4, ge=0, le=1)
    saturation: float = Field(0.4, ge=0, le=1)
    hue: float = Field(0.1, ge=0, le=0.5)
    blur_prob: float = Field(0.5, ge=0, le=1)
    blur_sigma_min: float = Field(0.1, gt=0)
    blur_sigma_max: float = Field(2.0, gt=0)
    crop_scale_min: float = Field(0.8, gt=0, le=1)
    crop_scale_max: float = Field(1.0, gt=0, le=1)
    crop_ratio_min: float = Field(1.0, gt=0)
    crop_ratio_max: float = Field(1.0, gt=0)
    flip_prob: float = Field(0.5, ge=0, le=1)
    erode_radius: int = Field(3, ge=0)
    blend_sigma: float = Field(1.0, gt=0)
    blend_radius: int = Field(2, ge=1)
    transfer_eps: float = Field(1e-6, gt=0)

    @model_validator(mode="after")
    def check_ranges(self):
        if self.blur_sigma_min > self.blur_sigma_max:
            raise ValueError("blur_sigma_min must not exceed blur_sigma_max")
        if self.crop_scale_min > self.crop_scale_max:
            raise ValueError("crop_scale_min must not exceed crop_scale_max")
        if self.crop_ratio_min > self.crop_ratio_max:
            raise ValueError("crop_ratio_min must not exceed crop_ratio_max")
        return self


class SynthConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    size: int = 64
    min_buildings: int = Field(1, ge=1)
    max_buildings: int = Field(6, ge=1)
    min_side: int = Field(6, ge=1)
    noise_cells: int = Field(4, ge=1)
    remove_prob: float = Field(0.3, ge=0, le=1)
    max_added: int = Field(2, ge=0)
    epoch_jitter: float = Field(0.1, ge=0, le=1)

    @field_validator("size")
    @classmethod
    def size_divisible_by_16(cls, v: int) -> int:
        if v <= 0 or v % 16:
            raise ValueError(f"size must be a positive multiple of 16, got {v}")
        return v

    @property
    def max_side(self) -> int:
        return max(self.min_side, self.size // 3)


class ModelPreset(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    stem: int
    stages: tuple[int, int, int]
    channels: int
    proj_hidden: int
    proj_out: int
    pred_hidden: int
    ds: int = 4


PRESETS: dict[str, ModelPreset] = {
    "desk": ModelPreset(name="desk", stem=16, stages=(16, 32, 64), channels=32, proj_hidden=64, proj_out=32, pred_hidden=16),
    "full": ModelPreset(
        name="full", stem=64, stages=(64, 128, 256), channels=256, proj_hidden=2048, proj_out=1024, pred_hidden=256
    ),
    "tiny": ModelPreset(name="tiny", stem=4, stages=(4, 8, 8), channels=8, proj_hidden=8, proj_out=8, pred_hidden=4),
}


def get_preset(name: str) -> ModelPreset:
    preset = PRESETS.get(name)
    if preset is None:
        raise ConfigError(f"unknown model preset {name!r} (choose from {', '.join(PRESETS)})")
    return preset


class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    lr0: float = Field(0.01, gt=0)
    momentum: float = Field(0.9, ge=0, lt=1)
    weight_decay: float = Field(0.0005, ge=0)
    poly_power: float = Field(0.9, gt=0)
    epochs: int = Field(5, ge=0)
    batch_size: int = Field(8, ge=1)
    num_points: int = Field(16, ge=1)
    retry_limit: int = Field(10, ge=0)
    seed: int = 0
    preset: str = "desk"
    sampling: Literal["points", "masked_pool"] = "points"
    use_sd: bool = True
    use_bs: bool = True
    dtype: Literal["float64", "float32"] = "float64"

    @field_validator("preset")
    @classmethod
    def known_preset(cls, v: str) -> str:
        if v not in PRESETS:
            raise ValueError(f"unknown preset {v!r}")
        return v

    @model_validator(mode="after")
    def masked_pool_needs_batch(self):
        if self.sampling == "masked_pool" and self.batch_size < 2:
            raise ValueError("masked_pool sampling needs batch_size >= 2")
        if self.batch_size * self.num_points < 2:
            raise ValueError("batch_size * num_points must be >= 2 for projector batch statistics")
        return self


class FinetuneConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    ft_lr0: float = Field(0.01, gt=0)
    ft_momentum: float = Field(0.9, ge=0, lt=1)
    ft_weight_decay: float = Field(0.0005, ge=0)
    ft_epochs: int = Field(20, ge=0)
    ft_batch_size: int = Field(4, ge=1)
    ft_head_std: float = Field(0.02, gt=0)
    ft_blur_prob: float = Field(0.5, ge=0, le=1)


_SECTIONS = ("train", "finetune", "synth", "aug")


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    train: TrainConfig = TrainConfig()
    finetune: FinetuneConfig = FinetuneConfig()
    synth: SynthConfig = SynthConfig()
    aug: AugConfig = AugConfig()

    def canonical(self) -> str:
        """Stable `key=value` echo of every field, sorted by key."""
        items: dict[str, object] = {}
        for section in _SECTIONS:
            items.update(getattr(self, section).model_dump())
        lines = [f"{key}={_render(items[key])}" for key in sorted(items)]
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()[:16]


def _render(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _section_of() -> dict[str, str]:
    owners: dict[str, str] = {}
    for section in _SECTIONS:
        model = RunConfig.model_fields[section].annotation
        for key in model.model_fields:
            owners[key] = section
    return owners


def parse_run_config(text: str, overrides: dict[str, object] | None = None) -> RunConfig:
    owners = _section_of()
    values: dict[str, dict[str, object]] = {section: {} for section in _SECTIONS}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        section = owners.get(key)
        if section is None:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in values[section]:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        values[section][key] = value

    for key, value in (overrides or {}).items():
        if key not in owners:
            raise ConfigError(f"unknown config key {key!r}")
        values[owners[key]][key] = value

    try:
        return RunConfig(
            train=TrainConfig(**values["train"]),
            finetune=FinetuneConfig(**values["finetune"]),
            synth=SynthConfig(**values["synth"]),
            aug=AugConfig(**values["aug"]),
        )
    except ValidationError as e:
        raise ConfigError(f"invalid config: {e}") from None


def load_run_config(path: str | Path | None, overrides: dict[str, object] | None = None) -> RunConfig:
    if path is None:
        return parse_run_config("", overrides)
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_run_config(path.read_text(encoding="utf-8"), overrides)


def write_config_echo(config: RunConfig, out: str | Path) -> Path:
    """Write the canonical config next to an output file as `<out>.config.txt`."""
    out = Path(out)
    echo = out.with_name(out.name + ".config.txt")
    echo.parent.mkdir(parents=True, exist_ok=True)
    echo.write_text(config.canonical(), encoding="utf-8")
    return echo
