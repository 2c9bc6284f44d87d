"""Run configuration: defaults, flat ``key = value`` files, CLI overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .codecs import GseLayout
from .core import DEFAULT_WIDTH, Scheme
from .hotness import check_fractions
from .placement import Link
from .simulator import DEFAULT_TOKENS, GB, CostModel


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # corpus
    docs: int = 500
    tokens: int = DEFAULT_TOKENS
    width: int = DEFAULT_WIDTH
    seed: int = 0
    # compression thresholds and GSE layout
    tau1: float = 0.10
    tau2: float = 0.10
    tau3: float = 0.10
    e_bits: int = 4
    m_bits: int = 3
    # placement thresholds
    tau_gpu: float = 0.05
    tau_pin: float = 0.05
    tau_page: float = 0.10
    # workload
    queries: int = 4096
    k: int = 4
    zipf_s: float = 1.1
    # cost model
    bw_disk_gbps: float = 2.0
    bw_page_gbps: float = 10.0
    bw_pin_gbps: float = 25.0
    link_latency_us: float = 50.0
    gpu_access_us: float = 1.0
    decode_int8_gbps: float | None = None
    decode_e4m3_gbps: float | None = None
    decode_e5m2_gbps: float | None = None
    decode_gse8_gbps: float | None = None

    def validate(self) -> "RunConfig":
        try:
            check_fractions(self.tau1, self.tau2, self.tau3)
            check_fractions(self.tau_gpu, self.tau_pin, self.tau_page)
            GseLayout(self.e_bits, self.m_bits)
            self.cost_model()
        except ValueError as e:
            raise ConfigError(str(e)) from None
        for name in ("docs", "tokens", "width", "queries", "k"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.zipf_s < 0:
            raise ConfigError("zipf_s must be >= 0")
        return self

    @property
    def layout(self) -> GseLayout:
        return GseLayout(self.e_bits, self.m_bits)

    def cost_model(self) -> CostModel:
        model = CostModel(
            bandwidth={
                Link.DISK_TO_PAGE: self.bw_disk_gbps * GB,
                Link.PAGE_TO_PIN: self.bw_page_gbps * GB,
                Link.PIN_TO_GPU: self.bw_pin_gbps * GB,
            },
            latency=dict.fromkeys(Link, self.link_latency_us * 1e-6),
            gpu_access_time=self.gpu_access_us * 1e-6,
        )
        overrides = {
            Scheme.INT8: self.decode_int8_gbps,
            Scheme.FP8_E4M3: self.decode_e4m3_gbps,
            Scheme.FP8_E5M2: self.decode_e5m2_gbps,
            Scheme.GSE8: self.decode_gse8_gbps,
        }
        for s, v in overrides.items():
            if v is not None:
                model.decode_rate[s] = v * GB
        model.__post_init__()
        return model

    def updated(self, values: dict) -> "RunConfig":
        """Copy with non-None ``values`` applied, coercing strings by field type."""
        types = {f.name: f.type for f in dataclasses.fields(self)}
        clean = {}
        for key, raw in values.items():
            if raw is None:
                continue
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            conv = int if types[key] == "int" else float
            try:
                clean[key] = conv(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"{key}: cannot parse {raw!r}") from None
        return dataclasses.replace(self, **clean)


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value")
        key, val = (p.strip() for p in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def load_config(path: str | Path | None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the config file, then CLI overrides."""
    cfg = RunConfig()
    if path is not None:
        cfg = cfg.updated(parse_config_text(Path(path).read_text()))
    if overrides:
        cfg = cfg.updated(overrides)
    return cfg.validate()
