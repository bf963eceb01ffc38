"""
Chain specification, unit conventions, model presets and analytic special fields
"""
import math
from dataclasses import dataclass, replace
from typing import Optional, Dict

from config import ConfigError, parse_key_value_text, parse_float, parse_int

BOUNDARIES = ("periodic", "open")
CONVENTIONS = ("pauli", "spin_half")
PINNINGS = ("uniform", "staggered")
PRESET_TAGS = ("xy", "ising", "xxz", "xyx", "custom")

# spin_half couplings and fields are both this multiple of the pauli ones
SPIN_HALF_SCALE = 4.0

# Landmarks of the xyx preset, spin_half units
XYX_CRITICAL_FIELD = 3.21


@dataclass(frozen=True)
class ChainSpec:
    """
    Nearest-neighbour XYZ chain in a transverse field.

    Pauli convention:
        H = sum_j [jx X_j X_j+1 + jy Y_j Y_j+1 + jz Z_j Z_j+1] - h sum_j Z_j - hx sum_j s_j X_j
    with s_j = 1 (uniform pinning) or (-1)^j (staggered pinning).
    """
    jx: float
    jy: float
    jz: float
    h: float
    hx: float = 0.0
    n_sites: int = 2
    boundary: str = "periodic"
    operator_convention: str = "pauli"
    pinning: str = "uniform"

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError(f"n_sites must be at least 2, got {self.n_sites}")
        if self.hx < 0:
            raise ValueError(f"hx must be non-negative, got {self.hx}")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if self.operator_convention not in CONVENTIONS:
            raise ValueError(f"operator_convention must be one of {CONVENTIONS}, got {self.operator_convention!r}")
        if self.pinning not in PINNINGS:
            raise ValueError(f"pinning must be one of {PINNINGS}, got {self.pinning!r}")

    @property
    def broken(self) -> bool:
        return self.hx > 0


@dataclass(frozen=True)
class ModelPreset:
    """Named model family mapped onto ChainSpec couplings"""
    tag: str
    gamma: Optional[float] = None
    delta: Optional[float] = None
    jx: Optional[float] = None
    jy: Optional[float] = None
    jz: Optional[float] = None

    def __post_init__(self):
        if self.tag not in PRESET_TAGS:
            raise ValueError(f"unknown preset {self.tag!r}; expected one of {PRESET_TAGS}")

        if self.tag == "xy":
            if self.gamma is None or not 0.0 <= self.gamma <= 1.0:
                raise ValueError(f"xy preset requires 0 <= gamma <= 1, got {self.gamma}")
        elif self.tag == "ising":
            if self.gamma not in (None, 1.0):
                raise ValueError("ising preset is xy(gamma=1)")
            object.__setattr__(self, "gamma", 1.0)
        elif self.tag == "xxz":
            if self.delta is None:
                raise ValueError("xxz preset requires delta")
        elif self.tag == "custom":
            if None in (self.jx, self.jy, self.jz):
                raise ValueError("custom preset requires jx, jy and jz")

    @property
    def label(self) -> str:
        if self.tag == "xy":
            return f"xy({self.gamma:g})"
        if self.tag == "xxz":
            return f"xxz({self.delta:g})"
        return self.tag

    @property
    def convention(self) -> str:
        return "spin_half" if self.tag == "xyx" else "pauli"

    @property
    def is_xy_family(self) -> bool:
        return self.tag in ("xy", "ising")


def xy_preset(gamma: float) -> ModelPreset:
    return ModelPreset("ising") if gamma == 1.0 else ModelPreset("xy", gamma=gamma)


def preset_spec(
    preset: ModelPreset,
    n_sites: int,
    h: float = 0.0,
    hx: float = 0.0,
    boundary: str = "periodic",
    delta: Optional[float] = None,
) -> ChainSpec:
    """Materialize a preset at the given field (and delta, for xxz sweeps)"""

    if preset.is_xy_family:
        gamma = preset.gamma
        return ChainSpec(
            jx=-(1.0 + gamma) / 2.0, jy=-(1.0 - gamma) / 2.0, jz=0.0,
            h=h, hx=hx, n_sites=n_sites, boundary=boundary,
        )

    if preset.tag == "xxz":
        d = preset.delta if delta is None else delta
        return ChainSpec(
            jx=-0.5, jy=-0.5, jz=-d / 2.0,
            h=h, hx=hx, n_sites=n_sites, boundary=boundary,
        )

    if preset.tag == "xyx":
        return ChainSpec(
            jx=1.0, jy=0.25, jz=1.0,
            h=h, hx=hx, n_sites=n_sites, boundary=boundary,
            operator_convention="spin_half", pinning="staggered",
        )

    return ChainSpec(
        jx=preset.jx, jy=preset.jy, jz=preset.jz,
        h=h, hx=hx, n_sites=n_sites, boundary=boundary,
    )


def convert_convention(spec: ChainSpec, target: str) -> ChainSpec:
    """Rescale couplings and fields so the Hamiltonian describes the same physics in `target` units"""
    if target not in CONVENTIONS:
        raise ValueError(f"unknown convention {target!r}")

    if spec.operator_convention == target:
        return spec

    scale = SPIN_HALF_SCALE if target == "spin_half" else 1.0 / SPIN_HALF_SCALE

    return replace(
        spec,
        jx=spec.jx * scale, jy=spec.jy * scale, jz=spec.jz * scale,
        h=spec.h * scale, hx=spec.hx * scale,
        operator_convention=target,
    )


def to_pauli(spec: ChainSpec) -> ChainSpec:
    return convert_convention(spec, "pauli")


def energy_scale(spec: ChainSpec) -> float:
    """Factor taking pauli-convention energies into the spec's own units"""
    return SPIN_HALF_SCALE if spec.operator_convention == "spin_half" else 1.0


def _in_plane_frame(jx: float, jy: float, jz: float):
    # Antiferromagnetic in-plane order: rotate every other spin by pi about z
    dominant = jx if abs(jx) >= abs(jy) else jy
    if dominant > 0:
        return -jx, -jy, jz
    return jx, jy, jz


def factorizing_field(spec: ChainSpec) -> Optional[float]:
    """Field at which the ground state is an exact product state, in the spec's units"""
    pauli = to_pauli(spec)
    jx, jy, jz = _in_plane_frame(pauli.jx, pauli.jy, pauli.jz)

    radicand = (jx - jz) * (jy - jz)
    if radicand < 0:
        return None

    return 2.0 * math.sqrt(radicand) * energy_scale(spec)


def critical_field(preset: ModelPreset) -> Optional[float]:
    """Ising-class critical field of the preset (advisory for xyx)"""
    if preset.is_xy_family:
        return 1.0 if preset.gamma > 0 else None
    if preset.tag == "xyx":
        return XYX_CRITICAL_FIELD
    return None


def spec_to_text(spec: ChainSpec, preset: Optional[ModelPreset] = None) -> str:
    """Serialize to the key = value config format"""
    lines = []

    if preset is not None:
        lines.append(f"preset = {preset.tag}")
        if preset.gamma is not None and preset.tag == "xy":
            lines.append(f"gamma = {repr(float(preset.gamma))}")
        if preset.delta is not None:
            lines.append(f"delta = {repr(float(preset.delta))}")

    lines += [
        f"jx = {repr(float(spec.jx))}",
        f"jy = {repr(float(spec.jy))}",
        f"jz = {repr(float(spec.jz))}",
        f"h = {repr(float(spec.h))}",
        f"hx = {repr(float(spec.hx))}",
        f"n_sites = {spec.n_sites}",
        f"boundary = {spec.boundary}",
        f"convention = {spec.operator_convention}",
        f"pinning = {spec.pinning}",
    ]

    return "\n".join(lines) + "\n"


SPEC_KEYS = ("preset", "gamma", "delta", "jx", "jy", "jz", "h", "hx",
             "n_sites", "boundary", "convention", "pinning")


def preset_from_entries(entries: Dict[str, tuple]) -> Optional[ModelPreset]:
    if "preset" not in entries:
        return None

    tag, line = entries["preset"]
    kwargs = {}
    for key in ("gamma", "delta", "jx", "jy", "jz"):
        if key in entries:
            kwargs[key] = parse_float(entries[key][0], key, entries[key][1])

    if tag != "custom":
        kwargs = {k: v for k, v in kwargs.items() if k in ("gamma", "delta")}
    if tag in ("ising", "xyx"):
        kwargs.pop("gamma", None)

    try:
        return ModelPreset(tag, **kwargs)
    except ValueError as e:
        raise ConfigError(str(e), line)


def spec_from_text(text: str) -> ChainSpec:
    """Parse a spec written by spec_to_text (or by hand); preset keys fill missing couplings"""
    entries = parse_key_value_text(text)

    for key, (_, line) in entries.items():
        if key not in SPEC_KEYS:
            raise ConfigError(f"unknown key {key!r}", line)

    def number(key: str, default: Optional[float] = None) -> Optional[float]:
        if key not in entries:
            return default
        return parse_float(entries[key][0], key, entries[key][1])

    preset = preset_from_entries(entries)
    if "n_sites" in entries:
        n_sites = parse_int(entries["n_sites"][0], "n_sites", entries["n_sites"][1])
    else:
        n_sites = 2

    boundary = entries.get("boundary", ("periodic", 0))
    try:
        if preset is not None and not {"jx", "jy", "jz"} & entries.keys():
            spec = preset_spec(preset, n_sites, h=number("h", 0.0), hx=number("hx", 0.0),
                               boundary=boundary[0])
        else:
            missing = [k for k in ("jx", "jy", "jz", "h") if k not in entries]
            if missing:
                raise ConfigError(f"missing keys: {', '.join(missing)}")
            spec = ChainSpec(
                jx=number("jx"), jy=number("jy"), jz=number("jz"),
                h=number("h"), hx=number("hx", 0.0), n_sites=n_sites,
                boundary=boundary[0],
                operator_convention=entries.get("convention", ("pauli", 0))[0],
                pinning=entries.get("pinning", ("uniform", 0))[0],
            )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), boundary[1])

    return spec
