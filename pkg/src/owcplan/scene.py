"""Scenario descriptions: rooms, transmitters, receiver stations, built-ins.

A :class:`ScenarioConfig` fully parameterizes one indoor deployment and can
be serialized to/from a YAML document (schema documented in the README).
Built-in scenarios (``office``, ``cabin``, ``datacentre``) are embedded
instances of the same schema.  A loaded config is immutable in practice:
build it once, share it freely.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
import yaml

from .geometry import (BoxBlocker, PlaneBlocker, Surface, as_vec3,
                       room_surfaces, unit)
from .radiometry import NoiseParams, ResponsivityTable, lambertian_order

CONFIG_VERSION = 1

#: Wavelength order used throughout: index 0..3 = red, yellow, green, blue.
RYGB = ("red", "yellow", "green", "blue")


def concentrator_gain(refractive_index: float, fov_deg: float) -> float:
    """Idealized compound-parabolic concentrator gain n^2 / sin^2(FOV)."""
    if refractive_index < 1.0:
        raise ValueError("refractive index must be >= 1")
    return (refractive_index / math.sin(math.radians(fov_deg))) ** 2


@dataclass(frozen=True)
class WavelengthSpec:
    name: str
    power_per_ld_w: float
    responsivity_a_per_w: float

    def __post_init__(self):
        if self.power_per_ld_w < 0.0:
            raise ValueError(f"{self.name}: negative transmit power")
        if not 0.0 < self.responsivity_a_per_w <= 1.0:
            raise ValueError(f"{self.name}: responsivity outside (0, 1]")


@dataclass(frozen=True)
class TransmitterUnit:
    """One multi-wavelength laser-diode unit acting as an access point.

    The unit's diodes are modelled as a single co-located point source; the
    per-wavelength power is the per-diode power times ``ld_count``.
    """

    position: np.ndarray
    orientation: np.ndarray       # unit emission axis (downwards in built-ins)
    semi_angle_deg: float         # half-power semi-angle of the beam
    ld_count: int
    per_wavelength_power: dict[str, float]  # total W per wavelength

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position))
        object.__setattr__(self, "orientation", unit(as_vec3(self.orientation)))
        if self.ld_count < 1:
            raise ValueError("ld_count must be >= 1")
        if any(p < 0 for p in self.per_wavelength_power.values()):
            raise ValueError("negative per-wavelength power")

    @property
    def lambertian_order(self) -> float:
        return lambertian_order(self.semi_angle_deg)


@dataclass(frozen=True)
class ReceiverBranch:
    """One photodetector branch of an angle-diversity receiver."""

    azimuth_deg: float
    elevation_deg: float          # from the horizontal plane; 90 = zenith
    fov_deg: float                # acceptance half-angle, hard cutoff
    area_m2: float
    concentrator_gain: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.fov_deg <= 90.0:
            raise ValueError("branch FOV must be in (0, 90] degrees")
        if self.area_m2 <= 0.0:
            raise ValueError("detector area must be positive")
        if self.concentrator_gain <= 0.0:
            raise ValueError("concentrator gain must be positive")

    def boresight(self) -> np.ndarray:
        az = math.radians(self.azimuth_deg)
        el = math.radians(self.elevation_deg)
        return np.array([math.cos(el) * math.cos(az),
                         math.cos(el) * math.sin(az),
                         math.sin(el)])


@dataclass(frozen=True)
class ReceiverStation:
    """A user terminal: position plus an ordered list of branches.

    Branch order is load-bearing; it defines the branch indices used in
    assignments and reports.
    """

    user_id: int
    position: np.ndarray
    branches: tuple[ReceiverBranch, ...]

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position))
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise ValueError(f"station {self.user_id} has no branches")


def default_adr_branches(fov_deg: float = 21.0, elevation_deg: float = 70.0,
                         area_m2: float = 1e-5, gain: float | None = None
                         ) -> tuple[ReceiverBranch, ...]:
    """Four-branch angle-diversity receiver at azimuths 45/135/225/315 deg."""
    if gain is None:
        gain = concentrator_gain(1.5, fov_deg)
    return tuple(
        ReceiverBranch(az, elevation_deg, fov_deg, area_m2, gain)
        for az in (45.0, 135.0, 225.0, 315.0))


@dataclass(frozen=True)
class MeshSpec:
    first_order_element_area_m2: float = 0.0025   # 5 cm x 5 cm
    second_order_element_area_m2: float = 0.04    # 20 cm x 20 cm

    def __post_init__(self):
        if (self.first_order_element_area_m2 <= 0
                or self.second_order_element_area_m2 <= 0):
            raise ValueError("element areas must be positive")


@dataclass(frozen=True)
class RoomSpec:
    size: np.ndarray
    wall_reflectance: float = 0.8
    ceiling_reflectance: float = 0.8
    floor_reflectance: float = 0.3
    surface_lambertian_order: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "size", as_vec3(self.size))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    room: RoomSpec
    mesh: MeshSpec
    wavelengths: tuple[WavelengthSpec, ...]
    transmitters: tuple[TransmitterUnit, ...]
    receivers: tuple[ReceiverStation, ...]
    blockers: tuple[PlaneBlocker | BoxBlocker, ...]
    noise_current_density_pa_per_rthz: float
    receiver_bandwidth_hz: float
    optical_filter_factor: float = 1.0
    sinr_threshold_db: float = 15.6

    # ---- derived views -------------------------------------------------

    def wavelength_names(self) -> tuple[str, ...]:
        return tuple(w.name for w in self.wavelengths)

    def responsivities(self) -> ResponsivityTable:
        return ResponsivityTable(
            {w.name: w.responsivity_a_per_w for w in self.wavelengths})

    def noise_params(self) -> NoiseParams:
        return NoiseParams.from_current_density(
            self.noise_current_density_pa_per_rthz * 1e-12,
            self.receiver_bandwidth_hz,
            self.optical_filter_factor)

    def sinr_threshold_linear(self) -> float:
        return 10.0 ** (self.sinr_threshold_db / 10.0)

    def surfaces(self) -> list[Surface]:
        return room_surfaces(
            self.room.size,
            self.room.wall_reflectance,
            self.room.floor_reflectance,
            self.room.ceiling_reflectance,
            self.room.surface_lambertian_order)

    def validate(self) -> None:
        """Raise ValueError on any violated scenario invariant."""
        names = self.wavelength_names()
        if len(set(names)) != len(names):
            raise ValueError("duplicate wavelength names")
        if not self.transmitters:
            raise ValueError("scenario has no transmitters")
        if not self.receivers:
            raise ValueError("scenario has no receivers")
        for tx in self.transmitters:
            missing = [n for n in names if n not in tx.per_wavelength_power]
            if missing:
                raise ValueError(f"transmitter missing powers for {missing}")
        n_pairs = len(self.transmitters) * len(names)
        if n_pairs < len(self.receivers):
            raise ValueError(
                f"only {n_pairs} (AP, wavelength) pairs for "
                f"{len(self.receivers)} users; every user needs one")
        ids = [st.user_id for st in self.receivers]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate user ids")
        size = self.room.size
        for st in self.receivers:
            if np.any(st.position < 0) or np.any(st.position > size):
                raise ValueError(f"station {st.user_id} outside the room")

    # ---- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        def blk(b):
            if isinstance(b, PlaneBlocker):
                return {"type": "plane", "z": b.z, "x_min": b.x_min,
                        "x_max": b.x_max, "y_min": b.y_min, "y_max": b.y_max}
            return {"type": "box", "lo": list(map(float, b.lo)),
                    "hi": list(map(float, b.hi))}

        return {
            "version": CONFIG_VERSION,
            "name": self.name,
            "room": {
                "size": list(map(float, self.room.size)),
                "wall_reflectance": self.room.wall_reflectance,
                "ceiling_reflectance": self.room.ceiling_reflectance,
                "floor_reflectance": self.room.floor_reflectance,
                "surface_lambertian_order": self.room.surface_lambertian_order,
            },
            "mesh": {
                "first_order_element_area_m2": self.mesh.first_order_element_area_m2,
                "second_order_element_area_m2": self.mesh.second_order_element_area_m2,
            },
            "wavelengths": [
                {"name": w.name, "power_per_ld_w": w.power_per_ld_w,
                 "responsivity_a_per_w": w.responsivity_a_per_w}
                for w in self.wavelengths],
            "transmitters": [
                {"position": list(map(float, t.position)),
                 "orientation": list(map(float, t.orientation)),
                 "semi_angle_deg": t.semi_angle_deg,
                 "ld_count": t.ld_count}
                for t in self.transmitters],
            "receivers": [
                {"user_id": st.user_id,
                 "position": list(map(float, st.position)),
                 "branches": [
                     {"azimuth_deg": br.azimuth_deg,
                      "elevation_deg": br.elevation_deg,
                      "fov_deg": br.fov_deg,
                      "area_m2": br.area_m2,
                      "concentrator_gain": br.concentrator_gain}
                     for br in st.branches]}
                for st in self.receivers],
            "blockers": [blk(b) for b in self.blockers],
            "noise": {
                "current_density_pa_per_rthz": self.noise_current_density_pa_per_rthz,
                "bandwidth_hz": self.receiver_bandwidth_hz,
                "optical_filter_factor": self.optical_filter_factor,
            },
            "sinr_threshold_db": self.sinr_threshold_db,
        }

    @staticmethod
    def from_dict(data: dict) -> "ScenarioConfig":
        version = data.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {version}")
        wavelengths = tuple(
            WavelengthSpec(w["name"], float(w["power_per_ld_w"]),
                           float(w["responsivity_a_per_w"]))
            for w in data["wavelengths"])
        per_ld = {w.name: w.power_per_ld_w for w in wavelengths}
        transmitters = tuple(
            TransmitterUnit(
                t["position"], t["orientation"], float(t["semi_angle_deg"]),
                int(t["ld_count"]),
                {n: p * int(t["ld_count"]) for n, p in per_ld.items()})
            for t in data["transmitters"])
        receivers = tuple(
            ReceiverStation(
                int(r["user_id"]), r["position"],
                tuple(ReceiverBranch(float(b["azimuth_deg"]),
                                     float(b["elevation_deg"]),
                                     float(b["fov_deg"]),
                                     float(b["area_m2"]),
                                     float(b.get("concentrator_gain", 1.0)))
                      for b in r["branches"]))
            for r in data["receivers"])
        blockers = []
        for b in data.get("blockers", []):
            if b["type"] == "plane":
                blockers.append(PlaneBlocker(float(b["z"]), float(b["x_min"]),
                                             float(b["x_max"]), float(b["y_min"]),
                                             float(b["y_max"])))
            elif b["type"] == "box":
                blockers.append(BoxBlocker(b["lo"], b["hi"]))
            else:
                raise ValueError(f"unknown blocker type {b['type']!r}")
        room = data["room"]
        noise = data["noise"]
        cfg = ScenarioConfig(
            name=data["name"],
            room=RoomSpec(room["size"], float(room["wall_reflectance"]),
                          float(room["ceiling_reflectance"]),
                          float(room["floor_reflectance"]),
                          float(room.get("surface_lambertian_order", 1.0))),
            mesh=MeshSpec(float(data["mesh"]["first_order_element_area_m2"]),
                          float(data["mesh"]["second_order_element_area_m2"])),
            wavelengths=wavelengths,
            transmitters=transmitters,
            receivers=receivers,
            blockers=tuple(blockers),
            noise_current_density_pa_per_rthz=float(noise["current_density_pa_per_rthz"]),
            receiver_bandwidth_hz=float(noise["bandwidth_hz"]),
            optical_filter_factor=float(noise.get("optical_filter_factor", 1.0)),
            sinr_threshold_db=float(data.get("sinr_threshold_db", 15.6)),
        )
        cfg.validate()
        return cfg

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=True)

    @staticmethod
    def load(path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ValueError(f"cannot parse scenario config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValueError(f"scenario config {path} is not a mapping")
        try:
            return ScenarioConfig.from_dict(data)
        except KeyError as exc:
            raise ValueError(f"scenario config {path}: missing field {exc}") from exc

    def content_hash(self) -> str:
        """Stable hash of the full scenario parameterization."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Built-in scenarios
# ---------------------------------------------------------------------------

#: Per-diode transmit powers, W: red, yellow, green, blue.
RYGB_LD_POWERS = {"red": 0.8, "yellow": 0.5, "green": 0.3, "blue": 0.3}
RYGB_RESPONSIVITIES = {"red": 0.4, "yellow": 0.35, "green": 0.3, "blue": 0.2}

_NOISE_DENSITY_PA = 4.47       # pA/sqrt(Hz)
_RX_BANDWIDTH_HZ = 5e9


def _wavelength_specs() -> tuple[WavelengthSpec, ...]:
    return tuple(WavelengthSpec(n, RYGB_LD_POWERS[n], RYGB_RESPONSIVITIES[n])
                 for n in RYGB)


def _make_tx(position, semi_angle_deg, ld_count) -> TransmitterUnit:
    return TransmitterUnit(
        position, [0.0, 0.0, -1.0], semi_angle_deg, ld_count,
        {n: RYGB_LD_POWERS[n] * ld_count for n in RYGB})


def _office() -> ScenarioConfig:
    # Room size chosen to enclose every unit and user coordinate; transmitters sit
    # on the ceiling plane.
    users = [
        (1, (0.5, 0.5, 1.0)), (2, (0.5, 2.5, 1.0)),
        (3, (1.5, 1.5, 1.0)), (4, (1.5, 3.5, 1.0)),
        (5, (2.5, 0.5, 1.0)), (6, (2.5, 2.5, 1.0)),
        (7, (3.5, 1.5, 1.0)), (8, (3.5, 3.5, 1.0)),
    ]
    branches = default_adr_branches()
    return ScenarioConfig(
        name="office",
        room=RoomSpec((4.0, 4.0, 3.0)),
        mesh=MeshSpec(),
        wavelengths=_wavelength_specs(),
        transmitters=tuple(_make_tx(p, 60.0, 9) for p in
                           [(1.0, 1.0, 3.0), (1.0, 3.0, 3.0),
                            (3.0, 1.0, 3.0), (3.0, 3.0, 3.0)]),
        receivers=tuple(ReceiverStation(uid, pos, branches)
                        for uid, pos in users),
        blockers=(),
        noise_current_density_pa_per_rthz=_NOISE_DENSITY_PA,
        receiver_bandwidth_hz=_RX_BANDWIDTH_HZ,
    )


# Cabin section layout (6 evaluated seats of the wide-body single-aisle
# cabin; the full 202-seat cabin is out of scope).  Two rows at 0.81 m pitch;
# three seat positions spread across the 3.63 m cabin width; reading-light
# units on the ceiling directly above each seat.
_CABIN_ROWS_X = (0.795, 1.605)
_CABIN_SEATS_Y = (0.615, 1.815, 3.015)
_CABIN_SIZE = (2.4, 3.63, 2.2)
_SEAT_HALF = 0.225            # seat surface is 0.45 m x 0.45 m
_SEAT_Z = 0.45
_DEVICE_CORNER = 0.18


def _cabin() -> ScenarioConfig:
    branches = default_adr_branches()
    transmitters = []
    receivers = []
    blockers = []
    uid = 1
    for x in _CABIN_ROWS_X:
        for y in _CABIN_SEATS_Y:
            transmitters.append(_make_tx((x, y, _CABIN_SIZE[2]), 19.0, 3))
            blockers.append(PlaneBlocker(_SEAT_Z, x - _SEAT_HALF, x + _SEAT_HALF,
                                         y - _SEAT_HALF, y + _SEAT_HALF))
            # Device 1 at the seat centre, devices 2 and 3 at opposite corners.
            for dx, dy in ((0.0, 0.0), (-_DEVICE_CORNER, -_DEVICE_CORNER),
                           (_DEVICE_CORNER, _DEVICE_CORNER)):
                receivers.append(
                    ReceiverStation(uid, (x + dx, y + dy, _SEAT_Z), branches))
                uid += 1
    return ScenarioConfig(
        name="cabin",
        room=RoomSpec(_CABIN_SIZE),
        mesh=MeshSpec(),
        wavelengths=_wavelength_specs(),
        transmitters=tuple(transmitters),
        receivers=tuple(receivers),
        blockers=tuple(blockers),
        noise_current_density_pa_per_rthz=_NOISE_DENSITY_PA,
        receiver_bandwidth_hz=_RX_BANDWIDTH_HZ,
    )


# Data-centre pod: two rack rows aligned under the transmitter rows, five
# racks per row, one receiver at the centre of each rack top.
_DC_SIZE = (6.0, 5.0, 3.0)
_DC_ROWS_X = (1.6, 4.4)
_DC_RACKS_Y = (1.1, 1.8, 2.5, 3.2, 3.9)
_RACK_HALF_X = 0.5            # rack footprint 1.0 m (x) by 0.6 m (y)
_RACK_HALF_Y = 0.3
_RACK_HEIGHT = 2.0


def _datacentre() -> ScenarioConfig:
    branches = default_adr_branches()
    transmitters = [_make_tx((x, y, 3.0), 60.0, 9)
                    for x in _DC_ROWS_X for y in (1.5, 2.5, 3.5)]
    receivers = []
    blockers = []
    uid = 1
    for x in _DC_ROWS_X:
        for y in _DC_RACKS_Y:
            receivers.append(ReceiverStation(uid, (x, y, _RACK_HEIGHT), branches))
            blockers.append(BoxBlocker((x - _RACK_HALF_X, y - _RACK_HALF_Y, 0.0),
                                       (x + _RACK_HALF_X, y + _RACK_HALF_Y,
                                        _RACK_HEIGHT)))
            uid += 1
    return ScenarioConfig(
        name="datacentre",
        room=RoomSpec(_DC_SIZE),
        mesh=MeshSpec(),
        wavelengths=_wavelength_specs(),
        transmitters=tuple(transmitters),
        receivers=tuple(receivers),
        blockers=tuple(blockers),
        noise_current_density_pa_per_rthz=_NOISE_DENSITY_PA,
        receiver_bandwidth_hz=_RX_BANDWIDTH_HZ,
    )


_BUILTINS = {"office": _office, "cabin": _cabin, "datacentre": _datacentre}


def builtin_scenario(name: str) -> ScenarioConfig:
    """Return a fully parameterized built-in scenario by name."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ValueError(
            f"unknown scenario {name!r}; valid names: {sorted(_BUILTINS)}"
        ) from None
    cfg = factory()
    cfg.validate()
    return cfg
