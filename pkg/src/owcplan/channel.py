"""Ray-traced optical channel computation.

For every (station, access point, wavelength, branch) tuple this module
produces a time-binned impulse response built from the line-of-sight path,
first-order reflections off a fine surface mesh, and second-order
reflections across a coarser mesh (higher orders contribute negligibly and
are excluded).  Reflection elements behave as secondary Lambertian emitters.

Determinism: elements are canonically sorted before tracing and every
reduction runs in a fixed index order, so results are bit-identical across
runs and across worker counts.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.fft

from .geometry import SPEED_OF_LIGHT, Blocker, ElementSet, mesh_surfaces, occluded_mask
from .scene import ReceiverBranch, ReceiverStation, ScenarioConfig, TransmitterUnit

CACHE_VERSION = 1

_TWO_PI = 2.0 * math.pi
# Chunk size (rows) for pairwise element-element computations; bounds the
# transient memory of the N x N kernels.
_CHUNK = 512


# ---------------------------------------------------------------------------
# Impulse responses and scalar descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImpulseResponse:
    """Received optical power per time bin for one channel tuple."""

    bin_width_s: float
    origin_delay_s: float
    bins: np.ndarray  # W per bin, all >= 0

    def __post_init__(self):
        if self.bin_width_s <= 0.0:
            raise ValueError("bin width must be positive")
        b = np.asarray(self.bins, dtype=float)
        if b.ndim != 1:
            raise ValueError("bins must be one-dimensional")
        if len(b) and float(b.min()) < 0.0:
            raise ValueError("impulse response bins must be non-negative")
        object.__setattr__(self, "bins", b)

    def bin_times(self) -> np.ndarray:
        """Bin-centre times in seconds."""
        return (self.origin_delay_s
                + (np.arange(len(self.bins)) + 0.5) * self.bin_width_s)


def received_optical_power(ir: ImpulseResponse) -> float:
    """Total received optical power: the sum over all bins, W."""
    return float(ir.bins.sum())


def bandwidth_3db(ir: ImpulseResponse, dft_size: int = 2 ** 20) -> float:
    """Lowest frequency where |H(f)|^2 / |H(0)|^2 drops below one half.

    The binned response is zero-padded onto a ``dft_size`` grid, giving a
    frequency resolution of 1 / (dft_size * bin_width).  Returns ``math.inf``
    when the response stays above half power all the way to the binning
    Nyquist frequency.
    """
    if not len(ir.bins) or float(ir.bins.sum()) == 0.0:
        raise ValueError("bandwidth of an all-zero impulse response is undefined")
    if len(ir.bins) > dft_size:
        raise ValueError("impulse response longer than the DFT grid")
    spectrum = scipy.fft.rfft(ir.bins, n=dft_size)
    power = np.abs(spectrum) ** 2
    below = power < 0.5 * power[0]
    if not below.any():
        return math.inf
    k = int(np.argmax(below))
    return k / (dft_size * ir.bin_width_s)


def rms_delay_spread(ir: ImpulseResponse) -> float:
    """Power-weighted RMS spread of the arrival delays, seconds."""
    total = float(ir.bins.sum())
    if not len(ir.bins) or total == 0.0:
        raise ValueError("delay spread of an all-zero impulse response is undefined")
    t = ir.bin_times()
    mean = float((t * ir.bins).sum()) / total
    var = float(((t - mean) ** 2 * ir.bins).sum()) / total
    return math.sqrt(var)


@dataclass(frozen=True)
class TraceParams:
    """Knobs of the tracer that affect its numerical output."""

    bin_width_s: float = 1e-11     # resolves multi-GHz 3 dB bandwidths
    window_s: float = 1e-7         # extended automatically on overflow
    dft_size: int = 2 ** 20

    def __post_init__(self):
        if self.bin_width_s <= 0 or self.window_s <= 0:
            raise ValueError("bin width and window must be positive")
        if self.dft_size < 2:
            raise ValueError("dft_size must be >= 2")

    @property
    def nyquist_hz(self) -> float:
        return 0.5 / self.bin_width_s

    def to_dict(self) -> dict:
        return {"bin_width_s": self.bin_width_s, "window_s": self.window_s,
                "dft_size": self.dft_size}


# ---------------------------------------------------------------------------
# Elementary transfer kernels
# ---------------------------------------------------------------------------

def _lambertian_scale(order: np.ndarray | float) -> np.ndarray | float:
    return (order + 1.0) / _TWO_PI


def _cos_pow(cos_vals: np.ndarray, order) -> np.ndarray:
    """cos^order with a fast path for the ubiquitous order-1 case."""
    if np.isscalar(order) or np.ndim(order) == 0:
        if float(order) == 1.0:
            return cos_vals
        return np.power(cos_vals, float(order), where=cos_vals > 0,
                        out=np.zeros_like(cos_vals))
    order = np.asarray(order, dtype=float)
    if np.all(order == 1.0):
        return cos_vals
    return np.power(cos_vals, order, where=cos_vals > 0,
                    out=np.zeros_like(cos_vals))


def los_power(tx: TransmitterUnit, rx_position, branch: ReceiverBranch,
              wavelength: str) -> float:
    """Line-of-sight received optical power for one branch, W.

    Applies the generalized-Lambertian link equation with the branch field
    of view as a hard cutoff.  Occlusion is the caller's concern.
    """
    rx = np.asarray(rx_position, dtype=float)
    vec = rx - tx.position
    d2 = float(vec @ vec)
    if d2 == 0.0:
        raise ValueError("transmitter and receiver positions coincide")
    d = math.sqrt(d2)
    direction = vec / d
    cos_phi = float(direction @ tx.orientation)
    cos_theta = float(branch.boresight() @ (-direction))
    if cos_phi <= 0.0 or cos_theta <= 0.0:
        return 0.0
    if cos_theta < math.cos(math.radians(branch.fov_deg)):
        return 0.0
    n = tx.lambertian_order
    power = tx.per_wavelength_power[wavelength]
    return (power * _lambertian_scale(n) * cos_phi ** n * cos_theta
            * branch.area_m2 * branch.concentrator_gain / d2)


def _point_to_elements(src_pos, src_axis, order, elements: ElementSet,
                       blockers) -> tuple[np.ndarray, np.ndarray]:
    """Incident power per W of source power on each element, plus distances."""
    vec = elements.centres - src_pos[None, :]
    d2 = np.einsum("ij,ij->i", vec, vec)
    d = np.sqrt(d2)
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = vec / d[:, None]
    cos_phi = direction @ src_axis
    cos_inc = -np.einsum("ij,ij->i", direction, elements.normals)
    ok = (d2 > 0.0) & (cos_phi > 0.0) & (cos_inc > 0.0)
    if blockers and ok.any():
        idx = np.nonzero(ok)[0]
        blocked = occluded_mask(src_pos[None, :], elements.centres[idx], blockers)
        ok[idx[blocked]] = False
    incident = np.zeros(len(elements))
    if ok.any():
        incident[ok] = (_lambertian_scale(order)
                        * _cos_pow(cos_phi[ok], order)
                        * cos_inc[ok] * elements.areas[ok] / d2[ok])
    return incident, d


def _elements_to_branch(elements: ElementSet, station: ReceiverStation,
                        branch: ReceiverBranch, blockers
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Per-element reflection-to-branch factor (includes rho), plus distances."""
    rx = station.position
    vec = elements.centres - rx[None, :]
    d2 = np.einsum("ij,ij->i", vec, vec)
    d = np.sqrt(d2)
    with np.errstate(invalid="ignore", divide="ignore"):
        direction = vec / d[:, None]        # rx -> element
    cos_theta = direction @ branch.boresight()
    cos_emit = -np.einsum("ij,ij->i", direction, elements.normals)
    cos_fov = math.cos(math.radians(branch.fov_deg))
    ok = ((d2 > 0.0) & (cos_theta >= cos_fov) & (cos_theta > 0.0)
          & (cos_emit > 0.0))
    if blockers and ok.any():
        idx = np.nonzero(ok)[0]
        blocked = occluded_mask(elements.centres[idx], rx[None, :], blockers)
        ok[idx[blocked]] = False
    factor = np.zeros(len(elements))
    if ok.any():
        factor[ok] = (elements.reflection[ok]
                      * _lambertian_scale(elements.orders[ok])
                      * _cos_pow(cos_emit[ok], elements.orders[ok])
                      * cos_theta[ok] * branch.area_m2
                      * branch.concentrator_gain / d2[ok])
    return factor, d


def _element_transfer(elements: ElementSet, blockers
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Element-to-element transfer matrix T (rho folded in) and distances.

    T[i, j] is the fraction of power incident on element i that arrives on
    element j after one reflection.  Rows of the underlying geometric kernel
    are clipped to a unit sum so a discretized emitter can never re-emit
    more than rho times its incident power.
    """
    n = len(elements)
    ff = np.zeros((n, n))
    dist = np.zeros((n, n))
    centres = elements.centres
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        vec = centres[None, :, :] - centres[start:stop, None, :]
        d2 = np.einsum("bjk,bjk->bj", vec, vec)
        with np.errstate(divide="ignore", invalid="ignore"):
            direction = vec / np.sqrt(d2)[:, :, None]
        cos_out = np.einsum("bjk,bk->bj", direction, elements.normals[start:stop])
        cos_in = -np.einsum("bjk,jk->bj", direction, elements.normals)
        ok = (d2 > 0.0) & (cos_out > 0.0) & (cos_in > 0.0)
        cos_out = np.where(ok, cos_out, 0.0)
        block = np.zeros_like(d2)
        scale = _lambertian_scale(elements.orders[start:stop])[:, None]
        powed = _cos_pow(cos_out, elements.orders[start:stop][:, None])
        np.divide(scale * powed * np.where(ok, cos_in, 0.0)
                  * elements.areas[None, :], d2, out=block, where=ok)
        if blockers and ok.any():
            bi, bj = np.nonzero(block > 0.0)
            if len(bi):
                blocked = occluded_mask(centres[start + bi], centres[bj], blockers)
                block[bi[blocked], bj[blocked]] = 0.0
        ff[start:stop] = block
        dist[start:stop] = np.sqrt(np.where(d2 > 0, d2, 0.0))
    row_sums = ff.sum(axis=1)
    over = row_sums > 1.0
    if over.any():
        ff[over] /= row_sums[over, None]
    return elements.reflection[:, None] * ff, dist, ff.sum(axis=1)


# ---------------------------------------------------------------------------
# Scenario tracer
# ---------------------------------------------------------------------------

def _canonical_order(elements: ElementSet) -> ElementSet:
    """Sort elements by centre coordinates so results are permutation-proof."""
    c = elements.centres
    order = np.lexsort((c[:, 2], c[:, 1], c[:, 0]))
    return ElementSet(c[order], elements.areas[order], elements.normals[order],
                      elements.reflection[order], elements.orders[order])


class Tracer:
    """Precomputed geometry for tracing one scenario.

    Holds the meshed surfaces, the per-access-point incident power on every
    element, and the element-to-element transfer matrix.  Immutable once
    built; safe for concurrent reads.
    """

    def __init__(self, transmitters, stations, blockers, fine: ElementSet,
                 coarse: ElementSet, params: TraceParams):
        self.transmitters: tuple[TransmitterUnit, ...] = tuple(transmitters)
        self.stations: tuple[ReceiverStation, ...] = tuple(stations)
        self.blockers: tuple[Blocker, ...] = tuple(blockers)
        self.params = params
        self.fine = _canonical_order(fine)
        self.coarse = _canonical_order(coarse)

        blk = list(self.blockers)
        self._g0_fine = []
        self._d0_fine = []
        self._g0_coarse = []
        self._d0_coarse = []
        for tx in self.transmitters:
            g, d = _point_to_elements(tx.position, tx.orientation,
                                      tx.lambertian_order, self.fine, blk)
            self._g0_fine.append(g)
            self._d0_fine.append(d)
            g, d = _point_to_elements(tx.position, tx.orientation,
                                      tx.lambertian_order, self.coarse, blk)
            self._g0_coarse.append(g)
            self._d0_coarse.append(d)
        if len(self.coarse):
            self._t_coarse, self._d12, self.coarse_row_sums = _element_transfer(
                self.coarse, blk)
        else:
            self._t_coarse = np.zeros((0, 0))
            self._d12 = np.zeros((0, 0))
            self.coarse_row_sums = np.zeros(0)

    @classmethod
    def from_config(cls, config: ScenarioConfig,
                    params: TraceParams | None = None) -> "Tracer":
        params = params or TraceParams()
        surfaces = config.surfaces()
        fine = mesh_surfaces(surfaces, config.mesh.first_order_element_area_m2)
        coarse = mesh_surfaces(surfaces, config.mesh.second_order_element_area_m2)
        return cls(config.transmitters, config.receivers, config.blockers,
                   fine, coarse, params)

    # -- per-tuple tracing -----------------------------------------------

    def _los(self, ap: int, st: int, b: int) -> tuple[float, float]:
        tx = self.transmitters[ap]
        station = self.stations[st]
        branch = station.branches[b]
        vec = station.position - tx.position
        d = float(np.linalg.norm(vec))
        if d == 0.0:
            raise ValueError("transmitter and receiver positions coincide")
        if self.blockers and occluded_mask(tx.position[None, :],
                                           station.position[None, :],
                                           list(self.blockers))[0]:
            return 0.0, d / SPEED_OF_LIGHT
        unit_tx = TransmitterUnit(tx.position, tx.orientation, tx.semi_angle_deg,
                                  tx.ld_count, {"__unit__": 1.0})
        return (los_power(unit_tx, station.position, branch, "__unit__"),
                d / SPEED_OF_LIGHT)

    def _branch_legs(self, st: int, b: int):
        """Receiver-side factors for one (station, branch); AP-independent."""
        blk = list(self.blockers)
        station = self.stations[st]
        branch = station.branches[b]
        leg_f, d_f = _elements_to_branch(self.fine, station, branch, blk)
        if len(self.coarse):
            leg_c, d_c = _elements_to_branch(self.coarse, station, branch, blk)
        else:
            leg_c = np.zeros(0)
            d_c = np.zeros(0)
        return leg_f, d_f, leg_c, d_c

    def _paths_with_legs(self, ap: int, st: int, b: int, legs):
        leg_f, d_f, leg_c, d_c = legs
        powers = []
        delays = []

        p_los, t_los = self._los(ap, st, b)
        if p_los > 0.0:
            powers.append(np.array([p_los]))
            delays.append(np.array([t_los]))

        mask1 = (self._g0_fine[ap] > 0.0) & (leg_f > 0.0)
        if mask1.any():
            powers.append(self._g0_fine[ap][mask1] * leg_f[mask1])
            delays.append((self._d0_fine[ap][mask1] + d_f[mask1]) / SPEED_OF_LIGHT)

        if len(self.coarse):
            src = np.nonzero(self._g0_coarse[ap] > 0.0)[0]
            dst = np.nonzero(leg_c > 0.0)[0]
            if len(src) and len(dst):
                t_sub = self._t_coarse[np.ix_(src, dst)]
                w = (self._g0_coarse[ap][src][:, None] * t_sub
                     * leg_c[dst][None, :])
                tau = (self._d0_coarse[ap][src][:, None]
                       + self._d12[np.ix_(src, dst)]
                       + d_c[dst][None, :]) / SPEED_OF_LIGHT
                nz = w > 0.0
                if nz.any():
                    powers.append(w[nz])
                    delays.append(tau[nz])

        if powers:
            return np.concatenate(powers), np.concatenate(delays)
        return np.zeros(0), np.zeros(0)

    def geometric_paths(self, ap: int, st: int, b: int):
        """All path contributions for unit transmit power.

        Returns (powers, delays) with LOS first, then first-order paths in
        canonical fine-element order, then second-order paths in canonical
        coarse-pair order.
        """
        return self._paths_with_legs(ap, st, b, self._branch_legs(st, b))

    def _bin_paths(self, powers: np.ndarray, delays: np.ndarray
                   ) -> tuple[np.ndarray, float]:
        n_bins = int(math.ceil(self.params.window_s / self.params.bin_width_s))
        if len(powers) == 0:
            return np.zeros(n_bins), 0.0
        idx = np.floor(delays / self.params.bin_width_s).astype(np.int64)
        max_idx = int(idx.max())
        if max_idx >= n_bins:
            warnings.warn(
                f"path delay {delays.max():.3e} s exceeds the trace window; "
                "extending the impulse-response window", stacklevel=2)
            n_bins = max_idx + 1
        bins = np.bincount(idx, weights=powers, minlength=n_bins)
        return bins, float(powers.sum())

    def geometric_ir(self, ap: int, st: int, b: int
                     ) -> tuple[np.ndarray, float]:
        """Binned geometric impulse response and the direct power sum."""
        return self._bin_paths(*self.geometric_paths(ap, st, b))

    def geometric_ir_block(self, st: int, b: int) -> list:
        """Per-AP binned responses for one (station, branch), legs shared."""
        legs = self._branch_legs(st, b)
        return [self._bin_paths(*self._paths_with_legs(ap, st, b, legs))
                for ap in range(len(self.transmitters))]


def trace_impulse_response(config: ScenarioConfig, ap: int, station: int,
                           branch: int, wavelength: str,
                           params: TraceParams | None = None,
                           tracer: Tracer | None = None) -> ImpulseResponse:
    """Trace one (AP, station, branch, wavelength) tuple from scratch."""
    tracer = tracer or Tracer.from_config(config, params)
    bins, _ = tracer.geometric_ir(ap, station, branch)
    power = config.transmitters[ap].per_wavelength_power[wavelength]
    return ImpulseResponse(tracer.params.bin_width_s, 0.0, bins * power)


# ---------------------------------------------------------------------------
# Full channel matrix
# ---------------------------------------------------------------------------

class ChannelMatrix:
    """Received optical power for every (user, AP, wavelength, branch) tuple.

    ``po`` is indexed [user][ap][wavelength][branch] in W.  Bandwidth and
    delay spread are wavelength-independent (the impulse response scales
    linearly with transmit power) and are indexed [user][ap][branch].
    """

    def __init__(self, scenario_name, scenario_hash, params: TraceParams,
                 wavelengths, po, bandwidth_hz, delay_spread_s,
                 po_geometric=None, po_direct=None, ir_geometric=None,
                 tx_power=None):
        self.scenario_name = scenario_name
        self.scenario_hash = scenario_hash
        self.params = params
        self.wavelengths = tuple(wavelengths)
        self.po = np.asarray(po, dtype=float)
        self.bandwidth_hz = np.asarray(bandwidth_hz, dtype=float)
        self.delay_spread_s = np.asarray(delay_spread_s, dtype=float)
        self.po_geometric = po_geometric
        self.po_direct = po_direct
        self._ir_geometric = ir_geometric
        self._tx_power = tx_power
        if np.any(self.po < 0.0):
            raise ValueError("received optical powers must be non-negative")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.po.shape

    @property
    def nyquist_hz(self) -> float:
        return self.params.nyquist_hz

    def wavelength_index(self, wavelength: str) -> int:
        return self.wavelengths.index(wavelength)

    def has_impulse_responses(self) -> bool:
        return self._ir_geometric is not None

    def impulse_response(self, us: int, ap: int, wavelength, b: int
                         ) -> ImpulseResponse:
        if self._ir_geometric is None:
            raise ValueError("impulse responses were not retained "
                             "(matrix loaded from cache)")
        w = (self.wavelength_index(wavelength) if isinstance(wavelength, str)
             else int(wavelength))
        scale = self._tx_power[ap, w]
        return ImpulseResponse(self.params.bin_width_s, 0.0,
                               self._ir_geometric[us, ap, b] * scale)

    # -- cache I/O ---------------------------------------------------------

    def cache_key(self) -> str:
        return cache_key(self.scenario_hash, self.params)

    def to_cache_dict(self) -> dict:
        return {
            "version": CACHE_VERSION,
            "scenario_name": self.scenario_name,
            "scenario_hash": self.scenario_hash,
            "trace_params": self.params.to_dict(),
            "wavelengths": list(self.wavelengths),
            "shape": list(self.po.shape),
            "po_w": self.po.tolist(),
            "bandwidth_hz": self.bandwidth_hz.tolist(),
            "delay_spread_s": self.delay_spread_s.tolist(),
        }

    def save_cache(self, path) -> None:
        text = json.dumps(self.to_cache_dict(), sort_keys=True,
                          separators=(",", ":"))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.write("\n")

    @staticmethod
    def load_cache(path) -> "ChannelMatrix":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("version") != CACHE_VERSION:
            raise ValueError(f"unsupported channel cache version in {path}")
        return ChannelMatrix(
            data["scenario_name"], data["scenario_hash"],
            TraceParams(**data["trace_params"]), data["wavelengths"],
            np.asarray(data["po_w"]), np.asarray(data["bandwidth_hz"]),
            np.asarray(data["delay_spread_s"]))


def cache_key(scenario_hash: str, params: TraceParams) -> str:
    blob = json.dumps({"scenario": scenario_hash,
                       "params": params.to_dict()}, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def default_workers() -> int:
    value = os.environ.get("OWCPLAN_WORKERS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        warnings.warn(f"ignoring invalid OWCPLAN_WORKERS={value!r}")
        return 1


def compute_channel_matrix(config: ScenarioConfig,
                           params: TraceParams | None = None,
                           workers: int | None = None,
                           keep_impulse_responses: bool = True
                           ) -> ChannelMatrix:
    """Trace the full scenario and assemble the channel matrix.

    Work items are (station, branch) blocks; partial results are merged in
    index order, so output is independent of ``workers``.
    """
    params = params or TraceParams()
    workers = workers if workers is not None else default_workers()
    config.validate()
    tracer = Tracer.from_config(config, params)

    n_us = len(config.receivers)
    n_ap = len(config.transmitters)
    n_b = max(len(st.branches) for st in config.receivers)
    names = config.wavelength_names()
    n_w = len(names)

    tasks = [(st, b) for st in range(n_us) for b in range(n_b)]

    def run_block(task):
        st, b = task
        if b >= len(config.receivers[st].branches):
            return task, None
        return task, tracer.geometric_ir_block(st, b)

    block_results: dict[tuple[int, int], list] = {}
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for task, res in pool.map(run_block, tasks):
                block_results[task] = res
    else:
        for task in tasks:
            block_results[task] = run_block(task)[1]

    length = max((len(r[0]) for res in block_results.values() if res
                  for r in res), default=0)
    ir_geo = np.zeros((n_us, n_ap, n_b, length))
    po_direct = np.zeros((n_us, n_ap, n_b))
    for (st, b) in tasks:  # fixed merge order
        res = block_results[(st, b)]
        if res is None:
            continue
        for ap, (bins, direct) in enumerate(res):
            ir_geo[st, ap, b, :len(bins)] = bins
            po_direct[st, ap, b] = direct

    po_geometric = ir_geo.sum(axis=3)
    tx_power = np.array([[tx.per_wavelength_power[n] for n in names]
                         for tx in config.transmitters])
    po = np.einsum("sab,aw->sawb", po_geometric, tx_power)

    bandwidth = np.full((n_us, n_ap, n_b), np.nan)
    spread = np.full((n_us, n_ap, n_b), np.nan)
    for st in range(n_us):
        for ap in range(n_ap):
            for b in range(n_b):
                if po_geometric[st, ap, b] > 0.0:
                    ir = ImpulseResponse(params.bin_width_s, 0.0,
                                         ir_geo[st, ap, b])
                    bandwidth[st, ap, b] = bandwidth_3db(ir, params.dft_size)
                    spread[st, ap, b] = rms_delay_spread(ir)

    return ChannelMatrix(
        config.name, config.content_hash(), params, names, po, bandwidth,
        spread, po_geometric=po_geometric, po_direct=po_direct,
        ir_geometric=ir_geo if keep_impulse_responses else None,
        tx_power=tx_power)
