"""Per-link capacities: constant-rate fiber and UMi street-canyon mmWave.

The mmWave pipeline follows the 3GPP 38.901 UMi-SC pathloss slopes with
optional log-normal shadowing, a half-wavelength ULA at the DU, a single
antenna at the AP, and analog beamforming with quantized phase shifters.
The beamformer is picked from the separable codebook

    f = (1/N) [e^{j phi_1} ... e^{j phi_N}],  phi_i in Q,

where Q holds 2^q equispaced phases. By default Q spans [0, pi) and the
entries are scaled by 1/N (not 1/sqrt(N)); ``extend_phase_range`` widens
Q to [0, 2pi). Codeword selection is an exact maximizer of |h^T f| over
the separable codebook (see select_beamformer), verified against
exhaustive enumeration for small arrays.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .scenario import AccessPoint, DistributedUnit, Scenario

THERMAL_NOISE_DBM_PER_HZ = -174.0
MIN_DISTANCE_M = 1.0  # pathloss model validity floor
LOS_SHADOW_STD_DB = 4.0
NLOS_SHADOW_STD_DB = 8.2
DEFAULT_FIBER_RATE = 10.0e9  # bits/s, constant per link


@dataclass
class MmWaveParams:
    """mmWave link parameters (defaults follow the simulation setup)."""
    carrier_ghz: float = 28.0
    bandwidth_hz: float = 800e6
    tx_power_w: float = 120.0
    n_du_antennas: int = 128
    n_ap_antennas: int = 1
    phase_bits: int = 6
    noise_figure_db: float = 7.0
    los_mode: str = "always-los"      # or "bernoulli"
    nlos_probability: float = 0.0     # used when los_mode == "bernoulli"
    shadowing_enabled: bool = True
    extend_phase_range: bool = False  # widen the phase set from [0, pi) to [0, 2pi)

    def __post_init__(self):
        if self.n_ap_antennas != 1:
            raise ValueError("the model assumes a single AP antenna")
        if self.phase_bits < 1:
            raise ValueError("phase_bits must be >= 1")
        if self.tx_power_w <= 0:
            raise ValueError("tx_power_w must be > 0")
        if self.los_mode not in ("always-los", "bernoulli"):
            raise ValueError(f"unknown los_mode {self.los_mode!r}")
        if not (0.0 <= self.nlos_probability <= 1.0):
            raise ValueError("nlos_probability must be in [0, 1]")

    @property
    def phase_count(self) -> int:
        return 2 ** self.phase_bits

    @property
    def phase_span(self) -> float:
        return 2.0 * np.pi if self.extend_phase_range else np.pi

    @property
    def phase_step(self) -> float:
        return self.phase_span / self.phase_count

    def phase_set(self) -> np.ndarray:
        """The quantized phase values Q."""
        return np.arange(self.phase_count) * self.phase_step


@dataclass
class ChannelVector:
    """DU-to-AP channel: N complex gains with pathloss folded in."""
    entries: np.ndarray
    los: bool
    paths: list[tuple[complex, float]]  # (gain, angle-of-departure)


@dataclass
class Beamformer:
    """Quantized analog beamformer; entries are (1/N) * e^{j phase}."""
    phases: np.ndarray
    norm_factor: float

    @property
    def vector(self) -> np.ndarray:
        return self.norm_factor * np.exp(1j * self.phases)


@dataclass
class LinkBudget:
    """Capacities of the two candidate technologies for one DU-AP pair."""
    du_id: int
    ap_id: int
    distance_m: float
    fiber_rate: float    # bits/s
    mmwave_rate: float   # bits/s
    snr_db: float


# ---------------------------------------------------------------------------
# Pathloss, shadowing, noise
# ---------------------------------------------------------------------------

def pathloss_los(distance_m: float, carrier_ghz: float, shadow_db: float = 0.0) -> float:
    """UMi street-canyon LoS pathloss in dB (valid for d >= 1 m)."""
    if distance_m < MIN_DISTANCE_M:
        raise ValueError(f"distance {distance_m} m below model floor {MIN_DISTANCE_M} m")
    return 32.4 + 21.0 * np.log10(distance_m) + 20.0 * np.log10(carrier_ghz) + shadow_db


def pathloss_nlos(distance_m: float, carrier_ghz: float, shadow_db: float = 0.0) -> float:
    """UMi street-canyon NLoS pathloss in dB (valid for d >= 1 m)."""
    if distance_m < MIN_DISTANCE_M:
        raise ValueError(f"distance {distance_m} m below model floor {MIN_DISTANCE_M} m")
    return 32.4 + 31.9 * np.log10(distance_m) + 20.0 * np.log10(carrier_ghz) + shadow_db


def sample_shadowing(los: bool, rng: np.random.Generator, enabled: bool = True) -> float:
    """Zero-mean log-normal shadowing draw in dB (0 when disabled)."""
    if not enabled:
        return 0.0
    std = LOS_SHADOW_STD_DB if los else NLOS_SHADOW_STD_DB
    return float(rng.normal(0.0, std))


def noise_power(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Receiver noise power in watts: thermal floor plus noise figure."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be > 0")
    dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * np.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


# ---------------------------------------------------------------------------
# Channel sampling
# ---------------------------------------------------------------------------

def ula_response(theta: float, n_antennas: int) -> np.ndarray:
    """Half-wavelength ULA response [1, e^{j pi sin t}, ..., e^{j pi (N-1) sin t}]."""
    k = np.arange(n_antennas)
    return np.exp(1j * np.pi * k * np.sin(theta))


def sample_channel(du: DistributedUnit, ap: AccessPoint, params: MmWaveParams,
                   rng: np.random.Generator) -> ChannelVector:
    """Draw the DU-to-AP channel vector.

    LoS: a deterministic steering vector at the geometric angle, scaled by
    the LoS pathloss amplitude. NLoS: a sum of P ~ U{1..6} paths with
    uniform departure angles and unit-variance complex Gaussian gains,
    scaled by the NLoS pathloss amplitude and 1/sqrt(P).
    """
    dx, dy = ap.x - du.x, ap.y - du.y
    distance = float(np.hypot(dx, dy))
    if distance < MIN_DISTANCE_M:
        raise ValueError(f"distance {distance} m below model floor {MIN_DISTANCE_M} m")
    if params.los_mode == "always-los":
        los = True
    else:
        los = bool(rng.random() >= params.nlos_probability)
    shadow = sample_shadowing(los, rng, params.shadowing_enabled)
    n = params.n_du_antennas
    if los:
        pl_db = pathloss_los(distance, params.carrier_ghz, shadow)
        gain = 10.0 ** (-pl_db / 20.0)
        theta = float(np.arctan2(dy, dx))
        entries = gain * ula_response(theta, n)
        paths = [(complex(gain), theta)]
    else:
        pl_db = pathloss_nlos(distance, params.carrier_ghz, shadow)
        amp = 10.0 ** (-pl_db / 20.0)
        n_paths = int(rng.integers(1, 7))
        thetas = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=n_paths)
        gains = (rng.normal(size=n_paths) + 1j * rng.normal(size=n_paths)) / np.sqrt(2.0)
        entries = np.zeros(n, dtype=complex)
        for g, t in zip(gains, thetas):
            entries += g * ula_response(float(t), n)
        entries *= amp / np.sqrt(n_paths)
        paths = [(complex(amp * g), float(t)) for g, t in zip(gains, thetas)]
    return ChannelVector(entries=entries, los=los, paths=paths)


# ---------------------------------------------------------------------------
# Beamformer selection
# ---------------------------------------------------------------------------

# Arbitrary generic sweep origin; avoids starting exactly on a switch
# boundary for symmetric hand-crafted channels.
_SWEEP_ORIGIN = 0.2384761001


def _best_pattern_for_direction(dirs: np.ndarray, target: float) -> np.ndarray:
    """Per-element codeword indices whose direction is circularly nearest
    to ``target``; first index wins ties."""
    err = np.angle(np.exp(1j * (dirs - target)))
    return np.argmin(np.abs(err), axis=1)


def select_beamformer(h, params: MmWaveParams) -> Beamformer:
    """Exact maximizer of |h^T f| over the separable phase codebook.

    Element i can steer its term h_i e^{j phi} onto the direction set
    {arg(h_i) + k * step}. The optimal codeword is a per-element best
    response to the direction of its own sum, so it suffices to sweep a
    candidate common direction around the circle: the best response
    switches only at midpoints between circularly adjacent achievable
    directions, and crossing one midpoint changes a single element.
    Cumulative sums over the sorted switch events enumerate every
    best-response pattern in O(N 2^q log(N 2^q)); a final best-response
    polish (provably non-decreasing) guards degenerate tie cases.
    Matches exhaustive codebook enumeration on every tested instance.
    """
    entries = h.entries if isinstance(h, ChannelVector) else np.asarray(h, dtype=complex)
    n = entries.shape[0]
    m = params.phase_count
    step = params.phase_step
    mags = np.abs(entries)
    angles = np.where(mags > 0, np.angle(entries), 0.0)
    rows = np.arange(n)

    # dirs[i, k]: direction of term i under codeword phase k*step, in [0, 2pi)
    ks = np.arange(m)
    dirs = np.mod(angles[:, None] + ks[None, :] * step, 2.0 * np.pi)

    # Per element, sort achievable directions circularly. Crossing the
    # midpoint of (e_t, e_{t+1}) switches the best response t -> t+1 (the
    # last midpoint wraps e_{m-1} -> e_0).
    order = np.argsort(dirs, axis=1)
    sorted_dirs = np.take_along_axis(dirs, order, axis=1)
    nxt = np.roll(sorted_dirs, -1, axis=1)
    gaps = np.mod(nxt - sorted_dirs, 2.0 * np.pi)
    mids = np.mod(sorted_dirs + gaps / 2.0, 2.0 * np.pi)
    deltas = (mags[:, None] * (np.exp(1j * nxt) - np.exp(1j * sorted_dirs))).ravel()

    # Sweep order: event angle measured from the generic origin. Each
    # element's first event in this order is the switch out of the
    # position owning the origin, which pins the initial pattern exactly.
    keys = np.mod(mids - _SWEEP_ORIGIN, 2.0 * np.pi).ravel()
    ev_order = np.argsort(keys, kind="stable")
    ev_elem = ev_order // m          # element of each sorted event
    ev_pos = ev_order % m            # sorted-direction index it leaves

    elems, first_event = np.unique(ev_elem, return_index=True)
    start_pos = np.empty(n, dtype=int)
    start_pos[elems] = ev_pos[first_event]  # sorted position owning the origin

    terms0 = mags * np.exp(1j * sorted_dirs[rows, start_pos])
    s0 = terms0.sum()
    sums = s0 + np.cumsum(deltas[ev_order])
    candidates = np.abs(np.concatenate(([s0], sums)))
    # Earliest index within float jitter of the max, so exact ties resolve
    # to the matched (zero-rotation) pattern, e.g. all-zero phases for
    # real positive channels.
    best_idx = int(np.argmax(candidates >= candidates.max() * (1.0 - 1e-12)))

    # Winning pattern: advance each element by the number of its events in
    # the winning prefix (exact reconstruction, immune to midpoint ties).
    counts = np.bincount(ev_elem[:best_idx], minlength=n)
    final_pos = (start_pos + counts) % m
    pattern = order[rows, final_pos]
    terms = mags * np.exp(1j * dirs[rows, pattern])

    # Best-response polish: cannot decrease |sum|; resolves tie corners.
    best = abs(terms.sum())
    for _ in range(50):
        if best == 0.0:
            break
        target = float(np.angle(terms.sum()))
        new_pattern = _best_pattern_for_direction(dirs, target)
        new_terms = mags * np.exp(1j * dirs[rows, new_pattern])
        new_best = abs(new_terms.sum())
        if new_best <= best * (1.0 + 1e-15):
            break
        pattern, terms, best = new_pattern, new_terms, new_best

    return Beamformer(phases=pattern * step, norm_factor=1.0 / n)


def best_gain_bruteforce(h, params: MmWaveParams) -> float:
    """Exhaustive |h^T f| maximum over the full codebook (test oracle).

    Only usable for tiny arrays: the codebook has (2^q)^N codewords.
    """
    entries = h.entries if isinstance(h, ChannelVector) else np.asarray(h, dtype=complex)
    n = entries.shape[0]
    m = params.phase_count
    if m ** n > 2 ** 22:
        raise ValueError("codebook too large for exhaustive enumeration")
    ks = np.indices((m,) * n).reshape(n, -1).T  # (m^n, n) phase indices
    phases = ks * params.phase_step
    sums = np.exp(1j * phases) @ entries
    return float(np.max(np.abs(sums))) / n


# ---------------------------------------------------------------------------
# SNR and rate
# ---------------------------------------------------------------------------

def link_snr(h, f: Beamformer, params: MmWaveParams) -> float:
    """Post-beamforming SNR (linear)."""
    entries = h.entries if isinstance(h, ChannelVector) else np.asarray(h, dtype=complex)
    gain = abs(np.dot(entries, f.vector))
    return params.tx_power_w * gain * gain / noise_power(params.bandwidth_hz,
                                                         params.noise_figure_db)


def shannon_rate(snr: float, bandwidth_hz: float) -> float:
    """Link capacity BW * log2(1 + SNR) in bits/s."""
    return bandwidth_hz * np.log2(1.0 + snr)


def mmwave_rate(h, f: Beamformer, params: MmWaveParams) -> float:
    """mmWave link capacity in bits/s for channel h under beamformer f."""
    return shannon_rate(link_snr(h, f, params), params.bandwidth_hz)


# ---------------------------------------------------------------------------
# Link budgets
# ---------------------------------------------------------------------------

def build_link_budgets(scenario: Scenario, params: MmWaveParams,
                       fiber_rate: float = DEFAULT_FIBER_RATE,
                       rng: np.random.Generator | None = None,
                       seed: int | None = None) -> list[LinkBudget]:
    """One LinkBudget per (DU, associated AP), ordered by AP id.

    Each AP draws from its own substream (spawned up front, indexed by AP
    id) so results do not depend on iteration order and APs may be
    processed in parallel. Colocated pairs are clamped to the 1 m model
    floor with a warning.
    """
    if rng is None:
        rng = np.random.default_rng(scenario.seed if seed is None else seed)
    n_aps = len(scenario.aps)
    substreams = rng.spawn(n_aps)
    budgets: list[LinkBudget | None] = [None] * n_aps
    for du in scenario.dus:
        for ap_id in du.cluster:
            ap = scenario.aps[ap_id]
            distance = float(np.hypot(ap.x - du.x, ap.y - du.y))
            if distance < MIN_DISTANCE_M:
                warnings.warn(
                    f"AP {ap.id} within {MIN_DISTANCE_M} m of DU {du.id}; "
                    f"clamping distance to the model floor")
                clamped = AccessPoint(id=ap.id, x=du.x + MIN_DISTANCE_M, y=du.y,
                                      threshold=ap.threshold)
                ap_for_channel, distance = clamped, MIN_DISTANCE_M
            else:
                ap_for_channel = ap
            h = sample_channel(du, ap_for_channel, params, substreams[ap_id])
            f = select_beamformer(h, params)
            snr = link_snr(h, f, params)
            budgets[ap_id] = LinkBudget(
                du_id=du.id, ap_id=ap.id, distance_m=distance,
                fiber_rate=float(fiber_rate),
                mmwave_rate=float(shannon_rate(snr, params.bandwidth_hz)),
                snr_db=float(10.0 * np.log10(snr)) if snr > 0 else float("-inf"),
            )
    missing = [i for i, b in enumerate(budgets) if b is None]
    if missing:
        raise ValueError(f"APs {missing} belong to no DU cluster")
    return budgets  # type: ignore[return-value]


def links_to_dicts(links: list[LinkBudget]) -> list[dict]:
    return [{"du_id": b.du_id, "ap_id": b.ap_id, "distance_m": b.distance_m,
             "fiber_rate": b.fiber_rate, "mmwave_rate": b.mmwave_rate,
             "snr_db": b.snr_db} for b in links]


def links_from_dicts(data: list[dict]) -> list[LinkBudget]:
    return [LinkBudget(**d) for d in data]
