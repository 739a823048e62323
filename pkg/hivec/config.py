"""
Configuration loader for hivec.

This module loads and validates the simulation configuration from multiple
sources and returns a single SimConfig object for the rest of the package.

Configuration Sources (in order of precedence):
    1. Environment variables (highest priority) - for sweeps and CI
    2. JSON config file - one object per section
    3. Dataclass defaults - the study's parameter list

Example JSON config (configs/desk.json, abridged):
    {
        "network": {"num_vehicles": 10, "num_luavs": 2, "num_slots": 50},
        "task": {"size_min": 1e6, "size_max": 6e6},
        "reward": {"omega_completion": 0.6, "omega_delay": 0.2,
                   "omega_energy": 0.2},
        "rng_seed": 7
    }

Equivalent environment variables:
    HIVEC_NETWORK_NUM_VEHICLES=10
    HIVEC_NETWORK_NUM_LUAVS=2
    HIVEC_TASK_SIZE_MIN=1e6
    HIVEC_RNG_SEED=7

Unknown sections and unknown keys are errors. Quantities given in dB are kept
in dB in the config and converted to linear units exactly once, by
validate_config().

See Also:
    - configs/default.json: Full parameter list with the study's values
    - configs/desk.json: Desk-scale preset used by the trend suite
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from hivec.domain import db_to_linear, dbm_to_watts

logger = logging.getLogger("hivec.config")

ENV_PREFIX = "HIVEC"


# =============================================================================
# Configuration Data Classes
# =============================================================================


@dataclass
class NetworkConfig:
    """
    Node counts, geometry, time slotting and mobility.

    Attributes:
        num_vehicles: I, vehicles generating tasks.
        num_rsus: R, roadside units.
        num_luavs: L, low-altitude UAVs (may be 0).
        area_side: Side of the square area in metres.
        horizon: T, episode duration in seconds.
        num_slots: N, slots per episode; slot length is T / N.
        grid_roads: Roads per axis of the Manhattan grid (boundary roads included).
        vehicle_speed_min: v_min in m/s.
        vehicle_speed_max: v_max in m/s.
        speed_resample_prob: Per-slot probability a vehicle redraws its speed.
        luav_altitude: z_l in metres.
        huav_altitude: z_H in metres.
        luav_vmax: v_l^max in m/s.
        rsu_coverage: RSU reachability radius in metres.
        luav_coverage: LUAV reachability radius in metres.
        huav_coverage: HUAV reachability radius; None covers the whole area.
    """

    num_vehicles: int = 20
    num_rsus: int = 4
    num_luavs: int = 4
    area_side: float = 2000.0
    horizon: float = 50.0
    num_slots: int = 50
    grid_roads: int = 4
    vehicle_speed_min: float = 0.0
    vehicle_speed_max: float = 20.0
    speed_resample_prob: float = 0.1
    luav_altitude: float = 20.0
    huav_altitude: float = 100.0
    luav_vmax: float = 20.0
    rsu_coverage: float = 600.0
    luav_coverage: float = 400.0
    huav_coverage: Optional[float] = None

    @property
    def slot_length(self) -> float:
        """Length of one slot in seconds (T / N)."""
        return self.horizon / self.num_slots


@dataclass
class ChannelConfig:
    """
    Radio parameters.

    Attributes:
        beta0_db: Channel gain at 1 m in dB.
        alpha_nlos: Path-loss exponent of ground-to-ground NLoS links.
        alpha_los: Path-loss exponent of air links.
        shadow_mu_db: Mean of the log-normal shadowing in dB.
        shadow_sigma_db: Standard deviation of the shadowing in dB.
        noise_power_dbm: Noise power in dBm.
        vehicle_tx_power: P_i in watts.
        huav_tx_power: P_H in watts.
        bandwidth_rsu: Total vehicle-to-RSU bandwidth per RSU in Hz.
        bandwidth_luav: Total vehicle-to-LUAV bandwidth per LUAV in Hz.
        bandwidth_huav_access: Total vehicle-to-HUAV bandwidth in Hz.
        bandwidth_huav_backhaul: Total HUAV-to-RSU/BS bandwidth in Hz.
        min_distance: Distances are clamped to this before gain evaluation.
        beta0: Linear beta0; filled in by validate_config().
        noise_power: Noise power in watts; filled in by validate_config().
    """

    beta0_db: float = -50.0
    alpha_nlos: float = 3.5
    alpha_los: float = 2.0
    shadow_mu_db: float = 0.0
    shadow_sigma_db: float = 4.0
    noise_power_dbm: float = -110.0
    vehicle_tx_power: float = 0.1
    huav_tx_power: float = 0.5
    bandwidth_rsu: float = 20e6
    bandwidth_luav: float = 20e6
    bandwidth_huav_access: float = 100e6
    bandwidth_huav_backhaul: float = 100e6
    min_distance: float = 1.0
    beta0: Optional[float] = None
    noise_power: Optional[float] = None


@dataclass
class ComputeConfig:
    """
    CPU frequencies (cycles/s) and switched capacitances per node class.
    """

    vehicle_cpu: float = 0.5e9
    rsu_cpu: float = 8e9
    bs_cpu: float = 10e9
    luav_cpu: float = 5e9
    vehicle_kappa: float = 1e-28
    rsu_kappa: float = 1e-28
    bs_kappa: float = 1e-28
    luav_kappa: float = 1e-28


@dataclass
class RotorParams:
    """
    Rotary-wing propulsion parameters of one UAV class.

    Attributes:
        profile_power: P_o, blade profile power in hover (W).
        induced_power: P_i, induced power in hover (W).
        tip_speed: U_tip, rotor blade tip speed (m/s).
        fuselage_drag: d0, fuselage drag ratio.
        air_density: rho (kg/m^3).
        solidity: s, rotor solidity (blade area ratio).
        disc_area: A, rotor disc area (m^2).
        induced_velocity: nu0, mean rotor induced velocity in hover (m/s).
    """

    profile_power: float = 79.86
    induced_power: float = 88.63
    tip_speed: float = 120.0
    fuselage_drag: float = 0.6
    air_density: float = 1.225
    solidity: float = 0.05
    disc_area: float = 0.503
    induced_velocity: float = 4.03


def _default_huav_rotor() -> RotorParams:
    return RotorParams(
        profile_power=158.76,
        induced_power=250.68,
        tip_speed=120.0,
        fuselage_drag=0.6,
        air_density=1.225,
        solidity=0.05,
        disc_area=0.79,
        induced_velocity=5.0,
    )


@dataclass
class UavConfig:
    """
    Propulsion models and energy budgets of the UAVs.

    Attributes:
        luav_rotor: Rotor parameters shared by all LUAVs.
        huav_rotor: Rotor parameters of the HUAV.
        luav_energy_budget: E_l^max per LUAV per episode (J).
        huav_energy_budget: E_H^max per episode (J).
    """

    luav_rotor: RotorParams = field(default_factory=RotorParams)
    huav_rotor: RotorParams = field(default_factory=_default_huav_rotor)
    luav_energy_budget: float = 5e4
    huav_energy_budget: float = 1e5


@dataclass
class TaskConfig:
    """
    Task generator ranges.

    Attributes:
        size_min: D_lo in bits.
        size_max: D_hi in bits.
        cycles_per_bit: C = cycles_per_bit * D.
        deadline_min: T_lo in seconds.
        deadline_max: T_hi in seconds.
        priority_levels: Ordered levels K is drawn from (larger = higher).
    """

    size_min: float = 100e6
    size_max: float = 600e6
    cycles_per_bit: float = 100.0
    deadline_min: float = 0.1
    deadline_max: float = 1.0
    priority_levels: list[int] = field(default_factory=lambda: [1, 2, 3])


@dataclass
class RewardConfig:
    """
    Reward weights and normalisers.

    Attributes:
        omega_completion: w1, weight of the completion rate.
        omega_delay: w2, weight of the delay penalty.
        omega_energy: w3, weight of the energy penalty.
        delay_scale: beta_T; None derives 1 / (I * T_hi).
        energy_scale: beta_E; None derives 1 / (I * 1 J + UAV hover J per slot).
    """

    omega_completion: float = 0.6
    omega_delay: float = 0.2
    omega_energy: float = 0.2
    delay_scale: Optional[float] = None
    energy_scale: Optional[float] = None


@dataclass
class SchedulerConfig:
    """
    Priority scheduling layer.

    Attributes:
        alpha_s: Distance weight of the node score (metres).
        beta_s: Remaining-resource weight of the node score.
        eligibility_fraction: Nodes need strictly more than this share of CPU left.
        priority: Sort by priority and deadline; False schedules in FIFO order.
    """

    alpha_s: float = 0.5
    beta_s: float = 0.5
    eligibility_fraction: float = 0.30
    priority: bool = True


@dataclass
class AgentConfig:
    """
    Learning hyperparameters shared by the SAC and DQN agents.

    Attributes:
        hidden_sizes: Hidden layer widths of every network.
        gamma: Discount factor.
        tau: Soft target update rate.
        learning_rate: Adam step size for every network.
        batch_size: Mini-batch size.
        buffer_capacity: Replay buffer capacity.
        update_freq: Update every this many slots.
        warmup_steps: Uniform random actions before learning starts.
        init_temperature: Initial entropy temperature alpha.
        target_entropy: None uses -dim(A).
        epsilon_start: DQN exploration at step 0.
        epsilon_end: DQN exploration floor.
        epsilon_decay_steps: Linear decay length of DQN exploration.
        dqn_target_sync: Hard target copy period of the DQN, in updates.
    """

    hidden_sizes: list[int] = field(default_factory=lambda: [128, 128])
    gamma: float = 0.99
    tau: float = 0.005
    learning_rate: float = 3e-4
    batch_size: int = 256
    buffer_capacity: int = 100_000
    update_freq: int = 1
    warmup_steps: int = 256
    init_temperature: float = 0.2
    target_entropy: Optional[float] = None
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 5000
    dqn_target_sync: int = 200


@dataclass
class SimConfig:
    """
    Main configuration container aggregating all settings.

    Example:
        >>> cfg = load_config(Path("configs/desk.json"))
        >>> cfg.network.num_vehicles
        10
        >>> cfg.channel.noise_power
        1e-14
    """

    network: NetworkConfig = field(default_factory=NetworkConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    compute: ComputeConfig = field(default_factory=ComputeConfig)
    uav: UavConfig = field(default_factory=UavConfig)
    task: TaskConfig = field(default_factory=TaskConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    rng_seed: int = 0

    @property
    def slot_length(self) -> float:
        return self.network.slot_length


_SECTIONS: dict[str, type] = {
    "network": NetworkConfig,
    "channel": ChannelConfig,
    "compute": ComputeConfig,
    "uav": UavConfig,
    "task": TaskConfig,
    "reward": RewardConfig,
    "scheduler": SchedulerConfig,
    "agent": AgentConfig,
}

# Derived fields are never read from files or the environment.
_DERIVED_FIELDS = {("channel", "beta0"), ("channel", "noise_power")}


# =============================================================================
# Exceptions
# =============================================================================


class ConfigurationError(Exception):
    """
    Raised when configuration is invalid or cannot be loaded.

    The message names the offending field as ``section.field``.

    Example:
        >>> raise ConfigurationError(
        ...     "reward.omega_*: weights must sum to 1, got 0.9"
        ... )
    """

    pass


# =============================================================================
# Environment Variable Helpers
# =============================================================================


def _get_env(key: str, default: Optional[str] = None) -> Optional[str]:
    """Get an environment variable value, or ``default`` if it is not set."""
    return os.environ.get(key, default)


def _get_env_bool(key: str, default: Optional[bool] = None) -> Optional[bool]:
    """
    Get an environment variable as a boolean.

    Recognizes "true", "1", "yes" as True (case-insensitive).
    """
    value = os.environ.get(key)
    if value is None:
        return default
    return value.lower() in ("true", "1", "yes")


def _get_env_int(key: str, default: Optional[int] = None) -> Optional[int]:
    """
    Get an environment variable as an integer.

    Raises:
        ConfigurationError: If the value exists but is not an integer.
    """
    value = os.environ.get(key)
    if value is None:
        return default
    try:
        return int(value)
    except ValueError:
        raise ConfigurationError(
            f"Environment variable {key} must be an integer, got: {value}"
        )


def _get_env_float(key: str, default: Optional[float] = None) -> Optional[float]:
    """
    Get an environment variable as a float (scientific notation allowed).

    Raises:
        ConfigurationError: If the value exists but is not a number.
    """
    value = os.environ.get(key)
    if value is None:
        return default
    try:
        return float(value)
    except ValueError:
        raise ConfigurationError(
            f"Environment variable {key} must be a number, got: {value}"
        )


def _get_env_list(key: str, default: Optional[list[str]] = None) -> Optional[list[str]]:
    """
    Get an environment variable as a comma-separated list.

    Example:
        >>> os.environ["HIVEC_TASK_PRIORITY_LEVELS"] = "1, 2, 3"
        >>> _get_env_list("HIVEC_TASK_PRIORITY_LEVELS")
        ['1', '2', '3']
    """
    value = os.environ.get(key)
    if value is None:
        return default
    return [item.strip() for item in value.split(",") if item.strip()]


def _env_key(*parts: str) -> str:
    return "_".join((ENV_PREFIX,) + tuple(p.upper() for p in parts))


# =============================================================================
# Configuration Building Functions
# =============================================================================


def _load_json_config(config_path: Path) -> dict[str, Any]:
    """
    Load configuration from a JSON file.

    Returns an empty dict if the file doesn't exist, allowing
    environment-only configuration.

    Raises:
        ConfigurationError: If the file contains invalid JSON or is not an object.
    """
    if not config_path.exists():
        return {}

    try:
        with open(config_path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in config file: {e}")

    if not isinstance(data, dict):
        raise ConfigurationError("Config file must contain a JSON object")
    return data


def _coerce_env(key: str, annotation: str, current: Any) -> Any:
    """Read ``key`` from the environment using the type of the field."""
    if "list" in annotation:
        items = _get_env_list(key)
        if items is None:
            return current
        try:
            return [int(item) for item in items]
        except ValueError:
            raise ConfigurationError(
                f"Environment variable {key} must be a list of integers"
            )
    if "bool" in annotation:
        return _get_env_bool(key, current)
    if "int" in annotation:
        return _get_env_int(key, current)
    if "float" in annotation:
        return _get_env_float(key, current)
    return _get_env(key, current)


def _build_rotor_params(rotor_json: Any, name: str) -> RotorParams:
    """Build RotorParams for ``uav.<name>``, rejecting unknown keys."""
    if not isinstance(rotor_json, dict):
        raise ConfigurationError(f"uav.{name} must be an object")
    known = {f.name for f in fields(RotorParams)}
    for key in rotor_json:
        if key not in known:
            raise ConfigurationError(f"Unknown config key: uav.{name}.{key}")
    defaults = RotorParams() if name == "luav_rotor" else _default_huav_rotor()
    values = {**asdict(defaults), **rotor_json}
    return RotorParams(**{k: float(v) for k, v in values.items()})


def _build_section(name: str, section_json: Any) -> Any:
    """
    Build one configuration section from JSON and environment variables.

    Environment variables (``HIVEC_<SECTION>_<FIELD>``) take precedence over
    JSON values, which take precedence over dataclass defaults.

    Raises:
        ConfigurationError: On unknown keys or malformed values.
    """
    cls = _SECTIONS[name]
    if not isinstance(section_json, dict):
        raise ConfigurationError(f"Config section '{name}' must be an object")

    known = {f.name: f for f in fields(cls)}
    for key in section_json:
        if key not in known or (name, key) in _DERIVED_FIELDS:
            raise ConfigurationError(f"Unknown config key: {name}.{key}")

    values: dict[str, Any] = {}
    for f in fields(cls):
        if (name, f.name) in _DERIVED_FIELDS:
            continue
        if f.name in ("luav_rotor", "huav_rotor"):
            if f.name in section_json:
                values[f.name] = _build_rotor_params(section_json[f.name], f.name)
            continue
        current = section_json.get(f.name)
        annotation = str(f.type)
        override = _coerce_env(_env_key(name, f.name), annotation, current)
        if override is not None:
            values[f.name] = override

    try:
        return cls(**values)
    except TypeError as e:
        raise ConfigurationError(f"Invalid values in section '{name}': {e}") from e


def build_config(json_config: dict[str, Any]) -> SimConfig:
    """
    Build an unvalidated SimConfig from a parsed JSON document.

    Raises:
        ConfigurationError: On unknown sections or keys.
    """
    for key in json_config:
        if key not in _SECTIONS and key != "rng_seed":
            raise ConfigurationError(f"Unknown config section: {key}")

    sections = {
        name: _build_section(name, json_config.get(name, {})) for name in _SECTIONS
    }
    rng_seed = _get_env_int(_env_key("rng", "seed"), json_config.get("rng_seed", 0))
    return SimConfig(rng_seed=int(rng_seed), **sections)


# =============================================================================
# Validation
# =============================================================================


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigurationError(message)


def _validate_rotor(rotor: RotorParams, name: str) -> None:
    for f in fields(RotorParams):
        value = getattr(rotor, f.name)
        _require(value > 0, f"uav.{name}.{f.name} must be > 0, got {value}")


def hover_power(rotor: RotorParams) -> float:
    """Propulsion power at zero speed: P_o + P_i."""
    return rotor.profile_power + rotor.induced_power


def validate_config(cfg: SimConfig) -> SimConfig:
    """
    Check every invariant and convert dB quantities to linear units.

    Returns a new SimConfig equal to ``cfg`` with the derived linear fields
    (channel.beta0, channel.noise_power) and derived normalisers filled in.
    Validating an already validated config returns an equal config.

    Raises:
        ConfigurationError: Naming the first violated invariant by field.
    """
    net, ch, comp, task = cfg.network, cfg.channel, cfg.compute, cfg.task
    rw, sch, ag = cfg.reward, cfg.scheduler, cfg.agent

    # Weights
    weights = (rw.omega_completion, rw.omega_delay, rw.omega_energy)
    for wname, w in zip(("omega_completion", "omega_delay", "omega_energy"), weights):
        _require(0.0 <= w <= 1.0, f"reward.{wname} must be in [0, 1], got {w}")
    _require(
        math.isclose(sum(weights), 1.0, rel_tol=0.0, abs_tol=1e-9),
        f"reward.omega_*: weights must sum to 1, got {sum(weights)}",
    )

    # Counts
    _require(net.num_vehicles >= 1, "network.num_vehicles must be >= 1")
    _require(net.num_rsus >= 1, "network.num_rsus must be >= 1")
    _require(net.num_luavs >= 0, "network.num_luavs must be >= 0")
    _require(net.num_slots >= 1, "network.num_slots must be >= 1")
    _require(net.grid_roads >= 2, "network.grid_roads must be >= 2")

    # Physical quantities
    for section, obj, names in (
        ("network", net, ("area_side", "horizon", "luav_altitude", "huav_altitude",
                          "luav_vmax", "rsu_coverage", "luav_coverage")),
        ("channel", ch, ("alpha_nlos", "alpha_los", "vehicle_tx_power",
                         "huav_tx_power", "bandwidth_rsu", "bandwidth_luav",
                         "bandwidth_huav_access", "bandwidth_huav_backhaul",
                         "min_distance")),
        ("compute", comp, tuple(f.name for f in fields(ComputeConfig))),
        ("uav", cfg.uav, ("luav_energy_budget", "huav_energy_budget")),
        ("task", task, ("size_min", "size_max", "cycles_per_bit",
                        "deadline_min", "deadline_max")),
    ):
        for fname in names:
            value = getattr(obj, fname)
            _require(value > 0, f"{section}.{fname} must be > 0, got {value}")

    if net.huav_coverage is not None:
        _require(net.huav_coverage > 0, "network.huav_coverage must be > 0")
    _require(net.vehicle_speed_min >= 0, "network.vehicle_speed_min must be >= 0")
    _require(
        net.vehicle_speed_min <= net.vehicle_speed_max,
        "network.vehicle_speed_min must be <= network.vehicle_speed_max",
    )
    _require(
        0.0 <= net.speed_resample_prob <= 1.0,
        "network.speed_resample_prob must be in [0, 1]",
    )
    _require(ch.shadow_sigma_db >= 0, "channel.shadow_sigma_db must be >= 0")
    _validate_rotor(cfg.uav.luav_rotor, "luav_rotor")
    _validate_rotor(cfg.uav.huav_rotor, "huav_rotor")

    # Ranges
    _require(task.size_min <= task.size_max, "task.size_min must be <= task.size_max")
    _require(
        task.deadline_min <= task.deadline_max,
        "task.deadline_min must be <= task.deadline_max",
    )
    _require(len(task.priority_levels) >= 1, "task.priority_levels must not be empty")

    _require(
        0.0 <= sch.eligibility_fraction < 1.0,
        f"scheduler.eligibility_fraction must be in [0, 1), got "
        f"{sch.eligibility_fraction}",
    )
    _require(sch.alpha_s >= 0 and sch.beta_s >= 0, "scheduler weights must be >= 0")

    _require(0.0 < ag.gamma < 1.0, f"agent.gamma must be in (0, 1), got {ag.gamma}")
    _require(0.0 < ag.tau <= 1.0, f"agent.tau must be in (0, 1], got {ag.tau}")
    _require(ag.init_temperature > 0, "agent.init_temperature must be > 0")
    _require(ag.batch_size >= 2, "agent.batch_size must be >= 2")
    _require(ag.buffer_capacity >= ag.batch_size,
             "agent.buffer_capacity must be >= agent.batch_size")
    _require(ag.update_freq >= 1, "agent.update_freq must be >= 1")
    _require(len(ag.hidden_sizes) >= 1, "agent.hidden_sizes must not be empty")

    if rw.delay_scale is not None:
        _require(rw.delay_scale > 0, "reward.delay_scale must be > 0")
    if rw.energy_scale is not None:
        _require(rw.energy_scale > 0, "reward.energy_scale must be > 0")

    # One-time unit conversion and derived normalisers
    channel = replace(
        ch,
        beta0=db_to_linear(ch.beta0_db),
        noise_power=dbm_to_watts(ch.noise_power_dbm),
    )
    delay_scale = rw.delay_scale
    if delay_scale is None:
        delay_scale = 1.0 / (net.num_vehicles * task.deadline_max)
    energy_scale = rw.energy_scale
    if energy_scale is None:
        hover_j = (
            net.num_luavs * hover_power(cfg.uav.luav_rotor)
            + hover_power(cfg.uav.huav_rotor)
        ) * net.slot_length
        energy_scale = 1.0 / (net.num_vehicles * 1.0 + hover_j)
    reward = replace(rw, delay_scale=delay_scale, energy_scale=energy_scale)

    return replace(cfg, channel=channel, reward=reward)


def _config_to_json(cfg: SimConfig) -> dict[str, Any]:
    data = asdict(cfg)
    for section, key in _DERIVED_FIELDS:
        data[section].pop(key, None)
    return data


def config_hash(cfg: SimConfig) -> str:
    """
    Stable SHA-256 digest of the configuration's canonical JSON form.

    The config is validated first, so a derived normaliser and an explicit
    one of the same value hash alike. The linear channel fields are excluded;
    they are a pure function of the dB fields.

    Raises:
        ConfigurationError: If ``cfg`` is invalid.
    """
    data = _config_to_json(validate_config(cfg))
    canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def dump_config(cfg: SimConfig, path: Path) -> None:
    """Write ``cfg`` as a JSON config file that load_config() accepts."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_config_to_json(cfg), f, indent=2, sort_keys=True)
        f.write("\n")


# =============================================================================
# Public API
# =============================================================================


def load_config(config_path: Optional[Path] = None) -> SimConfig:
    """
    Load and validate configuration from a JSON file and environment variables.

    Args:
        config_path: Path to the JSON file. Defaults to configs/default.json
            in the current working directory. The file is optional: missing
            files leave the defaults in place.

    Returns:
        Validated SimConfig.

    Raises:
        ConfigurationError: If configuration is malformed or violates an invariant.

    Example:
        >>> cfg = load_config(Path("configs/desk.json"))
        >>> cfg.network.slot_length
        1.0
    """
    if config_path is None:
        config_path = Path("configs/default.json")

    json_config = _load_json_config(config_path)
    cfg = validate_config(build_config(json_config))
    logger.debug(f"Loaded config from {config_path} (hash {config_hash(cfg)[:12]})")
    return cfg
