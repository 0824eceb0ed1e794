"""
Configuration module for the TxOP sharing simulator

This module contains configuration constants and helper functions.
"""

import os
from typing import Dict, Any, List, Optional

from dotenv import load_dotenv

load_dotenv()

# Default configuration values
DEFAULT_CONFIG = {
    "output_dir": "results",
    "workers": 4,
    "seeds": "1,2,3,4,5",
    "sim_duration_s": 10.0,
    "warmup_s": 0.5,
    "txop_limit_ms": 5.0,
    "trigger_period_ms": 5.0,
    "trigger_phase_ms": 2.5,
    "retry_limit": 7,
    "livelock_cap": 1_000_000,
    "d_max_m": 20.0,
    "d_step_m": 0.5,
    "rho_step": 0.05,
    "series_tolerance": 1e-12,
    "log_level": "INFO",
}

# Environment variable carrying each setting
ENV_VARS = {
    "output_dir": "SIM_OUTPUT_DIR",
    "workers": "SIM_WORKERS",
    "seeds": "SIM_SEEDS",
    "sim_duration_s": "SIM_DURATION_S",
    "warmup_s": "SIM_WARMUP_S",
    "txop_limit_ms": "SIM_TXOP_LIMIT_MS",
    "trigger_period_ms": "SIM_TRIGGER_PERIOD_MS",
    "trigger_phase_ms": "SIM_TRIGGER_PHASE_MS",
    "retry_limit": "SIM_RETRY_LIMIT",
    "livelock_cap": "SIM_LIVELOCK_CAP",
    "d_max_m": "SIM_D_MAX_M",
    "d_step_m": "SIM_D_STEP_M",
    "rho_step": "SIM_RHO_STEP",
    "series_tolerance": "SIM_SERIES_TOLERANCE",
    "log_level": "LOG_LEVEL",
}


def get_setting(name: str) -> Any:
    """Return a setting, environment first, typed like its default"""
    if name not in DEFAULT_CONFIG:
        raise ValueError(f"Unknown setting: {name}")

    default = DEFAULT_CONFIG[name]
    raw = os.getenv(ENV_VARS[name])
    if raw is None or raw == "":
        return default

    if isinstance(default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_seeds(raw: Optional[str] = None) -> List[int]:
    """Parse a seed list such as "1,2,3" or "1-5" """
    text = raw if raw is not None else get_setting("seeds")
    seeds: List[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError(f"Empty seed list: {text!r}")
    return seeds


def get_batch_plan(
    protocols: List[str], seeds: List[int], workers: Optional[int] = None
) -> Dict[str, Any]:
    """Calculate the batch run plan for the scenario matrix"""
    workers = workers or int(get_setting("workers"))

    # Loads x OBSS access categories per protocol
    scenarios_per_protocol = 3 * 2
    total_scenarios = scenarios_per_protocol * len(protocols)
    total_runs = total_scenarios * len(seeds)

    # Waves of concurrent runs on the worker pool
    waves = (total_runs + workers - 1) // workers if workers > 0 else 0

    return {
        "protocols": list(protocols),
        "seeds": list(seeds),
        "scenarios_per_protocol": scenarios_per_protocol,
        "total_scenarios": total_scenarios,
        "total_runs": total_runs,
        "workers": workers,
        "worker_waves": waves,
    }


def validate_environment() -> Dict[str, Any]:
    """Validate environment configuration"""
    validation_result = {"valid": True, "problems": [], "using_defaults": []}

    # Check every setting parses, note the ones left at their default
    for name, env_var in ENV_VARS.items():
        if not os.getenv(env_var):
            validation_result["using_defaults"].append(
                f"{env_var}={DEFAULT_CONFIG[name]}"
            )
            continue
        try:
            get_setting(name)
        except ValueError as e:
            validation_result["problems"].append(f"{env_var}: {e}")
            validation_result["valid"] = False

    try:
        parse_seeds()
    except ValueError as e:
        validation_result["problems"].append(f"SIM_SEEDS: {e}")
        validation_result["valid"] = False

    # Check the output directory can be created and written
    output_dir = str(get_setting("output_dir"))
    try:
        os.makedirs(output_dir, exist_ok=True)
        if not os.access(output_dir, os.W_OK):
            raise OSError("directory is not writable")
    except OSError as e:
        validation_result["problems"].append(f"SIM_OUTPUT_DIR={output_dir}: {e}")
        validation_result["valid"] = False

    return validation_result
