import json

import pytest


def write_scenario(path, materials, *, snr_db=None, n_packets=60, seed=5,
                   rssi_mode="exact", multipath_scale=1.0, transient_s=0.0,
                   coeff_seed=42, d_m=0.002):
    """Write a scenario config usable by the simulate command."""
    config = {
        "d_m": d_m,
        "n_packets": n_packets,
        "packet_interval_s": 0.05,
        "snr_db": snr_db,
        "seed": seed,
        "rssi_mode": rssi_mode,
        "multipath_scale": multipath_scale,
        "transient_s": transient_s,
        "coefficients": {"seed": coeff_seed, "base_scale": 0.05},
        "materials": materials,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=2)
    return path


@pytest.fixture
def scenario_writer():
    return write_scenario
