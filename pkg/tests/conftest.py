"""Shared fixtures: traced built-in scenarios (computed once per session)
and a small fast scenario for unit tests."""

import time

import pytest

from owcplan.allocation import build_problem, solve_bnb
from owcplan.channel import TraceParams, compute_channel_matrix
from owcplan.scene import (MeshSpec, ReceiverBranch, ReceiverStation,
                           RoomSpec, ScenarioConfig, TransmitterUnit,
                           WavelengthSpec, builtin_scenario)


def make_tiny_config(name="tiny", wall_rho=0.8, floor_rho=0.3, fov=80.0,
                     gain=1.0, threshold_db=-6.0, n_users=1):
    """A 2 m cube with one downward transmitter and upward receivers.

    Coarse meshes keep unit tests fast (~hundreds of elements).
    """
    positions = [(1.0, 1.0, 0.5), (0.6, 1.2, 0.5), (1.4, 0.8, 0.5)][:n_users]
    branches = (ReceiverBranch(45.0, 90.0, fov, 1e-5, gain),
                ReceiverBranch(225.0, 60.0, fov, 1e-5, gain))
    return ScenarioConfig(
        name=name,
        room=RoomSpec((2.0, 2.0, 2.0), wall_rho, wall_rho, floor_rho),
        mesh=MeshSpec(0.04, 0.16),
        wavelengths=(WavelengthSpec("red", 0.8, 0.4),
                     WavelengthSpec("blue", 0.3, 0.2)),
        transmitters=(
            TransmitterUnit((1.0, 1.0, 2.0), (0, 0, -1), 60.0, 1,
                            {"red": 0.8, "blue": 0.3}),
            TransmitterUnit((0.5, 0.5, 2.0), (0, 0, -1), 60.0, 1,
                            {"red": 0.8, "blue": 0.3}),
        ),
        receivers=tuple(ReceiverStation(i + 1, pos, branches)
                        for i, pos in enumerate(positions)),
        blockers=(),
        noise_current_density_pa_per_rthz=4.47,
        receiver_bandwidth_hz=5e9,
        sinr_threshold_db=threshold_db,
    )


@pytest.fixture(scope="session")
def tiny_matrix():
    config = make_tiny_config()
    return config, compute_channel_matrix(config, TraceParams())


def _solve_builtin(name):
    config = builtin_scenario(name)
    t0 = time.perf_counter()
    matrix = compute_channel_matrix(config, TraceParams())
    problem = build_problem(config, matrix)
    result = solve_bnb(problem)
    elapsed = time.perf_counter() - t0
    return {"config": config, "matrix": matrix, "problem": problem,
            "result": result, "elapsed_s": elapsed}


@pytest.fixture(scope="session")
def office_bundle():
    return _solve_builtin("office")


@pytest.fixture(scope="session")
def cabin_bundle():
    return _solve_builtin("cabin")


@pytest.fixture(scope="session")
def datacentre_bundle():
    return _solve_builtin("datacentre")
