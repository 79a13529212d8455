from __future__ import annotations

import numpy as np
import pytest

from mbrrm.scenario import Scenario, Transponder


def make_scenario(gain, demands, noise=1.0, k=1, bc=1.0, p_total=10.0, centers=None,
                  transponders=()):
    gain = np.asarray(gain, dtype=float)
    L = gain.shape[0]
    if centers is None:
        centers = np.column_stack([np.arange(L, dtype=float), np.zeros(L)])
    return Scenario(
        beam_ids=tuple(f"b{l}" for l in range(L)),
        centers=centers,
        demands=np.broadcast_to(np.asarray(demands, dtype=float), (L,)).copy(),
        users_per_beam=np.ones(L, dtype=int),
        gain=gain,
        noise=np.broadcast_to(np.asarray(noise, dtype=float), (L,)).copy(),
        b_total=k * bc,
        k_carriers=k,
        p_total=p_total,
        transponders=tuple(transponders),
    )


def small_instance(seed: int, L: int | None = None, K: int | None = None):
    """Random line-layout instance of oracle size; same family as the acceptance gate."""
    from mbrrm.prng import Xoshiro256
    from mbrrm.scenario import ScenarioParams, generate_scenario

    rng = Xoshiro256(1000 + seed)
    L = L or rng.integers(2, 3)
    K = K or rng.integers(2, 3)
    spacing = rng.uniform(0.4, 1.5)
    return generate_scenario(ScenarioParams(
        num_beams=L, seed=seed, layout="line", spacing=spacing, k_carriers=K,
        carrier_width_hz=1e6, p_total_w=10.0, noise_w=1.0, rain_margin_db=0.0,
        demand_min_bps=1e6, demand_max_bps=6e6))


@pytest.fixture
def two_beam():
    return make_scenario([[1.0, 0.5], [0.5, 1.0]], [1.0, 1.0], k=2)


__all__ = ["make_scenario", "small_instance", "Transponder"]


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n][1])
