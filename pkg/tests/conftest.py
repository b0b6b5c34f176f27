import pytest

from teamsim.engine import SimulationConfig, init_simulation
from teamsim.scenarios import rescue_scenario
from teamsim.store import RunLog


def make_rescue_state(agents=3, complexity="low", seed=7, victims=35,
                      max_timesteps=2000, ablations=None, policy="scripted",
                      log=None, **scenario_kwargs):
    scenario = rescue_scenario(agents=agents, complexity=complexity, seed=seed,
                               victims=victims, max_timesteps=max_timesteps,
                               **scenario_kwargs)
    config = SimulationConfig(seed=seed, max_timesteps=max_timesteps,
                              ablations=ablations or {}, policy_mode=policy)
    return init_simulation(scenario, config, log=log)


@pytest.fixture
def memory_log():
    return RunLog("test-run", path=None)
