"""Built-in scenario builders.

The urban search-and-rescue mission is the reference workload: a team starts
in the hospital room of a multi-room facility and must find 35 scattered
victims and carry them back, one at a time, before the step cap.
"""

from __future__ import annotations

from .store import ScenarioDocument

COMPLEXITY_SIZES = {"low": 30, "medium": 40, "high": 50}


def rescue_scenario(
    agents: int = 3,
    complexity: str = "low",
    seed: int = 7,
    victims: int = 35,
    max_timesteps: int = 2000,
    roles: bool = False,
    critical_victims: int = 0,
    rubble: int = 0,
) -> ScenarioDocument:
    """The victim-rescue mission at a given team size and map difficulty.

    ``roles=True`` staffs the team with a Transporter/Medic/Engineer mix;
    otherwise every agent is a Transporter.  ``critical_victims`` of the
    victim count start in critical condition (a medic must stabilize them
    first) and ``rubble`` piles block random doors until an engineer clears
    them.
    """
    size = COMPLEXITY_SIZES[complexity]
    role_cycle = (["Transporter", "Medic", "Engineer"] if roles
                  else ["Transporter"])
    agent_specs = []
    for index in range(agents):
        role = role_cycle[index % len(role_cycle)]
        agent_specs.append({
            "name": f"{role}-{index + 1}",
            "role": role,
        })

    stable = victims - critical_victims
    entities = []
    if stable > 0:
        entities.append({
            "name": "Victim", "kind": "interactive", "count": stable,
            "avoid_regions": ["hospital"],
            "attributes": {"condition": "stable"},
        })
    if critical_victims > 0:
        entities.append({
            "name": "Victim", "kind": "interactive", "count": critical_victims,
            "avoid_regions": ["hospital"],
            "attributes": {"condition": "critical"},
        })
    if rubble > 0:
        entities.append({
            "name": "Rubble", "kind": "interactive", "count": rubble,
            "on_door": True,
            "attributes": {"blocks_door": "true"},
        })
    entities.append({
        "name": "Hospital Sign", "kind": "non_interactive", "count": 1,
        "region": "hospital",
    })

    return ScenarioDocument(
        title=f"Rescue mission ({complexity} map, {agents} agents)",
        description=(
            f"A search-and-rescue team must locate and rescue {victims} victims "
            f"scattered through a multi-room facility and bring them back to the "
            f"Hospital room. Each member can carry one victim at a time."),
        goals=[{"verb": "rescue", "object": "victims", "count": victims}],
        environment={
            "width": size,
            "height": size,
            "complexity": complexity,
            "seed": seed,
            "regions": ["hospital"],
        },
        agents=agent_specs,
        entities=entities,
        success=[{
            "filter": {"name_prefix": "victim"},
            "location": {"region_tag": "hospital"},
            "op": ">=",
            "threshold": victims,
        }],
        max_timesteps=max_timesteps,
    )
