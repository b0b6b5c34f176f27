"""teamsim: a discrete-event simulator for human-team dynamics.

Autonomous agents — scripted or driven by a language-model gateway — move,
act, and converse inside procedurally generated 2D environments under a
time-ordered event scheduler, with structured run logs, post-run metrics,
agent interviews, an HTTP service, and a headless experiment harness.
"""

from .agent import (
    AgentProfile,
    AgentState,
    BigFive,
    Command,
    MemoryStore,
    ObservationPacket,
    create_agent,
    parse_command,
)
from .conversation import Conversation, advance_turn, next_speaker, open_conversation, should_terminate
from .engine import (
    Controls,
    Metrics,
    SimulationConfig,
    SimulationState,
    collect_metrics,
    init_simulation,
    restore,
    run,
    snapshot,
)
from .environment import (
    Entity,
    EntitySpec,
    Environment,
    TraversabilityMatrix,
    adjacent_rooms,
    generate_environment,
    region_routes,
    room_of,
    shortest_path,
    to_matrix,
)
from .gateway import Gateway, GatewayConfig, HttpBackend, MockBackend, render
from .interview import QUESTIONNAIRE, ask, run_ego_survey, start_interview
from .policy import GatewayPolicy, RandomPolicy, ScriptedPolicy, make_policy
from .scenarios import rescue_scenario
from .scheduler import Event, EventQueue
from .store import (
    RunLog,
    RunStore,
    ScenarioDocument,
    export_results,
    load_scenario,
    load_snapshot,
    save_scenario,
    save_snapshot,
    validate_record,
)

__version__ = "0.1.0"
