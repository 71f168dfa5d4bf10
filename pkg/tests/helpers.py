from swarm_agents.config import TrainConfig
from swarm_agents.models import Action, AgentSpec, Axis, Command, Vec2

TINY_TRAIN = TrainConfig(
    rollout_len=32,
    total_steps=64,
    minibatch_size=16,
    epochs=2,
    hidden_sizes=(16, 16),
)


def agent(idx: int, x: float, y: float, radius: float = 0.5) -> AgentSpec:
    return AgentSpec(id=idx, radius=radius, start=Vec2(x=x, y=y), goal=Vec2(x=x, y=y))


def stack_then_push_plan(n_agents: int = 3):
    """
    Agent 0 climbs to sit exactly one diameter above agent 1, then agent 1
    is commanded +y. Only a world where agent 1 physically moves produces a
    collision, so the twins diverge on the last tick.
    """
    commands = [Command.single(n_agents, 0, Action.PLUS_Y)] * 4
    commands += [Command.single(n_agents, 0, Action.PLUS_X)] * 10
    commands += [Command.single(n_agents, 1, Axis.Y.plus())]
    return commands
