import numpy as np
import pytest

from ddpg.agent import DdpgAgent, DdpgConfig, actor_act, actor_update, critic_update, update_targets
from ddpg.checkpoint import load_checkpoint, save_checkpoint
from ddpg.mlp import ACTIVATIONS, Mlp, flat_gradients, mlp_backward, mlp_forward, soft_update
from ddpg.optim import AdamOptimizer
from ddpg.replay import Batch, ReplayBuffer, Transition
from ddpg.reward import compute_reward
from utils.errors import CheckpointFormatError
from utils.rng import make_rng

STATE_DIM = 9
PAYLOAD_DIM = 4
HALTING_SLICE = (5, 9)


def _config(**overrides) -> DdpgConfig:
    values = dict(actor_hidden=[16, 16], critic_hidden=[16, 16], halting_hidden=[8], batch_size=8,
                  warmup_transitions=0)
    values.update(overrides)
    return DdpgConfig(**values)


def _agent(seed=0, **overrides) -> DdpgAgent:
    return DdpgAgent.build(_config(**overrides), STATE_DIM, PAYLOAD_DIM, HALTING_SLICE, 1.0, make_rng(seed))


def _transition(rng, reward=0.0, done=False, error=float('nan')) -> Transition:
    return Transition(s=rng.standard_normal(STATE_DIM), a=rng.uniform(-1, 1, 1 + PAYLOAD_DIM), r=reward,
                      s_next=rng.standard_normal(STATE_DIM), done=done, error=error)


# networks

def _numeric_gradient(loss, array, step=1e-6):
    numeric = np.zeros_like(array)
    for index in np.ndindex(array.shape):
        saved = array[index]
        array[index] = saved + step
        up = loss()
        array[index] = saved - step
        down = loss()
        array[index] = saved
        numeric[index] = (up - down) / (2 * step)
    return numeric


def _random_architecture(rng, offset):
    depth = int(rng.integers(1, 4))
    sizes = [int(s) for s in rng.integers(2, 8, size=depth + 1)]
    activations = [ACTIVATIONS[(offset + i) % len(ACTIVATIONS)] for i in range(depth)]
    return sizes, activations


@pytest.mark.parametrize('seed', range(20))
def test_backprop_matches_finite_differences(seed):
    rng = make_rng(100 + seed)
    sizes, activations = _random_architecture(rng, seed)
    net = Mlp.build(sizes, activations, rng, final_scale=None)

    for _ in range(3):
        x = rng.standard_normal((4, sizes[0]))
        upstream = rng.standard_normal((4, sizes[-1]))

        def loss():
            out, _ = net.forward(x)
            return float(np.sum(out * upstream))

        _, cache = net.forward(x)
        dx, grads = net.backward(cache, upstream)
        for param, grad in zip(net.parameters(), flat_gradients(grads)):
            np.testing.assert_allclose(grad, _numeric_gradient(loss, param), rtol=1e-5, atol=1e-7)
        np.testing.assert_allclose(dx, _numeric_gradient(loss, x), rtol=1e-5, atol=1e-7)


def test_every_activation_is_covered_by_the_random_architectures():
    seen = set()
    for seed in range(20):
        seen.update(_random_architecture(make_rng(100 + seed), seed)[1])
    assert seen == set(ACTIVATIONS)


def test_critic_gradient_with_respect_to_the_action():
    agent = _agent(seed=4)
    agent.critic = Mlp.build(agent.critic.layer_sizes, agent.critic.activations, make_rng(5), final_scale=None)
    rng = make_rng(6)
    states = rng.standard_normal((5, STATE_DIM))
    actions = rng.uniform(-1, 1, (5, 1 + PAYLOAD_DIM))

    def q_sum():
        q, _ = agent.critic.forward(np.concatenate([states, actions], axis=1))
        return float(np.sum(q))

    q, cache = agent.critic.forward(np.concatenate([states, actions], axis=1))
    d_input, _ = agent.critic.backward(cache, np.ones_like(q))
    np.testing.assert_allclose(d_input[:, STATE_DIM:], _numeric_gradient(q_sum, actions), rtol=1e-5, atol=1e-7)


def test_single_inputs_keep_their_shape():
    net = Mlp.build([3, 4, 2], ['relu', 'tanh'], make_rng(0))
    out, cache = net.forward(np.ones(3))
    assert out.shape == (2,)
    dx, _ = net.backward(cache, np.ones(2))
    assert dx.shape == (3,)
    same, cache = mlp_forward(net, np.ones(3))
    np.testing.assert_array_equal(same, out)
    assert mlp_backward(net, cache, np.ones(2))[0].shape == (3,)


def test_mlp_rejects_bad_layouts():
    with pytest.raises(ValueError):
        Mlp.build([3, 4, 2], ['relu'], make_rng(0))
    with pytest.raises(ValueError):
        Mlp.build([3, 2], ['softmax'], make_rng(0))


def test_soft_update_blends_parameters():
    main = Mlp.build([2, 3], ['identity'], make_rng(0), final_scale=None)
    target = Mlp.build([2, 3], ['identity'], make_rng(1), final_scale=None)
    expected = [0.25 * m + 0.75 * t for m, t in zip(main.parameters(), target.parameters())]
    soft_update(main, target, 0.25)
    for got, want in zip(target.parameters(), expected):
        np.testing.assert_allclose(got, want)
    soft_update(main, target, 1.0)
    for got, want in zip(target.parameters(), main.parameters()):
        np.testing.assert_array_equal(got, want)


@pytest.mark.parametrize('tau', [0.1, 0.5, 0.9])
def test_soft_update_contracts_toward_the_main_network(tau):
    main = Mlp.build([3, 5, 2], ['tanh', 'identity'], make_rng(2), final_scale=None)
    target = Mlp.build([3, 5, 2], ['tanh', 'identity'], make_rng(3), final_scale=None)
    before = [np.linalg.norm(t - m) for t, m in zip(target.parameters(), main.parameters())]
    soft_update(main, target, tau)
    after = [np.linalg.norm(t - m) for t, m in zip(target.parameters(), main.parameters())]
    np.testing.assert_allclose(after, (1.0 - tau) * np.asarray(before), rtol=1e-12)


def test_adam_minimises_a_quadratic():
    param = np.array([3.0, -2.0])
    optimizer = AdamOptimizer([param], lr=0.05)
    for _ in range(2000):
        optimizer.step([2.0 * param])
    np.testing.assert_allclose(param, 0.0, atol=1e-2)


# replay

def test_replay_buffer_is_fifo():
    rng = make_rng(0)
    buffer = ReplayBuffer(3, rng)
    for reward in range(5):
        buffer.push(_transition(rng, reward=float(reward)))
    assert len(buffer) == 3
    assert sorted(tr.r for tr in buffer.entries) == [2.0, 3.0, 4.0]


def test_replay_batches_stack_fields():
    rng = make_rng(1)
    buffer = ReplayBuffer(10, rng)
    for _ in range(2):
        buffer.push(_transition(rng, done=True, error=0.5))
    batch = buffer.sample(5)
    assert len(batch) == 5
    assert batch.states.shape == (5, STATE_DIM)
    assert batch.actions.shape == (5, 1 + PAYLOAD_DIM)
    np.testing.assert_array_equal(batch.dones, 1.0)
    np.testing.assert_array_equal(batch.errors, 0.5)
    with pytest.raises(ValueError):
        ReplayBuffer(5, rng).sample(1)
    with pytest.raises(ValueError):
        ReplayBuffer(0, rng)


def test_replay_sampling_is_reproducible_under_a_seed():
    transitions = [_transition(make_rng(50 + i), reward=float(i)) for i in range(20)]
    first, second = ReplayBuffer(20, make_rng(5)), ReplayBuffer(20, make_rng(5))
    for transition in transitions:
        first.push(transition)
        second.push(transition)
    for _ in range(3):
        a, b = first.sample(6), second.sample(6)
        np.testing.assert_array_equal(a.rewards, b.rewards)
        np.testing.assert_array_equal(a.states, b.states)


# agent

def test_action_layout():
    agent = _agent()
    action = actor_act(agent, make_rng(4).standard_normal(STATE_DIM), explore=False)
    assert action.shape == (1 + PAYLOAD_DIM,)
    assert 0.0 < action[0] < 1.0
    assert np.all(np.abs(action[1:]) <= 1.0)


def test_exploration_noise_and_schedule():
    agent = _agent(noise_start=0.5, noise_end=0.1, noise_decay_episodes=10)
    state = make_rng(4).standard_normal(STATE_DIM)
    greedy = actor_act(agent, state, explore=False)
    assert agent.set_noise_for_episode(0) == pytest.approx(0.5)
    noisy = actor_act(agent, state, explore=True, rng=make_rng(5))
    assert noisy[0] == greedy[0]
    assert not np.allclose(noisy[1:], greedy[1:])
    assert agent.set_noise_for_episode(5) == pytest.approx(0.3)
    assert agent.set_noise_for_episode(50) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        actor_act(agent, state, explore=True)
    with pytest.raises(ValueError):
        actor_act(agent, np.zeros(STATE_DIM + 1), explore=False)


def test_critic_fits_a_single_terminal_reward():
    agent = _agent(critic_lr=1e-2)
    rng = make_rng(6)
    transition = _transition(rng, reward=0.5, done=True)
    batch = Batch.from_transitions([transition] * 8)
    for _ in range(5000):
        loss = critic_update(agent, batch)
    assert loss < 1e-3
    q, _ = agent.critic.forward(np.concatenate([transition.s, transition.a]))
    assert q[0] == pytest.approx(0.5, abs=0.05)


def test_actor_update_moves_only_the_actor_and_halting_nets():
    agent = _agent(actor_lr=1e-2)
    rng = make_rng(7)
    batch = Batch.from_transitions([_transition(rng, error=0.1) for _ in range(8)])
    actor_before = [p.copy() for p in agent.actor.parameters()]
    critic_before = [p.copy() for p in agent.critic.parameters()]
    halting_before = [p.copy() for p in agent.halting.net.parameters()]

    objective = actor_update(agent, batch)
    assert np.isfinite(objective)
    assert any(not np.array_equal(a, b) for a, b in zip(actor_before, agent.actor.parameters()))
    assert any(not np.array_equal(a, b) for a, b in zip(halting_before, agent.halting.net.parameters()))
    for before, after in zip(critic_before, agent.critic.parameters()):
        np.testing.assert_array_equal(before, after)


class _BowlCritic:
    """Q(s, a) = -||a_payload - centre||^2, independent of s and of the halting score"""

    def __init__(self, state_dim, centre):
        self.state_dim = state_dim
        self.centre = centre

    def forward(self, inputs):
        payload = inputs[:, self.state_dim + 1:]
        return -np.sum((payload - self.centre) ** 2, axis=1, keepdims=True), inputs

    def backward(self, inputs, dq):
        d_input = np.zeros_like(inputs)
        d_input[:, self.state_dim + 1:] = -2.0 * (inputs[:, self.state_dim + 1:] - self.centre) * dq
        return d_input, {}


def test_actor_update_climbs_a_quadratic_bowl():
    agent = _agent(actor_lr=1e-2, halting_weight=0.0)
    centre = np.array([0.4, -0.3, 0.1, -0.5])
    agent.critic = _BowlCritic(STATE_DIM, centre)
    rng = make_rng(10)
    batch = Batch.from_transitions([_transition(rng) for _ in range(8)])

    start = actor_update(agent, batch)
    for _ in range(500):
        objective = actor_update(agent, batch)
    assert objective > start
    payload, _ = agent.actor.forward(batch.states)
    np.testing.assert_allclose(payload, np.broadcast_to(centre, payload.shape), atol=0.05)


def test_zero_learning_rates_leave_every_network_unchanged():
    agent = _agent(actor_lr=0.0, critic_lr=0.0, halting_lr=0.0)
    before = {name: [p.copy() for p in net.parameters()]
              for name, net in (('actor', agent.actor), ('critic', agent.critic), ('halting', agent.halting.net))}
    rng = make_rng(11)
    batch = Batch.from_transitions([_transition(rng, reward=1.0, error=0.2) for _ in range(8)])
    for _ in range(5):
        critic_update(agent, batch)
        actor_update(agent, batch)
    for name, net in (('actor', agent.actor), ('critic', agent.critic), ('halting', agent.halting.net)):
        for old, new in zip(before[name], net.parameters()):
            np.testing.assert_array_equal(old, new)


def test_hard_target_updates():
    agent = _agent(hard_update_period=2, soft_tau=0.01)
    batch = Batch.from_transitions([_transition(make_rng(8), reward=1.0) for _ in range(4)])
    critic_update(agent, batch)
    update_targets(agent)
    assert not all(np.array_equal(a, b) for a, b in zip(agent.critic.parameters(), agent.target_critic.parameters()))
    update_targets(agent)
    for main, target in zip(agent.critic.parameters(), agent.target_critic.parameters()):
        np.testing.assert_array_equal(main, target)


def test_reward_arithmetic():
    assert compute_reward(0.5, 0.2, 0.01, 2.0, 0.1) == pytest.approx(0.5 - 0.2 - 0.01 - 0.2)
    assert compute_reward(0.1, 0.1, 0.0, 5.0, 0.0) == 0.0


# checkpoints

def test_checkpoint_restores_every_network_bitwise(tmp_path):
    agent = _agent(seed=3)
    rng = make_rng(9)
    batch = Batch.from_transitions([_transition(rng, reward=0.3, error=0.2) for _ in range(8)])
    critic_update(agent, batch)
    actor_update(agent, batch)
    update_targets(agent)
    agent.set_noise_for_episode(17)

    path = save_checkpoint(agent, tmp_path / 'agent.ckpt', metadata={'episode': 17})
    loaded, metadata = load_checkpoint(path)
    assert metadata == {'episode': 17}
    assert loaded.config == agent.config
    assert loaded.halting_slice == agent.halting_slice
    assert loaded.noise_sigma == agent.noise_sigma
    for name in ('actor', 'critic', 'target_actor', 'target_critic'):
        for got, want in zip(getattr(loaded, name).parameters(), getattr(agent, name).parameters()):
            np.testing.assert_array_equal(got, want)
    for got, want in zip(loaded.halting.net.parameters(), agent.halting.net.parameters()):
        np.testing.assert_array_equal(got, want)

    state = rng.standard_normal(STATE_DIM)
    np.testing.assert_array_equal(actor_act(loaded, state, explore=False), actor_act(agent, state, explore=False))


def test_checkpoint_rejects_corruption(tmp_path):
    path = save_checkpoint(_agent(), tmp_path / 'agent.ckpt')
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path)
