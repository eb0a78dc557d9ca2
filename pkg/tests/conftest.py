import numpy as np
import pytest

import lob_irl as L


@pytest.fixture(scope="session")
def config():
    return L.MdpConfig()


@pytest.fixture(scope="session")
def exp_config():
    return L.MdpConfig(reward=L.RewardSpec(kind="exponential"))


@pytest.fixture(scope="session")
def transition(config):
    return L.build_transition_model(config)


@pytest.fixture(scope="session")
def exp_transition(exp_config):
    return L.build_transition_model(exp_config)


@pytest.fixture(scope="session")
def true_reward(config):
    return L.reward_vector(config)


@pytest.fixture(scope="session")
def expert_solution(config, transition, true_reward):
    return L.soft_value_iteration(transition, true_reward, config)


@pytest.fixture(scope="session")
def features(config):
    return L.feature_map(config)


@pytest.fixture(scope="session")
def demos_200(config, transition, expert_solution):
    return L.generate_demos(config, transition, expert_solution, 200, L.RngStream(3))


@pytest.fixture(scope="session")
def demos_1000(config, transition, expert_solution):
    return L.generate_demos(config, transition, expert_solution, 1000, L.RngStream(12))
