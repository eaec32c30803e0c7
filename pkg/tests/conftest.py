import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mlvsbm.generate import sample_affiliation, sample_network  # noqa: E402
from mlvsbm.network import apply_mask  # noqa: E402
from mlvsbm.params import ModelParams  # noqa: E402


def random_params(rng, q_ind, q_org, directed_ind=False, directed_org=False, low=0.05):
    """Interior parameters: no entry closer than ``low`` to 0 or 1."""
    def alpha(q, directed):
        a = rng.uniform(low, 1 - low, (q, q))
        return a if directed else np.triu(a) + np.triu(a, 1).T

    pi = rng.dirichlet(np.full(q_org, 3.0))
    pi = (pi + low) / (pi + low).sum()
    gamma = rng.dirichlet(np.full(q_ind, 3.0), size=q_org).T + low
    gamma /= gamma.sum(axis=0)
    return ModelParams(pi_org=pi, gamma=gamma, alpha_ind=alpha(q_ind, directed_ind),
                       alpha_org=alpha(q_org, directed_org),
                       directed_ind=directed_ind, directed_org=directed_org)


def tiny_instance(seed, n_ind=5, n_org=3, q_ind=2, q_org=2, directed_ind=False,
                  directed_org=False, mask_fraction=0.0):
    rng = np.random.default_rng(seed)
    params = random_params(rng, q_ind, q_org, directed_ind, directed_org)
    aff = sample_affiliation(n_ind, n_org, law="uniform", seed=seed)
    net, truth = sample_network(params, aff, seed=seed + 1)
    if mask_fraction:
        net = apply_mask(net, "ind", fraction=mask_fraction, seed=seed + 2)
    return net, truth, params


def random_tau(rng, n, q):
    t = rng.dirichlet(np.ones(q), size=n)
    t = 1e-9 + (1 - q * 1e-9) * t
    return t


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
