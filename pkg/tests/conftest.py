import pytest

from prescience.config import demo_config_path, load_config


@pytest.fixture(scope="session")
def demo():
    return load_config(demo_config_path(), env={})


@pytest.fixture(scope="session")
def q_policy(demo):
    """Greedy-Q policy per demo env, trained once per session."""
    from prescience import cli

    cache = {}

    def get(kind):
        if kind not in cache:
            spec = demo.env(kind)
            pspec = next(p for p in spec.policies if p.kind == "greedy_q")
            cache[kind] = cli.build_policy(spec, pspec)
        return cache[kind]

    return get
