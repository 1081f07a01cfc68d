import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def room_obs():
    """Observation of the robot at the start of the empty-room scenario."""
    from hybridnav.core_types import Command, Observation
    from hybridnav.world import empty_scenario, sense, spawn

    spec = empty_scenario()
    st = spawn(spec)
    scan = sense(st)
    return Observation((scan,) * 5, (st.robot,) * 5, Command(0.0, 0.0), spec.goal, 0.0), st


def run_pipeline(root: Path, seed: int = 0, id_episodes: int | None = None,
                 ood_episodes: int | None = None, epochs: int | None = None) -> dict:
    """gen -> label -> train (gate, bc on D^N, bc on all) -> eval through the CLI."""
    from hybridnav.cli import main

    def call(*argv):
        code = main([str(a) for a in argv])
        assert code == 0, f"{argv[0]} exited with {code}"

    gen = ["gen", "--out", root / "data", "--seed", seed]
    if id_episodes is not None:
        gen += ["--id-episodes", id_episodes, "--ood-episodes", ood_episodes]
    call(*gen)
    manifest = root / "data" / "manifest.json"
    call("label", "--manifest", manifest, "--social-layer")
    labeled = root / "data" / "labeled"
    extra = ["--epochs", epochs] if epochs is not None else []
    call("train", "gate", "--labeled", labeled, "--out", root / "models", *extra)
    call("train", "bc", "--labeled", labeled, "--out", root / "models", *extra)
    call("train", "bc", "--subset", "all", "--labeled", labeled, "--out", root / "models", *extra)
    call("eval", "--manifest", manifest, "--models", root / "models", "--out", root / "eval",
         "--planners", "classical,bc,hybrid,classical_social,hybrid_oracle")
    return {"root": root, "manifest": manifest, "labeled": labeled, "models": root / "models",
            "eval": root / "eval"}


@pytest.fixture(scope="session")
def small_pipeline(tmp_path_factory):
    """Reduced-scale end-to-end run shared by the CLI and playback tests."""
    return run_pipeline(tmp_path_factory.mktemp("small"), seed=0, id_episodes=10,
                        ood_episodes=4, epochs=5)


@pytest.fixture(scope="session")
def full_pipeline(tmp_path_factory):
    """Default-scale run (master seed 0); several minutes on one core."""
    import time

    t0 = time.perf_counter()
    out = run_pipeline(tmp_path_factory.mktemp("full"))
    out["seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def trained_models(full_pipeline):
    from hybridnav.hybrid import HybridModels
    from hybridnav.learned import Mlp

    m = full_pipeline["models"]
    return HybridModels(Mlp.loads((m / "gate.json").read_text()),
                        Mlp.loads((m / "bc_n.json").read_text()))
