import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gesturesync.constraints import default_constraints  # noqa: E402
from gesturesync.emotion_input import read_scenario  # noqa: E402
from gesturesync.joint_model import parse_keyframe_script  # noqa: E402
from gesturesync.motion_library import build_index, load_library  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "src" / "gesturesync" / "data"
FIXTURES = Path(__file__).parent / "fixtures"

HEADPITCH_SCRIPT = (
    'names.append("HeadPitch")\n'
    "times.append([0.3, 0.6, 0.9, 1.2, 1.5062])\n"
    "keys.append([-0.1, -0.3, -0.1, -0.2, -0.1])\n"
)

HEADYAW_SCRIPT = (
    'names.append("HeadYaw")\n'
    "times.append([1.5, 1.9, 2.3, 2.7, 3.1, 3.63])\n"
    "keys.append([0.0, 0.1, -0.1, 0.1, -0.1, 0.0])\n"
)


@pytest.fixture
def headpitch():
    return parse_keyframe_script(HEADPITCH_SCRIPT)


@pytest.fixture(scope="session")
def constraints():
    return default_constraints()


@pytest.fixture(scope="session")
def library():
    return build_index(load_library())


@pytest.fixture(scope="session")
def two_segment():
    return read_scenario(DATA / "scenarios" / "two_segment.json")
