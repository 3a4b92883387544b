import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import chainforge as cf

SQRT185 = math.sqrt(185.0)

# 8-site engineered chain with one encodable qubit over 3-site end regions
ENGINEERED8_COUPLINGS = (
    10 * math.sqrt(5.0),
    12 * math.sqrt(14.0),
    37 * math.sqrt(6.0),
    5 * SQRT185,
    37 * math.sqrt(6.0),
    12 * math.sqrt(14.0),
    10 * math.sqrt(5.0),
)
ENGINEERED8_T0 = math.pi / (4.0 * SQRT185)

DESIGN_DELTA = math.pi / 94.5
DESIGN_M = 42
DESIGN_CENTRAL = 40


@pytest.fixture(scope="session")
def engineered8() -> cf.ChainSpec:
    return cf.ChainSpec(ENGINEERED8_COUPLINGS, np.zeros(8))


def build_design(extension_size: int, delta: float = DESIGN_DELTA) -> cf.ExtensionSolution:
    central = cf.uniform_chain(DESIGN_CENTRAL)
    targets = [(v, s) for v, s in cf.pst_target_spectrum(extension_size, delta) if v > 0]
    problem = cf.ExtensionProblem(
        central=central,
        extension_size=extension_size,
        junction=None,
        targets=targets,
        field_free=True,
    )
    return cf.solve_extension(problem)


@pytest.fixture(scope="session")
def design124() -> cf.ExtensionSolution:
    return build_design(DESIGN_M)
