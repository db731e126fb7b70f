import math

import numpy as np
import pytest

from opasqueeze.quadrature import CavityConstants, SqueezerParams
from opasqueeze.synth import TraceSpec, synth_pump_sweep

REFERENCE_CAVITY = CavityConstants(0.10, 0.001, 0.0798)
TRUTH = SqueezerParams(0.965, 0.221, math.radians(0.66), REFERENCE_CAVITY)
SWEEP_POWERS = np.linspace(6e-3, 180e-3, 12)


@pytest.fixture
def reference_params():
    return TRUTH


@pytest.fixture
def noiseless_sweep():
    return synth_pump_sweep(TRUTH, SWEEP_POWERS, 5e6, TraceSpec(relative_scatter=0.0))


def noisy_sweep(seed):
    return synth_pump_sweep(TRUTH, SWEEP_POWERS, 5e6, TraceSpec(seed=seed))
