"""
The config module defines the following defaults:

.. data:: DEFAULT_OUTPUT_PATH

    The directory where the CLI writes its artifacts if neither the run configuration nor ``--out`` names one.

    :type: :py:class:`pathlib.Path`
    :value: ``glebench-output`` in the current working directory

.. data:: ASSUMPTION_GRID

    Half width and number of points of the symmetric grid used to check the growth and derivative assumptions
    of a potential.

.. data:: GROWTH_TOLERANCE

    Relative increase of :math:`x^2/(\\Phi(x)+1)` over the outer tenth of the grid that still counts as
    non-increasing.

.. data:: ENVELOPE_MARGIN

    Factor applied to the estimated growth constant ``b`` before it is used as the Gaussian envelope of the
    rejection sampler.

.. data:: MIN_ACCEPTANCE_RATE

    Rejection sampling aborts when its acceptance rate falls below this value.

.. data:: FIT_WINDOW_FACTOR

    Kernel tail fits warn when the window ends after ``FIT_WINDOW_FACTOR / lambda_N``.

.. data:: MSD_WINDOW_FACTOR

    The default late MSD window ends at ``MSD_WINDOW_FACTOR / lambda_N``.

.. data:: MSD_WINDOW_START

    The default late MSD window starts at this time.

.. data:: NOISE_BUFFER_SIZE

    Number of normal variates drawn ahead per block of trajectories.

.. data:: QUADRATURE_TOLERANCE

    Absolute tolerance of the adaptive quadrature used for distributional targets.

.. data:: BLOCK_SIZE

    Number of trajectories advanced together as one vectorized batch.
"""
from pathlib import Path

DEFAULT_OUTPUT_PATH = Path("glebench-output")

ASSUMPTION_GRID = (10.0, 2001)
GROWTH_TOLERANCE = 0.05

ENVELOPE_MARGIN = 1.1
MIN_ACCEPTANCE_RATE = 1e-3

FIT_WINDOW_FACTOR = 0.1
MSD_WINDOW_FACTOR = 0.05
MSD_WINDOW_START = 10.0

NOISE_BUFFER_SIZE = 2 ** 22
QUADRATURE_TOLERANCE = 1e-10
BLOCK_SIZE = 256
