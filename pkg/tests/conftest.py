"""Shared trial data.

RESPIRE 14-day values are the unrounded inputs of the original R session.
The other pairs are reconstructed from published tables: estimate as
printed, standard error as the 95% CI width divided by 2 * 1.96.
"""
import pytest

from combinedp import TrialResult

Z975 = 1.959963984540054


def from_table(estimate, width):
    return TrialResult(estimate, width / (2 * 1.96))


RESPIRE_14 = (TrialResult(-0.4942, 0.1833), TrialResult(-0.1847, 0.1738))
RESPIRE_28 = (from_table(-0.02, 0.74), from_table(-0.60, 0.73))
ORBIT_PRIMARY = (from_table(-0.01, 0.66), from_table(-0.33, 0.60))
ORBIT_SECONDARY = (from_table(-0.16, 0.54), from_table(-0.46, 0.54))
RESPIRE_ALL = RESPIRE_14 + RESPIRE_28


@pytest.fixture
def respire14():
    return RESPIRE_14
