import numpy as np
import pytest
from scipy.optimize import brentq

from sqzlab.cavity import airy_intracavity
from sqzlab.config import load_config


def scanned_finesse(r_a, r_b, loss=0.0):
    """FSR / FWHM of the numerically scanned Airy resonance (phase units)."""
    peak = airy_intracavity(0.0, 1.0, r_a, r_b, loss)
    phases = np.linspace(0.0, np.pi, 200001)
    values = airy_intracavity(phases, 1.0, r_a, r_b, loss)
    i = int(np.argmax(values < 0.5 * peak))
    half = brentq(lambda p: airy_intracavity(p, 1.0, r_a, r_b, loss) - 0.5 * peak, phases[i - 1], phases[i], xtol=1e-15)
    return 2.0 * np.pi / (2.0 * half)


def kogelnik_waist(length, roc_a, roc_b, index, wavelength):
    """Closed-form two-mirror waist (Kogelnik & Li)."""
    g1, g2 = 1 - length / roc_a, 1 - length / roc_b
    w0_sq = (wavelength / index) * length / np.pi * np.sqrt(g1 * g2 * (1 - g1 * g2)) / abs(g1 + g2 - 2 * g1 * g2)
    return np.sqrt(w0_sq)


@pytest.fixture(scope="session")
def ppktp_config():
    return load_config("builtin:ppktp")
