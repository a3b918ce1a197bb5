import os

import pytest

from teig.cli import cached_spectrum
from teig.coeff import CoefficientField
from teig.disk_spectrum import DiskMedium, assemble_spectrum

SIGMA14 = DiskMedium(1.0, 1.0, 4.0, 1.0)


@pytest.fixture(scope="session")
def field14():
    return CoefficientField()


@pytest.fixture(scope="session")
def spectrum80():
    return assemble_spectrum(SIGMA14, 80.0, 1.0)


@pytest.fixture(scope="session")
def spectrum_cache(tmp_path_factory):
    return tmp_path_factory.mktemp("spectrum-cache")


@pytest.fixture(scope="session")
def spectrum1e4(spectrum_cache):
    """The t_max = 1e4 spectrum (about a minute); shared through the cache."""
    spec, _ = cached_spectrum(SIGMA14, 1e4, 1.0, os.environ.get("TEIG_TEST_CACHE", spectrum_cache))
    return spec
