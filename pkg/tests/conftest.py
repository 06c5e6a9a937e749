import pytest

from fracperc import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # compile the jitted kernels once so timing-sensitive tests measure
    # the computation, not the JIT
    kernels.warmup()
