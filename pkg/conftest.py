# test_setup.py is the interactive environment check, run directly
collect_ignore = ["test_setup.py"]


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-second simulations, deselect with -m 'not slow'")
