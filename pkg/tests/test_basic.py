"""
Basic tests for the sintail package layout.
"""

import os

import pytest

project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def test_import_package():
    import sintail

    assert sintail.__version__
    for name in sintail.__all__:
        assert hasattr(sintail, name), name


def test_main_function_exists():
    from sintail.__main__ import main

    assert callable(main)


@pytest.mark.parametrize("name", ["requirements.txt", "README.md", "setup.py", "pytest.ini"])
def test_project_file_exists(name):
    path = os.path.join(project_root, name)
    assert os.path.exists(path), f"{name} not found at {path}"


if __name__ == "__main__":
    pytest.main([__file__])
