"""Common functions for e2e testing."""
import tempfile
import venv


def create_new_venv() -> str:
    """
    Create a new venv with pip installed.

    Returns:
        Path to created venv.
    """
    venv_dir = tempfile.mkdtemp()
    venv.create(venv_dir, with_pip=True)
    return venv_dir
