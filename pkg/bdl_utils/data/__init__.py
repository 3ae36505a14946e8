import os

preset_dir = os.path.abspath(os.path.dirname(__file__))


def preset_names():
    return sorted(f[:-4] for f in os.listdir(preset_dir) if f.endswith('.cfg'))


def preset_path(name):
    """
    Returns the path of a packaged preset.

    Parameters
    ----------
    name : str
        The preset name, e.g. ``xsinx-paper``.
    """
    path = os.path.join(preset_dir, f"{name}.cfg")
    if not os.path.isfile(path):
        raise ValueError(f"Unknown preset {name!r}. Available presets: {', '.join(preset_names())}.")
    return path
